# %% [markdown]
# Averaging a metric over the Hopf action on S^3
#
# A perturbed metric is averaged over the circle action, rescaled so that the
# Hopf field has unit length, and its dual form checked for the geodesible
# pair.  The Euler metric built from that form has a curl parallel to X.

# %%
from closedorbits import SplitMix64, hopf
from closedorbits.wadsley import (average_metric, beltrami_residual, build_euler_metric, curl, dual_one_form,
                                  geodesibility_check, killing_residual, normalize_metric)

X, rho, vol, frame = hopf.hopf_field(), hopf.hopf_action(), hopf.s3_volume(), hopf.s3_frame
P = hopf.s3_points(100, SplitMix64(0))
g1 = hopf.perturbed_metric(0.1)

# %% Killing residual against the number of quadrature nodes
print("unaveraged", killing_residual(X, g1, P, frame=frame))
for N in (4, 8, 16, 32, 64):
    g2 = average_metric(g1, rho, N, allow_coarse=True)
    print(f"N = {N:3d}", killing_residual(X, g2, P, frame=frame))

# %%
g3 = normalize_metric(average_metric(g1, rho, 64), X)
alpha = dual_one_form(g3, X)
print(geodesibility_check(alpha, X, P, frame=frame))

# %%
ge = build_euler_metric(alpha, X, vol, g3, frame=frame)
w = curl(X, ge, vol, frame=frame)
print("Beltrami residual", beltrami_residual(X, w, ge, P))
