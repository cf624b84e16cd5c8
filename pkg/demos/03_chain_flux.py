# %% [markdown]
# Flux of d beta through a cylinder of closed leaves
#
# The cylinder is swept by the leaves u = s; Stokes turns the flux into the
# difference of the boundary periods, and the flux divided by the number of
# turns n = ceil(T / 2 pi) of the inner leaf stays close to 2 pi.

# %%
import numpy as np

from closedorbits import thurston
from closedorbits.chains import build_cylinder, flux_report, refine, thurston_family

X, beta = thurston.field_X(), thurston.form_beta()

# %% convergence of the Stokes residual
for grid in [(21, 40), (41, 80), (81, 160)]:
    mesh = build_cylinder(X, thurston_family(0.3, 0.5), *grid)
    rep = flux_report(beta, mesh)
    print(grid, "flux", rep.flux, "residual", rep.stokes_residual)

# %% refinement ratio on one mesh
mesh = build_cylinder(X, thurston_family(0.3, 0.5), 41, 80)
rep = flux_report(beta, mesh, refine(mesh, X))
print("ratio after halving both steps:", rep.refinement_ratio)

# %% normalized flux near the bad set
mesh = build_cylinder(X, thurston_family(0.5, 0.05), 100, 200)
rep = flux_report(beta, mesh)
print("n =", rep.n, " (1/n) flux =", rep.normalized_flux, " 2 pi =", 2 * np.pi)
