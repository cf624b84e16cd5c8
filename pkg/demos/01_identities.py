# %% [markdown]
# Identities of the Thurston flow
#
# beta(X) = 1, (d beta)^2 = 0 and d i_X mu = 0 on random quotient points,
# followed by lattice descent for a few elements.

# %%
import numpy as np

from closedorbits import SplitMix64, thurston
from closedorbits.forms import eval_form, exterior_derivative, interior_product, wedge
from closedorbits.thurston import LatticeElement, verify_descent

X, beta, mu = thurston.field_X(), thurston.form_beta(), thurston.form_mu()
P = thurston.fundamental_domain_points(10_000, SplitMix64(0))

# %%
print("max |beta(X) - 1|    ", np.abs(eval_form(beta, P, X(P)) - 1).max())
db = exterior_derivative(beta)
print("max |(d beta)^2|     ", np.abs(wedge(db, db)(P[:1000])).max())
print("max |d i_X mu|       ", np.abs(exterior_derivative(interior_product(X, mu))(P[:1000])).max())

# %% i_X d beta vanishes on u = 0 but is not closed there
p0 = np.array([0.3, 0.2, 0.1, 0.0, 0.0])
print("i_X d beta at u = 0:   ", interior_product(X, db)(p0))
print("d i_X d beta at u = 0: ", exterior_derivative(interior_product(X, db))(p0))

# %%
for g in [LatticeElement(1, 0, 0), LatticeElement(0, 1, 0), LatticeElement(2, -1, 1)]:
    r = verify_descent(g, 200)
    print(g, "max residual", r.max_residual, "passed", r.passed)
