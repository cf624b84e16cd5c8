# %% [markdown]
# Periods and lengths of closed orbits
#
# Periods follow pi / sin^2 u away from the bad set u = 0; on u = 0 the field
# is -d/dz and closes after time 1 through the lattice.

# %%
import numpy as np

from closedorbits import thurston
from closedorbits.flow import orbit_scan

u_values = [np.pi / 2, 1.0, 0.5, 0.25, 0.1, 0.05, 0.0]
table = orbit_scan(u_values, allow_bad_set=True)

# %%
print(f"{'u':>8} {'period':>12} {'oracle':>12} {'length':>12}")
for row in table.rows:
    oracle = np.pi / np.sin(row.u) ** 2 if row.u > 0 else 1.0
    print(f"{row.u:8.4f} {row.period:12.6f} {oracle:12.6f} {row.length:12.6f}")

# %% lengths blow up toward the bad set
lengths = {r.u: r.length for r in table.rows}
print("l(0.05) / l(0.5) =", lengths[0.05] / lengths[0.5])
print("speed at u = 0.05:", np.sqrt(thurston.speed_squared(0.05)))
