# %% [markdown]
# Dirichlet problem on the unit ball by continuation in sigma.
# With zero boundary data the solution is the radial soliton shifted down.

# %%
import numpy as np

from minksoliton.elliptic import Ball, boundary_barrier_check, continuity_solve
from minksoliton.radial import RadialParams, sigma_profile

dom = Ball(np.zeros(3), 1.0)
prof = sigma_profile(RadialParams(3, 2.0, 1.0), r_max=2.0)
shift = prof(np.array([1.0]), "u")[0]

for h in (1 / 7, 1 / 14):
    field = continuity_solve(dom, 3, 2.0, 0.0, h=h)
    X = field.disc.points[field.disc.unknowns]
    err = np.max(np.abs(field.unknown_values - (prof(np.linalg.norm(X, axis=1), "u") - shift)))
    print(f"h = {h:.4f}  nodes {field.disc.unknowns.size:6d}  sup error {err:.2e}")

# %% monitors recorded along the continuation path
for rep in field.history:
    print(f"sigma={rep.sigma:.3f}  max nu interior {rep.max_nu_interior:.4f}"
          f"  ring {rep.max_nu_boundary:.4f}  min H2 {rep.min_H2:.4f}")

# %% the boundary normal derivative is trapped by the radial slope
print(boundary_barrier_check(field).to_json())
