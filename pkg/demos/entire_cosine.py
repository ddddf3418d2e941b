# %% [markdown]
# Entire soliton with prescribed angular data f = 0.1 cos(theta).
# Barriers are envelopes of shifted radial solitons; the solution is the
# limit of Dirichlet problems on growing balls with the upper barrier as data.

# %%
import numpy as np

from minksoliton.entire import BoundaryValueF, barrier_functions, exhaustion_solve

f = BoundaryValueF.cosine_mode(0.1)
pair = barrier_functions(f)
print("quadratic Lipschitz constant M =", pair.M)

# %% the barriers pinch together along every ray
for w in ([0, 0, 1], [1, 0, 0], [0, 0, -1]):
    d = pair.asymptotic_defect(w, [10.0, 100.0, 1000.0], "upper")
    print(w, np.round(d, 5))

# %% a short exhaustion (coarse grid, small radii) to keep the demo quick
res = exhaustion_solve(f, radii=(2.0, 4.0, 8.0), K_radius=1.0, h=0.5)
print("cauchy gaps on K:", res.cauchy_gaps)
# small excesses, if any, sit on boundary-adjacent nodes and shrink as h is refined
for s in res.sandwich:
    print(s)
