# %% [markdown]
# Radial downward soliton: profile, initial slope and the logarithmic correction.

# %%
import numpy as np

from minksoliton.radial import (HModel, RadialParams, asymptotic_fit, initial_slope,
                                radial_profile, sigma_profile)

params = RadialParams(n=3, C=2.0)
sol = radial_profile(params, r_max=1000.0)
print("limit slope      ", params.slope_limit)
print("y(1000)          ", sol(np.array([1000.0]))[0])
print("y'(0)            ", initial_slope(sol), "(expected H(0) - 1 = 1)")

# %% the profile approaches the cone from below, with a log correction in u
fit = asymptotic_fit(sol)
print("log coefficient  ", fit.log_coeff, "vs", params.log_coefficient)
print("constant term c0 ", fit.c0)

# %% a non-constant H that approaches C quadratically gives the same coefficient
quad = radial_profile(params, HModel.quadratic(2.0, 0.3), r_max=1000.0)
print("quadratic H: y'(0) =", initial_slope(quad), " L =", asymptotic_fit(quad).log_coeff)

# %% the sigma family interpolates between the hyperboloid and the soliton
r = np.array([0.5, 1.0, 2.0, 5.0])
for s in (0.0, 0.25, 0.5, 1.0):
    print(f"sigma={s:4.2f}", np.round(sigma_profile(RadialParams(3, 2.0, s), r_max=10.0)(r), 6))
