"""Radial downward solitons.

A radial graph ``u(x) = u(0) + int_0^|x| y`` solves the soliton equation
iff the slope profile ``y`` solves a first-order singular ODE on
``(0, inf)``.  With ``v = y**2`` the singularity at the origin is removed by
shifting ``r -> r + eps`` in the coefficients; the regularised problem starts
at ``v(0) = 0`` and is integrated with an explicit embedded Runge-Kutta pair.

The regularised profile differs from the limit by ``O(eps)`` (to leading order
it is the limit profile translated by ``eps``), so the limit is recovered by
polynomial extrapolation in ``eps`` over a short geometric sequence.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline

from .errors import InvariantViolated, NoConvergence, OutOfRange, WindowTooSmall

DEFAULT_EPS = (1e-5, 1e-6, 1e-7)
DEFAULT_TOL = 1e-10
BARRIER_SLACK = 1e-12


@dataclass(frozen=True)
class RadialParams:
    n: int = 3
    C: float = 2.0
    sigma: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")
        if not self.C > 1:
            raise ValueError(f"C must exceed 1, got {self.C}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")

    @property
    def slope_limit(self) -> float:
        """Limit of ``y`` at infinity, ``sqrt(1 - sigma^2/C^2)``."""
        return float(np.sqrt(1.0 - self.sigma**2 / self.C**2))

    @property
    def log_coefficient(self) -> float:
        """Predicted coefficient of ``-log r`` in ``u``; zero for the hyperboloid."""
        return float(self.sigma / self.C**2 * np.sqrt((self.n - 2) / self.n))


@dataclass(frozen=True)
class HModel:
    """Radial forcing ``H(r)``.

    ``kind="constant"`` is ``H = C``; ``kind="quadratic"`` is
    ``H(r) = C - k/(1 + r^2)``, nondecreasing with ``H(0) = C - k`` and
    ``C - H(r) = O(1/r^2)``.
    """

    kind: str = "constant"
    C: float = 2.0
    k: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "quadratic"):
            raise ValueError(f"unknown H model {self.kind!r}")
        if not self.C > 1:
            raise ValueError(f"C must exceed 1, got {self.C}")
        if self.kind == "constant" and self.k != 0:
            raise ValueError("constant H model takes no decay amplitude")
        if self.k < 0 or not self.k < self.C - 1:
            raise ValueError(f"need 0 <= k < C - 1 so that inf H > 1, got k={self.k}")

    @classmethod
    def constant(cls, C):
        return cls("constant", float(C), 0.0)

    @classmethod
    def quadratic(cls, C, k):
        return cls("quadratic", float(C), float(k))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, self.C)
        return self.C - self.k / (1.0 + r * r)

    @property
    def at_zero(self) -> float:
        return self.C - self.k


@dataclass(frozen=True)
class RadialSolution:
    r_grid: np.ndarray
    v: np.ndarray
    y: np.ndarray
    u: np.ndarray
    params: RadialParams
    h_model: HModel
    eps_used: tuple = ()
    extrapolation_error: float = 0.0
    clamped: bool = False

    def __post_init__(self):
        for name in ("r_grid", "v", "y", "u"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r(self) -> np.ndarray:
        return self.r_grid

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def spline(self, which: str = "y") -> CubicSpline:
        return _spline(self, which)

    def __call__(self, r, which: str = "y"):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise OutOfRange(f"radius outside [0, {self.r_max}]")
        return self.spline(which)(r)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "v", "y", "u"])
            for row in zip(self.r, self.v, self.y, self.u):
                w.writerow([f"{x:.17g}" for x in row])


def _spline(sol, which):
    cache = sol.__dict__.setdefault("_splines", {})
    if which not in cache:
        cache[which] = CubicSpline(sol.r_grid, getattr(sol, which))
    return cache[which]


@dataclass(frozen=True)
class AsymptoticFit:
    slope: float
    log_coeff: float
    c0: float
    residual: float
    # coefficients of 1/r and 1/r^2 in u - slope*r + log_coeff*log r - c0
    tail: tuple = field(default=(0.0, 0.0), compare=False)

    def to_json(self) -> str:
        keys = ("slope", "log_coeff", "c0", "residual")
        return json.dumps({k: float(getattr(self, k)) for k in keys}, indent=2)


def radial_grid(r_max: float, h_inner: float = 1e-3, ratio: float = 1.001) -> np.ndarray:
    """Uniform spacing on ``[0, 1]``, geometric beyond."""
    inner_end = min(1.0, r_max)
    m = max(int(round(inner_end / h_inner)), 2)
    inner = np.linspace(0.0, inner_end, m + 1)
    if r_max <= 1.0:
        return inner
    k = int(np.ceil(np.log(r_max) / np.log(ratio)))
    outer = np.geomspace(1.0, r_max, k + 1)[1:]
    return np.concatenate([inner, outer])


def rhs_v_eps(r, v, eps, h, n):
    """Right-hand side of the regularised equation for ``v = y**2``."""
    if np.any(np.asarray(v) >= 1.0):
        raise OutOfRange("v must stay below 1")
    s = r + eps
    Hr = h(r) if callable(h) else h
    w = Hr * np.sqrt(1.0 - v) - 1.0
    return -(n - 2) * v * (1.0 - v) / s + n * s * (1.0 - v) * w * w


@dataclass(frozen=True)
class EpsProfile:
    r: np.ndarray
    v: np.ndarray
    eps: float
    clamped: bool
    nfev: int


def integrate_v_eps(params: RadialParams, h: HModel, eps: float, r_max: float,
                    tol: float = DEFAULT_TOL, r_grid=None) -> EpsProfile:
    if not eps > 0 or not r_max > 0:
        raise ValueError("eps and r_max must be positive")
    n = params.n
    r = radial_grid(r_max) if r_grid is None else np.asarray(r_grid, dtype=float)
    if r[0] != 0.0:
        raise ValueError("grid must start at r = 0")

    def rhs(t, s):
        v = min(s[0], 1.0 - 1e-15)
        Ht = h(t) if h.kind != "constant" else h.C
        w = Ht * np.sqrt(1.0 - v) - 1.0
        return [-(n - 2) * v * (1.0 - v) / (t + eps) + n * (t + eps) * (1.0 - v) * w * w]

    out = solve_ivp(rhs, (0.0, r[-1]), [0.0], method="DOP853", t_eval=r,
                    rtol=tol, atol=tol)
    if out.status != 0:
        raise InvariantViolated(f"integration failed: {out.message}")
    v = out.y[0].copy()
    v[0] = 0.0
    barrier = 1.0 - 1.0 / h(r) ** 2
    over = v - barrier
    if np.any(over > BARRIER_SLACK):
        i = int(np.argmax(over))
        raise InvariantViolated(f"v crosses 1 - 1/H^2 at r={r[i]:.6g} by {over[i]:.3g}")
    clamped = bool(np.any(over[1:] >= 0))
    v = np.minimum(v, np.nextafter(barrier, -np.inf))
    v[0] = 0.0
    if np.any(v[1:] < -BARRIER_SLACK):
        raise InvariantViolated("v became negative")
    v = np.maximum(v, 0.0)
    if np.any(np.diff(v) < -10 * tol):
        raise InvariantViolated("v is not nondecreasing")
    return EpsProfile(r=r, v=v, eps=eps, clamped=clamped, nfev=out.nfev)


def _extrapolate_to_zero(eps, values):
    """Lagrange extrapolation of ``values[i] ~ P(eps[i])`` to ``eps = 0``."""
    eps = np.asarray(eps, dtype=float)
    out = np.zeros_like(values[0])
    for i, e_i in enumerate(eps):
        w = 1.0
        for j, e_j in enumerate(eps):
            if j != i:
                w *= e_j / (e_j - e_i)
        out = out + w * values[i]
    return out


def radial_profile(params: RadialParams = RadialParams(), h: HModel | None = None,
                   r_max: float = 1000.0, tol: float = DEFAULT_TOL,
                   eps_sequence=DEFAULT_EPS, limit_tol: float = 1e-8,
                   r_min_check: float = 0.1, r_grid=None) -> RadialSolution:
    """Limit ``eps -> 0`` of the regularised profiles, with ``u(0) = 0``.

    The extrapolation error reported on the solution is the sup difference,
    over ``[r_min_check, r_max]``, between the extrapolant built from all
    profiles and the one that drops the coarsest ``eps``.
    """
    if params.sigma != 1.0:
        raise ValueError("radial_profile solves the sigma = 1 problem; use sigma_profile")
    h = HModel.constant(params.C) if h is None else h
    if abs(h.C - params.C) > 0:
        raise ValueError("H model limit must equal params.C")
    eps_sequence = tuple(sorted(eps_sequence, reverse=True))
    profiles = [integrate_v_eps(params, h, e, r_max, tol, r_grid) for e in eps_sequence]
    r = profiles[0].r
    vs = [p.v for p in profiles]
    if len(vs) == 1:
        v, err = vs[0], np.inf
    else:
        v = _extrapolate_to_zero(eps_sequence, vs)
        v_fine = _extrapolate_to_zero(eps_sequence[1:], vs[1:])
        check = r >= r_min_check
        err = float(np.max(np.abs(v - v_fine)[check])) if np.any(check) else 0.0
        if err > limit_tol:
            raise NoConvergence(f"eps extrapolation unstable: gap {err:.3g} > {limit_tol:.3g}")
    barrier = 1.0 - 1.0 / h(r) ** 2
    clamped = any(p.clamped for p in profiles) or bool(np.any(v[1:] >= barrier[1:]))
    v = np.clip(v, 0.0, np.nextafter(barrier, -np.inf))
    v[0] = 0.0
    y = np.sqrt(v)
    sol = RadialSolution(r_grid=r, v=v, y=y, u=np.zeros_like(r), params=params, h_model=h,
                         eps_used=eps_sequence, extrapolation_error=err, clamped=clamped)
    return u_from_y(sol, 0.0)


def u_from_y(sol: RadialSolution, u0: float = 0.0) -> RadialSolution:
    u = u0 + cumulative_simpson(sol.y, x=sol.r, initial=0.0)
    return replace(sol, u=u)


def hyperboloid_profile(C: float, r):
    """Slope ``r / sqrt(r^2 + 1/C^2)`` of the hyperboloid of curvature ``C``."""
    if not C > 1:
        raise ValueError("C must exceed 1")
    r = np.asarray(r, dtype=float)
    return r / np.sqrt(r * r + 1.0 / C**2)


def sigma_profile(params: RadialParams, r_max: float = 1000.0, tol: float = DEFAULT_TOL,
                  **kwargs) -> RadialSolution:
    """Profile ``y_sigma(r) = y_{C/sigma}(sigma r)`` sampled on a grid.

    ``sigma = 0`` is the hyperboloid, returned in closed form with
    ``u = sqrt(r^2 + 1/C^2) - 1/C``.
    """
    C, sigma = params.C, params.sigma
    if sigma == 0.0:
        r = radial_grid(r_max)
        y = hyperboloid_profile(C, r)
        rho = 1.0 / C
        return RadialSolution(r_grid=r, v=y * y, y=y, u=np.sqrt(r * r + rho * rho) - rho,
                              params=params, h_model=HModel.constant(C))
    base_params = RadialParams(params.n, C / sigma, 1.0)
    grid = radial_grid(sigma * r_max, h_inner=min(1e-3, 2e-3 / (C / sigma)))
    # eps is a length: rescale it together with the radius
    eps = tuple(sigma * e for e in kwargs.pop("eps_sequence", DEFAULT_EPS))
    base = radial_profile(base_params, HModel.constant(C / sigma), r_max=sigma * r_max,
                          tol=tol, r_grid=grid, eps_sequence=eps, **kwargs)
    if sigma == 1.0:
        return replace(base, params=params)
    return replace(base, r_grid=base.r_grid / sigma, u=base.u / sigma, params=params,
                   h_model=HModel.constant(C))


@lru_cache(maxsize=32)
def _cached_sigma_profile(n, C, sigma, r_max, tol):
    return sigma_profile(RadialParams(n, C, sigma), r_max=r_max, tol=tol)


def y_sigma(params: RadialParams, r, r_max: float | None = None, tol: float = DEFAULT_TOL):
    """Evaluate ``y_sigma`` at radii ``r`` (closed form when ``sigma = 0``)."""
    r = np.asarray(r, dtype=float)
    if params.sigma == 0.0:
        return hyperboloid_profile(params.C, r)
    if r_max is None:
        r_max = max(100.0, float(np.max(r, initial=0.0)) * 1.01)
    prof = _cached_sigma_profile(params.n, params.C, params.sigma, float(r_max), tol)
    return prof(r, "y")


def initial_slope(sol: RadialSolution) -> float:
    """Reconstruct ``y'(0)`` from the two smallest positive samples.

    ``y`` is odd in ``r``, so ``y/r = y'(0) + c r^2 + ...`` and one step of
    Richardson extrapolation removes the quadratic term.
    """
    pos = np.flatnonzero(sol.r > 0)[:2]
    r1, r2 = sol.r[pos]
    q1, q2 = sol.y[pos] / sol.r[pos]
    return float((r2**2 * q1 - r1**2 * q2) / (r2**2 - r1**2))


def limit_constants(n: int, C: float):
    """Limits ``A0, B0`` of the Riccati coefficients for ``z = r (Ct - y)``."""
    ct = np.sqrt(1.0 - 1.0 / C**2)
    A0 = -n * C**2 / 2.0 * ct
    B0 = (n - 2) / (2.0 * C**2) * ct
    return A0, B0


def z_equation_coefficients(sol: RadialSolution, r):
    """Coefficients ``A(r), B(r)`` with ``z' = A z^2 + B`` along a profile.

    Uses the split ``n r^2 w^2 = n (r w / z)^2 z^2`` where
    ``w = H sqrt(1 - y^2) - 1``; both tend to the constant-coefficient limits.
    """
    r = np.asarray(r, dtype=float)
    ct = sol.params.slope_limit
    y = sol(r, "y")
    z = r * (ct - y)
    w = sol.h_model(r) * np.sqrt(1.0 - y * y) - sol.params.sigma
    g = (1.0 - y * y) / (2.0 * y)
    A = -g * sol.params.n * (r * w / z) ** 2
    B = z / r + g * (sol.params.n - 2) * y * y
    return A, B


def asymptotic_fit(sol: RadialSolution, window=None) -> AsymptoticFit:
    """Extract the large-``r`` expansion ``u = slope r - L log r + c0 + o(1)``.

    ``L`` is the limit of ``z = r (slope - y)`` and ``c0`` the limit of
    ``u - slope r + L log r``; both limits are taken by least squares in
    ``(1, 1/r, 1/r^2)`` over the window, default ``[r_max/4, r_max]``.
    """
    lo, hi = (sol.r_max / 4.0, sol.r_max) if window is None else window
    mask = (sol.r >= lo) & (sol.r <= hi)
    if lo < 10.0 or np.count_nonzero(mask) < 20:
        raise WindowTooSmall(f"fit window [{lo:.3g}, {hi:.3g}] is too short")
    r, y, u = sol.r[mask], sol.y[mask], sol.u[mask]
    slope = sol.params.slope_limit
    basis = np.stack([np.ones_like(r), 1.0 / r, 1.0 / r**2], axis=1)
    z = r * (slope - y)
    L = float(np.linalg.lstsq(basis, z, rcond=None)[0][0])
    w = u - slope * r + L * np.log(r)
    coef = np.linalg.lstsq(basis, w, rcond=None)[0]
    alpha = (slope - y - L / r) * r * r
    return AsymptoticFit(slope=slope, log_coeff=L, c0=float(coef[0]),
                         residual=float(alpha.max() - alpha.min()),
                         tail=(float(coef[1]), float(coef[2])))


def fd_derivative(x, f, half_width: int = 3):
    """Finite-difference derivative on a nonuniform grid.

    Centred Lagrange stencils of ``2*half_width + 1`` points (order
    ``2*half_width``) in the interior; second-order formulas near the ends.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    m = half_width
    d = np.gradient(f, x, edge_order=2)
    if x.size < 2 * m + 1:
        return d
    idx = np.arange(m, x.size - m)
    off = np.stack([x[idx + j] - x[idx] for j in range(-m, m + 1)], axis=1)
    hs = np.abs(off).max(axis=1, keepdims=True)
    V = (off / hs)[:, None, :] ** np.arange(2 * m + 1)[None, :, None]
    rhs = np.zeros((idx.size, 2 * m + 1))
    rhs[:, 1] = 1.0
    w = np.linalg.solve(V, rhs[..., None])[..., 0] / hs
    vals = np.stack([f[idx + j] for j in range(-m, m + 1)], axis=1)
    d[idx] = np.einsum("ij,ij->i", w, vals)
    return d


def ode_residual(r, y, dy, n, H, sigma):
    """Pointwise ``LHS - RHS`` of the radial equation for slope ``y``."""
    q = 1.0 - y * y
    lhs = 2.0 / (n * q) * (y / r) * (dy / q + 0.5 * (n - 2) * y / r)
    rhs = (H - sigma / np.sqrt(q)) ** 2
    return lhs - rhs


def ode_residual_check(sol: RadialSolution) -> float:
    """Sup of the radial equation residual over samples with a full stencil.

    The equation divides ``y'`` by ``(1 - y^2)^2``, so for nearly null
    profiles (small ``sigma``, large ``r``) the check is limited by the
    precision of the stored ``y`` rather than by the solver.
    """
    r, y = sol.r, sol.y
    m = 3
    # y is odd in r: mirror samples so the stencils near 0 stay centred
    xs = np.concatenate([-r[m:0:-1], r])
    dy = fd_derivative(xs, np.concatenate([-y[m:0:-1], y]), m)[m:]
    inner = slice(1, r.size - m)
    res = ode_residual(r[inner], y[inner], dy[inner], sol.params.n,
                       sol.h_model(r[inner]), sol.params.sigma)
    return float(np.max(np.abs(res)))
