"""Entire solitons with prescribed behaviour at infinity.

The prescribed data ``f`` lives on the sphere of radius ``Ct = sqrt(1 - 1/C^2)``
and is extended zero-homogeneously.  Lower and upper barriers are the
envelopes

    u_lo(x) = sup_y  f(Ct y) - p1.Ct y + psi(x + p1),   p1 = Df(Ct y) + 2 M Ct y
    u_hi(x) = inf_y  f(Ct y) - p2.Ct y + psi(x + p2),   p2 = Df(Ct y) - 2 M Ct y

over unit vectors ``y``, where ``psi`` is the radial soliton normalised to
have no additive constant at infinity and ``M`` bounds the quadratic Taylor
remainder of ``f``.  Entire solutions are approximated by Dirichlet problems
on growing balls with the upper barrier as boundary data.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .elliptic.discretization import Discretization
from .elliptic.domain import Ball
from .elliptic.solver import (continuity_solve, harmonic_lift, initial_field, make_field,
                              newton_solve)
from .errors import (BarrierCrossing, DegenerateSamples, NotAdmissible, SandwichViolated,
                     SolverError)
from .radial import RadialParams, asymptotic_fit, radial_profile

log = logging.getLogger(__name__)

N_DIRECTIONS = 256
SAFETY = 1.25


def fibonacci_sphere(count: int) -> np.ndarray:
    """Quasi-uniform unit vectors in ``R^3`` on a golden-angle spiral."""
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = np.pi * (1.0 + 5**0.5) * k
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def sphere_samples(n: int, count: int = N_DIRECTIONS, seed: int = 0) -> np.ndarray:
    if n == 3:
        return fibonacci_sphere(count)
    g = np.random.default_rng(seed).standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _norm(X):
    return np.sqrt(np.einsum("...i,...i->...", X, X))


def _unit(X):
    X = np.asarray(X, dtype=float)
    return X / _norm(X)[..., None]


@dataclass(frozen=True)
class BoundaryValueF:
    """Prescribed values ``f`` on the sphere of radius ``Ct``.

    ``evaluator`` maps unit vectors ``(N, n)`` to values ``(N,)``.  Calling
    the object evaluates the zero-homogeneous extension at arbitrary nonzero
    points; :meth:`gradient` differentiates that extension.
    """

    evaluator: object
    n: int
    C: float
    name: str = "custom"
    samples: int = N_DIRECTIONS
    seed: int = 0
    is_constant: bool = False
    spec: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be at least 3")
        if not self.C > 1:
            raise ValueError("C must exceed 1")
        table = self.sample_table()
        if not np.all(np.isfinite(table["values"])):
            raise ValueError("f has non-finite sample values")

    @property
    def Ct(self) -> float:
        return float(np.sqrt(1.0 - 1.0 / self.C**2))

    def on_sphere(self, omega):
        return np.asarray(self.evaluator(_unit(omega)), dtype=float).reshape(len(omega))

    def __call__(self, X):
        return self.on_sphere(np.atleast_2d(X))

    def gradient(self, X, step: float = 1e-5):
        """Central differences of the zero-homogeneous extension at ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.is_constant:
            return np.zeros_like(X)
        scale = step * _norm(X)[:, None]
        out = np.empty_like(X)
        for k in range(self.n):
            E = np.zeros_like(X)
            E[:, k] = scale[:, 0]
            out[:, k] = (self(X + E) - self(X - E)) / (2 * scale[:, 0])
        return out

    def sample_table(self):
        cache = self.__dict__.setdefault("_table", {})
        if not cache:
            dirs = sphere_samples(self.n, self.samples, self.seed)
            cache["directions"] = dirs
            cache["values"] = self.on_sphere(dirs)
            cache["gradients"] = self.gradient(self.Ct * dirs)
        return cache

    # built-ins -------------------------------------------------------------

    @classmethod
    def constant(cls, value: float, n: int = 3, C: float = 2.0):
        v = float(value)
        return cls(lambda w: np.full(len(w), v), n, C, name="constant", is_constant=True,
                   spec={"kind": "constant", "value": v})

    @classmethod
    def cosine_mode(cls, amplitude: float, n: int = 3, C: float = 2.0, axis=None):
        """``amplitude * cos(theta)``, theta the angle to ``axis`` (default last axis)."""
        e = np.zeros(n)
        e[-1] = 1.0
        e = e if axis is None else _unit(np.asarray(axis, dtype=float))
        a = float(amplitude)
        return cls(lambda w: a * (w @ e), n, C, name="cosine-mode",
                   spec={"kind": "cosine-mode", "amplitude": a, "axis": e.tolist()})

    @classmethod
    def from_csv(cls, path, C: float = 2.0):
        """Samples ``theta,phi,value`` (polar angle, azimuth) interpolated on ``S^2``."""
        from scipy.interpolate import RBFInterpolator

        with open(path, newline="") as fh:
            rows = [(float(r["theta"]), float(r["phi"]), float(r["value"]))
                    for r in csv.DictReader(fh)]
        if len(rows) < 4:
            raise ValueError("need at least four spherical samples")
        th, ph, val = (np.array(c) for c in zip(*rows))
        pts = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)
        # repeated points (the poles of a theta-phi table) are merged by averaging
        pts, inv = np.unique(np.round(pts, 12), axis=0, return_inverse=True)
        val = np.bincount(inv.ravel(), val) / np.bincount(inv.ravel())
        rbf = RBFInterpolator(pts, val, kernel="thin_plate_spline")
        return cls(lambda w: rbf(w), 3, C, name="table",
                   spec={"kind": "table", "path": str(path), "samples": len(rows)})


def lipschitz_quadratic_M(f: BoundaryValueF, safety: float = SAFETY, pairs=None) -> float:
    """Sampled bound on the quadratic remainder of ``f``, times ``safety``.

    The quotient ``|f(Ct x) - f(Ct y) - df_{Ct y}(Ct x - Ct y)| / |Ct x - Ct y|^2``
    is maximised over all pairs of sample directions (or over ``pairs``,
    a tuple of two ``(N, n)`` arrays of unit vectors).
    """
    if f.is_constant:
        return 0.0
    Ct = f.Ct
    if pairs is None:
        t = f.sample_table()
        dirs, vals, grads = t["directions"], t["values"], t["gradients"]
        diff = Ct * (dirs[:, None, :] - dirs[None, :, :])
        num = vals[:, None] - vals[None, :] - np.einsum("jk,ijk->ij", grads, diff)
        den = np.einsum("ijk,ijk->ij", diff, diff)
        off = ~np.eye(len(dirs), dtype=bool)
        if np.any(den[off] < 1e-24):
            raise DegenerateSamples("coincident sample directions")
        q = np.abs(num[off]) / den[off]
    else:
        x, y = (_unit(p) for p in pairs)
        diff = Ct * (x - y)
        den = np.einsum("ij,ij->i", diff, diff)
        if np.any(den < 1e-24):
            raise DegenerateSamples("coincident sample directions")
        num = f.on_sphere(x) - f.on_sphere(y) - np.einsum("ij,ij->i", f.gradient(Ct * y), diff)
        q = np.abs(num) / den
    return float(safety * q.max())


class Psi:
    """Radial soliton ``psi`` with ``H = C`` and zero additive constant at infinity.

    Interpolates a computed profile up to ``r_max`` and continues it with the
    fitted expansion ``Ct r - L log r + a/r + b/r^2`` beyond.
    """

    def __init__(self, n: int, C: float, r_max: float = 1000.0):
        self.n, self.C = n, C
        self.profile = radial_profile(RadialParams(n, C, 1.0), r_max=r_max)
        self.fit = asymptotic_fit(self.profile)
        self.c0 = self.fit.c0
        self.r_max = self.profile.r_max
        self._u = self.profile.spline("u")
        self._y = self.profile.spline("y")

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        inner = r <= self.r_max
        out = np.empty_like(r)
        out[inner] = self._u(r[inner]) - self.c0
        ro = r[~inner]
        a, b = self.fit.tail
        out[~inner] = self.fit.slope * ro - self.fit.log_coeff * np.log(ro) + a / ro + b / ro**2
        return out

    def __call__(self, X):
        return self.radial(_norm(np.asarray(X, dtype=float)))


@lru_cache(maxsize=8)
def psi_reference(n: int, C: float) -> Psi:
    return Psi(n, C)


def _tangent_basis(Y):
    """Orthonormal bases of ``y^perp`` for each row, shape ``(N, n-1, n)``.

    Gram-Schmidt on the coordinate axes, skipping the axis most aligned with ``y``.
    """
    N, n = Y.shape
    skip = np.argmax(np.abs(Y), axis=1)
    out = np.empty((N, n - 1, n))
    basis = [Y]
    for j in range(n - 1):
        k = np.where(j < skip, j, j + 1)
        v = np.zeros((N, n))
        v[np.arange(N), k] = 1.0
        for b in basis:
            v -= np.einsum("ij,ij->i", v, b)[:, None] * b
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        out[:, j] = v
        basis.append(v)
    return out


@dataclass
class BarrierPair:
    f: BoundaryValueF
    psi_ref: Psi
    M: float
    chunk: int = 20000
    refine_steps: int = 200
    starts: int = 2
    angle_tol: float = 1e-6

    @property
    def Ct(self) -> float:
        return self.f.Ct

    def _shift(self, Y, sign):
        Ct = self.Ct
        grads = self.f.gradient(Ct * Y)
        return grads + sign * 2.0 * self.M * Ct * Y

    def z(self, X, Y, sign):
        """``z_lo`` (``sign=+1``) or ``z_hi`` (``sign=-1``) at paired rows of ``X``, ``Y``."""
        p = self._shift(Y, sign)
        Ct = self.Ct
        base = self.f.on_sphere(Y) - np.einsum("ij,ij->i", p, Ct * Y)
        return base + self.psi_ref(X + p)

    def _envelope(self, X, sign):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.f.is_constant:
            return self.f.on_sphere(np.eye(self.f.n)[:1])[0] + self.psi_ref(X)
        t = self.f.sample_table()
        dirs = t["directions"]
        p = t["gradients"] + sign * 2.0 * self.M * self.Ct * dirs
        base = t["values"] - np.einsum("ij,ij->i", p, self.Ct * dirs)
        m = self.starts
        best = np.empty((len(X), m))
        arg = np.empty((len(X), m), dtype=int)
        step = max(1, self.chunk // len(dirs))
        for s in range(0, len(X), step):
            Z = sign * (base[None, :] + self.psi_ref(X[s:s + step, None, :] + p[None, :, :]))
            k = np.argpartition(-Z, m - 1, axis=1)[:, :m]
            arg[s:s + step] = k
            best[s:s + step] = sign * np.take_along_axis(Z, k, axis=1)
        # several starts guard against local optima of the direction search
        runs = [self._refine(X, dirs[arg[:, j]], best[:, j].copy(), sign) for j in range(m)]
        return np.max(runs, axis=0) if sign > 0 else np.min(runs, axis=0)

    def _refine(self, X, Y, best, sign):
        """Pattern search on the sphere around the best sampled direction.

        Each point carries its own step; it grows by 1.5x after a successful
        move and halves otherwise, until it drops below ``angle_tol``.
        """
        n = X.shape[1]
        delta = np.full(len(X), np.sqrt(4 * np.pi / len(self.f.sample_table()["directions"])))
        better = (lambda a, b: a > b) if sign > 0 else (lambda a, b: a < b)
        active = np.arange(len(X))
        for _ in range(self.refine_steps):
            if active.size == 0:
                break
            Xa, Ya, ba, da = X[active], Y[active], best[active], delta[active]
            T = _tangent_basis(Ya)
            moved = np.zeros(active.size, dtype=bool)
            for j in range(n - 1):
                for s in (1.0, -1.0):
                    cand = _unit(Ya + s * da[:, None] * T[:, j, :])
                    val = self.z(Xa, cand, sign)
                    win = better(val, ba)
                    Ya = np.where(win[:, None], cand, Ya)
                    ba = np.where(win, val, ba)
                    moved |= win
            Y[active], best[active] = Ya, ba
            delta[active] = np.where(moved, 1.5 * da, 0.5 * da)
            active = active[delta[active] > self.angle_tol]
        return best

    def lower(self, X):
        return self._envelope(X, +1)

    def upper(self, X):
        return self._envelope(X, -1)

    def asymptotic_defect(self, direction, radii, which: str = "upper"):
        """``|u(R w) - (Ct R - L log R + f(Ct w))|`` along the ray through ``direction``."""
        w = _unit(np.atleast_2d(direction))[0]
        radii = np.asarray(radii, dtype=float)
        X = radii[:, None] * w
        vals = self.upper(X) if which == "upper" else self.lower(X)
        L = self.psi_ref.fit.log_coeff
        model = self.Ct * radii - L * np.log(radii) + self.f.on_sphere(w[None])[0]
        return np.abs(vals - model)


def _check_points(n, seed=1):
    dirs = sphere_samples(n, 64, seed)
    pts = [np.zeros((1, n))] + [r * dirs for r in (0.5, 2.0, 8.0, 32.0)]
    return np.concatenate(pts)


def barrier_functions(f: BoundaryValueF, C: float | None = None, n: int | None = None,
                      safety: float = SAFETY, retries: int = 3, tol: float = 1e-9) -> BarrierPair:
    """Barrier envelopes for ``f``; ``M`` grows by 1.5x if a crossing is detected."""
    C = f.C if C is None else C
    n = f.n if n is None else n
    if C != f.C or n != f.n:
        raise ValueError("f was built for a different (n, C)")
    psi = psi_reference(n, float(C))
    M = lipschitz_quadratic_M(f, safety)
    P = _check_points(n)
    for attempt in range(retries + 1):
        pair = BarrierPair(f, psi, M)
        gap = pair.upper(P) - pair.lower(P)
        if gap.min() >= -tol:
            pair.retries = attempt
            return pair
        M *= 1.5
    raise BarrierCrossing(f"lower barrier exceeds upper by {-gap.min():.3g} after {retries} retries")


@dataclass
class ExhaustionResult:
    radii: tuple
    fields: list
    K_points: np.ndarray
    limit_on_K: np.ndarray
    cauchy_gaps: list
    sandwich: list
    monotonicity: list
    barrier_M: float
    notes: tuple = ("exhaustion uses balls with upper-barrier boundary data",)

    def report(self) -> dict:
        return {
            "radii": list(self.radii),
            "h": [fl.grid.h for fl in self.fields],
            "cauchy_gaps": list(self.cauchy_gaps),
            "sandwich": self.sandwich,
            "monotonicity": list(self.monotonicity),
            "M": self.barrier_M,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2)


def _solve_ball(pair, R, h, order, tol):
    """Newton on ``B_R`` with data ``u_hi``, from the best admissible start available.

    The upper envelope has concave kinks where its minimising direction
    jumps, so it is usually not admissible.  The default start is the convex
    lower envelope plus the harmonic lift of ``u_hi - u_lo`` from the boundary.
    Returns the field and the barrier values at its unknowns.
    """
    n, C = pair.f.n, pair.f.C
    dom = Ball(np.zeros(n), R)
    start = initial_field(dom, n, C, pair.upper, h, 1.0, guess=lambda X: np.zeros(len(X)),
                          order=order)
    disc = start.disc
    X = disc.points[disc.unknowns]
    lo, hi = pair.lower(X), pair.upper(X)
    guesses = [lambda: lo + harmonic_lift(disc, lambda B: pair.upper(B) - pair.lower(B)),
               lambda: hi, lambda: lo]
    for make in guesses:
        try:
            return newton_solve(make_field(disc, make(), C, 1.0), tol=tol), lo, hi
        except (SolverError, NotAdmissible) as exc:
            log.info("exhaustion start rejected on R=%g: %s", R, exc)
    fl = continuity_solve(dom, n, C, pair.upper, h=h, order=order)
    return fl, lo, hi


def _lookup(fl, X):
    """Node values of ``fl`` at lattice points ``X`` (shared ``h Z^n`` alignment)."""
    idx = np.rint((X - np.asarray(fl.grid.lo)) / fl.grid.h).astype(int)
    return fl.u[tuple(idx.T)]


def exhaustion_solve(f: BoundaryValueF, C: float | None = None, n: int | None = None,
                     radii=(4.0, 8.0, 16.0), K_radius: float = 2.0, h: float = 0.5,
                     order: int = 4, newton_tol: float = 1e-9, strict_tol: float = 1e-9,
                     sandwich_slack: float = 1e-2, pair: BarrierPair | None = None) -> ExhaustionResult:
    """Dirichlet problems on ``B_R`` with data ``u_hi`` for increasing ``R``.

    ``K`` is the set of grid nodes with ``|x| <= K_radius``; all balls share
    the lattice ``h Z^n`` so nodes coincide between levels.  The sandwich
    ``u_lo <= u_m <= u_hi`` is counted at tolerance ``strict_tol`` and
    enforced (``SandwichViolated``) at ``sandwich_slack``, which absorbs the
    discretisation error when the barriers coincide.
    """
    radii = tuple(float(r) for r in radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must increase")
    if not K_radius < radii[0]:
        raise ValueError("K must lie inside the smallest ball")
    pair = barrier_functions(f, C, n) if pair is None else pair
    fields, sandwich, mono = [], [], []
    for R in radii:
        fl, lo, hi = _solve_ball(pair, R, h, order, newton_tol)
        u = fl.unknown_values
        excess = np.maximum(lo - u, u - hi)
        rec = {"R": R, "violations": int(np.sum(excess > strict_tol)),
               "max_excess": float(excess.max()), "min_gap": float((hi - lo).min())}
        sandwich.append(rec)
        if rec["max_excess"] > sandwich_slack:
            raise SandwichViolated(json.dumps(rec))
        if fields:
            prev = fields[-1]
            Xp = prev.disc.points[prev.disc.unknowns]
            mono.append(float(np.max(_lookup(fl, Xp) - prev.unknown_values)))
        fields.append(fl)
    Xk = fields[0].disc.points[fields[0].disc.unknowns]
    Xk = Xk[np.linalg.norm(Xk, axis=1) <= K_radius]
    on_K = [_lookup(fl, Xk) for fl in fields]
    gaps = [float(np.max(np.abs(b - a))) for a, b in zip(on_K, on_K[1:])]
    return ExhaustionResult(radii=radii, fields=fields, K_points=Xk, limit_on_K=on_K[-1],
                            cauchy_gaps=gaps, sandwich=sandwich, monotonicity=mono,
                            barrier_M=pair.M)


@dataclass(frozen=True)
class UniquenessReport:
    sup_difference: float
    boundary_gap_min: float
    boundary_gap_max: float
    epsilon: float
    comparison_set_size: int | None
    max_order_violation: float
    slack: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def uniqueness_probe(u1, u2, epsilon: float, slack: float | None = None) -> UniquenessReport:
    """Discrete comparison between two converged fields on the same ball.

    ``boundary_gap`` is ``g2 - g1`` at the boundary crossings.  When
    ``u1 + epsilon > u2`` holds on the whole boundary, the comparison set
    ``{u1 + epsilon <= u2 - slack}`` must be empty; its size is reported
    (``None`` when the boundary condition does not hold).
    ``max_order_violation`` is ``max(u1 - u2)`` over the nodes, relevant when
    ``g1 <= g2``.
    """
    d1, d2 = u1.disc, u2.disc
    if u1.grid != u2.grid or not np.array_equal(d1.unknowns, d2.unknowns):
        raise ValueError("fields must share grid and domain")
    slack = d1.h**2 if slack is None else slack
    from .elliptic.monitors import boundary_gradients

    B, _, _ = boundary_gradients(u1)
    gap = d2.g(B) - d1.g(B)
    a, b = u1.unknown_values, u2.unknown_values
    size = int(np.sum(a + epsilon <= b - slack)) if gap.max() < epsilon else None
    return UniquenessReport(sup_difference=float(np.max(np.abs(a - b))),
                            boundary_gap_min=float(gap.min()), boundary_gap_max=float(gap.max()),
                            epsilon=float(epsilon), comparison_set_size=size,
                            max_order_violation=float(np.max(a - b)), slack=float(slack))
