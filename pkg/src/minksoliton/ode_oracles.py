"""Closed forms and bounds for the scalar ODEs behind the radial asymptotics.

Used as independent oracles: nothing here calls the radial engine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import PositivityLost


@dataclass(frozen=True)
class RiccatiParams:
    """Data for ``z' = A0 z^2 + B0`` with ``z(r0) = z0``."""

    A0: float
    B0: float
    r0: float = 0.0
    z0: float = 0.0

    def __post_init__(self):
        if not self.A0 < 0:
            raise ValueError(f"A0 must be negative, got {self.A0}")
        if not self.B0 > 0:
            raise ValueError(f"B0 must be positive, got {self.B0}")
        if self.r0 < 0 or self.z0 < 0:
            raise ValueError("r0 and z0 must be nonnegative")

    @property
    def limit(self) -> float:
        return riccati_limit(self.A0, self.B0)

    @property
    def K(self) -> float:
        s = self.limit
        return 1.0 - 2.0 * s / (self.z0 + s)


def riccati_limit(A0: float, B0: float) -> float:
    if not (A0 < 0 and B0 > 0):
        raise ValueError("need A0 < 0 < B0")
    return float(np.sqrt(-B0 / A0))


def riccati_branch(p: RiccatiParams) -> str:
    """``"increasing"``, ``"decreasing"`` or ``"stationary"``, read off from ``K``.

    ``K`` lies in ``[-1, 0)`` when ``z0`` is below the limit, in ``(0, 1)``
    above it, and vanishes exactly at the limit.
    """
    K = p.K
    if K == 0.0:
        return "stationary"
    if -1.0 <= K < 0.0:
        return "increasing"
    if 0.0 < K < 1.0:
        return "decreasing"
    raise AssertionError(f"K = {K} outside [-1, 1)")


def riccati_closed_form(p: RiccatiParams, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < p.r0):
        raise ValueError("r must be >= r0")
    s = p.limit
    # exp argument is nonpositive, so no overflow for large r
    e = np.exp(2.0 * s * p.A0 * (r - p.r0))
    return -s + 2.0 * s / (1.0 - p.K * e)


def variable_riccati_limit_probe(A, B, r0: float, z0: float, r_max: float,
                                 rtol: float = 1e-10, atol: float = 1e-12,
                                 dense: bool = False):
    """Integrate ``z' = A(r) z^2 + B(r)`` from ``z(r0) = z0`` and return ``z(r_max)``.

    With ``dense=True`` the scipy solution object is returned instead.

    Raises
    ------
    PositivityLost
        If ``z`` reaches zero on ``(r0, r_max]``.
    """
    if z0 < 0:
        raise ValueError("z0 must be nonnegative")

    def rhs(r, z):
        return A(r) * z * z + B(r)

    def hits_zero(r, z):
        return z[0]

    hits_zero.terminal = True
    hits_zero.direction = -1
    sol = solve_ivp(rhs, (r0, r_max), [z0], method="DOP853", rtol=rtol, atol=atol,
                    events=hits_zero, dense_output=dense)
    if sol.status == 1 or np.any(sol.y[0, 1:] <= 0):
        r_hit = sol.t_events[0][0] if sol.t_events[0].size else sol.t[-1]
        raise PositivityLost(f"z vanished at r={r_hit:.6g}")
    if sol.status != 0:
        raise RuntimeError(sol.message)
    return sol if dense else float(sol.y[0, -1])


def linear_ode_bound(y_r0: float, a0: float, b_sup: float) -> float:
    """Bound ``|y(r0)| + b_sup/a0`` for ``y' + a y = b`` with ``a >= a0 > 0``, ``|b| <= b_sup``."""
    if not a0 > 0:
        raise ValueError("a0 must be positive")
    if b_sup < 0:
        raise ValueError("b_sup must be nonnegative")
    return abs(y_r0) + b_sup / a0
