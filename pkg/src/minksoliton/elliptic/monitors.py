"""Diagnostics that mirror the a priori estimates of the Dirichlet problem."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import BarrierViolated
from ..geometry import batch_nu
from .discretization import BOUNDARY_ADJACENT, INTERIOR
from .field import FieldSolution

MONITOR_KEYS = ("sigma", "max_nu_interior", "max_nu_boundary", "max_lambda1", "min_H2",
                "residual_sup")


@dataclass(frozen=True)
class MonitorReport:
    sigma: float
    max_nu_interior: float
    max_nu_boundary: float
    max_lambda1: float
    min_H2: float
    residual_sup: float
    nu_slack: float
    gradient_margin: float
    predicted_min_H2: float

    @property
    def max_principle_ok(self) -> bool:
        """Interior ``max nu`` within ``2h max|D nu|`` of the boundary ring."""
        return self.max_nu_interior <= self.max_nu_boundary + self.nu_slack

    @property
    def gradient_bound_ok(self) -> bool:
        return self.min_H2 > 0 and self.gradient_margin > 0

    def to_dict(self, full: bool = False) -> dict:
        d = asdict(self)
        return d if full else {k: d[k] for k in MONITOR_KEYS}

    def to_json(self, full: bool = False) -> str:
        return json.dumps(self.to_dict(full), indent=2)


def _jets(field):
    disc = field.disc
    return disc.jets(field.unknown_values)


def estimate_monitors(field: FieldSolution) -> MonitorReport:
    """Gradient and curvature monitors of one converged field.

    The slack for the gradient maximum principle is ``2h`` times the largest
    discrete ``|D nu|``, with ``D nu = nu^3 D^2u Du``.
    """
    disc = field.disc
    grad, hess = _jets(field)
    nu = batch_nu(grad)
    kind = disc.mask[disc.unknowns]
    inner = kind == INTERIOR
    ring = kind == BOUNDARY_ADJACENT
    dnu = (nu**3)[:, None] * np.einsum("kij,kj->ki", hess, grad)
    slack = 2.0 * disc.h * float(np.max(np.linalg.norm(dnu, axis=1)))
    d = field.diagnostics
    flat = lambda a: np.asarray(a).reshape(-1)[disc.unknowns]
    max_nu = float(np.max(nu))
    sigma, C = field.sigma, field.C
    return MonitorReport(
        sigma=sigma,
        max_nu_interior=float(np.max(nu[inner])) if inner.any() else float("nan"),
        max_nu_boundary=float(np.max(nu[ring])) if ring.any() else float("nan"),
        max_lambda1=float(np.max(flat(d["lambda1"]))),
        min_H2=float(np.min(flat(d["H2"]))),
        residual_sup=float(np.max(np.abs(flat(d["residual"])))),
        nu_slack=slack,
        gradient_margin=float(C - sigma * max_nu),
        predicted_min_H2=float((C - sigma * max_nu) ** 2),
    )


@dataclass(frozen=True)
class BarrierReport:
    sigma: float
    radius: float
    y_sigma_R: float
    min_normal_derivative: float
    max_normal_derivative: float
    tolerance: float
    max_tangential: float

    @property
    def ok(self) -> bool:
        return (self.max_normal_derivative <= self.tolerance
                and self.min_normal_derivative >= -self.y_sigma_R - self.tolerance)

    @property
    def lower_margin(self) -> float:
        return self.min_normal_derivative + self.y_sigma_R

    def to_json(self) -> str:
        d = asdict(self)
        d["ok"] = self.ok
        return json.dumps(d, indent=2)


def boundary_gradients(field: FieldSolution):
    """Extrapolate ``Du`` from each boundary-adjacent node to its nearest boundary point.

    Returns the boundary points, the gradients there and the outward normals.
    Uses ``Du(B) = Du(P) + D^2u(P) (B - P)`` with the node's discrete jet.
    """
    disc = field.disc
    dom = disc.domain
    grad, hess = _jets(field)
    ring = disc.adjacent
    P = disc.points[disc.unknowns[ring]]
    c, R = np.asarray(dom.center), dom.radius
    offs = P - c
    B = c + R * offs / np.linalg.norm(offs, axis=1, keepdims=True)
    DuB = grad[ring] + np.einsum("kij,kj->ki", hess[ring], B - P)
    normals = dom.outward_normal(B)
    return B, DuB, normals


def boundary_barrier_check(field: FieldSolution, y_sigma_R: float | None = None,
                           tol: float | None = None, raise_on_violation: bool = True) -> BarrierReport:
    """Check ``-y_sigma(R) <= d_n u <= 0`` (inward normal) on a ball.

    The default tolerance is ``h`` times the largest discrete Hessian norm on
    the boundary ring, the size of the error made by one step of Taylor
    extrapolation from the ring to the boundary.
    """
    from ..radial import RadialParams, y_sigma

    disc = field.disc
    dom = disc.domain
    if not hasattr(dom, "radius"):
        raise ValueError("boundary_barrier_check needs a ball")
    R = dom.radius
    if y_sigma_R is None:
        y_sigma_R = float(y_sigma(RadialParams(field.n, field.C, field.sigma), np.array([R]))[0])
    B, DuB, normals = boundary_gradients(field)
    dn = -np.einsum("ki,ki->k", DuB, normals)
    tang = DuB + dn[:, None] * normals
    if tol is None:
        _, hess = _jets(field)
        tol = disc.h * float(np.max(np.linalg.norm(hess[disc.adjacent], ord=2, axis=(1, 2))))
    rep = BarrierReport(sigma=field.sigma, radius=R, y_sigma_R=y_sigma_R,
                        min_normal_derivative=float(dn.min()),
                        max_normal_derivative=float(dn.max()), tolerance=tol,
                        max_tangential=float(np.max(np.linalg.norm(tang, axis=1))))
    if raise_on_violation and not rep.ok:
        raise BarrierViolated(rep.to_json())
    return rep
