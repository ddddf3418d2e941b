"""Pointwise geometry of spacelike graphs in Minkowski space.

A graph ``x -> u(x)`` over ``R^n`` sits in ``R^{n,1}`` with induced metric
``g = I - Du Du^T``.  Everything here is a pure function of the 1-jet and
2-jet ``(Du, D^2u)`` at a point; the batch variants accept stacked jets of
shape ``(N, n)`` and ``(N, n, n)`` and are what the grid solvers call.

The shape operator ``nu * g^{-1} D^2u`` is not symmetric, but it is similar
to ``nu * G D^2u G`` with ``G = g^{-1/2} = I + nu^2/(1+nu) Du Du^T``, which is.
Eigenvalues are always taken from the symmetric form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import NotAdmissible, NotSpacelike

ADMISSIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class SpacelikeJet:
    """Gradient and Hessian of a candidate graph function at one point."""

    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        grad = np.asarray(self.grad, dtype=float).reshape(-1)
        hess = np.asarray(self.hess, dtype=float)
        n = grad.size
        if hess.shape != (n, n):
            raise ValueError(f"hess must be {n}x{n}, got {hess.shape}")
        if not np.allclose(hess, hess.T, rtol=1e-12, atol=1e-12):
            raise ValueError("hess must be symmetric")
        if float(grad @ grad) >= 1.0:
            raise NotSpacelike(f"|Du| = {np.sqrt(grad @ grad):.17g} >= 1")
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", 0.5 * (hess + hess.T))

    @property
    def dim(self) -> int:
        return self.grad.size


@dataclass(frozen=True)
class CurvatureData:
    shape: np.ndarray
    eigenvalues: np.ndarray
    H1: float
    H2: float
    nu: float


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    reason: str
    margins: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def gradient_factor(grad) -> float:
    """Return ``nu = 1/sqrt(1 - |grad|^2)``.

    Raises
    ------
    NotSpacelike
        If ``|grad| >= 1``.
    """
    grad = np.asarray(grad, dtype=float).reshape(-1)
    q = float(grad @ grad)
    if q >= 1.0:
        raise NotSpacelike(f"|Du|^2 = {q:.17g} >= 1")
    return 1.0 / np.sqrt(1.0 - q)


def _half_inverse_metric(grad, nu):
    # g^{-1/2} = I + nu^2/(1+nu) p p^T ; works for stacked inputs
    kappa = nu**2 / (1.0 + nu)
    eye = np.eye(grad.shape[-1])
    return eye + kappa[..., None, None] * grad[..., :, None] * grad[..., None, :]


def shape_operator(jet: SpacelikeJet) -> CurvatureData:
    p, A = jet.grad, jet.hess
    n = jet.dim
    nu = gradient_factor(p)
    ginv = np.eye(n) + nu**2 * np.outer(p, p)
    shape = nu * ginv @ A
    G = _half_inverse_metric(p, np.asarray(nu))
    sym = nu * G @ A @ G
    lam = np.linalg.eigvalsh(0.5 * (sym + sym.T))[::-1]
    return CurvatureData(
        shape=shape,
        eigenvalues=lam,
        H1=normalized_Hk(lam, 1),
        H2=normalized_Hk(lam, 2),
        nu=nu,
    )


def elementary_symmetric(eigenvalues, k: int) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    if k == 1:
        return float(lam.sum())
    if k == 2:
        s1 = lam.sum()
        return float(0.5 * (s1 * s1 - (lam * lam).sum()))
    raise ValueError("only k = 1, 2 are supported")


def normalized_Hk(eigenvalues, k: int) -> float:
    """``k!(n-k)!/n! * sigma_k(lambda)`` for ``k`` in ``{1, 2}``."""
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if k not in (1, 2):
        raise ValueError("only k = 1, 2 are supported")
    if n < 3:
        raise ValueError("dimension must be at least 3")
    return elementary_symmetric(lam, k) / comb(n, k)


def admissibility(curv: CurvatureData, tol: float = ADMISSIBILITY_TOL) -> Admissibility:
    margins = {"H1": curv.H1 - tol, "H2": curv.H2 - tol * tol, "nu": curv.nu}
    if not np.isfinite(curv.nu):
        return Admissibility(False, "nu is not finite", margins)
    if not curv.H1 > tol:
        return Admissibility(False, f"H1 = {curv.H1:.6g} is not strictly positive", margins)
    if not curv.H2 > tol * tol:
        return Admissibility(False, f"H2 = {curv.H2:.6g} is not strictly positive", margins)
    return Admissibility(True, "", margins)


def maclaurin_gap(curv: CurvatureData) -> float:
    """``H1 - sqrt(H2)``; nonnegative on the admissible cone."""
    adm = admissibility(curv)
    if not adm:
        raise NotAdmissible(adm.reason)
    return curv.H1 - np.sqrt(curv.H2)


def soliton_residual(jet: SpacelikeJet, C: float, sigma: float) -> float:
    curv = shape_operator(jet)
    adm = admissibility(curv)
    if not adm:
        raise NotAdmissible(adm.reason)
    return float(np.sqrt(curv.H2) - (C - sigma * curv.nu))


# ---------------------------------------------------------------------------
# batch kernels
# ---------------------------------------------------------------------------

@dataclass
class OperatorEval:
    """Stacked evaluation of ``F = sqrt(H2) - C + sigma*nu`` and its partials.

    ``dF_dA`` is the derivative with respect to the full (not symmetrised)
    Hessian matrix, so an off-diagonal entry ``A_ij = A_ji`` picks up
    ``dF_dA[ij] + dF_dA[ji]``.
    """

    F: np.ndarray
    nu: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    dF_dp: np.ndarray | None = None
    dF_dA: np.ndarray | None = None


def batch_nu(grad):
    q = np.einsum("...i,...i->...", grad, grad)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(q < 1.0, 1.0 / np.sqrt(np.maximum(1.0 - q, 0.0)), np.inf)


def batch_invariants(grad, hess):
    """Return ``nu, H1, H2`` for stacked jets without an eigensolve."""
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    n = grad.shape[-1]
    nu = batch_nu(grad)
    finite = np.isfinite(nu)
    nu_f = np.where(finite, nu, 0.0)
    B = np.eye(n) + (nu_f**2)[..., None, None] * grad[..., :, None] * grad[..., None, :]
    BA = B @ hess
    t1 = np.trace(BA, axis1=-2, axis2=-1)
    t2 = np.einsum("...ij,...ji->...", BA, BA)
    s1 = nu_f * t1
    s2 = 0.5 * nu_f**2 * (t1 * t1 - t2)
    H1 = np.where(finite, s1 / n, np.nan)
    H2 = np.where(finite, s2 / comb(n, 2), np.nan)
    return nu, H1, H2


def batch_principal_curvatures(grad, hess):
    """Principal curvatures, sorted descending along the last axis."""
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    nu = batch_nu(grad)
    G = _half_inverse_metric(grad, nu)
    sym = nu[..., None, None] * (G @ hess @ G)
    sym = 0.5 * (sym + np.swapaxes(sym, -1, -2))
    return np.linalg.eigvalsh(sym)[..., ::-1]


def batch_admissible(grad, hess, tol: float = ADMISSIBILITY_TOL):
    nu, H1, H2 = batch_invariants(grad, hess)
    ok = np.isfinite(nu) & (H1 > tol) & (H2 > tol * tol)
    return ok, nu, H1, H2


def soliton_operator(grad, hess, C: float, sigma: float, derivatives: bool = True) -> OperatorEval:
    """Evaluate the downward soliton operator on stacked jets.

    Inadmissible entries get ``F = nan``; callers decide what to do with them.
    """
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    n = grad.shape[-1]
    nu = batch_nu(grad)
    finite = np.isfinite(nu)
    nu_f = np.where(finite, nu, 0.0)
    nu2 = nu_f**2
    B = np.eye(n) + nu2[..., None, None] * grad[..., :, None] * grad[..., None, :]
    BA = B @ hess
    t1 = np.trace(BA, axis1=-2, axis2=-1)
    Q = t1 * t1 - np.einsum("...ij,...ji->...", BA, BA)
    s2 = 0.5 * nu2 * Q
    H1 = np.where(finite, nu_f * t1 / n, np.nan)
    H2 = np.where(finite, s2 / comb(n, 2), np.nan)
    ok = finite & (H1 > 0) & (H2 > 0)
    F0 = np.sqrt(np.where(ok, H2, np.nan))
    F = F0 - C + sigma * np.where(finite, nu, np.nan)
    out = OperatorEval(F=F, nu=nu, H1=H1, H2=H2)
    if not derivatives:
        return out
    scale = 1.0 / (n * (n - 1) * F0)
    BAB = BA @ B
    ds2_dA = nu2[..., None, None] * (t1[..., None, None] * B - BAB)
    AB = hess @ B
    Mq = 2.0 * (t1[..., None, None] * hess - AB @ hess)
    Mp = np.einsum("...ij,...j->...i", Mq, grad)
    pMp = np.einsum("...i,...i->...", grad, Mp)
    nu4 = nu2 * nu2
    ds2_dp = (nu4 * Q)[..., None] * grad + (nu4 * nu2 * pMp)[..., None] * grad + nu4[..., None] * Mp
    out.dF_dA = scale[..., None, None] * ds2_dA
    out.dF_dp = scale[..., None] * ds2_dp + (sigma * nu2 * nu_f)[..., None] * grad
    return out

