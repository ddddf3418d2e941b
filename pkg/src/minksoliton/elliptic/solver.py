"""Newton, pseudo-time relaxation and the continuation in ``sigma``."""
from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
import scipy.sparse.linalg as sla

from ..errors import (EllipticityLost, LineSearchStalled, MaxItersExceeded, NotAdmissible,
                      SolverError, Stagnation, StencilIncomplete)
from ..geometry import (ADMISSIBILITY_TOL, SpacelikeJet, batch_principal_curvatures,
                        soliton_operator)
from .discretization import BOUNDARY_ADJACENT, INTERIOR, Discretization
from .field import ContinuationSchedule, FieldSolution

log = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 3000


def _admissible(ev, tol=ADMISSIBILITY_TOL):
    return np.isfinite(ev.nu) & (ev.H1 > tol) & (ev.H2 > tol * tol)


def make_field(disc: Discretization, u, C, sigma, history=()) -> FieldSolution:
    """Wrap unknown values into a :class:`FieldSolution` with diagnostics."""
    u = np.asarray(u, dtype=float)
    grad, hess = disc.jets(u)
    ev = soliton_operator(grad, hess, C, sigma, derivatives=False)
    lam = np.full((u.size, disc.n), np.nan)
    ok = np.isfinite(ev.nu)
    lam[ok] = batch_principal_curvatures(grad[ok], hess[ok])

    def full(vals):
        out = np.full(disc.grid.size, np.nan)
        out[disc.unknowns] = vals
        return out.reshape(disc.grid.shape)

    diag = {"nu": full(ev.nu), "H1": full(ev.H1), "H2": full(ev.H2),
            "lambda1": full(lam[:, 0]), "residual": full(ev.F)}
    return FieldSolution(grid=disc.grid, u=disc.extend(u), mask=disc.mask.reshape(disc.grid.shape),
                         params=(disc.n, C, sigma), diagnostics=diag, disc=disc,
                         history=tuple(history))


def with_sigma(field: FieldSolution, sigma: float) -> FieldSolution:
    return make_field(field.disc, field.unknown_values, field.C, sigma, field.history)


def discretize_jet(field: FieldSolution, node) -> SpacelikeJet:
    disc = field.disc
    flat = int(np.ravel_multi_index(tuple(node), disc.grid.shape))
    k = disc.index[flat]
    if k < 0:
        raise StencilIncomplete(f"node {tuple(node)} is not an unknown of the discretisation")
    grad, hess = disc.jets(field.unknown_values)
    return SpacelikeJet(grad[k], hess[k])


def residual_field(field: FieldSolution) -> np.ndarray:
    """Soliton residual at every unknown node (NaN elsewhere), full-grid shape.

    Raises
    ------
    NotAdmissible
        Listing the grid indices of inadmissible nodes.
    """
    disc = field.disc
    ev = disc.operator(field.unknown_values, field.C, field.sigma)
    bad = ~_admissible(ev)
    if bad.any():
        nodes = np.array(np.unravel_index(disc.unknowns[bad], disc.grid.shape)).T
        err = NotAdmissible(f"{bad.sum()} inadmissible nodes, first {nodes[:5].tolist()}")
        err.nodes = nodes
        raise err
    out = np.full(disc.grid.size, np.nan)
    out[disc.unknowns] = ev.F
    return out.reshape(disc.grid.shape)


def linearize(field: FieldSolution, check: bool = True):
    """Exact Jacobian of the discrete residual with respect to the unknowns."""
    disc = field.disc
    ev = disc.operator(field.unknown_values, field.C, field.sigma, derivatives=True)
    if not _admissible(ev).all():
        raise NotAdmissible("linearize needs an admissible field")
    if check:
        sym = 0.5 * (ev.dF_dA + np.swapaxes(ev.dF_dA, 1, 2))
        low = np.linalg.eigvalsh(sym)[:, 0]
        if np.any(low <= 0):
            raise EllipticityLost(f"coefficient matrix not positive definite at {np.sum(low <= 0)} nodes")
    return disc.jacobian(ev)


def solve_linear(J, rhs, rtol: float = 1e-12):
    """Direct solve for small systems, GMRES with an AMG preconditioner otherwise."""
    if J.shape[0] <= DIRECT_SOLVE_LIMIT:
        return sla.spsolve(J.tocsc(), rhs)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(J.tocsr())
    x, info = sla.gmres(J, rhs, M=ml.aspreconditioner(), rtol=rtol, atol=0.0,
                        restart=60, maxiter=50)
    if info != 0:
        rel = np.linalg.norm(J @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if rel > 1e-8:
            raise SolverError(f"linear solve stalled, relative residual {rel:.2e}")
    return x


def newton_solve(field: FieldSolution, max_iters: int = 30, tol: float = 1e-9,
                 min_step: float = 1e-8) -> FieldSolution:
    """Damped Newton iteration on the discrete Dirichlet problem.

    Steps are halved until the trial field is admissible and the Euclidean
    norm of the residual decreases (Armijo with constant ``1e-4``).  Every
    accepted iterate is admissible.
    """
    disc, C, sigma = field.disc, field.C, field.sigma
    u = field.unknown_values.copy()
    ev = disc.operator(u, C, sigma, derivatives=True)
    if not _admissible(ev).all():
        raise NotAdmissible("initial field is not admissible", )
    trace = []
    for it in range(max_iters + 1):
        rsup = float(np.max(np.abs(ev.F)))
        trace.append(rsup)
        if rsup <= tol:
            break
        if it == max_iters:
            raise MaxItersExceeded(f"residual {rsup:.3e} after {max_iters} iterations", sigma)
        step = solve_linear(disc.jacobian(ev), -ev.F)
        r0 = np.linalg.norm(ev.F)
        alpha = 1.0
        while True:
            trial = u + alpha * step
            ev_t = disc.operator(trial, C, sigma, derivatives=True)
            if _admissible(ev_t).all() and np.linalg.norm(ev_t.F) <= (1 - 1e-4 * alpha) * r0:
                break
            alpha *= 0.5
            if alpha < min_step:
                raise LineSearchStalled(f"step fell below {min_step:g} at iteration {it}", sigma)
        u, ev = trial, ev_t
        log.debug("newton sigma=%g it=%d alpha=%g res=%.3e", sigma, it, alpha, rsup)
    out = make_field(disc, u, C, sigma, field.history)
    out.diagnostics["newton_trace"] = trace
    return out


def parabolic_relax(field: FieldSolution, dt: float = 0.5, steps: int = 200,
                    max_rejections: int = 20) -> FieldSolution:
    """Explicit pseudo-time relaxation of ``u_t = sqrt(1 - |Du|^2) F[u]``.

    Each node advances with its own time step ``dt / (w |dF/du_p|)``, where
    ``w = sqrt(1 - |Du|^2)`` and ``dF/du_p`` is the diagonal of the Jacobian,
    so ``dt`` is a dimensionless CFL number.  A step that leaves the
    admissible set, or grows the residual, is retried with ``dt`` halved.
    """
    disc, C, sigma = field.disc, field.C, field.sigma
    u = field.unknown_values.copy()
    ev = disc.operator(u, C, sigma, derivatives=True)
    if not _admissible(ev).all():
        raise NotAdmissible("initial field is not admissible")
    trace = [float(np.max(np.abs(ev.F)))]
    rejections = 0
    taken = 0
    while taken < steps:
        diag = np.abs(disc.jacobian(ev).diagonal())
        trial = u + dt * ev.F / diag
        ev_t = disc.operator(trial, C, sigma, derivatives=True)
        ok = _admissible(ev_t).all() and np.linalg.norm(ev_t.F) <= 1.5 * np.linalg.norm(ev.F)
        if not ok:
            rejections += 1
            dt *= 0.5
            if rejections > max_rejections:
                raise Stagnation(f"{rejections} rejected relaxation steps", sigma)
            continue
        rejections = 0
        u, ev = trial, ev_t
        taken += 1
        trace.append(float(np.max(np.abs(ev.F))))
    out = make_field(disc, u, C, sigma, field.history)
    out.diagnostics["relax_trace"] = trace
    out.diagnostics["relax_dt"] = dt
    return out


def hyperboloid_guess(domain, C: float, boundary, X):
    """``sqrt(1/C^2 + |x - x0|^2)`` shifted to the boundary level on the inscribed sphere."""
    x0, rho = domain.inscribed()
    base = np.sqrt(1.0 / C**2 + np.sum((X - x0) ** 2, axis=-1))
    if callable(boundary):
        n = len(x0)
        probe = x0 + rho * np.concatenate([np.eye(n), -np.eye(n)])
        level = float(np.mean(boundary(probe)))
    else:
        level = float(boundary)
    return base - np.sqrt(1.0 / C**2 + rho**2) + level


def harmonic_lift(disc: Discretization, boundary_gap):
    """Discrete harmonic function on ``disc`` with Dirichlet data ``boundary_gap``."""
    lap = Discretization(disc.domain, disc.grid, boundary_gap, disc.theta_min, order=2)
    if not np.array_equal(lap.unknowns, disc.unknowns):
        raise ValueError("pinned nodes differ between discretisations")
    L = sum(lap.second[i].W for i in range(lap.n))
    c = sum(lap.second[i].c for i in range(lap.n))
    return solve_linear(-L.tocsr(), c)


def initial_field(domain, n: int, C: float, boundary, h: float, sigma: float = 0.0,
                  guess=None, order: int = 2) -> FieldSolution:
    """Discretise ``domain`` and seed the unknowns with ``guess``.

    The default guess is the hyperboloid; for non-constant boundary data it
    is corrected by the harmonic lift of the boundary mismatch.
    """
    if domain.n != n:
        raise ValueError("domain dimension does not match n")
    disc = Discretization(domain, domain.grid(h), boundary, order=order)
    X = disc.points[disc.unknowns]
    if guess is not None:
        u = np.asarray(guess(X), float)
    else:
        u = hyperboloid_guess(domain, C, boundary, X)
        if callable(boundary):
            u = u + harmonic_lift(disc, lambda B: boundary(B) - hyperboloid_guess(domain, C, boundary, B))
    return make_field(disc, u, C, sigma)


def continuity_solve(domain, n: int, C: float, boundary, schedule=None, h: float = 1 / 14,
                     guess=None, monitor=None, order: int = 2) -> FieldSolution:
    """March ``sigma`` from 0 to 1, Newton-solving each step from the previous one.

    A failed step is bisected up to ``schedule.max_bisections`` times.
    ``monitor`` (default :func:`estimate_monitors`) is called on every
    converged step and the reports are stored in ``history``.
    """
    from .monitors import estimate_monitors

    schedule = ContinuationSchedule() if schedule is None else schedule
    monitor = estimate_monitors if monitor is None else monitor
    if not C > 1:
        raise ValueError("C must exceed 1")
    opts = dict(max_iters=schedule.max_newton_iters, tol=schedule.newton_tol)
    field = initial_field(domain, n, C, boundary, h, 0.0, guess, order)
    try:
        field = newton_solve(field, **opts)
    except SolverError as exc:
        exc.sigma = 0.0
        raise
    reports = [monitor(field)]
    targets = list(schedule.sigma_steps[1:])
    depth = 0
    current = 0.0
    while targets:
        target = targets[0]
        try:
            field_new = newton_solve(with_sigma(field, target), **opts)
        except (SolverError, NotAdmissible) as exc:
            if depth >= schedule.max_bisections:
                if isinstance(exc, SolverError):
                    exc.sigma = target
                    raise
                raise SolverError(str(exc), target) from exc
            targets.insert(0, 0.5 * (current + target))
            depth += 1
            continue
        targets.pop(0)
        depth = 0
        field, current = field_new, target
        reports.append(monitor(field))
    return replace(field, history=tuple(reports))
