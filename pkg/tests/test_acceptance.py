"""Acceptance suite: one test per numbered criterion, each recorded for the summary."""
import time
from itertools import combinations

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from minksoliton.elliptic import (Ball, boundary_barrier_check, continuity_solve,
                                  estimate_monitors, initial_field, newton_solve)
from minksoliton.entire import (BoundaryValueF, barrier_functions, exhaustion_solve,
                                psi_reference, uniqueness_probe)
from minksoliton.geometry import batch_invariants
from minksoliton.ode_oracles import (RiccatiParams, linear_ode_bound, riccati_closed_form,
                                    riccati_limit)
from minksoliton.radial import (HModel, RadialParams, asymptotic_fit, initial_slope,
                                integrate_v_eps, limit_constants, ode_residual_check,
                                radial_grid, radial_profile, sigma_profile)

CT = np.sqrt(3) / 2
FIELDS = []


def admissibility_violations(field):
    """Count unknowns breaking |Du| < 1, H1 > 0, H2 > 0 or H1 >= sqrt(H2)."""
    grad, hess = field.disc.jets(field.unknown_values)
    nu, H1, H2 = batch_invariants(grad, hess)
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(nu) & (H1 > 0) & (H2 > 0)
        ok &= H1 >= np.sqrt(np.where(ok, H2, 0.0)) * (1 - 1e-12)
    return int(np.count_nonzero(~ok)), int(ok.size)


def step_monitor(field):
    return {"monitors": estimate_monitors(field),
            "barrier": boundary_barrier_check(field, raise_on_violation=False),
            "admissibility": admissibility_violations(field)}


@pytest.fixture(scope="module")
def radial_n3():
    t0 = time.perf_counter()
    sol = radial_profile(RadialParams(3, 2.0), r_max=1000.0)
    return sol, time.perf_counter() - t0


@pytest.fixture(scope="module")
def dirichlet_runs():
    dom = Ball(np.zeros(3), 1.0)
    prof = sigma_profile(RadialParams(3, 2.0, 1.0), r_max=2.0)
    shift = prof(np.array([1.0]), "u")[0]
    runs = {}
    for h in (1 / 14, 1 / 28):
        t0 = time.perf_counter()
        field = continuity_solve(dom, 3, 2.0, 0.0, h=h, monitor=step_monitor)
        elapsed = time.perf_counter() - t0
        X = field.disc.points[field.disc.unknowns]
        exact = prof(np.linalg.norm(X, axis=1), "u") - shift
        err = float(np.max(np.abs(field.unknown_values - exact)))
        runs[h] = (field, err, elapsed)
        FIELDS.append(field)
    return runs


@pytest.fixture(scope="module")
def constant_exhaustion():
    res = exhaustion_solve(BoundaryValueF.constant(0.0))
    return res


@pytest.fixture(scope="module")
def cosine_exhaustion():
    t0 = time.perf_counter()
    res = exhaustion_solve(BoundaryValueF.cosine_mode(0.1))
    return res, time.perf_counter() - t0


def test_criterion_01_radial_limit(radial_n3, record):
    sol, elapsed = radial_n3
    gap = abs(sol(np.array([1000.0]))[0] - CT)
    ok = record(1, gap <= 1e-3 and elapsed < 10.0, f"|y(1000) - Ct| = {gap:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_initial_slope(record):
    gaps = []
    for n, C in ((3, 2.0), (4, 2.0), (3, 1.5)):
        sol = radial_profile(RadialParams(n, C), r_max=20.0)
        gaps.append(abs(initial_slope(sol) - (C - 1.0)))
    ok = record(2, max(gaps) <= 1e-3, f"max |y'(0) - (H(0) - 1)| = {max(gaps):.2e}")
    assert ok


def test_criterion_03_log_coefficient(radial_n3, record):
    sol, _ = radial_n3
    L = RadialParams(3, 2.0).log_coefficient
    rel_const = abs(asymptotic_fit(sol).log_coeff - L) / L
    quad = radial_profile(RadialParams(3, 2.0), HModel.quadratic(2.0, 0.3), r_max=1000.0)
    rel_quad = abs(asymptotic_fit(quad).log_coeff - L) / L
    ok = record(3, max(rel_const, rel_quad) <= 1e-2,
                f"relative error {rel_const:.1e} (H const), {rel_quad:.1e} (H quadratic)")
    assert ok


def test_criterion_04_limit_identity(record):
    rng = np.random.default_rng(4)
    worst = 0.0
    for n, C in zip(rng.integers(3, 21, 100), rng.uniform(1.01, 20.0, 100)):
        A0, B0 = limit_constants(int(n), float(C))
        target = np.sqrt((n - 2) / n) / C**2
        worst = max(worst, abs(riccati_limit(A0, B0) - target))
    ok = record(4, worst <= 1e-14, f"max deviation {worst:.1e}")
    assert ok


def test_criterion_05_eps_robustness(record):
    params = RadialParams(3, 2.0)
    H = HModel.constant(2.0)
    grid = radial_grid(100.0)
    ys = {}
    for eps in (1e-2, 1e-3, 1e-4):
        prof = integrate_v_eps(params, H, eps, 100.0, 1e-10, r_grid=grid)
        keep = prof.r >= 0.1
        ys[eps] = np.sqrt(prof.v[keep])
    worst = max(float(np.max(np.abs(ys[a] - ys[b]))) for a, b in combinations(ys, 2))
    ok = record(5, worst <= 1e-6, f"max pairwise sup gap {worst:.2e} on [0.1, 100]")
    assert ok


def test_criterion_06_sigma_family(record):
    sigmas = (0.1, 0.25, 0.5, 0.75, 1.0)
    profs = [sigma_profile(RadialParams(3, 2.0, s), r_max=20.0, tol=3e-14) for s in sigmas]
    worst = max(ode_residual_check(p) for p in profs)
    r = np.linspace(1e-3, 20.0, 4001)
    ys = [sigma_profile(RadialParams(3, 2.0, 0.0), r_max=20.0)(r)] + [p(r) for p in profs]
    ordered = all(np.all(a > b) for a, b in zip(ys, ys[1:]))
    hyper = ode_residual_check(sigma_profile(RadialParams(3, 2.0, 0.0), r_max=5.0))
    ok = record(6, worst < 1e-7 and ordered and hyper < 1e-10,
                f"residual {worst:.1e}, ordered={ordered}, hyperboloid residual {hyper:.1e}")
    assert ok


def test_criterion_07_riccati_oracle(record):
    rng = np.random.default_rng(7)
    worst, bound_ok = 0.0, True
    for _ in range(100):
        p = RiccatiParams(-rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0),
                          rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0))
        r = np.linspace(p.r0, p.r0 + 10.0, 201)
        num = solve_ivp(lambda t, z: p.A0 * z * z + p.B0, (r[0], r[-1]), [p.z0], method="LSODA",
                        t_eval=r, rtol=1e-13, atol=1e-14).y[0]
        worst = max(worst, float(np.max(np.abs(num - riccati_closed_form(p, r)))))

        # y' + a y = b with a >= a0 > 0 and |b| <= b_sup
        a0, alpha, b_sup, w = rng.uniform(0.1, 3.0), rng.uniform(0, 2), rng.uniform(0, 5), rng.uniform(0, 4)
        y0 = rng.uniform(-5, 5)
        sol = solve_ivp(lambda t, y: -(a0 + alpha * (1 + np.sin(w * t))) * y + b_sup * np.cos(3 * w * t),
                        (0.0, 30.0), [y0], rtol=1e-10, atol=1e-12, dense_output=True)
        ts = np.linspace(0.0, 30.0, 3001)
        bound_ok &= bool(np.max(np.abs(sol.sol(ts)[0])) <= linear_ode_bound(y0, a0, b_sup) + 1e-9)
    ok = record(7, worst <= 1e-8 and bound_ok, f"max |closed - numeric| {worst:.1e}, bound held={bound_ok}")
    assert ok


def test_criterion_08_dirichlet_radial(dirichlet_runs, record):
    (f1, e1, t1), (f2, e2, t2) = dirichlet_runs[1 / 14], dirichlet_runs[1 / 28]
    ratio = e1 / e2
    ok = record(8, f1.grid.shape == (33, 33, 33) and e1 <= 5e-3 and 3 <= ratio <= 5 and t1 < 300,
                f"grid {f1.grid.shape[0]}^3 error {e1:.2e} ({t1:.0f} s), "
                f"{f2.grid.shape[0]}^3 error {e2:.2e} ({t2:.0f} s), ratio {ratio:.2f}")
    assert ok


def test_criterion_09_gradient_maximum_principle(dirichlet_runs, record):
    reps = [step["monitors"] for f, _, _ in dirichlet_runs.values() for step in f.history]
    excess = max(r.max_nu_interior - r.max_nu_boundary - r.nu_slack for r in reps)
    ok = record(9, all(r.max_principle_ok for r in reps),
                f"{len(reps)} sigma-steps, worst excess over slack {excess:.2e}")
    assert ok


def test_criterion_11_boundary_barrier(dirichlet_runs, record):
    reps = [step["barrier"] for f, _, _ in dirichlet_runs.values() for step in f.history]
    margin = min(min(r.lower_margin + r.tolerance, r.tolerance - r.max_normal_derivative)
                 for r in reps)
    ok = record(11, all(r.ok for r in reps), f"{len(reps)} sigma-steps, smallest margin {margin:.2e}")
    assert ok


def test_criterion_12_constant_f(constant_exhaustion, record):
    res = constant_exhaustion
    psi = psi_reference(3, 2.0)
    err = float(np.max(np.abs(res.limit_on_K - psi(res.K_points))))
    X = np.concatenate([res.K_points, np.random.default_rng(12).normal(size=(500, 3)) * 8])
    pair = barrier_functions(BoundaryValueF.constant(0.0))
    collapse = bool(np.array_equal(pair.upper(X), pair.lower(X)))
    collapse &= all(s["min_gap"] == 0.0 for s in res.sandwich)
    FIELDS.extend(res.fields)
    ok = record(12, err <= 1e-2 and collapse, f"sup error on K {err:.2e}, collapse={collapse}")
    assert ok


def test_criterion_13_sandwich(cosine_exhaustion, record):
    res, elapsed = cosine_exhaustion
    FIELDS.extend(res.fields)
    counts = [s["violations"] for s in res.sandwich]
    excess = max(s["max_excess"] for s in res.sandwich)
    record(13, all(c == 0 for c in counts),
           f"sandwich violations {counts} (max excess {excess:.1e}, {elapsed:.0f} s)")
    gaps = res.cauchy_gaps
    record(13, len(gaps) == 2 and gaps[0] > gaps[1], f"cauchy gaps {[float(f'{g:.2e}') for g in gaps]}")
    pair = barrier_functions(BoundaryValueF.cosine_mode(0.1))
    rays = True
    for w in ([0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [1.0, -1.0, 0.5], [-0.3, 0.8, -0.2]):
        for which in ("upper", "lower"):
            rays &= bool(np.all(np.diff(pair.asymptotic_defect(w, [10.0, 100.0, 1000.0], which)) < 0))
    record(13, rays, f"ray defects decreasing={rays}")
    assert all(c == 0 for c in counts) and gaps[0] > gaps[1] and rays


def test_criterion_14_uniqueness_and_comparison(record):
    dom = Ball(np.zeros(3), 1.0)
    h = 1 / 8
    a = continuity_solve(dom, 3, 2.0, 0.0, h=h)
    guess = lambda X: 0.4 * (np.sum(X**2, axis=1) - 1.0)
    b = newton_solve(initial_field(dom, 3, 2.0, 0.0, h, sigma=1.0, guess=guess))
    same = uniqueness_probe(a, b, epsilon=1e-12)
    upper = continuity_solve(dom, 3, 2.0, lambda X: 0.1 + 0.05 * X[:, 0], h=h)
    order = uniqueness_probe(a, upper, epsilon=1.0)
    FIELDS.extend([a, b, upper])
    ok = record(14, same.sup_difference <= 1e-8 and order.max_order_violation <= h * h,
                f"sup difference {same.sup_difference:.1e}, "
                f"order violation {order.max_order_violation:.1e} (h^2 = {h * h:.1e})")
    assert ok


def test_criterion_10_admissibility(dirichlet_runs, constant_exhaustion, cosine_exhaustion, record):
    # runs last in this module so every field from the other criteria is collected
    steps = [step["admissibility"] for f, _, _ in dirichlet_runs.values() for step in f.history]
    finals = [admissibility_violations(f) for f in FIELDS]
    bad = sum(v for v, _ in steps + finals)
    nodes = sum(n for _, n in steps + finals)
    ok = record(10, bad == 0, f"{bad} violations over {nodes} nodes in "
                              f"{len(steps)} sigma-steps and {len(finals)} final fields")
    assert ok
