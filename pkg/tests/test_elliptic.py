import numpy as np
import pytest
import scipy.sparse as sp

from minksoliton.elliptic import (BOUNDARY_ADJACENT, EXTERIOR, INTERIOR, PINNED, Ball,
                                  ContinuationSchedule, Discretization, GridSpec, LevelSetDomain,
                                  boundary_barrier_check, continuity_solve, discretize_jet,
                                  estimate_monitors, initial_field, linearize, load_field,
                                  newton_solve, parabolic_relax, residual_field)
from minksoliton.errors import NotAdmissible, StencilIncomplete
from minksoliton.radial import RadialParams, sigma_profile


def ball(R=1.0, n=3):
    return Ball(np.zeros(n), R)


def quadratic(X):
    Q = np.array([[2.0, 0.3, -0.1], [0.3, 1.0, 0.2], [-0.1, 0.2, 1.5]])
    b = np.array([0.1, -0.2, 0.05])
    return 0.5 * np.einsum("ki,ij,kj->k", X, Q, X) + X @ b + 0.3, Q, b


def test_grid_covering_is_lattice_aligned():
    g = GridSpec.covering([-1.0, -1.0], [1.0, 1.0], 0.3)
    assert np.allclose(np.asarray(g.lo) / 0.3, np.round(np.asarray(g.lo) / 0.3))
    assert g.contains_with_margin([-1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        GridSpec(0.0, (0.0,), (3,))


def test_ball_segment_exit_is_exact():
    b = ball(2.0)
    X = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    D = np.array([[3.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    t = b.segment_exit(X, D)
    np.testing.assert_allclose(np.linalg.norm(X + t[:, None] * D, axis=1), 2.0)


def test_level_set_domain():
    Phi = lambda X: np.sum(X**2 * np.array([1.0, 2.0, 3.0]), axis=-1)
    dom = LevelSetDomain(Phi, 1.0, ([-1.1] * 3, [1.1] * 3))
    X = np.array([[0.1, 0.2, 0.1]])
    D = np.array([[2.0, 0.0, 0.0]])
    t = dom.segment_exit(X, D)
    assert Phi(X + t[:, None] * D)[0] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        LevelSetDomain(lambda X: -np.sum(X**2, axis=-1), -1.0, ([-2] * 3, [2] * 3))


@pytest.mark.parametrize("order", [2, 4])
def test_quadratics_are_reproduced(order):
    dom = ball()
    g = lambda X: quadratic(X)[0]
    disc = Discretization(dom, dom.grid(0.125), g, order=order)
    X = disc.points[disc.unknowns]
    u, Q, b = quadratic(X)
    grad, hess = disc.jets(u)
    np.testing.assert_allclose(grad, X @ Q + b, atol=1e-10)
    np.testing.assert_allclose(hess, np.broadcast_to(Q, hess.shape), atol=1e-9)


def test_mask_codes():
    dom = ball()
    disc = Discretization(dom, dom.grid(0.25), 0.0)
    codes = set(np.unique(disc.mask))
    assert {EXTERIOR, INTERIOR, BOUNDARY_ADJACENT} <= codes
    outside = ~dom.inside(disc.points)
    assert np.all(disc.mask[outside] == EXTERIOR)
    pinned = disc.mask == PINNED
    assert np.all(disc.theta[pinned] < disc.theta_min)


def test_nodes_on_boundary_are_pinned():
    dom = Ball(np.zeros(3), 1.0 + 1e-6)
    disc = Discretization(dom, dom.grid(0.25), 7.0)
    assert disc.pinned.size == 6
    np.testing.assert_allclose(disc.pinned_values, 7.0)


def test_jacobian_matches_differences():
    dom = ball()
    field = initial_field(dom, 3, 2.0, 0.0, 0.25, sigma=0.6)
    J = linearize(field)
    disc, u = field.disc, field.unknown_values
    rng = np.random.default_rng(0)
    v = rng.normal(size=u.size)
    t = 1e-6
    fd = (disc.operator(u + t * v, 2.0, 0.6).F - disc.operator(u - t * v, 2.0, 0.6).F) / (2 * t)
    assert sp.issparse(J)
    np.testing.assert_allclose(J @ v, fd, rtol=1e-5, atol=1e-7)


def test_hyperboloid_solves_sigma_zero():
    # sqrt(|x|^2 + 1/C^2) has all curvatures C: the sigma = 0 solution
    dom = ball()
    C = 2.0
    exact = lambda X: np.sqrt(np.sum(X**2, axis=1) + 1 / C**2)
    field = newton_solve(initial_field(dom, 3, C, exact, 1 / 8, sigma=0.0))
    X = field.disc.points[field.disc.unknowns]
    assert np.max(np.abs(field.unknown_values - exact(X))) < 5e-3
    assert field.diagnostics["newton_trace"][-1] < 1e-9


def test_continuity_solve_matches_radial_profile():
    dom = ball()
    field = continuity_solve(dom, 3, 2.0, 0.0, h=1 / 8)
    assert [r.sigma for r in field.history] == list(ContinuationSchedule().sigma_steps)
    prof = sigma_profile(RadialParams(3, 2.0, 1.0), r_max=2.0)
    X = field.disc.points[field.disc.unknowns]
    r = np.linalg.norm(X, axis=1)
    exact = prof(r, "u") - prof(np.array([1.0]), "u")[0]
    assert np.max(np.abs(field.unknown_values - exact)) < 2e-2
    for rep in field.history:
        assert rep.max_principle_ok and rep.gradient_bound_ok
        assert rep.min_H2 == pytest.approx(rep.predicted_min_H2, abs=1e-6)
    rep = boundary_barrier_check(field)
    assert rep.ok


def test_parabolic_relax_reduces_residual():
    dom = ball()
    field = initial_field(dom, 3, 2.0, 0.0, 0.25, sigma=0.0)
    relaxed = parabolic_relax(field, steps=50)
    trace = relaxed.diagnostics["relax_trace"]
    assert trace[-1] < trace[0]


def test_residual_field_reports_bad_nodes():
    dom = ball()
    field = initial_field(dom, 3, 2.0, 0.0, 0.25, guess=lambda X: -np.sum(X**2, axis=1))
    with pytest.raises(NotAdmissible) as info:
        residual_field(field)
    assert info.value.nodes.shape[1] == 3


def test_discretize_jet_rejects_exterior_nodes():
    dom = ball()
    field = initial_field(dom, 3, 2.0, 0.0, 0.25)
    with pytest.raises(StencilIncomplete):
        discretize_jet(field, (0, 0, 0))
    centre = tuple(np.argwhere(field.mask == INTERIOR)[0])
    assert discretize_jet(field, centre).grad.shape == (3,)


def test_field_text_roundtrip(tmp_path):
    dom = ball()
    field = initial_field(dom, 3, 2.0, 0.5, 0.25)
    path = tmp_path / "field.txt"
    field.save(path)
    back = load_field(path)
    assert back.grid == field.grid
    np.testing.assert_array_equal(back.mask, field.mask)
    np.testing.assert_array_equal(back.u, field.u)
    assert back.params == field.params


def test_schedule_validation():
    with pytest.raises(ValueError):
        ContinuationSchedule(sigma_steps=(0.1, 1.0))
    with pytest.raises(ValueError):
        ContinuationSchedule(sigma_steps=(0.0, 0.5, 0.5, 1.0))


def test_monitor_report_keys():
    field = newton_solve(initial_field(ball(), 3, 2.0, 0.0, 0.25))
    d = estimate_monitors(field).to_dict()
    assert list(d) == ["sigma", "max_nu_interior", "max_nu_boundary", "max_lambda1", "min_H2",
                       "residual_sup"]


def test_default_guess_follows_nonconstant_data():
    dom = ball()
    g = lambda X: 0.1 + 0.05 * X[:, 0]
    field = continuity_solve(dom, 3, 2.0, g, h=0.25)
    low = continuity_solve(dom, 3, 2.0, 0.0, h=0.25)
    # larger boundary data gives a larger solution
    assert np.all(field.unknown_values > low.unknown_values)
