import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from minksoliton.errors import PositivityLost
from minksoliton.ode_oracles import (RiccatiParams, linear_ode_bound, riccati_branch,
                                     riccati_closed_form, riccati_limit,
                                     variable_riccati_limit_probe)

riccati_params = st.builds(
    RiccatiParams,
    A0=st.floats(-10.0, -0.1),
    B0=st.floats(0.1, 10.0),
    r0=st.floats(0.0, 5.0),
    z0=st.floats(0.0, 5.0),
)


def test_params_validation():
    with pytest.raises(ValueError):
        RiccatiParams(1.0, 1.0)
    with pytest.raises(ValueError):
        RiccatiParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        RiccatiParams(-1.0, 1.0, z0=-0.5)
    with pytest.raises(ValueError):
        riccati_limit(-1.0, -1.0)


def test_limit_and_branches():
    assert riccati_limit(-4.0, 1.0) == 0.5
    assert riccati_branch(RiccatiParams(-4.0, 1.0, z0=0.1)) == "increasing"
    assert riccati_branch(RiccatiParams(-4.0, 1.0, z0=3.0)) == "decreasing"
    assert riccati_branch(RiccatiParams(-4.0, 1.0, z0=0.5)) == "stationary"


def test_closed_form_rejects_r_below_r0():
    with pytest.raises(ValueError):
        riccati_closed_form(RiccatiParams(-1.0, 1.0, r0=2.0), [1.0])


@settings(max_examples=50, deadline=None)
@given(p=riccati_params)
def test_closed_form_against_integration(p):
    r = np.linspace(p.r0, p.r0 + 10.0, 101)
    sol = solve_ivp(lambda t, z: p.A0 * z * z + p.B0, (r[0], r[-1]), [p.z0],
                    method="DOP853", rtol=1e-12, atol=1e-12, t_eval=r)
    np.testing.assert_allclose(riccati_closed_form(p, r), sol.y[0], atol=1e-8, rtol=0)


@settings(max_examples=50, deadline=None)
@given(p=riccati_params)
def test_closed_form_is_monotone_towards_limit(p):
    z = riccati_closed_form(p, p.r0 + np.linspace(0.0, 50.0, 400))
    assert z[0] == pytest.approx(p.z0, abs=1e-12)
    assert abs(z[-1] - p.limit) <= abs(p.z0 - p.limit) + 1e-12
    slope = np.diff(z)
    branch = riccati_branch(p)
    if branch == "increasing":
        assert np.all(slope >= -1e-12)
    elif branch == "decreasing":
        assert np.all(slope <= 1e-12)


def test_variable_probe_tends_to_limit():
    A = lambda r: -2.0 * (1 + 1 / (1 + r * r))
    B = lambda r: 0.5 + np.exp(-r)
    z = variable_riccati_limit_probe(A, B, 0.0, 1.0, 60.0)
    # the solution tracks the slowly moving equilibrium sqrt(-B/A)
    assert z == pytest.approx(np.sqrt(-B(60.0) / A(60.0)), rel=1e-5)
    assert z == pytest.approx(riccati_limit(-2.0, 0.5), rel=1e-3)


def test_variable_probe_positivity_lost():
    with pytest.raises(PositivityLost):
        variable_riccati_limit_probe(lambda r: -1.0, lambda r: -1.0, 0.0, 0.5, 10.0)


@settings(max_examples=40, deadline=None)
@given(y0=st.floats(-3, 3), a0=st.floats(0.1, 5), b_sup=st.floats(0, 5),
       seed=st.integers(0, 1000))
def test_linear_bound_never_exceeded(y0, a0, b_sup, seed):
    rng = np.random.default_rng(seed)
    ka, kb, pa, pb = rng.uniform(0.1, 3.0, 4)
    a = lambda r: a0 * (1.5 + 0.5 * np.sin(ka * r + pa))
    b = lambda r: b_sup * np.cos(kb * r + pb)
    sol = solve_ivp(lambda r, y: -a(r) * y + b(r), (0.0, 30.0), [y0], rtol=1e-10, atol=1e-12,
                    max_step=0.05)
    assert np.max(np.abs(sol.y[0])) <= linear_ode_bound(y0, a0, b_sup) + 1e-9


def test_linear_bound_validation():
    with pytest.raises(ValueError):
        linear_ode_bound(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        linear_ode_bound(0.0, 1.0, -1.0)
