import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipslab.pde import (DiffMatrixField, GridFn1D, PDEError, boundary_identity_gaps, cauchy_limit, cauchy_solve,
                        flow_case, flow_residual, flow_solve, gamma_zero_limit_check, limit_class, ode_residual,
                        pstar_shoot, upper_bound_infinite)

# p(1/2) of the class-(0,1) solutions, from an independent collocation solve
# (scipy solve_bvp on [1e-3, 1 - 1e-3] with Robin conditions from the local series)
P01_HALF = {1.0: 0.72000000, 2.0: 0.84614194}


def test_flow_residual_case1_and_zero():
    _, r = flow_residual(flow_case(1, m=40))
    assert r < 1e-8
    z = DiffMatrixField.from_callables(lambda a, b: 0 * a, lambda a, b: 0 * a, m=10)
    assert flow_residual(z)[1] == 0.0


def test_one_dimensional_restriction():
    # w = x(1-x) in the 11-entry only: 1/2 w (-2) + w = 0 at every node
    w = DiffMatrixField.from_callables(lambda a, b: a * (1 - a), lambda a, b: 0 * a, m=16)
    res, r = flow_residual(w)
    assert r < 1e-12
    assert np.abs(res).max() < 1e-12


def test_flow_case1_stationary():
    res = flow_solve(flow_case(1, m=20), 5.0, snapshots=[1.0, 2.5, 5.0])
    assert res.sup_change() < 1e-3
    assert not res.blew_up and res.max_clip < 1e-6


def test_flow_converges_to_case1():
    w0 = DiffMatrixField.from_callables(lambda a, b: 2 * a * (1 - a), lambda a, b: 0.5 * b * (1 - b), m=20)
    res = flow_solve(w0, 15.0)
    assert res.final.sup_distance(flow_case(1, m=20)) < 1e-2


def test_flow_blowup_guard():
    w0 = DiffMatrixField.from_callables(lambda a, b: 5 + 0 * a, lambda a, b: 5 + 0 * a, m=8)
    res = flow_solve(w0, 20.0, blowup=50.0)
    assert res.blew_up
    assert res.times[-1] < 20.0


def test_flow_rejects_indefinite():
    w0 = DiffMatrixField.from_callables(lambda a, b: 0 * a, lambda a, b: 0 * a, f12=lambda a, b: 0.1 + 0 * a, m=4)
    with pytest.raises(ValueError):
        flow_solve(w0, 1.0)


def test_flow_case_requirements():
    with pytest.raises(ValueError):
        flow_case(2, m=10)
    with pytest.raises(ValueError):
        flow_case(3, m=10)
    p = pstar_shoot(1.0, "01", m=20)
    _, r = flow_residual(flow_case(2, m=20, p=p))
    assert r < 5e-2


def test_pstar_trivial_classes():
    assert np.all(pstar_shoot(0.5, "00").values == 0)
    assert np.all(pstar_shoot(1.0, (0, 0)).values == 0)
    assert np.all(pstar_shoot(3.0, "11").values == 1)
    with pytest.raises(ValueError):
        pstar_shoot(1.0, "02")
    with pytest.raises(ValueError):
        pstar_shoot(0.0, "01")


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_pstar_01(alpha):
    p = pstar_shoot(alpha, "01")
    v = p.values
    assert v.size == 41 and v[0] == 0 and v[-1] == 1
    assert np.all(np.diff(v) >= 0) and np.all(np.diff(v, 2) <= 1e-12)
    assert ode_residual(p) < 1e-6
    assert max(boundary_identity_gaps(p)) < 1e-3
    assert p(0.5) == pytest.approx(P01_HALF[alpha], abs=1e-6)


def test_pstar_alpha1_slope():
    assert pstar_shoot(1.0, "01").meta["slope"] == pytest.approx(2.25, abs=1e-5)


def test_pstar_mirror():
    p, q = pstar_shoot(2.0, "01"), pstar_shoot(2.0, "10")
    np.testing.assert_allclose(q.values, p.values[::-1])
    assert max(boundary_identity_gaps(q)) < 1e-3


def test_pstar_00_supercritical():
    p = pstar_shoot(2.0, "00")
    assert p.values[0] == 0 and p.values[-1] == 0
    assert p.values.max() > 0.05
    assert ode_residual(p) < 1e-6
    np.testing.assert_allclose(p.values, p.values[::-1], atol=1e-6)


def test_pstar_grid_refinement():
    a, b = pstar_shoot(1.0, "01", m=20), pstar_shoot(1.0, "01", m=40)
    np.testing.assert_allclose(a.values, b.values[::2], atol=1e-12)


def test_limit_class():
    x = np.linspace(0, 1, 11)
    assert limit_class(0 * x) == "0"
    assert limit_class(x * (1 - x)) == "00"
    assert limit_class(x) == "01"
    assert limit_class(1 - x) == "10"
    assert limit_class(0.1 + 0 * x) == "11"


def test_cauchy_zero_and_stationary_pstar():
    assert np.all(cauchy_solve(np.zeros(21), 1.0, 3.0).final.values == 0)
    p = pstar_shoot(1.0, "01")
    drift = np.abs(cauchy_solve(p, 1.0, 5.0).final.values - p.values).max()
    assert drift < 1e-3


def test_cauchy_to_p10():
    x = np.linspace(0, 1, 41)
    u = cauchy_solve(1 - x, 2.0, 40.0).final
    assert u.sup_distance(pstar_shoot(2.0, "10")) < 1e-2


def test_cauchy_dt_limit_and_errors():
    with pytest.raises(ValueError):
        cauchy_solve(np.ones(11), 1.0, 1.0, dt=0.1)
    with pytest.raises(ValueError):
        cauchy_solve(-np.ones(11), 1.0, 1.0)


@settings(max_examples=15, deadline=None)
@given(f=st.lists(st.floats(0.0, 3.0), min_size=11, max_size=11),
       g=st.lists(st.floats(0.0, 3.0), min_size=11, max_size=11))
def test_comparison_principle(f, g):
    lo = np.minimum(f, g)
    hi = np.maximum(f, g)
    a = cauchy_solve(lo, 1.5, 1.0, snapshots=[0.25, 0.5, 1.0])
    b = cauchy_solve(hi, 1.5, 1.0, snapshots=[0.25, 0.5, 1.0])
    assert np.all(a.values <= b.values)


def test_upper_bound_from_infinity():
    u = cauchy_solve(np.full(41, 1e6), 1.0, 2.0, snapshots=[0.5, 1.0, 2.0])
    for t, v in zip(u.times[1:], u.values[1:]):
        assert v.max() <= upper_bound_infinite(1.0, t) * (1 + 1e-9)


def test_cauchy_grid_refinement():
    x20, x40 = np.linspace(0, 1, 21), np.linspace(0, 1, 41)
    d20 = cauchy_solve(x20, 0.5, 40.0).final.sup_distance(cauchy_limit(x20, 0.5, m=20))
    d40 = cauchy_solve(x40, 0.5, 40.0).final.sup_distance(cauchy_limit(x40, 0.5, m=40))
    assert abs(d20 - d40) < 0.3 * 1e-2


def test_gamma_zero_trivial():
    for c in (0.0, 1.0):
        sup, it, pde = gamma_zero_limit_check(np.full(41, c))
        assert sup == 0.0
        np.testing.assert_array_equal(pde.values, c)
    with pytest.raises(ValueError):
        gamma_zero_limit_check(np.zeros(41), alpha=2.0)


def test_gridfn():
    g = GridFn1D.from_callable(lambda x: x**2, m=4)
    assert g.h == 0.25 and g(0.5) == 0.25
    with pytest.raises(ValueError):
        GridFn1D(np.array([np.nan, 1.0]))
    assert issubclass(PDEError, RuntimeError)
