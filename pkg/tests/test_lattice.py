import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ipslab.lattice import (LatticeError, build_lattice, dk_series, hierarchical_kernel, hierarchical_rate,
                            kernel_from_base, ls_weights, nearest_neighbor_kernel, reverse_kernel)


def test_torus_cycle():
    lat = build_lattice("torus", d=1, L=5)
    assert lat.n == 5
    assert all(len(lat.neighbors(i)) == 2 for i in lat.sites)
    assert all(lat.op(lat.origin, i) == i for i in lat.sites)


def test_tree_ball_count():
    lat = build_lattice("tree_ball", d=2, depth=2)
    assert lat.n == 10
    assert not lat.is_group
    assert lat.boundary_mode == "killed"
    with pytest.raises(LatticeError):
        build_lattice("tree_ball", d=2, depth=2, boundary="periodic")


def test_hierarchical_counting():
    lat = build_lattice("hierarchical", N=2, depth=3)
    assert lat.n == 8
    dist = lat.hierarchical_distance(np.arange(8)[:, None], np.arange(8)[None, :])
    assert set(np.unique(dist)) <= {0, 1, 2, 3}
    assert np.all(np.diag(dist) == 0)
    assert all(lat.op(lat.origin, i) == i for i in lat.sites)
    assert all(lat.op(i, lat.inv(i)) == lat.origin for i in lat.sites)


@pytest.mark.parametrize("kind,params", [("torus", {"d": 1, "L": 1}), ("torus", {"d": 0, "L": 4}),
                                         ("tree_ball", {"d": 1, "depth": 2}),
                                         ("hierarchical", {"N": 1, "depth": 2}),
                                         ("hierarchical", {"N": 2, "depth": 0}), ("cube", {})])
def test_invalid_params(kind, params):
    with pytest.raises(LatticeError):
        build_lattice(kind, **params)


def test_nn_row_sums():
    lat = build_lattice("torus", d=1, L=5)
    k = kernel_from_base(lat, {1: 1.0, -1: 1.0})
    assert k.total == pytest.approx(2.0)
    np.testing.assert_allclose(k.out_rate, 2.0)
    assert k.is_translation_invariant()


def test_negative_rate_rejected():
    lat = build_lattice("torus", d=1, L=5)
    with pytest.raises(LatticeError):
        kernel_from_base(lat, {1: -1.0})


def test_hierarchical_rate_partial_sum():
    # sum_{k>=1} 1/2^(2k-1) = (1/2) / (1 - 1/4)
    assert hierarchical_rate(lambda k: 1.0, 2, 1) == pytest.approx(2.0 / 3.0, abs=1e-11)
    direct = sum(1.0 / 2 ** (2 * l - 1) for l in range(2, 60))
    assert hierarchical_rate([1.0], 2, 2) == pytest.approx(direct, abs=1e-11)
    lat = build_lattice("hierarchical", N=2, depth=3)
    k = hierarchical_kernel(lat, lambda j: 1.0)
    A = k.dense()
    d = lat.hierarchical_distance(np.arange(8)[:, None], np.arange(8)[None, :])
    np.testing.assert_allclose(A[d == 1], 2.0 / 3.0, atol=1e-11)
    assert k.is_translation_invariant()


def test_hierarchical_killed_leak():
    lat = build_lattice("hierarchical", boundary="killed", N=2, depth=3)
    k = hierarchical_kernel(lat, lambda j: 1.0)
    # jumps beyond depth: sum_{k>3} 2^(k-1) * a(k), a(k) = (2/3) 4^(1-k)
    leak = sum(2 ** (j - 1) * (2.0 / 3.0) * 4.0 ** (1 - j) for j in range(4, 80))
    np.testing.assert_allclose(k.leak, leak, atol=1e-10)


def test_reverse_symmetric_and_drift():
    lat = build_lattice("torus", d=1, L=5)
    sym = nearest_neighbor_kernel(lat, 1.0)
    assert (reverse_kernel(sym).rates != sym.rates).nnz == 0
    drift = kernel_from_base(lat, {1: 2.0, -1: 1.0})
    rev = reverse_kernel(drift)
    assert rev.dense()[0, 1] == 1.0 and rev.dense()[0, 4] == 2.0
    back = reverse_kernel(rev)
    assert (back.rates != drift.rates).nnz == 0


@settings(max_examples=25, deadline=None)
@given(L=st.integers(2, 9), d=st.integers(1, 2),
       rates=st.lists(st.floats(0.0, 5.0), min_size=3, max_size=3))
def test_translation_invariance_scan(L, d, rates):
    lat = build_lattice("torus", d=d, L=L)
    if d == 1:
        base = {1: rates[0], -1: rates[1], 2: rates[2]}
    else:
        base = {(1, 0): rates[0], (0, -1): rates[1], (1, 1): rates[2]}
    k = kernel_from_base(lat, base)
    A = k.dense()
    for g in lat.sites:
        perm = np.array([lat.op(g, i) for i in lat.sites])
        np.testing.assert_allclose(A[np.ix_(perm, perm)], A, atol=1e-14)
    np.testing.assert_allclose(A.sum(axis=1), k.total, atol=1e-12)
    assert (reverse_kernel(reverse_kernel(k)).rates != k.rates).nnz == 0


def test_hierarchical_translation_scan():
    lat = build_lattice("hierarchical", N=3, depth=3)
    k = hierarchical_kernel(lat, lambda j: 2.0 ** -j)
    A = k.dense()
    for g in lat.sites:
        perm = np.array([lat.op(g, i) for i in lat.sites])
        np.testing.assert_allclose(A[np.ix_(perm, perm)], A, atol=1e-14)


def test_ls_weights_trivial_constant():
    lat = build_lattice("torus", d=1, L=7)
    k = kernel_from_base(lat, {1: 2.0, -1: 0.5})
    As = k.dense() + k.dense().T
    ones = np.ones(lat.n)
    assert np.all(As @ ones <= 2 * k.total * ones + 1e-12)


@pytest.mark.parametrize("eps", [0.1, 1.0, 5.0])
def test_ls_weights_inequality_scan(eps):
    lat = build_lattice("torus", d=1, L=11)
    k = kernel_from_base(lat, {1: 2.0, -1: 0.5, 3: 0.25})
    w = ls_weights(k, eps)
    As = k.dense() + k.dense().T
    assert np.all(w.gamma > 0)
    assert np.all(As @ w.gamma <= w.K * w.gamma * (1 + 1e-12))


def test_ls_weights_large_eps_near_seed():
    lat = build_lattice("torus", d=1, L=9)
    k = nearest_neighbor_kernel(lat, 1.0)
    w = ls_weights(k, 30.0)
    g = w.gamma / w.gamma.max()
    assert g[0] == 1.0
    assert g[1:].max() < 1e-12


def test_dk_series_recurrent():
    res = dk_series(lambda k: 1.0, 2, 30)
    np.testing.assert_allclose(res.d, 2.0, rtol=1e-10)
    np.testing.assert_allclose(np.diff(res.partial_sums), 0.5, rtol=1e-10)
    assert res.verdict == "recurrent"


def test_dk_series_transient():
    # c_k = 4^k needs N > 4 for a finite d_k; N = 8 gives d_k = 2 * 4^k
    res = dk_series(lambda k: 4.0**k, 8, 20)
    np.testing.assert_allclose(res.d, 2.0 * 4.0 ** np.arange(21), rtol=1e-10)
    assert res.verdict == "transient"
    assert res.tail_estimate == pytest.approx(sum(1 / (2 * 4.0**k) for k in range(21, 200)), rel=1e-6)


def test_dk_series_errors_and_first_term():
    with pytest.raises(LatticeError):
        dk_series(lambda k: 4.0**k, 2, 5)
    with pytest.raises(LatticeError):
        dk_series([1.0, 0.0], 2, 3)
    res = dk_series([3.0, 1.0], 2, 0)
    assert res.d[0] >= 3.0
