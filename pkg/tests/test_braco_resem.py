import math

import numpy as np
import pytest

from ipslab import oracle
from ipslab.braco_resem import (BracoError, BracoParams, ResemParams, braco_coupled, braco_hitting_time, braco_paths,
                                duality_test, factorial_moment_check, homconv_check, maximal_bound, pois,
                                poissonization_test, resem_paths, resem_simulate, selfduality_test,
                                submartingale_check, thin, thin_empty_exact, thin_pois_pgf_gap)
from ipslab.lattice import build_lattice, kernel_from_base, nearest_neighbor_kernel


def one_site():
    lat = build_lattice("tree_ball", d=2, depth=0)
    return kernel_from_base(lat, {1: 0.0})


def torus(L, right=1.0, left=None):
    return nearest_neighbor_kernel(build_lattice("torus", d=1, L=L), right, left=left)


def test_pure_death_clock():
    t = braco_hitting_time(BracoParams(one_site(), 0.0, 0.0, 1.0), [1], 0, 200.0, 10_000, seed=1)
    assert np.all(np.isfinite(t))
    assert abs(t.mean() - 1.0) < 4 * t.std(ddof=1) / 100


def test_coalescence_clock():
    t = braco_hitting_time(BracoParams(one_site(), 0.0, 1.0, 0.0), [2], 1, 200.0, 10_000, seed=2)
    assert abs(t.mean() - 0.5) < 4 * t.std(ddof=1) / 100


@pytest.mark.parametrize("k", [1, 2])
def test_factorial_moment_bound(k):
    est, bound = factorial_moment_check(BracoParams(torus(3), 1.0, 1.0, 1.0), [2, 1, 0], 1.0, k, 4000, seed=3)
    assert est.value <= bound + 4 * est.se


def test_guard_aborts():
    with pytest.raises(BracoError):
        braco_paths(BracoParams(one_site(), 5.0, 0.0, 0.0, guard=50), [1], [10.0], 1)


def test_braco_matches_oracle_marginals():
    k = kernel_from_base(build_lattice("torus", d=1, L=2), {1: 1.0})
    cases = [(1.0, 1.0, 1.0, 0.5), (1.0, 1.0, 1.0, 1.5), (0.5, 2.0, 0.2, 1.0), (2.0, 1.0, 0.5, 1.0),
             (0.0, 1.0, 1.0, 1.0), (1.0, 0.5, 0.0, 0.7)]
    for j, (b, c, d, t) in enumerate(cases):
        means = []
        for cap in (40, 60):
            gen = oracle.braco_generator(k, b, c, d, cap)
            p0 = np.zeros(gen.M)
            p0[gen.space.encode([2, 1])] = 1.0
            pt = oracle.transient_distribution(gen, p0, t)
            means.append(float(pt @ gen.space.all_configs()[:, 0]))
        # the truncation is invisible at this precision
        assert abs(means[0] - means[1]) < 1e-8
        exact = means[1]
        run = braco_paths(BracoParams(k, b, c, d), [2, 1], [t], 4000, seed=j)
        x = run.states[:, -1, 0]
        assert abs(x.mean() - exact) < 4 * x.std(ddof=1) / math.sqrt(x.size)


def test_monotone_coupling_per_realization():
    k = torus(4, 1.0, 0.5)
    small = BracoParams(k, 1.0, 1.5, 1.0)
    big = BracoParams(k, 1.5, 1.0, 0.5)
    for r in range(300):
        y, z = braco_coupled(small, big, [1, 0, 2, 0], [2, 1, 2, 0], 2.0, seed=r)
        assert np.all(y <= z)
    with pytest.raises(ValueError):
        braco_coupled(big, small, [0, 0, 0, 0], [0, 0, 0, 0], 1.0)


def test_resem_logistic():
    v = resem_simulate(ResemParams(one_site(), 1.0, 0.0, 0.0, dt=1e-4), [0.5], 1.0)
    assert v[0] == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), abs=1e-3)


def test_resem_traps():
    p = ResemParams(torus(4), 1.0, 1.0, 0.0)
    np.testing.assert_array_equal(resem_paths(p, np.zeros(4), [0.5, 1.0], 20), 0.0)
    np.testing.assert_array_equal(resem_paths(p, np.ones(4), [0.5, 1.0], 20), 1.0)


def test_resem_comparison_shared_noise():
    k = torus(5, 1.0, 0.5)
    lo = ResemParams(k, 1.0, 1.0, 2.0)  # d - b = 1
    hi = ResemParams(k, 1.5, 1.0, 1.0)  # d~ - b~ = -0.5, d~ <= d
    grid = np.linspace(0.0, 2.0, 41)
    phi = np.array([0.1, 0.5, 0.0, 0.3, 0.9])
    a = resem_paths(lo, phi, grid, 100, seed=4)
    b = resem_paths(hi, np.minimum(phi + 0.1, 1.0), grid, 100, seed=4)
    assert np.all(a <= b)


def test_thin_and_pois():
    x = np.array([3, 0, 5])
    np.testing.assert_array_equal(thin(x, 1.0), x)
    np.testing.assert_array_equal(thin(x, 0.0), 0)
    for xs in ([1], [2, 1], [1, 1, 1], [3], [0, 2]):
        phi = np.linspace(0.2, 0.7, len(xs))
        assert thin_empty_exact(xs, phi) == pytest.approx(np.prod((1 - phi) ** np.array(xs)), abs=1e-15)
    draws = np.array([thin([2, 1], [0.3, 0.6], seed=0, key=(r,)) for r in range(20_000)])
    p = np.mean(draws.sum(axis=1) == 0)
    assert abs(p - 0.7**2 * 0.4) < 4 * math.sqrt(p * (1 - p) / 20_000)
    assert pois(np.zeros(3)).sum() == 0


def test_thinned_poisson_pgf():
    assert thin_pois_pgf_gap([0.7, 1.3, 2.0], [0.4, 0.9, 0.1], [0.5, 0.2, 1.0]) < 1e-12
    assert thin_pois_pgf_gap([3.0, 0.1, 0.5], [1.0, 0.0, 0.5], [0.3, 0.8, 0.6]) < 1e-12


def test_duality_trivial_cases():
    p = ResemParams(torus(3, 1.0, 0.5), 1.0, 1.0, 1.0)
    x, phi = np.array([2, 0, 1]), np.array([0.3, 0.6, 0.2])
    r = duality_test(p, x, phi, 0.0, 50)
    target = float(np.prod((1 - phi) ** x))
    assert r.lhs.value == pytest.approx(target, abs=1e-15) and r.rhs.value == pytest.approx(target, abs=1e-15)
    r = duality_test(p, x, np.zeros(3), 1.0, 50)
    assert r.lhs.value == 1.0 and r.rhs.value == 1.0


def test_selfduality_trivial_cases():
    p = ResemParams(torus(3, 1.0, 0.5), 1.0, 1.0, 0.0)
    phi, psi = np.array([0.8, 0.1, 0.4]), np.array([0.3, 0.6, 0.2])
    r = selfduality_test(p, phi, psi, 0.0, 20)
    assert r.lhs.value == pytest.approx(math.exp(-phi @ psi)) and r.rhs.value == pytest.approx(math.exp(-phi @ psi))
    r = selfduality_test(p, np.zeros(3), psi, 1.0, 20)
    assert r.lhs.value == 1.0 and r.rhs.value == 1.0
    with pytest.raises(ValueError):
        selfduality_test(ResemParams(torus(3), 1.0, 0.0, 0.0), phi, psi, 1.0, 5)


def test_poissonization_trivial_cases():
    p = ResemParams(torus(3), 2.0, 1.0, 1.0)
    r = poissonization_test(p, np.full(3, 0.5), 1.0, [np.zeros(3)], 50)[0]
    assert r.lhs.value == 1.0 and r.rhs.value == 1.0
    r = poissonization_test(p, np.full(3, 0.5), 0.0, [np.full(3, 0.5)], 4000, seed=1)[0]
    assert r.rhs.value == pytest.approx(math.exp(-2 * 0.75))
    assert abs(r.z) < 4


def test_submartingale_zero_start():
    rep = submartingale_check(ResemParams(torus(3), 1.0, 1.0, 1.0), np.zeros(3), [0.0, 0.5, 1.0], 20)
    assert all(v.value == 1.0 for v in rep.values)
    assert rep.flat and rep.nondecreasing


def test_maximal_bound_values():
    assert maximal_bound(1, 1, 0, math.log(2)) == pytest.approx(8 / 3)
    assert maximal_bound(0, 1, 1, 2.0) == pytest.approx(0.5)
    assert maximal_bound(0, 1, 2, math.log(2)) == pytest.approx(1.0)


def test_homconv_trivial():
    rep = homconv_check(BracoParams(torus(4), 4.0, 1.0, 1.0), 0.0, 200, cap=50)
    assert rep.tv > 0.95
    rep = homconv_check(BracoParams(torus(4), 1.0, 1.0, 20.0), 3.0, 200, cap=50)
    assert rep.tv == 0.0
    assert rep.hist_pois[0] == 1.0
