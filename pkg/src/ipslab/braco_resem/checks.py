"""Duality, Poissonization, martingale and maximal-process checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from ..oracle import braco_generator, kmom_exceedance_bound, transient_distribution
from ..stats import Estimate, mean_se, z_score
from .core import BracoParams, ResemParams, braco_paths, pois, resem_paths, rising_factorial

__all__ = [
    "DualityResult",
    "duality_test",
    "duality_oracle_test",
    "selfduality_test",
    "poissonization_test",
    "submartingale_check",
    "maximal_bound",
    "maximal_bound_check",
    "homconv_check",
    "extinction_growth_proxy",
    "factorial_moment_check",
    "thin_empty_exact",
    "thin_pois_pgf_gap",
    "TrendReport",
    "BoundRow",
    "HomconvReport",
]


@dataclass(frozen=True)
class DualityResult:
    lhs: Estimate
    rhs: Estimate
    z: float
    extra: dict = field(default_factory=dict)

    def passed(self, k: float = 4.0) -> bool:
        return abs(self.z) < k


def _braco_of(p: ResemParams, reverse: bool = False) -> BracoParams:
    bp = BracoParams(p.kernel, p.b, p.c, p.d)
    return bp.reversed() if reverse else bp


def duality_test(params: ResemParams, x, phi, t: float, reps: int, seed: int = 0) -> DualityResult:
    """E^phi[(1 - X_t)^x] for the resem process against E^x[(1 - phi)^{X+_t}].

    X+ is the braco process with the reversed kernel; the two sides use
    independent randomness.
    """
    x = np.asarray(x, dtype=np.int64)
    phi = np.asarray(phi, dtype=float)
    paths = resem_paths(params, phi, [t], reps, seed, key=(21,))[:, -1]
    lhs = mean_se(np.prod((1 - paths) ** x, axis=1))
    run = braco_paths(_braco_of(params, reverse=True), x, [t], reps, seed, key=(22,))
    rhs = mean_se(np.prod((1 - phi) ** run.states[:, -1], axis=1))
    return DualityResult(lhs, rhs, z_score(lhs, rhs))


def duality_oracle_test(params: ResemParams, x, phi, t: float, reps: int, cap: int = 30,
                        seed: int = 0) -> DualityResult:
    """As :func:`duality_test` with the braco side computed exactly on a capped state space.

    The truncation error is bounded by the probability that the uncapped
    chain ever exceeds ``cap`` per site before t (a factorial-moment Doob
    bound), reported in ``extra``.
    """
    x = np.asarray(x, dtype=np.int64)
    phi = np.asarray(phi, dtype=float)
    bp = _braco_of(params, reverse=True)
    gen = braco_generator(bp.kernel, bp.b, bp.c, bp.d, cap)
    p0 = np.zeros(gen.M)
    p0[gen.space.encode(x)] = 1.0
    pt = transient_distribution(gen, p0, t)
    configs = gen.space.all_configs()
    val = float(pt @ np.prod((1 - phi) ** configs, axis=1))
    trunc = kmom_exceedance_bound(int(x.sum()), bp.b, t, cap)
    rhs = Estimate(val, 0.0, 0, {"truncation_bound": trunc})
    paths = resem_paths(params, phi, [t], reps, seed, key=(23,))[:, -1]
    lhs = mean_se(np.prod((1 - paths) ** x, axis=1))
    return DualityResult(lhs, rhs, z_score(lhs, rhs), {"truncation_bound": trunc})


def _need_c(params):
    if not params.c > 0:
        raise ValueError("this identity needs c > 0")


def selfduality_test(params: ResemParams, phi, psi, t: float, reps: int, seed: int = 0) -> DualityResult:
    """E^phi[exp(-(b/c)<X_t, psi>)] against E^psi[exp(-(b/c)<phi, X+_t>)]."""
    _need_c(params)
    theta = params.b / params.c
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    a = resem_paths(params, phi, [t], reps, seed, key=(24,))[:, -1]
    lhs = mean_se(np.exp(-theta * a @ psi))
    bpath = resem_paths(params.reversed(), psi, [t], reps, seed, key=(25,))[:, -1]
    rhs = mean_se(np.exp(-theta * bpath @ phi))
    return DualityResult(lhs, rhs, z_score(lhs, rhs))


def poissonization_test(params: ResemParams, phi, t: float, test_psis, reps: int,
                        seed: int = 0) -> list[DualityResult]:
    """Braco from Pois((b/c) phi) against Pois((b/c) X_t) through E[(1 - psi)^.] per psi."""
    _need_c(params)
    theta = params.b / params.c
    phi = np.asarray(phi, dtype=float)
    x0 = np.stack([pois(theta * phi, seed, key=(26, r)) for r in range(reps)])
    X = braco_paths(_braco_of(params), x0, [t], reps, seed, key=(27,)).states[:, -1]
    Y = resem_paths(params, phi, [t], reps, seed, key=(28,))[:, -1]
    out = []
    for psi in test_psis:
        psi = np.broadcast_to(np.asarray(psi, dtype=float), phi.shape)
        lhs = mean_se(np.prod((1 - psi) ** X, axis=1))
        rhs = mean_se(np.exp(-theta * Y @ psi))
        out.append(DualityResult(lhs, rhs, z_score(lhs, rhs)))
    return out


@dataclass(frozen=True)
class TrendReport:
    t_grid: np.ndarray
    values: list
    diffs: list  # paired estimates of value(t_k) - value(t_0)
    nondecreasing: bool
    flat: bool


def submartingale_check(params: ResemParams, phi0, t_grid, reps: int, seed: int = 0, k: float = 4.0) -> TrendReport:
    """E[exp(-(b/c)|X_t|)] along t_grid; paired differences give the trend verdicts."""
    _need_c(params)
    theta = params.b / params.c
    t_grid = np.asarray(t_grid, dtype=float)
    paths = resem_paths(params, phi0, t_grid, reps, seed, key=(29,))
    f = np.exp(-theta * paths.sum(axis=2))
    values = [mean_se(f[:, j]) for j in range(t_grid.size)]
    diffs = [mean_se(f[:, j] - f[:, 0]) for j in range(t_grid.size)]
    steps = [mean_se(f[:, j + 1] - f[:, j]) for j in range(t_grid.size - 1)]
    nondec = all(s.value > -k * s.se - 1e-15 for s in steps)
    flat = all(abs(s.value) <= k * s.se + 1e-15 for s in diffs)
    return TrendReport(t_grid, values, diffs, nondec, flat)


def maximal_bound(b: float, c: float, d: float, t: float) -> float:
    """Upper bound on E[X^(inf)_t(i)] for the maximal braco process."""
    r = b - d + c
    if r == 0:
        return 1.0 / (c * t)
    return r / (c * (-math.expm1(-r * t)))


@dataclass(frozen=True)
class BoundRow:
    t: float
    cap: int
    estimate: Estimate
    bound: float
    ok: bool


def maximal_bound_check(params: BracoParams, t_grid, reps: int, caps=(1000,), seed: int = 0,
                        k: float = 4.0) -> list[BoundRow]:
    """Start every site at ``cap`` particles and compare E[X_t(i)] with the bound.

    The estimate averages X_t(i) over sites within each replica.
    """
    if not params.c > 0:
        raise ValueError("the maximal process needs c > 0")
    n = params.kernel.n
    t_grid = np.asarray(t_grid, dtype=float)
    rows = []
    for cap in caps:
        run = braco_paths(params, np.full(n, int(cap)), t_grid, reps, seed, key=(30, int(cap)))
        for j, t in enumerate(t_grid):
            est = mean_se(run.states[:, j, :].mean(axis=1))
            bnd = maximal_bound(params.b, params.c, params.d, t)
            rows.append(BoundRow(float(t), int(cap), est, bnd, est.value <= bnd + k * est.se))
    return rows


@dataclass(frozen=True)
class HomconvReport:
    t_end: float
    hist_pois: np.ndarray
    hist_max: np.ndarray
    tv: float


def homconv_check(params: BracoParams, t_end: float, reps: int, cap: int = 1000, trunc: int = 5,
                  seed: int = 0) -> HomconvReport:
    """TV distance of pooled single-site count histograms (counts >= trunc lumped).

    Initial laws: i.i.d. Poisson(1) and the constant state ``cap``.
    """
    n = params.kernel.n
    x_pois = np.stack([pois(np.ones(n), seed, key=(31, r)) for r in range(reps)])
    a = braco_paths(params, x_pois, [t_end], reps, seed, key=(32,)).states[:, -1]
    bmax = braco_paths(params, np.full(n, int(cap)), [t_end], reps, seed, key=(33,)).states[:, -1]

    def hist(s):
        return np.bincount(np.minimum(s.ravel(), trunc), minlength=trunc + 1) / s.size

    ha, hb = hist(a), hist(bmax)
    return HomconvReport(float(t_end), ha, hb, float(0.5 * np.abs(ha - hb).sum()))


def extinction_growth_proxy(params: ResemParams, phi0, T_list, eps: float, reps: int, seed: int = 0) -> list[Estimate]:
    """P[0 < |X_T| < eps * n] at each T (one set of paths recorded on T_list)."""
    n = params.kernel.n
    paths = resem_paths(params, phi0, T_list, reps, seed, key=(34,))
    tot = paths.sum(axis=2)
    return [mean_se((tot[:, j] > 0) & (tot[:, j] < eps * n)) for j in range(len(T_list))]


def factorial_moment_check(params: BracoParams, x0, t: float, kmom: int, reps: int, seed: int = 0):
    """(estimate of E|X_t|^<k>, bound |x0|^<k> e^{k b t})."""
    x0 = np.asarray(x0, dtype=np.int64)
    run = braco_paths(params, x0, [t], reps, seed, key=(35, kmom))
    est = mean_se(rising_factorial(run.states[:, -1].sum(axis=1), kmom))
    bound = float(rising_factorial(x0.sum(), kmom) * math.exp(kmom * params.b * t))
    return est, bound


def thin_empty_exact(x, phi) -> float:
    """P[Thin_phi(x) = 0] by enumerating every keep/discard pattern."""
    x = np.asarray(x, dtype=np.int64)
    phi = np.asarray(phi, dtype=float)
    probs = np.repeat(phi, x)
    total = 0.0
    for keep in itertools.product((0, 1), repeat=probs.size):
        w = float(np.prod(np.where(keep, probs, 1 - probs)))
        if not any(keep):
            total += w
    return total


def thin_pois_pgf_gap(phi, psi, chi, kmax: int = 400) -> float:
    """|E[(1-chi)^{Thin_psi(Pois(phi))}] - E[(1-chi)^{Pois(psi phi)}]|.

    The left side sums the thinned-Poisson law term by term (binomial pgf
    inside a Poisson series); the right side is exp(-<psi phi, chi>).
    """
    phi, psi, chi = (np.asarray(v, dtype=float) for v in (phi, psi, chi))
    k = np.arange(kmax + 1)
    lhs = 1.0
    for f, p, c in zip(phi, psi, chi):
        pmf = sstats.poisson.pmf(k, f)
        lhs *= float(np.sum(pmf * (1 - p * c) ** k))
    rhs = math.exp(-float(np.sum(psi * phi * chi)))
    return abs(lhs - rhs)

