"""Wright-Fisher stationary laws, the log-Laplace operator U_gamma and its iterates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sstats

from .. import rng
from ..stats import Estimate, batch_means, mean_se
from ._kernels import driftless_alive, stationary_path, u_integral_paths, u_product_paths, u_weighted_paths

__all__ = [
    "CatalyzingFn",
    "GammaSchedule",
    "WFPathParams",
    "H00",
    "H01",
    "H11",
    "H1",
    "beta_stationary_sample",
    "beta_moment",
    "beta_expect_linear",
    "wf_fixed_shape_gap",
    "wf_stationary_path",
    "path_average",
    "default_dt",
    "u_gamma_apply",
    "u_gamma_apply_product",
    "u_gamma_constant",
    "iterate_renorm",
    "ancestral_chain",
    "kyy_sample",
    "kyy_moment",
    "absorption_check",
    "absorption_bound",
]

DEFAULT_M = 40


@dataclass(frozen=True, eq=False)
class CatalyzingFn:
    """Nonnegative function on the uniform grid x_k = k/m with per-point SE."""

    values: np.ndarray
    se: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a catalyzing function needs at least two grid values")
        if np.any(v < 0):
            raise ValueError("catalyzing functions are nonnegative")
        object.__setattr__(self, "values", v)
        if self.se is not None:
            object.__setattr__(self, "se", np.asarray(self.se, dtype=float))

    @classmethod
    def from_callable(cls, f: Callable, m: int = DEFAULT_M, label: str = "") -> "CatalyzingFn":
        x = np.linspace(0.0, 1.0, m + 1)
        return cls(np.asarray(f(x), dtype=float) * np.ones_like(x), None, label)

    @property
    def m(self) -> int:
        return self.values.size - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    @property
    def tag(self) -> tuple[int, int]:
        """(1{p(0) > 0}, 1{p(1) > 0})."""
        return int(self.values[0] > 0), int(self.values[-1] > 0)

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    def sup_distance(self, other) -> float:
        o = other.values if isinstance(other, CatalyzingFn) else np.asarray(other(self.grid), dtype=float)
        return float(np.max(np.abs(self.values - o)))


def H00(x):
    return x * (1 - x)


def H01(x):
    return 1 - (1 - x) ** 7


def H11(x):
    return np.ones_like(np.asarray(x, dtype=float))


def H1(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class GammaSchedule:
    """gamma_n = 1 / (sbar_n c_n) with sbar_n = beta + sum_{k<n} 1/c_k."""

    c: Callable[[int], float] | Sequence[float]
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @classmethod
    def geometric(cls, gamma_star: float, beta: float | None = None) -> "GammaSchedule":
        """c_k = (1 + gamma*)^{-k}; with beta = 1/gamma* every gamma_n equals gamma*."""
        g = float(gamma_star)
        return cls(lambda k: (1.0 + g) ** (-k), 1.0 / g if beta is None else beta)

    def c_k(self, k: int) -> float:
        v = self.c(k) if callable(self.c) else self.c[k]
        if not v > 0:
            raise ValueError("migration constants must be positive")
        return float(v)

    def s(self, n: int) -> float:
        return float(sum(1.0 / self.c_k(k) for k in range(n)))

    def sbar(self, n: int) -> float:
        return self.beta + self.s(n)

    def gamma(self, n: int) -> float:
        return 1.0 / (self.sbar(n) * self.c_k(n))

    def gammas(self, n: int) -> np.ndarray:
        return np.array([self.gamma(k) for k in range(n)])


@dataclass(frozen=True)
class WFPathParams:
    gamma: float
    x: float
    dt: float = 1e-3
    absorb_tol: float = 1e-12

    def __post_init__(self):
        if not self.gamma > 0 or not self.dt > 0:
            raise ValueError("gamma and dt must be positive")
        if not 0 <= self.x <= 1:
            raise ValueError("attraction point must lie in [0, 1]")


def default_dt(gamma: float) -> float:
    return gamma / 200.0


def beta_stationary_sample(x: float, gamma: float, seed: int = 0, size: int | None = None, key: tuple = ()):
    """Draw from Beta(x/gamma, (1-x)/gamma); the traps x = 0, 1 give point masses."""
    if not 0 <= x <= 1 or not gamma > 0:
        raise ValueError("need x in [0, 1] and gamma > 0")
    if x in (0.0, 1.0):
        return float(x) if size is None else np.full(size, float(x))
    return rng.stream(seed, "wf", 1, *key).beta(x / gamma, (1 - x) / gamma, size=size)


def beta_moment(x: float, gamma: float, n: int) -> float:
    """prod_{k<n} (x + k gamma) / (1 + k gamma)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = 1.0
    for k in range(n):
        out *= (x + k * gamma) / (1 + k * gamma)
    return out


def wf_fixed_shape_gap(x, gamma) -> float:
    """|m1 - m2 - x(1-x)/(1+gamma)| for the Beta moments."""
    return abs(beta_moment(x, gamma, 1) - beta_moment(x, gamma, 2) - x * (1 - x) / (1 + gamma))


def wf_stationary_path(params: WFPathParams, duration: float, seed: int = 0, key: tuple = ()) -> np.ndarray:
    """EM path of dy = (x-y)/gamma dt + sqrt(2y(1-y)) dB from the stationary law."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    n = int(math.ceil(duration / params.dt))
    return stationary_path(float(params.x), float(params.gamma), float(params.dt), n,
                           rng.derive_seed(seed, "wf", 2, *key))


def path_average(path, f=lambda y: y, nbatch: int = 20) -> Estimate:
    return batch_means(f(np.asarray(path)), nbatch)


def _apply(kernel, p: CatalyzingFn, gamma: float, mc: int, dt: float | None, seed: int, tag: int,
           key: tuple, points=None):
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    dt = default_dt(gamma) if dt is None else float(dt)
    xs = p.grid if points is None else np.asarray(points, dtype=float)
    vals, ses = np.empty(xs.size), np.empty(xs.size)
    for k, x in enumerate(xs):
        s = rng.derive_seed(seed, "renorm", tag, *key, k)
        samples = kernel(p.values, float(x), float(gamma), dt, int(mc), s)
        e = mean_se(samples)
        vals[k], ses[k] = e.value, e.se
    return xs, vals, ses


def beta_expect_linear(values, x: float, gamma: float) -> float:
    """E[f(Y)] for Y ~ Gamma^gamma_x and f the linear interpolant of ``values`` on the uniform grid."""
    values = np.asarray(values, dtype=float)
    if x <= 0.0:
        return float(values[0])
    if x >= 1.0:
        return float(values[-1])
    a, b = x / gamma, (1.0 - x) / gamma
    knots = np.linspace(0.0, 1.0, values.size)
    slope = np.diff(values) / np.diff(knots)
    dF = np.diff(sstats.beta.cdf(knots, a, b))
    dG = np.diff(sstats.beta.cdf(knots, a + 1, b))
    return float(np.sum((values[:-1] - slope * knots[:-1]) * dF + slope * x * dG))


def _apply_weighted(p: CatalyzingFn, gamma: float, mc: int, dt: float | None, seed: int, key: tuple):
    dt = default_dt(gamma) if dt is None else float(dt)
    scale = gamma * -math.expm1(-5.0)
    vals, ses = np.empty(p.grid.size), np.empty(p.grid.size)
    for k, x in enumerate(p.grid):
        s = rng.derive_seed(seed, "renorm", 3, *key, k)
        smp = u_weighted_paths(p.values, float(x), float(gamma), dt, int(mc), s)
        y, c = smp[:, 0], smp[:, 1]
        cvar = c.var()
        beta = np.cov(y, c)[0, 1] / cvar if cvar > 1e-12 * np.mean(c * c) else 0.0
        adj = y - beta * (c - scale * beta_expect_linear(p.values, x, gamma))
        e = mean_se(adj)
        vals[k], ses[k] = e.value, e.se
    return vals, ses


def u_gamma_apply(p: CatalyzingFn, gamma: float, mc: int = 20_000, dt: float | None = None, seed: int = 0,
                  key: tuple = (), method: str = "integral") -> CatalyzingFn:
    """(1/gamma + 1) E[1 - exp(-2 int_0^{tau/2} p(y(s)) ds)] at each grid point.

    tau ~ Exp(mean gamma); y is the stationary Wright-Fisher path attracted
    to x, run forward (reversibility makes it a copy of the path at negative
    times).  ``method="weighted"`` integrates the clock out over [0, 2.5 gamma],
    which together with a control variate built from the stationary law
    removes most of the variance (useful for small gamma).
    """
    if method not in ("integral", "weighted"):
        raise ValueError(f"unknown method {method!r}")
    if np.all(p.values == 0):
        return CatalyzingFn(np.zeros_like(p.values), np.zeros_like(p.values), f"U{gamma:g}")
    if method == "integral":
        _, v, s = _apply(u_integral_paths, p, gamma, mc, dt, seed, 1, key)
    else:
        v, s = _apply_weighted(p, gamma, mc, dt, seed, key)
    f = 1.0 / gamma + 1.0
    v, s = f * v, f * s
    # the stationary law at a trap is the point mass, so the path is constant there
    for k in (0, -1):
        v[k], s[k] = u_gamma_constant(float(p.values[k]), gamma), 0.0
    return CatalyzingFn(v, s, f"U{gamma:g}")


def u_gamma_apply_product(f: CatalyzingFn, gamma: float, mc: int = 20_000, dt: float | None = None, seed: int = 0,
                          key: tuple = ()) -> CatalyzingFn:
    """1 - E prod_{k: sigma_k < tau'} (1 - f(y(sigma_k))) for f with values in [0, 1]."""
    if np.any(f.values > 1):
        raise ValueError("the product estimator needs 0 <= f <= 1")
    _, v, s = _apply(u_product_paths, f, gamma, mc, dt, seed, 2, key)
    return CatalyzingFn(1.0 - v, s, f"U{gamma:g}prod")


def u_gamma_constant(r: float, gamma: float) -> float:
    """U_gamma of the constant function r."""
    if r == 0:
        return 0.0
    return (1 + gamma) / (1 / r + gamma)


def iterate_renorm(p0: CatalyzingFn, gammas, n: int | None = None, mc: int = 20_000, dt: float | None = None,
                   seed: int = 0, replicates: int = 1, method: str = "integral") -> list[CatalyzingFn]:
    """Iterates U_{gamma_{k-1}} o ... o U_{gamma_0}(p0) for k = 0..n, grid to grid.

    ``gammas`` is a GammaSchedule or a sequence.  With ``replicates > 1`` the
    whole chain is rerun independently and the reported SE is the spread of
    the replicate means; otherwise it is the conditional MC SE of the last
    application.
    """
    if isinstance(gammas, GammaSchedule):
        if n is None:
            raise ValueError("n is needed with a schedule")
        gammas = gammas.gammas(n)
    gammas = np.asarray(gammas, dtype=float)
    n = gammas.size if n is None else n
    if n < 1 or gammas.size < n:
        raise ValueError("need n >= 1 gammas")
    chains = []
    for rep in range(replicates):
        cur = p0
        seq = [p0]
        for k in range(n):
            cur = u_gamma_apply(cur, gammas[k], mc, dt, seed, key=(rep, k), method=method)
            seq.append(cur)
        chains.append(seq)
    if replicates == 1:
        return chains[0]
    out = []
    for k in range(n + 1):
        vals = np.stack([c[k].values for c in chains])
        out.append(CatalyzingFn(vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(replicates),
                                f"iterate{k}"))
    return out


def ancestral_chain(n: int, gamma: float, reps: int, seed: int = 0, return_times: bool = False):
    """psi_inf of the dual chain started at (n, 0).

    From phi lineages: coalescence at rate phi(phi-1), a lineage moves to the
    reservoir at rate phi/gamma.  Runs the jump chain level by level.
    """
    if n < 0 or not gamma > 0:
        raise ValueError("need n >= 0 and gamma > 0")
    g = rng.stream(seed, "ancestral", n)
    psi = np.zeros(reps, dtype=np.int64)
    t = np.zeros(reps)
    for phi in range(n, 0, -1):
        coal = phi * (phi - 1.0)
        res = phi / gamma
        if return_times:
            t += g.exponential(1.0 / (coal + res), size=reps)
        psi += g.random(reps) < res / (coal + res)
    return (psi, t) if return_times else psi


def kyy_sample(x: float, gamma: float, size: int, seed: int = 0, method: str = "rejection") -> np.ndarray:
    """Samples from y(1-y) Gamma^gamma_x(dy), normalised.

    Rejection: propose from the Beta law, accept with probability 4y(1-y).
    Size-biasing Beta(a, b) by y(1-y) gives Beta(a+1, b+1), which is used at
    the traps x in {0, 1} where the proposal is degenerate, or on request.
    """
    g = rng.stream(seed, "wf", 3)
    a, b = x / gamma, (1 - x) / gamma
    if method == "exact" or x in (0.0, 1.0):
        return g.beta(a + 1, b + 1, size=size)
    out = np.empty(0)
    while out.size < size:
        y = g.beta(a, b, size=2 * size)
        out = np.concatenate([out, y[g.random(y.size) < 4 * y * (1 - y)]])
    return out[:size]


def kyy_moment(x: float, gamma: float) -> float:
    """E[y(1-y)] under the size-biased kernel."""
    return (x * (1 - x) + gamma * (1 + gamma)) / ((1 + 2 * gamma) * (1 + 3 * gamma))


def absorption_bound(x: float, t: float) -> float:
    return (4.0 / t + 2.0) * x


def absorption_check(x: float, t: float, n_paths: int = 20_000, dt: float = 1e-3, seed: int = 0,
                     tol: float = 1e-12) -> tuple[Estimate, float]:
    """(estimate of P[y_t > 0] for the driftless diffusion from x, bound (4/t + 2) x)."""
    s = rng.derive_seed(seed, "wf", 4, int(round(x * 1e6)), int(round(t * 1e6)))
    est = mean_se(driftless_alive(float(x), float(t), float(dt), int(n_paths), s, float(tol)))
    return est, absorption_bound(x, t)
