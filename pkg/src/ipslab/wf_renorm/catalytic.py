"""Catalytic two-component Wright-Fisher equilibria and binary splitting diffusions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from ..stats import Estimate, mean_se
from ._kernels import binsplit_run, catalytic_averages

__all__ = ["CatalyticMoments", "catalytic_equilibrium", "BinsplitResult", "binsplit_simulate"]

_NAMES = ("y1", "y2", "y1sq", "y2sq", "y1y2", "w11", "w22")


@dataclass(frozen=True)
class CatalyticMoments:
    """Equilibrium time averages with batch-means SEs.

    ``F`` holds the estimated renormalized matrix entries: F11 = E[alpha y1(1-y1)],
    F22 = E[p(y1) y2(1-y2)], F12 = 0.
    """

    x: tuple
    c: float
    alpha: float
    moments: dict
    mean_deviation: tuple
    F: dict

    def __getitem__(self, name) -> Estimate:
        return self.moments[name]


def catalytic_equilibrium(x, c: float, alpha: float, p, dt: float = 1e-3, burn: float = 50.0,
                          duration: float = 2000.0, seed: int = 0, nbatch: int = 40,
                          key: tuple = ()) -> CatalyticMoments:
    """Long-run averages of the catalytic SDE attracted to x = (x1, x2).

    dy1 = c (x1 - y1) dt + sqrt(2 alpha y1 (1-y1)) dB1,
    dy2 = c (x2 - y2) dt + sqrt(2 p(y1) y2 (1-y2)) dB2,
    integrated by clamped Euler-Maruyama; p is a CatalyzingFn.
    """
    if not (c > 0 and alpha > 0):
        raise ValueError("c and alpha must be positive")
    x1, x2 = (float(v) for v in x)
    pvals = np.asarray(p.values, dtype=float)
    n_steps = int(duration / dt)
    s = rng.derive_seed(seed, "catalytic", *key)
    batches = catalytic_averages(x1, x2, float(c), float(alpha), pvals, float(dt), int(burn / dt), n_steps,
                                 int(nbatch), s)
    mom = {}
    for j, name in enumerate(_NAMES):
        col = batches[:, j]
        mom[name] = Estimate(float(col.mean()), float(col.std(ddof=1) / np.sqrt(col.size)), col.size)
    mom["w11"] = Estimate(alpha * mom["w11"].value, alpha * mom["w11"].se, mom["w11"].n)
    dev = (Estimate(mom["y1"].value - x1, mom["y1"].se), Estimate(mom["y2"].value - x2, mom["y2"].se))
    F = {"11": mom["w11"], "22": mom["w22"], "12": Estimate(0.0, 0.0)}
    return CatalyticMoments((x1, x2), float(c), float(alpha), mom, dev, F)


@dataclass(frozen=True)
class BinsplitResult:
    p_alive: Estimate  # P[Y_T((0,1]) > 0]
    p_hit_one: Estimate  # P[some particle reached 1 by T]
    p_interior: Estimate  # P[interior particles remain at T, none at 1]
    guard_hits: int


def binsplit_simulate(alpha: float, x0: float, T: float, reps: int, dt: float = 1e-3, seed: int = 0,
                      guard: int = 100_000, tol: float = 1e-12) -> BinsplitResult:
    """Driftless Wright-Fisher particles (generator x(1-x)/2 d^2) splitting at rate alpha.

    A particle that reaches 1 stays there, so the run stops at the first
    such hit; particles absorbed at 0 are dropped.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0 <= x0 <= 1:
        raise ValueError("x0 must lie in [0, 1]")
    seeds = rng.kernel_seeds(seed, "binsplit", reps)
    status = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        status[r] = binsplit_run(float(x0), float(alpha), float(T), float(dt), seeds[r], int(guard), float(tol))[0]
    guard_hits = int(np.sum(status == 3))
    if guard_hits:
        raise RuntimeError(f"binary splitting population exceeded guard {guard} in {guard_hits} replicas")
    return BinsplitResult(mean_se((status == 1) | (status == 2)), mean_se(status == 1), mean_se(status == 2),
                          guard_hits)
