"""Braco (branching-coalescing) and resem (resampling-selection) simulators."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import rng
from ..lattice import Kernel, reverse_kernel
from ._kernels import gillespie, gillespie_coupled, resem_path

__all__ = [
    "BracoError",
    "BracoParams",
    "ResemParams",
    "BracoRun",
    "braco_simulate",
    "braco_paths",
    "braco_hitting_time",
    "braco_coupled",
    "resem_simulate",
    "resem_paths",
    "thin",
    "pois",
    "rising_factorial",
    "DEFAULT_GUARD",
]

DEFAULT_GUARD = 10_000_000


class BracoError(RuntimeError):
    pass


@dataclass(frozen=True)
class BracoParams:
    kernel: Kernel
    b: float
    c: float
    d: float
    guard: int = DEFAULT_GUARD

    def __post_init__(self):
        if min(self.b, self.c, self.d) < 0:
            raise ValueError("rates b, c, d must be nonnegative")

    def reversed(self) -> "BracoParams":
        return replace(self, kernel=reverse_kernel(self.kernel))


@dataclass(frozen=True)
class ResemParams:
    kernel: Kernel
    b: float
    c: float
    d: float
    dt: float = 1e-3

    def __post_init__(self):
        if min(self.b, self.c, self.d) < 0:
            raise ValueError("rates b, c, d must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def reversed(self) -> "ResemParams":
        return replace(self, kernel=reverse_kernel(self.kernel))


def _csr(kernel: Kernel):
    R = kernel.rates.tocsr()
    R.sort_indices()
    leak = kernel.leak if kernel.leak is not None else np.zeros(kernel.n)
    mig = np.asarray(R.sum(axis=1)).ravel()
    return (R.indptr.astype(np.int64), R.indices.astype(np.int64), R.data.astype(float),
            mig.astype(float), np.asarray(leak, dtype=float))


def _as_counts(x0, n) -> np.ndarray:
    x = np.asarray(x0, dtype=np.int64).copy()
    if x.shape != (n,) or np.any(x < 0):
        raise ValueError(f"initial counts must be a nonnegative vector of length {n}")
    return x


@dataclass(frozen=True)
class BracoRun:
    grid: np.ndarray
    states: np.ndarray  # (reps, len(grid), n)
    events: np.ndarray


def braco_simulate(params: BracoParams, x0, t: float, seed: int = 0, key: tuple = ()) -> np.ndarray:
    """One exact-in-law sample of X_t from x0."""
    return braco_paths(params, x0, [t], 1, seed, key).states[0, -1]


def braco_paths(params: BracoParams, x0, grid, reps: int, seed: int = 0, key: tuple = ()) -> BracoRun:
    """Independent replicas recorded on ``grid``; replica r uses stream (seed, *key, r).

    ``x0`` may be one configuration or a (reps, n) array of initial states.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0) or np.any(grid < 0):
        raise ValueError("grid must be nondecreasing and nonnegative")
    n = params.kernel.n
    indptr, indices, data, mig, leak = _csr(params.kernel)
    x0 = np.asarray(x0, dtype=np.int64)
    per_rep = x0.ndim == 2
    seeds = rng.kernel_seeds(seed, "braco", reps, *key)
    out = np.empty((reps, grid.size, n), dtype=np.int64)
    ev = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        x = _as_counts(x0[r] if per_rep else x0, n)
        rec, t_stop, status, events = gillespie(x, indptr, indices, data, mig, leak, float(params.b),
                                                float(params.c), float(params.d), grid, seeds[r],
                                                int(params.guard), -1)
        if status == 1:
            raise BracoError(f"population exceeded guard {params.guard} at t={t_stop:.4g} "
                             f"in replica {r} after {events} events")
        out[r] = rec
        ev[r] = events
    return BracoRun(grid, out, ev)


def braco_hitting_time(params: BracoParams, x0, total: int, t_max: float, reps: int, seed: int = 0,
                       key: tuple = ()) -> np.ndarray:
    """Times at which |X| first equals ``total`` (inf if not by t_max)."""
    n = params.kernel.n
    indptr, indices, data, mig, leak = _csr(params.kernel)
    seeds = rng.kernel_seeds(seed, "braco", reps, 7, *key)
    grid = np.array([float(t_max)])
    out = np.full(reps, np.inf)
    for r in range(reps):
        x = _as_counts(x0, n)
        _, t_stop, status, _ = gillespie(x, indptr, indices, data, mig, leak, float(params.b),
                                         float(params.c), float(params.d), grid, seeds[r],
                                         int(params.guard), int(total))
        if status == 2:
            out[r] = t_stop
    return out


def braco_coupled(p: BracoParams, p_big: BracoParams, x0, x0_big, t: float, seed: int = 0,
                  key: tuple = ()) -> tuple[np.ndarray, np.ndarray]:
    """Sample (X_t, X~_t) from the two-colour coupling, which keeps X_t <= X~_t.

    Needs x0 <= x0_big, b <= b~, c >= c~, d >= d~ and a common kernel.
    """
    if p.kernel is not p_big.kernel:
        raise ValueError("coupled systems must share the kernel")
    if not (p.b <= p_big.b and p.c >= p_big.c and p.d >= p_big.d):
        raise ValueError("coupling needs b <= b~, c >= c~, d >= d~")
    x0 = _as_counts(x0, p.kernel.n)
    x1 = _as_counts(x0_big, p.kernel.n)
    if np.any(x0 > x1):
        raise ValueError("coupling needs x0 <= x0~")
    indptr, indices, data, mig, leak = _csr(p.kernel)
    s = rng.derive_seed(seed, "braco", 11, *key)
    y, z, _ = gillespie_coupled(x0.copy(), x1 - x0, indptr, indices, data, mig, leak, float(p.b), float(p.c),
                                float(p.d), float(p_big.b), float(p_big.c), float(p_big.d), float(t), s)
    return y, y + z


def _resem_inputs(params: ResemParams):
    # drift at i uses inflow sum_j a(j, i) x(j): rows of the transposed matrix
    AT = params.kernel.rates.T.tocsr()
    AT.sort_indices()
    inflow = np.asarray(AT.sum(axis=1)).ravel().astype(float)
    return AT.indptr.astype(np.int64), AT.indices.astype(np.int64), AT.data.astype(float), inflow


def resem_paths(params: ResemParams, phi0, grid, reps: int, seed: int = 0, key: tuple = ()) -> np.ndarray:
    """Replicas of the resem process on ``grid``; returns (reps, len(grid), n).

    Grid times are rounded to the step lattice k * dt.  Replica r uses
    stream (seed, *key, r), so two calls with equal seeds share Gaussians.
    """
    n = params.kernel.n
    phi0 = np.asarray(phi0, dtype=float)
    grid = np.asarray(grid, dtype=float)
    steps = np.rint(grid / params.dt).astype(np.int64)
    if np.any(np.diff(steps) < 0) or np.any(steps < 0):
        raise ValueError("grid must be nondecreasing and nonnegative")
    per_rep = phi0.ndim == 2
    if np.any(phi0 < 0) or np.any(phi0 > 1):
        raise ValueError("densities must lie in [0, 1]")
    indptr, indices, data, inflow = _resem_inputs(params)
    seeds = rng.kernel_seeds(seed, "resem", reps, *key)
    out = np.empty((reps, grid.size, n))
    n_steps = int(steps[-1]) if steps.size else 0
    for r in range(reps):
        p = phi0[r] if per_rep else phi0
        if p.shape != (n,):
            raise ValueError(f"phi0 must have length {n}")
        out[r] = resem_path(p.astype(float), indptr, indices, data, inflow, float(params.b), float(params.c),
                            float(params.d), float(params.dt), n_steps, steps, seeds[r])
    return out


def resem_simulate(params: ResemParams, phi0, t: float, seed: int = 0, key: tuple = ()) -> np.ndarray:
    return resem_paths(params, phi0, [t], 1, seed, key)[0, -1]


def thin(x, phi, seed: int = 0, key: tuple = ()) -> np.ndarray:
    """Keep each particle at site i independently with probability phi(i)."""
    x = np.asarray(x, dtype=np.int64)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), x.shape)
    if np.any(phi < 0) or np.any(phi > 1):
        raise ValueError("thinning probabilities must lie in [0, 1]")
    return rng.stream(seed, "thin", *key).binomial(x, phi)


def pois(phi, seed: int = 0, key: tuple = ()) -> np.ndarray:
    """Independent Poisson(phi(i)) counts."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ValueError("Poisson intensities must be nonnegative")
    return rng.stream(seed, "thin", 1, *key).poisson(phi)


def rising_factorial(z, k: int):
    """z^<k> = z (z+1) ... (z+k-1)."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    for m in range(k):
        out = out * (z + m)
    return out
