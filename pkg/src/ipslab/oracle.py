"""Exact transient laws of tiny contact and branching-coalescing chains.

Generators are built on an explicit state space and propagated by
uniformization, with the Poisson series truncated where its tail mass drops
below the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .lattice import Kernel, reverse_kernel

__all__ = [
    "OracleError",
    "StateSpace",
    "GeneratorMatrix",
    "contact_generator",
    "contact_hit_matrix",
    "contact_duality_gap",
    "contact_expected_size",
    "braco_generator",
    "transient_distribution",
    "kmom_exceedance_bound",
    "MAX_CONTACT_SITES",
    "MAX_BRACO_STATES",
]

MAX_CONTACT_SITES = 14
MAX_BRACO_STATES = 100_000


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class StateSpace:
    """Bijection between configurations and ``0..M-1``.

    Contact states are bitmasks (bit i = site i infected).  Braco states use
    mixed radix ``cap+1`` with site 0 as the least significant digit.
    """

    n: int
    kind: str  # "contact" or "braco"
    cap: int = 1

    @property
    def M(self) -> int:
        return 2**self.n if self.kind == "contact" else (self.cap + 1) ** self.n

    def encode(self, config) -> int:
        config = np.asarray(config, dtype=np.int64)
        if self.kind == "contact":
            if config.size != self.n or np.any((config != 0) & (config != 1)):
                raise OracleError("contact configurations are 0/1 vectors of length n")
            return int(np.sum(config << np.arange(self.n)))
        if np.any(config < 0) or np.any(config > self.cap):
            raise OracleError("count outside 0..cap")
        return int(np.sum(config * (self.cap + 1) ** np.arange(self.n)))

    def decode(self, index: int) -> np.ndarray:
        if self.kind == "contact":
            return ((int(index) >> np.arange(self.n)) & 1).astype(np.int64)
        base = self.cap + 1
        out = np.empty(self.n, dtype=np.int64)
        v = int(index)
        for i in range(self.n):
            v, out[i] = divmod(v, base)
        return out

    def encode_set(self, sites) -> int:
        """Contact state for a set of infected sites."""
        return int(sum(1 << int(i) for i in set(sites)))

    def all_configs(self) -> np.ndarray:
        """(M, n) array of every configuration in index order."""
        idx = np.arange(self.M)
        if self.kind == "contact":
            return (idx[:, None] >> np.arange(self.n)[None, :]) & 1
        base = self.cap + 1
        return (idx[:, None] // base ** np.arange(self.n)[None, :]) % base


@dataclass(frozen=True)
class GeneratorMatrix:
    space: StateSpace
    Q: sp.csr_matrix

    @property
    def M(self) -> int:
        return self.Q.shape[0]

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(np.asarray(self.Q.sum(axis=1)).ravel()))) if self.M else 0.0

    def dense(self) -> np.ndarray:
        return self.Q.toarray()


def _assemble(rows, cols, vals, M) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    keep = (vals > 0) & (rows != cols)
    off = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(M, M))
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return (off + sp.diags(diag)).tocsr()


def contact_generator(kernel: Kernel, delta: float) -> GeneratorMatrix:
    """Generator of the contact process on the kernel's window.

    From a state A: each i in A recovers at rate ``delta``; each healthy j is
    infected at rate sum_{i in A} a(i, j).
    """
    n = kernel.n
    if n > MAX_CONTACT_SITES:
        raise OracleError(f"contact oracle limited to {MAX_CONTACT_SITES} sites (got {n})")
    if delta < 0:
        raise OracleError("delta must be nonnegative")
    space = StateSpace(n, "contact")
    M = space.M
    A = kernel.dense()
    states = np.arange(M)
    occ = space.all_configs().astype(bool)
    rows, cols, vals = [], [], []
    for i in range(n):
        bit = 1 << i
        has = occ[:, i]
        # recovery
        rows.append(states[has])
        cols.append(states[has] ^ bit)
        vals.append(np.full(has.sum(), float(delta)))
        # infection of i from infected neighbours
        inf_rate = occ.astype(float) @ A[:, i]
        mask = ~has & (inf_rate > 0)
        rows.append(states[mask])
        cols.append(states[mask] | bit)
        vals.append(inf_rate[mask])
    Q = _assemble(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), M)
    return GeneratorMatrix(space, Q)


def contact_hit_matrix(kernel: Kernel, delta: float, t: float, tol: float = 1e-13) -> np.ndarray:
    """H[A, B] = P[eta^A_t meets B] for all pairs of subsets (bitmask indices)."""
    gen = contact_generator(kernel, delta)
    law = transient_distribution(gen, np.eye(gen.M), t, tol)
    idx = np.arange(gen.M)
    meets = (idx[:, None] & idx[None, :]) != 0
    return law @ meets


def contact_duality_gap(kernel: Kernel, delta: float, t: float) -> float:
    """max_{A,B} |P[eta^A_t meets B] - P[eta-dagger^B_t meets A]| with the reversed kernel for the dual."""
    fwd = contact_hit_matrix(kernel, delta, t)
    dual = contact_hit_matrix(reverse_kernel(kernel), delta, t)
    return float(np.max(np.abs(fwd - dual.T)))


def contact_expected_size(kernel: Kernel, delta: float, A, t: float) -> float:
    """E|eta^A_t| computed exactly."""
    gen = contact_generator(kernel, delta)
    p0 = np.zeros(gen.M)
    p0[gen.space.encode_set(A)] = 1.0
    pt = transient_distribution(gen, p0, t, 1e-14)
    return float(pt @ gen.space.all_configs().sum(axis=1))


def braco_generator(kernel: Kernel, b: float, c: float, d: float, cap: int) -> GeneratorMatrix:
    """Generator of the branching-coalescing chain with per-site counts <= cap.

    Rates from x: migration a(i,j)x(i), branching b x(i), coalescence
    c x(i)(x(i)-1), death d x(i); leak mass of killed windows kills particles.
    Births and immigration into a site holding ``cap`` particles are
    suppressed.
    """
    n = kernel.n
    if min(b, c, d) < 0:
        raise OracleError("rates must be nonnegative")
    if cap < 1:
        raise OracleError("cap must be >= 1")
    space = StateSpace(n, "braco", int(cap))
    M = space.M
    if M > MAX_BRACO_STATES:
        raise OracleError(f"(cap+1)^n = {M} exceeds the oracle limit {MAX_BRACO_STATES}")
    X = space.all_configs()
    states = np.arange(M)
    A = kernel.dense()
    leak = kernel.leak if kernel.leak is not None else np.zeros(n)
    w = (cap + 1) ** np.arange(n)
    rows, cols, vals = [], [], []

    def add(mask, target, rate):
        rows.append(states[mask])
        cols.append(target[mask])
        vals.append(np.broadcast_to(rate, states.shape)[mask])

    for i in range(n):
        xi = X[:, i].astype(float)
        pos = X[:, i] > 0
        down = states - w[i]
        add(pos, down, d * xi + leak[i] * xi)
        add(X[:, i] > 1, down, c * xi * (xi - 1))
        add(pos & (X[:, i] < cap), states + w[i], b * xi)
        for j in np.flatnonzero(A[i]):
            add(pos & (X[:, j] < cap), states - w[i] + w[j], A[i, j] * xi)
    Q = _assemble(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), M)
    return GeneratorMatrix(space, Q)


def kmom_exceedance_bound(total0: int, b: float, t: float, cap: int, kmax: int = 400) -> float:
    """Upper bound on P[sup_{s<=t} |X_s| > cap] for the untruncated chain.

    |X_s|^<k> e^{-kbs} is a supermartingale (rising factorial power), so
    Doob's inequality gives the bound total0^<k> e^{kbt} / (cap+1)^<k>,
    minimised over k.
    """
    if total0 == 0:
        return 0.0
    C = cap + 1
    best = 1.0
    log_num = 0.0
    log_den = 0.0
    for k in range(1, kmax + 1):
        log_num += math.log(total0 + k - 1)
        log_den += math.log(C + k - 1)
        val = log_num + k * b * t - log_den
        best = min(best, math.exp(val) if val < 700 else 1.0)
    return best


def _poisson_weights(mu: float, tol: float) -> np.ndarray:
    if mu == 0:
        return np.array([1.0])
    K = int(stats.poisson.isf(tol / 2, mu)) + 1
    while stats.poisson.sf(K, mu) > tol / 2:
        K += max(1, int(math.sqrt(mu)))
    k = np.arange(K + 1)
    return np.exp(stats.poisson.logpmf(k, mu))


def transient_distribution(gen: GeneratorMatrix | sp.spmatrix | np.ndarray, p0, t: float, tol: float = 1e-12) -> np.ndarray:
    """Law at time t from initial law(s) ``p0`` (a vector, or one row per law).

    Uniformization with rate 1.000001 * max|q_ss|; the Poisson series is cut
    once its remaining mass is below ``tol``, so the l1 error is <= tol.
    """
    Q = gen.Q if isinstance(gen, GeneratorMatrix) else sp.csr_matrix(gen)
    p0 = np.asarray(p0, dtype=float)
    if t < 0:
        raise OracleError("t must be nonnegative")
    if t == 0:
        return p0.copy()
    lam = float(np.max(np.abs(Q.diagonal()))) * (1 + 1e-6)
    if lam == 0:
        return p0.copy()
    P = (sp.identity(Q.shape[0], format="csr") + Q / lam).tocsr()
    PT = P.T.tocsr()
    weights = _poisson_weights(lam * t, tol)
    v = p0.T.copy() if p0.ndim == 2 else p0.copy()
    acc = weights[0] * v
    for wk in weights[1:]:
        v = PT @ v
        acc += wk * v
    return acc.T.copy() if p0.ndim == 2 else acc
