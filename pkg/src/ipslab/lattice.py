"""Finite windows of countable groups and translation-invariant kernels.

Three kinds of window are supported:

* ``torus(d, L)``: the box ``{0..L-1}^d``; periodic (a finite group under
  coordinatewise addition mod ``L``) or killed (a box inside Z^d where mass
  leaving the box is lost).
* ``tree_ball(d, depth)``: a ball in the regular tree of degree ``d+1``.
  No group table is kept; only killed boundaries make sense here.
* ``hierarchical(N, depth)``: ``N**depth`` sites with digitwise addition mod
  ``N``, the finite quotient of the hierarchical group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "LatticeError",
    "GroupLattice",
    "Kernel",
    "LSWeights",
    "build_lattice",
    "kernel_from_base",
    "nearest_neighbor_kernel",
    "hierarchical_base",
    "hierarchical_rate",
    "hierarchical_kernel",
    "reverse_kernel",
    "ls_weights",
    "dk_series",
    "DkResult",
]


class LatticeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GroupLattice:
    kind: str
    params: tuple
    n: int
    origin: int
    boundary_mode: str
    coords: np.ndarray | None = None  # torus: (n, d) coordinates; hierarchical: (n, depth) digits
    adjacency: tuple | None = None  # tree balls: neighbour lists
    depth_of: np.ndarray | None = None  # tree balls: distance to the root

    @property
    def sites(self) -> range:
        return range(self.n)

    @property
    def is_group(self) -> bool:
        return self.kind in ("torus", "hierarchical") and self.boundary_mode == "periodic"

    # -- group structure ---------------------------------------------------
    def op(self, i, j):
        """Group product ``i j`` (vectorised)."""
        if not self.is_group:
            raise LatticeError(f"{self.kind} window with {self.boundary_mode} boundary has no group operation")
        d, L = self.params
        ci = self.coords[np.asarray(i)]
        cj = self.coords[np.asarray(j)]
        return np.ravel_multi_index(tuple(np.moveaxis((ci + cj) % L, -1, 0)), (L,) * d)

    def inv(self, i):
        if not self.is_group:
            raise LatticeError("no group operation on this window")
        d, L = self.params
        return np.ravel_multi_index(tuple(np.moveaxis((-self.coords[np.asarray(i)]) % L, -1, 0)), (L,) * d)

    @property
    def group_op(self) -> np.ndarray:
        """Full multiplication table; only for small windows."""
        if self.n > 4096:
            raise LatticeError("window too large for a full group table")
        idx = np.arange(self.n)
        return self.op(idx[:, None], idx[None, :])

    def translate(self, k: int, sites) -> np.ndarray:
        """Left translate a set of sites by ``k``."""
        return self.op(np.full(len(sites), k), np.asarray(sites, dtype=int))

    # -- geometry ------------------------------------------------------------
    def site(self, coord) -> int:
        """Index of a torus coordinate (wrapped) or of a hierarchical digit tuple."""
        if self.kind == "torus":
            d, L = self.params
            c = np.atleast_1d(coord)
            if self.boundary_mode == "periodic":
                c = c % L
            return int(np.ravel_multi_index(tuple(c), (L,) * d))
        return int(coord)

    def hierarchical_distance(self, i, j):
        if self.kind != "hierarchical":
            raise LatticeError("hierarchical distance only defined on hierarchical windows")
        N, depth = self.params
        diff = self.coords[np.asarray(i)] != self.coords[np.asarray(j)]
        # digit column k (0-based) is coordinate xi_{k+1}; the norm is the
        # largest 1-based index of a nonzero coordinate of the difference
        k = np.arange(1, depth + 1)
        return np.max(np.where(diff, k, 0), axis=-1)

    def neighbors(self, i: int) -> list[int]:
        """Unit-distance neighbours (torus: lattice neighbours; tree: tree edges)."""
        if self.kind == "tree_ball":
            return list(self.adjacency[i])
        if self.kind == "torus":
            d, L = self.params
            c = self.coords[i]
            out = []
            for axis in range(d):
                for s in (-1, 1):
                    cc = c.copy()
                    cc[axis] += s
                    if self.boundary_mode == "periodic":
                        cc %= L
                    elif cc[axis] < 0 or cc[axis] >= L:
                        continue
                    out.append(int(np.ravel_multi_index(tuple(cc), (L,) * d)))
            return sorted(set(out)) if L > 2 else out
        N, depth = self.params
        return [int(j) for j in np.flatnonzero(self.hierarchical_distance(i, np.arange(self.n)) == 1)]


def build_lattice(kind: str, boundary: str | None = None, **params) -> GroupLattice:
    """Construct a window.

    >>> build_lattice("torus", d=1, L=5).n
    5
    >>> build_lattice("tree_ball", d=2, depth=2).n
    10
    """
    if kind == "torus":
        d, L = int(params.get("d", 1)), int(params["L"])
        if d < 1 or L < 2:
            raise LatticeError(f"torus needs d>=1 and L>=2 (got d={d}, L={L})")
        boundary = boundary or "periodic"
        if boundary not in ("periodic", "killed"):
            raise LatticeError(f"unknown boundary mode {boundary!r}")
        n = L**d
        coords = np.stack(np.unravel_index(np.arange(n), (L,) * d), axis=-1)
        return GroupLattice("torus", (d, L), n, 0, boundary, coords=coords)
    if kind == "tree_ball":
        d, depth = int(params["d"]), int(params["depth"])
        if d < 2 or depth < 0:
            raise LatticeError(f"tree_ball needs d>=2 and depth>=0 (got d={d}, depth={depth})")
        if boundary not in (None, "killed"):
            raise LatticeError("tree balls only support killed boundaries")
        adj: list[list[int]] = [[]]
        level = [0]
        depth_of = [0]
        for lev in range(1, depth + 1):
            nxt = []
            for v in level:
                kids = d + 1 if v == 0 else d
                for _ in range(kids):
                    w = len(adj)
                    adj.append([v])
                    adj[v].append(w)
                    depth_of.append(lev)
                    nxt.append(w)
            level = nxt
        return GroupLattice(
            "tree_ball", (d, depth), len(adj), 0, "killed",
            adjacency=tuple(tuple(a) for a in adj), depth_of=np.array(depth_of),
        )
    if kind == "hierarchical":
        N, depth = int(params["N"]), int(params["depth"])
        if N < 2 or depth < 1:
            raise LatticeError(f"hierarchical window needs N>=2 and depth>=1 (got N={N}, depth={depth})")
        boundary = boundary or "periodic"
        if boundary not in ("periodic", "killed"):
            raise LatticeError(f"unknown boundary mode {boundary!r}")
        n = N**depth
        coords = np.stack(np.unravel_index(np.arange(n), (N,) * depth), axis=-1)
        # ravel order puts coordinate xi_1 last; store digits as (xi_1, ..., xi_depth)
        coords = coords[:, ::-1].copy()
        lat = GroupLattice("hierarchical", (N, depth), n, 0, boundary, coords=coords)
        return _HierarchicalLattice(**{f: getattr(lat, f) for f in lat.__dataclass_fields__})
    raise LatticeError(f"unknown lattice kind {kind!r}")


class _HierarchicalLattice(GroupLattice):
    # digits are stored xi_1 first, so (un)ravelling must reverse them

    def _ravel(self, digits):
        N, depth = self.params
        return np.ravel_multi_index(tuple(np.moveaxis(digits[..., ::-1], -1, 0)), (N,) * depth)

    def op(self, i, j):
        N, _ = self.params
        return self._ravel((self.coords[np.asarray(i)] + self.coords[np.asarray(j)]) % N)

    def inv(self, i):
        N, _ = self.params
        return self._ravel((-self.coords[np.asarray(i)]) % N)

    def site(self, coord) -> int:
        return int(self._ravel(np.atleast_1d(np.asarray(coord))))


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True, eq=False)
class Kernel:
    """Sparse rate matrix ``a(i, j)`` on a window plus per-site leak mass."""

    lattice: GroupLattice
    rates: sp.csr_matrix
    base: dict = field(default_factory=dict)
    leak: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def total(self) -> float:
        """|a| = sum_j a(0, j), including any mass that leaks out of the window."""
        return float(self.out_rate[self.lattice.origin])

    @property
    def out_rate(self) -> np.ndarray:
        rs = np.asarray(self.rates.sum(axis=1)).ravel()
        if self.leak is not None:
            rs = rs + self.leak
        return rs

    def dense(self) -> np.ndarray:
        return self.rates.toarray()

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = self.rates.tocoo()
        order = np.lexsort((c.col, c.row))
        return c.row[order].astype(np.int64), c.col[order].astype(np.int64), c.data[order].astype(float)

    def to_csv(self, path) -> None:
        i, j, r = self.coo()
        with open(path, "w", newline="") as fh:
            fh.write("i,j,rate\n")
            for a, b, c in zip(i, j, r):
                fh.write(f"{a},{b},{c!r}\n")

    def is_translation_invariant(self, atol: float = 1e-14) -> bool:
        """Exhaustive scan of a(k i, k j) = a(i, j) over all k, i, j."""
        lat = self.lattice
        if not lat.is_group:
            raise LatticeError("translation invariance is only defined on group-closed windows")
        A = self.dense()
        idx = np.arange(lat.n)
        for k in range(lat.n):
            perm = lat.op(np.full(lat.n, k), idx)
            if not np.allclose(A[np.ix_(perm, perm)], A, rtol=0, atol=atol):
                return False
        return True


def _check_rates(values) -> None:
    if any(v < 0 for v in values):
        raise LatticeError("rates must be nonnegative")


def kernel_from_base(lattice: GroupLattice, base, leak_per_site: float = 0.0) -> Kernel:
    """Build ``a(i, j) = base(i^{-1} j)`` on a window.

    ``base`` forms:

    * torus: mapping displacement -> rate (ints for d=1, tuples otherwise);
    * hierarchical: mapping site index -> rate, or a length-``n`` array;
    * tree ball: ``{1: rate}``, the rate to each of the ``d+1`` tree
      neighbours (edges leaving the ball are leak).

    On killed windows, rate pointing outside the window is recorded in
    ``Kernel.leak``; hierarchical windows cannot see that mass in ``base``,
    so it is passed as ``leak_per_site``.
    """
    n = lattice.n
    rows, cols, vals = [], [], []
    leak = np.zeros(n)
    if lattice.kind == "torus":
        d, L = lattice.params
        disp = {}
        for key, v in dict(base).items():
            dv = np.atleast_1d(np.asarray(key, dtype=int))
            if dv.size != d:
                raise LatticeError(f"displacement {key!r} does not have dimension {d}")
            _check_rates([v])
            if np.all(dv == 0) or v == 0:
                continue
            disp[tuple(dv)] = disp.get(tuple(dv), 0.0) + float(v)
        for dv, v in disp.items():
            tgt = lattice.coords + np.asarray(dv)
            if lattice.boundary_mode == "periodic":
                j = np.ravel_multi_index(tuple((tgt % L).T), (L,) * d)
                rows.append(np.arange(n))
                cols.append(j)
                vals.append(np.full(n, v))
            else:
                inside = np.all((tgt >= 0) & (tgt < L), axis=1)
                j = np.ravel_multi_index(tuple(tgt[inside].T), (L,) * d)
                rows.append(np.flatnonzero(inside))
                cols.append(j)
                vals.append(np.full(inside.sum(), v))
                leak[~inside] += v
        base_map = disp
    elif lattice.kind == "hierarchical":
        arr = np.zeros(n)
        if isinstance(base, Mapping):
            for k, v in base.items():
                arr[int(k)] += float(v)
        else:
            arr = np.asarray(base, dtype=float).copy()
            if arr.shape != (n,):
                raise LatticeError("hierarchical base must have one entry per site")
        _check_rates(arr)
        arr[lattice.origin] = 0.0
        idx = np.arange(n)
        for g in np.flatnonzero(arr):
            rows.append(idx)
            cols.append(lattice.op(idx, np.full(n, g)))
            vals.append(np.full(n, arr[g]))
        base_map = {int(g): float(arr[g]) for g in np.flatnonzero(arr)}
        if lattice.boundary_mode == "killed":
            leak[:] = float(leak_per_site)
    elif lattice.kind == "tree_ball":
        rate = float(dict(base).get(1, 0.0))
        _check_rates([rate])
        d, depth = lattice.params
        for v, nbrs in enumerate(lattice.adjacency):
            for w in nbrs:
                rows.append(np.array([v]))
                cols.append(np.array([w]))
                vals.append(np.array([rate]))
            leak[v] = rate * (d + 1 - len(nbrs))
        base_map = {1: rate}
    else:  # pragma: no cover
        raise LatticeError(f"unsupported lattice kind {lattice.kind}")
    if rows:
        R = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    else:
        R = sp.csr_matrix((n, n))
    R.sum_duplicates()
    R.setdiag(0.0)
    R.eliminate_zeros()
    return Kernel(lattice, R.tocsr(), base_map, leak if np.any(leak) else None)


def nearest_neighbor_kernel(lattice: GroupLattice, rate: float = 1.0, left: float | None = None) -> Kernel:
    """Nearest-neighbour kernel; in 1D ``left`` sets a(0,-1) separately."""
    if lattice.kind == "tree_ball":
        return kernel_from_base(lattice, {1: rate})
    if lattice.kind != "torus":
        raise LatticeError("nearest-neighbour kernels need a torus or tree window")
    d, _ = lattice.params
    base = {}
    for axis in range(d):
        e = [0] * d
        e[axis] = 1
        base[tuple(e)] = rate
        e[axis] = -1
        base[tuple(e)] = rate if left is None else left
    if d == 1:
        base = {k[0]: v for k, v in base.items()}
    return kernel_from_base(lattice, base)


def hierarchical_rate(c: Callable[[int], float] | Sequence[float], N: int, k: int, tol: float = 1e-12) -> float:
    """a_N at hierarchical distance k >= 1: sum_{l>=k} c_{l-1} / N^{2l-1}.

    Terms are added until the geometric tail bound drops below ``tol``
    relative to the partial sum.
    A sequence ``c`` is continued by its last entry.
    """
    if k < 1:
        raise LatticeError("hierarchical distance must be >= 1 off the diagonal")
    cfun = _schedule(c)
    total = 0.0
    l = k
    while True:
        term = cfun(l - 1) / float(N) ** (2 * l - 1)
        total += term
        nxt = cfun(l) / float(N) ** (2 * l + 1)
        ratio = nxt / term if term > 0 else 0.0
        if ratio < 1 and nxt / (1 - ratio) < tol * total:
            break
        if l - k > 10_000:
            raise LatticeError("hierarchical rate series does not converge")
        l += 1
    return total


def hierarchical_kernel(lattice: GroupLattice, c, tol: float = 1e-12) -> Kernel:
    """Kernel a_N restricted to a hierarchical window.

    In killed mode each site leaks the mass of jumps beyond the window depth,
    i.e. sum_{k>depth} (N^k - N^{k-1}) a_N(k).
    """
    N, depth = lattice.params
    base = hierarchical_base(lattice, c, tol)
    leak = 0.0
    if lattice.boundary_mode == "killed":
        k = depth + 1
        while True:
            term = (N**k - N ** (k - 1)) * hierarchical_rate(c, N, k, tol)
            leak += term
            if term < tol or k > depth + 2000:
                break
            k += 1
    return kernel_from_base(lattice, base, leak_per_site=leak)


def hierarchical_base(lattice: GroupLattice, c, tol: float = 1e-12) -> np.ndarray:
    """Per-site base rates a_N(0, xi) on a hierarchical window."""
    N, depth = lattice.params
    dist = lattice.hierarchical_distance(lattice.origin, np.arange(lattice.n))
    rates = {k: hierarchical_rate(c, N, k, tol) for k in range(1, depth + 1)}
    out = np.array([0.0 if k == 0 else rates[int(k)] for k in dist])
    return out


def _schedule(c) -> Callable[[int], float]:
    if callable(c):
        return lambda k: float(c(k))
    seq = [float(v) for v in c]
    if not seq:
        raise LatticeError("empty schedule")
    return lambda k: seq[k] if k < len(seq) else seq[-1]


def reverse_kernel(k: Kernel) -> Kernel:
    """The reversed kernel a†(i, j) = a(j, i)."""
    base = k.base
    if k.lattice.kind == "torus":
        base = {_neg(key): v for key, v in k.base.items()}
    elif k.lattice.kind == "hierarchical":
        base = {int(k.lattice.inv(g)): v for g, v in k.base.items()}
    leak = None
    if k.leak is not None:
        # mass entering from outside is not represented; reversed leak is the
        # same per-site loss for translation-invariant truncations
        leak = k.leak.copy()
    return Kernel(k.lattice, k.rates.T.tocsr(), base, leak)


def _neg(key):
    if isinstance(key, tuple):
        return tuple(-v for v in key)
    return -key


@dataclass(frozen=True)
class LSWeights:
    gamma: np.ndarray
    K: float


def ls_weights(kernel: Kernel, epsilon: float = 1.0, seed_site: int | None = None, kmax: int = 10_000,
               tol: float = 1e-15) -> LSWeights:
    """Summable weights with sum_j a_s(i,j) gamma_j <= K gamma_i, a_s = a + a†.

    gamma = sum_k e^{-eps k} P^k phi with P = a_s/|a_s| and phi the indicator
    of ``seed_site``; the returned K is the exact maximal ratio for the
    truncated series.
    """
    if epsilon <= 0:
        raise LatticeError("epsilon must be positive")
    As = (kernel.rates + kernel.rates.T).tocsr()
    row = np.asarray(As.sum(axis=1)).ravel()
    norm = row.max() if row.max() > 0 else 1.0
    P = As / norm
    phi = np.zeros(kernel.n)
    phi[kernel.lattice.origin if seed_site is None else seed_site] = 1.0
    gamma = phi.copy()
    term = phi.copy()
    for k in range(1, kmax + 1):
        term = np.exp(-epsilon) * (P @ term)
        gamma += term
        if term.max() < tol * gamma.max() and np.all(gamma > 0):
            break
    if np.any(gamma <= 0):
        # reducible kernel or isolated sites: keep the weights strictly positive
        gamma = gamma + tol * gamma.max()
    ratio = (As @ gamma) / gamma
    return LSWeights(gamma, float(ratio.max()))


@dataclass(frozen=True)
class DkResult:
    d: np.ndarray
    partial_sums: np.ndarray
    verdict: str  # "recurrent" or "transient"
    tail_estimate: float


def dk_series(c, N: int, kmax: int, tol: float = 1e-12, max_terms: int = 100_000) -> DkResult:
    """d_k = sum_{n>=0} c_{k+n}/N^n for k = 0..kmax and a recurrence verdict.

    The walk with hierarchical kernel is recurrent iff sum_k 1/d_k diverges.
    The verdict uses the ratio of successive terms of 1/d_k at the end of the
    computed range: ratio < 1 - 1e-3 gives a convergent geometric tail.
    """
    cfun = _schedule(c)
    for k in range(kmax + 2):
        if cfun(k) <= 0:
            raise LatticeError("migration constants must be positive")
    d = np.empty(kmax + 1)
    for k in range(kmax + 1):
        total = 0.0
        n = 0
        while True:
            try:
                term = cfun(k + n) / float(N) ** n
                nxt = cfun(k + n + 1) / float(N) ** (n + 1)
            except OverflowError:
                raise LatticeError(f"d_{k} diverges: c_(k+n)/N^n overflows") from None
            total += term
            r = nxt / term
            if r < 1 and nxt / (1 - r) <= tol * total:
                total += nxt / (1 - r)
                break
            n += 1
            if n > max_terms or not np.isfinite(total):
                raise LatticeError(f"d_{k} diverges: c_(k+n)/N^n does not decay")
        d[k] = total
    inv = 1.0 / d
    ps = np.cumsum(inv)
    if kmax >= 2:
        ratio = inv[-1] / inv[-2]
    else:
        ratio = 1.0
    if ratio < 1 - 1e-3:
        tail = inv[-1] * ratio / (1 - ratio)
        verdict = "transient"
    else:
        tail = float("inf")
        verdict = "recurrent"
    return DkResult(d, ps, verdict, float(tail))
