"""Contact process via the Harris graphical representation.

A realisation holds every recovery mark and infection arrow on a window over
[0, T], merged into a single time-ordered event list.  Forward and dual
queries sweep that list, so all initial states are coupled on the same
realisation and the duality and additivity identities hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._sweeps import coupling_sweep, sweep_backward, sweep_counts, sweep_forward
from .lattice import GroupLattice, Kernel, LatticeError, reverse_kernel
from .stats import Estimate, mean_se, ratio_estimate, z_score

__all__ = [
    "ContactError",
    "ContactModel",
    "GraphicalRep",
    "CampbellSample",
    "GrowthFit",
    "TypicalLaw",
    "sample_graphical",
    "forward",
    "dual_backward",
    "to_mask",
    "to_set",
    "estimate_growth_rate",
    "pi_lambda_hat",
    "campbell_sample",
    "campbell_estimate",
    "char_check",
    "typical_site_law",
    "onedim_coupling_time",
    "expected_size",
    "graphical_identity_check",
]


class ContactError(ValueError):
    pass


@dataclass(frozen=True)
class ContactModel:
    lattice: GroupLattice
    kernel: Kernel
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise ContactError("delta must be nonnegative")

    def reversed(self) -> "ContactModel":
        return ContactModel(self.lattice, reverse_kernel(self.kernel), self.delta)


@dataclass(frozen=True, eq=False)
class GraphicalRep:
    """Realised Poisson marks on the window over [0, T].

    ``dst == -1`` marks a recovery at ``src``; otherwise the event is an
    infection arrow ``src -> dst``.  Arrays are sorted by time.
    """

    n: int
    T: float
    delta: float
    seed: int
    key: tuple
    times: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def recovery_times(self, i: int) -> np.ndarray:
        return self.times[(self.src == i) & (self.dst < 0)]

    def arrow_times(self, i: int, j: int) -> np.ndarray:
        return self.times[(self.src == i) & (self.dst == j)]

    def to_csv(self, path) -> None:
        """Write the event list as ``channel,time`` rows (channel ``r:i`` or ``a:i->j``)."""
        with open(path, "w") as fh:
            fh.write("channel,time\n")
            for t, s, d in zip(self.times, self.src, self.dst):
                ch = f"r:{s}" if d < 0 else f"a:{s}->{d}"
                fh.write(f"{ch},{t!r}\n")


def sample_graphical(lattice: GroupLattice | ContactModel, kernel: Kernel | None = None, delta: float | None = None,
                     T: float = 1.0, seed: int = 0, key: tuple = ()) -> GraphicalRep:
    """Draw independent Poisson channels for recoveries (rate delta) and arrows (rate a(i,j)).

    ``key`` selects the replica stream; the same ``(seed, key)`` reproduces the
    realisation bit for bit.
    """
    if isinstance(lattice, ContactModel):
        model = lattice
        lattice, kernel, delta = model.lattice, model.kernel, model.delta
    if T <= 0:
        raise ContactError("horizon T must be positive")
    if delta < 0:
        raise ContactError("delta must be nonnegative")
    n = lattice.n
    g = rng.stream(seed, "contact", *key)
    ii, jj, rr = kernel.coo()
    rates = np.concatenate([np.full(n, float(delta)), rr])
    srcs = np.concatenate([np.arange(n, dtype=np.int64), ii])
    dsts = np.concatenate([np.full(n, -1, dtype=np.int64), jj])
    counts = g.poisson(rates * T)
    src = np.repeat(srcs, counts)
    dst = np.repeat(dsts, counts)
    times = g.uniform(0.0, T, size=src.size)
    # uniform draws are in [0, T); zero has probability ~2^-53 but is excluded
    times[times == 0.0] = np.nextafter(0.0, 1.0)
    order = np.argsort(times, kind="stable")
    return GraphicalRep(n, float(T), float(delta), int(seed), tuple(key), times[order], src[order], dst[order])


def to_mask(A, n: int) -> np.ndarray:
    m = np.zeros(n, dtype=np.uint8)
    if isinstance(A, np.ndarray) and A.dtype != object and A.shape == (n,) and A.dtype in (np.uint8, np.bool_):
        m[:] = A
        return m
    idx = np.asarray(sorted(A), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ContactError("site outside the window")
    m[idx] = 1
    return m


def to_set(mask) -> frozenset:
    return frozenset(int(i) for i in np.flatnonzero(mask))


def forward(rep: GraphicalRep, A, t0: float, t: float, mask: bool = False):
    """eta^{A x {t0}}_t: sites reached at time t0 + t by upward paths from A at t0."""
    if t0 < 0 or t < 0 or t0 + t > rep.T * (1 + 1e-12):
        raise ContactError(f"query [{t0}, {t0 + t}] outside horizon [0, {rep.T}]")
    state = to_mask(A, rep.n)
    sweep_forward(rep.times, rep.src, rep.dst, state, float(t0), float(t0 + t))
    return state if mask else to_set(state)


def dual_backward(rep: GraphicalRep, B, t1: float, s: float, mask: bool = False):
    """eta^{dagger B x {t1}}_s: sites i with (i, t1 - s) leading to B x {t1}."""
    if s < 0 or t1 - s < 0 or t1 > rep.T * (1 + 1e-12):
        raise ContactError(f"dual query [{t1 - s}, {t1}] outside horizon [0, {rep.T}]")
    state = to_mask(B, rep.n)
    sweep_backward(rep.times, rep.src, rep.dst, state, float(t1), float(t1 - s))
    return state if mask else to_set(state)


def graphical_identity_check(model: ContactModel, reps: int, T: float = 2.0, seed: int = 0,
                             density: float = 0.25) -> tuple[int, int]:
    """Count per-realisation failures of duality and additivity.

    For each replica draw random A, B, C and 0 <= s < t <= T; duality asks
    that eta^{A x {s}}_{t-s} meets B iff eta-dagger^{B x {t}}_{t-s} meets A,
    additivity that eta^{A u C} equals eta^A u eta^C.  Returns the two
    mismatch counts.
    """
    n = model.lattice.n
    g = rng.stream(seed, "contact", 4)
    dual_bad = add_bad = 0
    for r in range(reps):
        rep = sample_graphical(model, T=T, seed=seed, key=(5, r))
        A, B, C = (g.random(n) < density for _ in range(3))
        s, t = np.sort(g.uniform(0.0, T, 2))
        fa = forward(rep, A.astype(np.uint8), s, t - s, mask=True).astype(bool)
        db = dual_backward(rep, B.astype(np.uint8), t, t - s, mask=True).astype(bool)
        dual_bad += bool(np.any(fa & B)) != bool(np.any(db & A))
        fc = forward(rep, C.astype(np.uint8), s, t - s, mask=True).astype(bool)
        fac = forward(rep, (A | C).astype(np.uint8), s, t - s, mask=True).astype(bool)
        add_bad += bool(np.any(fac != (fa | fc)))
    return int(dual_bad), int(add_bad)


# -- growth rate ------------------------------------------------------------

@dataclass(frozen=True)
class GrowthFit:
    r_hat: float
    ci: tuple
    t_grid: np.ndarray
    mean_size: np.ndarray
    se_size: np.ndarray
    bracket: tuple
    bracket_ok: bool
    reps: int

    def as_dict(self) -> dict:
        return {"r_hat": self.r_hat, "ci_low": self.ci[0], "ci_high": self.ci[1],
                "bracket_low": self.bracket[0], "bracket_high": self.bracket[1],
                "bracket_ok": self.bracket_ok, "reps": self.reps}


def _size_curves(model: ContactModel, A, t_grid, reps, seed, key=()) -> np.ndarray:
    T = float(t_grid[-1])
    out = np.empty((reps, t_grid.size), dtype=np.int64)
    base = to_mask(A, model.lattice.n)
    for r in range(reps):
        rep = sample_graphical(model, T=T, seed=seed, key=(*key, r))
        out[r] = sweep_counts(rep.times, rep.src, rep.dst, base.copy(), 0.0, t_grid)
    return out


def expected_size(model: ContactModel, A, t: float, reps: int, seed: int = 0, key: tuple = ()) -> Estimate:
    """Monte-Carlo estimate of E|eta^A_t|."""
    sizes = _size_curves(model, A, np.array([float(t)]), reps, seed, key=(3, *key))
    return mean_se(sizes[:, 0])


def _log_slope(t, y):
    tt = t - t.mean()
    return float(np.sum(tt * (y - y.mean())) / np.sum(tt * tt))


def estimate_growth_rate(model: ContactModel, A, t_grid, reps: int, seed: int = 0,
                         n_boot: int = 200, level: float = 0.95) -> GrowthFit:
    """Slope of log E|eta^A_t| over the last half of ``t_grid`` with a bootstrap CI."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0) or t_grid[0] <= 0:
        raise ContactError("t_grid must be a positive increasing sequence of length >= 2")
    sizes = _size_curves(model, A, t_grid, reps, seed, key=(1,))
    if not np.any(sizes[:, 1] > 0):
        raise ContactError("degenerate fit: every replica extinct before the second grid time")
    half = t_grid.size // 2
    tail = slice(half, None) if t_grid.size - half >= 2 else slice(0, None)

    def fit(s):
        m = s.mean(axis=0)[tail]
        if np.any(m <= 0):
            return np.nan
        return _log_slope(t_grid[tail], np.log(m))

    r_hat = fit(sizes)
    if not np.isfinite(r_hat):
        raise ContactError("degenerate fit: mean size vanishes on the fitting window")
    g = rng.stream(seed, "contact", 2)
    boots = np.array([fit(sizes[g.integers(0, reps, reps)]) for _ in range(n_boot)])
    boots = boots[np.isfinite(boots)]
    a = (1 - level) / 2
    ci = (float(np.quantile(boots, a)), float(np.quantile(boots, 1 - a))) if boots.size else (-np.inf, np.inf)
    lo, hi = -model.delta, model.kernel.total - model.delta
    ok = ci[1] >= lo - 1e-12 and ci[0] <= hi + 1e-12
    return GrowthFit(float(r_hat), ci, t_grid, sizes.mean(axis=0), sizes.std(axis=0, ddof=1) / np.sqrt(reps),
                     (lo, hi), bool(ok), reps)


# -- Campbell law -----------------------------------------------------------

def _check_lambda(lam: float, r_hat: float | None):
    if not lam > 0:
        raise ContactError("lambda must be positive")
    if r_hat is not None and not lam > r_hat:
        raise ContactError(f"lambda={lam} does not exceed the growth rate estimate {r_hat}")


def _tau_and_rep(model, lam, r, seed, ns_key, horizon):
    """Exponential time for replica r and a realisation covering it."""
    g = rng.stream(seed, "campbell", *ns_key, r)
    tau = float(g.exponential(1.0 / lam))
    extended = tau > horizon
    T = max(horizon, tau * (1 + 1e-9), 1e-12)
    rep = sample_graphical(model, T=T, seed=seed, key=(*ns_key, r))
    return tau, rep, extended


def pi_lambda_hat(model: ContactModel, A, lam: float, reps: int, seed: int = 0,
                  horizon: float | None = None, r_hat: float | None = None) -> Estimate:
    """Unbiased estimate of pi_lambda(A) = int_0^inf E|eta^A_t| e^{-lambda t} dt.

    Each replica draws tau ~ Exp(lambda) and returns |eta^A_tau| / lambda.
    Replicas whose tau exceeds ``horizon`` are drawn on an extended
    realisation; their count is reported in ``extra["extensions"]``.
    """
    _check_lambda(lam, r_hat)
    horizon = 5.0 / lam if horizon is None else float(horizon)
    base = to_mask(A, model.lattice.n)
    vals = np.empty(reps)
    ext = 0
    for r in range(reps):
        tau, rep, e = _tau_and_rep(model, lam, r, seed, (3,), horizon)
        ext += e
        st = sweep_forward(rep.times, rep.src, rep.dst, base.copy(), 0.0, tau)
        vals[r] = st.sum() / lam
    est = mean_se(vals)
    return Estimate(est.value, est.se, reps, {"extensions": ext})


@dataclass(frozen=True)
class CampbellSample:
    iota: int
    tau: float
    config: frozenset
    weight: float

    def __post_init__(self):
        if self.iota not in self.config or self.tau < 0:
            raise ContactError("invalid Campbell sample")


def campbell_sample(model: ContactModel, A, lam: float, batch: int = 256, seed: int = 0, n_samples: int = 1,
                    horizon: float | None = None, max_retries: int = 100) -> tuple[list[CampbellSample], int]:
    """Self-normalised importance resampling from the Campbell law.

    For each output sample, ``batch`` pairs (realisation, tau) are drawn, one
    is chosen with probability proportional to |eta^A_tau| and iota is drawn
    uniformly from it.  ``weight`` is the batch mean of |eta^A_tau|, an
    estimate of lambda * pi_lambda(A).  Returns the samples and the number of
    all-empty batches that were rejected.
    """
    if batch < 1:
        raise ContactError("batch must be >= 1")
    _check_lambda(lam, None)
    horizon = 5.0 / lam if horizon is None else float(horizon)
    base = to_mask(A, model.lattice.n)
    out = []
    retries = 0
    draw = 0
    for s in range(n_samples):
        while True:
            cfgs, taus = [], []
            for _ in range(batch):
                tau, rep, _ = _tau_and_rep(model, lam, draw, seed, (4,), horizon)
                draw += 1
                cfgs.append(sweep_forward(rep.times, rep.src, rep.dst, base.copy(), 0.0, tau))
                taus.append(tau)
            w = np.array([c.sum() for c in cfgs], dtype=float)
            if w.sum() > 0:
                break
            retries += 1
            if retries > max_retries:
                raise ContactError("every batch configuration was empty")
        g = rng.stream(seed, "campbell", 5, s)
        k = int(g.choice(batch, p=w / w.sum()))
        occ = np.flatnonzero(cfgs[k])
        iota = int(occ[g.integers(occ.size)])
        out.append(CampbellSample(iota, taus[k], to_set(cfgs[k]), float(w.mean())))
    return out, retries


def _shift_table(lattice: GroupLattice, Delta) -> np.ndarray:
    """table[i, m] = site i * Delta[m], so (iota^{-1} eta) contains Delta[m] iff eta does table[iota, m]."""
    if not lattice.is_group:
        raise LatticeError("Campbell statistics need a group-closed window")
    D = np.asarray([lattice.site(x) for x in Delta], dtype=np.int64)
    idx = np.arange(lattice.n)
    return lattice.op(idx[:, None], D[None, :])


def campbell_estimate(model: ContactModel, A, lam: float, reps: int, statistic, seed: int = 0,
                      horizon: float | None = None, key: int = 6) -> Estimate:
    """Campbell-law expectation of ``statistic(iota, eta, tau)`` as a ratio of means.

    E_Campbell[f] = E[sum_{i in eta_tau} f(i, eta_tau, tau)] / E|eta_tau|,
    estimated over all replicas (every infected site contributes), with a
    delta-method standard error.
    """
    _check_lambda(lam, None)
    horizon = 5.0 / lam if horizon is None else float(horizon)
    base = to_mask(A, model.lattice.n)
    num = np.empty(reps)
    den = np.empty(reps)
    for r in range(reps):
        tau, rep, _ = _tau_and_rep(model, lam, r, seed, (key,), horizon)
        st = sweep_forward(rep.times, rep.src, rep.dst, base.copy(), 0.0, tau)
        occ = np.flatnonzero(st)
        den[r] = occ.size
        num[r] = float(np.sum(statistic(occ, st, tau))) if occ.size else 0.0
    return ratio_estimate(num, den)


def char_check(model: ContactModel, A, lam: float, reps: int, seed: int = 0) -> tuple[Estimate, Estimate, float]:
    """Both sides of the characterisation of the law seen from a typical site.

    lhs: Campbell probability that A and iota^{-1} eta^{{0}}_tau are disjoint.
    rhs: (pi^dagger(A + {0}) - pi^dagger(A)) / pi^dagger({0}) for the reversed
    kernel, estimated on shared realisations.
    """
    lat = model.lattice
    o = lat.origin
    A = sorted(set(int(a) for a in A))
    if not A:
        one = Estimate(1.0, 0.0, reps)
        return one, one, 0.0
    if o in A:
        zero = Estimate(0.0, 0.0, reps)
        return zero, zero, 0.0
    table = _shift_table(lat, A)

    def hits(occ, st, tau):
        return ~np.any(st[table[occ]].astype(bool), axis=1)

    lhs = campbell_estimate(model, {o}, lam, reps, hits, seed=seed, key=7)
    rev = model.reversed()
    mA = to_mask(A, lat.n)
    m0 = to_mask([o], lat.n)
    D = np.empty(reps)
    S = np.empty(reps)
    horizon = 5.0 / lam
    for r in range(reps):
        tau, rep, _ = _tau_and_rep(rev, lam, r, seed, (8,), horizon)
        a = sweep_forward(rep.times, rep.src, rep.dst, mA.copy(), 0.0, tau)
        b = sweep_forward(rep.times, rep.src, rep.dst, m0.copy(), 0.0, tau)
        D[r] = np.sum(a | b) - a.sum()
        S[r] = b.sum()
    rhs = ratio_estimate(D, S)
    return lhs, rhs, z_score(lhs, rhs)


@dataclass
class TypicalLaw:
    """Campbell laws of the patterns seen from iota on Delta (bit m = Delta[m])."""

    Delta: tuple
    law_A: Estimate | np.ndarray
    law_bar: np.ndarray
    law_full: np.ndarray
    agree_bar: Estimate
    agree_full: Estimate
    agree_bar_full: Estimate
    T_back: float
    extra: dict = field(default_factory=dict)


def typical_site_law(model: ContactModel, A, lam: float, Delta, reps: int, seed: int = 0,
                     T_back: float = 20.0) -> TypicalLaw:
    """Patterns of iota^{-1} eta^A_tau, iota^{-1} eta-bar_tau and iota^{-1} eta^Lambda_tau on Delta.

    One realisation on [0, T_back + tau] per replica: eta^A and the full-window
    process eta^Lambda start at T_back; eta-bar is the full-window process
    started at time 0, i.e. with look-back depth T_back.  All laws are
    Campbell-weighted by |eta^A_tau|.
    """
    _check_lambda(lam, None)
    lat = model.lattice
    Delta = tuple(Delta)
    table = _shift_table(lat, Delta)
    m = len(Delta)
    pw = 1 << np.arange(m)
    base = to_mask(A, lat.n)
    full = np.ones(lat.n, dtype=np.uint8)
    num_bar, num_full, num_bf, den = (np.zeros(reps) for _ in range(4))
    hist = np.zeros((3, 2**m))
    g_tau = (9,)
    for r in range(reps):
        g = rng.stream(seed, "campbell", *g_tau, r)
        tau = float(g.exponential(1.0 / lam))
        rep = sample_graphical(model, T=T_back + tau + 1e-9, seed=seed, key=(*g_tau, r))
        eta = sweep_forward(rep.times, rep.src, rep.dst, base.copy(), T_back, T_back + tau)
        occ = np.flatnonzero(eta)
        if occ.size == 0:
            continue
        bar = sweep_forward(rep.times, rep.src, rep.dst, full.copy(), 0.0, T_back + tau)
        lam_full = sweep_forward(rep.times, rep.src, rep.dst, full.copy(), T_back, T_back + tau)
        pa = eta[table[occ]] @ pw
        pb = bar[table[occ]] @ pw
        pf = lam_full[table[occ]] @ pw
        den[r] = occ.size
        num_bar[r] = np.sum(pa == pb)
        num_full[r] = np.sum(pa == pf)
        num_bf[r] = np.sum(pb == pf)
        for h, p in enumerate((pa, pb, pf)):
            hist[h] += np.bincount(p, minlength=2**m)
    tot = den.sum()
    if tot == 0:
        raise ContactError("every replica was empty at tau")
    laws = hist / tot
    return TypicalLaw(Delta, laws[0], laws[1], laws[2], ratio_estimate(num_bar, den),
                      ratio_estimate(num_full, den), ratio_estimate(num_bf, den), float(T_back),
                      {"reps": reps, "nonempty": int(np.sum(den > 0))})


def onedim_coupling_time(rep: GraphicalRep, i: int, j: int, kernel: Kernel | None = None) -> tuple[float, bool]:
    """First time the processes started from {i} and {j} coincide on a shared realisation.

    Returns ``(t, extinct)``; ``t`` is inf if they do not couple by the
    horizon, and ``extinct`` flags that one of them died first.
    """
    if kernel is not None:
        lat = kernel.lattice
        if lat.kind != "torus" or lat.params[0] != 1:
            raise ContactError("coupling check needs a one-dimensional window")
        offs = [int(k[0]) if isinstance(k, tuple) else int(k) for k, v in kernel.base.items() if v > 0]
        bad = [k for k in offs if k not in (1, -1)]
        if bad:
            raise ContactError(f"coupling check needs a nearest-neighbour kernel (found offsets {bad})")
    if i == j:
        return 0.0, False
    a = to_mask([i], rep.n)
    b = to_mask([j], rep.n)
    t, flag = coupling_sweep(rep.times, rep.src, rep.dst, a, b, rep.T)
    if flag == 0:
        return float(t), False
    return float("inf"), flag == 1
