"""Nonnegative solutions of 1/2 x(1-x) p'' + alpha p(1-p) = 0 by shooting from x = 0."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import shoot
from .flow import PDEError

__all__ = ["GridFn1D", "pstar_shoot", "parse_class", "ode_residual", "boundary_identity_gaps"]


@dataclass
class GridFn1D:
    """Values on the uniform grid of [0, 1] with m + 1 points."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("need a 1-D grid with at least 2 points")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values")

    @classmethod
    def from_callable(cls, f, m: int = 40) -> "GridFn1D":
        x = np.linspace(0.0, 1.0, m + 1)
        return cls(np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy())

    @property
    def m(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    def sup_distance(self, other) -> float:
        vals = other.values if hasattr(other, "values") else np.asarray(other, dtype=float)
        return float(np.abs(self.values - vals).max())


def parse_class(cls) -> tuple[int, int]:
    """(l, r) from a tuple or a string such as "01"."""
    if isinstance(cls, str):
        cls = tuple(int(c) for c in cls.strip("() ").replace(",", ""))
    l, r = (int(v) for v in cls)
    if l not in (0, 1) or r not in (0, 1):
        raise ValueError(f"class must be in {{0,1}}^2, got {cls}")
    return l, r


def _classify(s, alpha, eps, dx, n, target):
    """True if slope s is too large for the target class."""
    p, status, _ = shoot(s, alpha, eps, dx, n)
    if status == 0:
        # linear extrapolation over the last eps to x = 1
        end = p[-1] + (p[-1] - p[-2]) / dx * eps
        status = 1 if end > 1.0 else 2 if end < 0.0 else 0
    if target == 1:
        return status == 1
    return status != 2


def pstar_shoot(alpha: float, cls=(0, 1), m: int = 40, eps: float = 1e-4, dx: float = 1e-4,
                bracket=(1e-3, 50.0), iters: int = 200) -> GridFn1D:
    """The fixed point p_{l,r} of the Cauchy problem on the (m+1)-point grid.

    Classes (1,1) and, for alpha <= 1, (0,0) have the constant solutions 1
    and 0.  Otherwise p is integrated from eps with p(eps) = s eps + p''(0) eps^2 / 2,
    p''(0) = -2 alpha s, and s is bisected so that p reaches 1 at x = 1
    (class (0,1)) or 0 at x = 1 without changing sign (class (0,0)).
    Class (1,0) is the mirror image of (0,1).  ``meta`` holds the slope and
    the fine solution.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    l, r = parse_class(cls)
    x = np.linspace(0.0, 1.0, m + 1)
    if (l, r) == (1, 1):
        return GridFn1D(np.ones(m + 1), {"class": (1, 1), "alpha": alpha})
    if (l, r) == (0, 0) and alpha <= 1:
        return GridFn1D(np.zeros(m + 1), {"class": (0, 0), "alpha": alpha})
    if (l, r) == (1, 0):
        g = pstar_shoot(alpha, (0, 1), m, eps, dx, bracket, iters)
        meta = dict(g.meta, **{"class": (1, 0), "mirrored": True, "x_fine": 1.0 - g.meta["x_fine"][::-1],
                               "p_fine": g.meta["p_fine"][::-1].copy()})
        return GridFn1D(g.values[::-1].copy(), meta)
    target = r
    n = int(round((1.0 - 2.0 * eps) / dx))
    lo, hi = (float(v) for v in bracket)
    trace = [(lo, _classify(lo, alpha, eps, dx, n, target)), (hi, _classify(hi, alpha, eps, dx, n, target))]
    if trace[0][1] or not trace[1][1]:
        raise PDEError(f"shooting bracket failed for alpha={alpha}, class={(l, r)}: {trace}")
    probes = np.geomspace(lo, hi, 10)[1:-1]
    flags = [_classify(s, alpha, eps, dx, n, target) for s in probes]
    if any(a and not b for a, b in zip(flags, flags[1:])):
        raise PDEError(f"endpoint not monotone in the slope: {list(zip(probes, flags))}")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _classify(mid, alpha, eps, dx, n, target):
            hi = mid
        else:
            lo = mid
    p_fine, status, last = shoot(lo, alpha, eps, dx, n)
    if status != 0:
        # the slope just below the separatrix can still turn at the very end
        p_fine[last:] = p_fine[last - 1]
    xf = np.concatenate([[0.0], eps + dx * np.arange(n + 1), [1.0]])
    pf = np.concatenate([[0.0], np.clip(p_fine, 0.0, 1.0), [float(target)]])
    vals = np.interp(x, xf, pf)
    return GridFn1D(vals, {"class": (l, r), "alpha": alpha, "slope": lo, "slope_hi": hi, "x_fine": xf,
                           "p_fine": pf, "probes": list(zip(probes.tolist(), flags))})


def ode_residual(p: GridFn1D) -> float:
    """Sup over interior grid nodes of |1/2 x(1-x) p'' + alpha p(1-p)| using the fine solution."""
    alpha = p.meta["alpha"]
    if "p_fine" not in p.meta:
        v = p.values
        return float(np.abs(alpha * v * (1 - v)).max())
    xf, pf = p.meta["x_fine"], p.meta["p_fine"]
    worst = 0.0
    for xj in p.grid[1:-1]:
        k = int(np.argmin(np.abs(xf - xj)))
        d = xf[k + 1] - xf[k]
        d2 = (pf[k + 1] - 2 * pf[k] + pf[k - 1]) / d ** 2
        worst = max(worst, abs(0.5 * xf[k] * (1 - xf[k]) * d2 + alpha * pf[k] * (1 - pf[k])))
    return worst


def boundary_identity_gaps(p: GridFn1D, window: float = 2e-2, deg: int = 4, skip: float = 5e-4) -> tuple[float, float]:
    """Boundary relations between p' and p'' at x = 0 and x = 1 from local polynomial fits.

    At an end where p vanishes and the other end is its maximum side the
    relation is p'' = -2 alpha p' (x = 0) resp. p'' = +2 alpha p' (x = 1);
    substituting q = 1 - p flips the sign.  Fine points within ``skip`` of the
    end opposite to the shooting start are left out of the fit.
    """
    alpha = p.meta["alpha"]
    xf, pf = p.meta.get("x_fine"), p.meta.get("p_fine")
    if xf is None:
        return 0.0, 0.0
    start = 1.0 if p.meta.get("mirrored") else 0.0
    out = []
    for end in (0.0, 1.0):
        sel = np.abs(xf - end) <= window
        if end != start:
            sel &= np.abs(xf - end) > skip
        c = np.polynomial.polynomial.polyfit(xf[sel] - end, pf[sel], deg)
        low = p.values[0 if end == 0.0 else -1] < 0.5
        sign = 1.0 if low == (end == 0.0) else -1.0
        out.append(abs(2 * c[2] + sign * 2 * alpha * c[1]))
    return out[0], out[1]
