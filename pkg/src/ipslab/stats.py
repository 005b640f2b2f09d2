"""Small Monte-Carlo summaries shared by the simulators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Estimate", "mean_se", "ratio_estimate", "z_score", "batch_means", "within"]


@dataclass(frozen=True)
class Estimate:
    """A point estimate with its standard error (``se == 0`` means exact)."""

    value: float
    se: float
    n: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def exact(self) -> bool:
        return self.se == 0.0

    def __float__(self) -> float:
        return float(self.value)

    def as_dict(self) -> dict:
        d = {"value": float(self.value), "se": "exact" if self.exact else float(self.se), "n": int(self.n)}
        d.update(self.extra)
        return d


def mean_se(samples) -> Estimate:
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return Estimate(float(x.mean()), se, n)


def ratio_estimate(num, den) -> Estimate:
    """Ratio of means ``sum(num)/sum(den)`` with a delta-method standard error."""
    num = np.asarray(num, dtype=float).ravel()
    den = np.asarray(den, dtype=float).ravel()
    n = num.size
    mden = den.mean()
    if mden == 0:
        raise ZeroDivisionError("all weights vanish")
    r = num.mean() / mden
    resid = num - r * den
    se = float(np.sqrt(np.sum(resid**2) / (n * (n - 1))) / mden) if n > 1 else float("inf")
    return Estimate(float(r), se, n)


def z_score(a: Estimate, b: Estimate) -> float:
    """Pooled z-score of ``a - b`` for independent estimates."""
    diff = a.value - b.value
    se = float(np.hypot(a.se, b.se))
    if se == 0.0:
        return 0.0 if diff == 0.0 else float(np.sign(diff) * np.inf)
    return float(diff / se)


def batch_means(series, nbatch: int = 20) -> Estimate:
    """Mean of a correlated time series with a batch-means standard error."""
    x = np.asarray(series, dtype=float).ravel()
    m = x.size // nbatch
    if m < 1:
        raise ValueError("series shorter than the number of batches")
    b = x[: m * nbatch].reshape(nbatch, m).mean(axis=1)
    return Estimate(float(x.mean()), float(b.std(ddof=1) / np.sqrt(nbatch)), x.size)


def within(value: float, target: float, se: float, k: float = 4.0) -> bool:
    return abs(value - target) <= k * se
