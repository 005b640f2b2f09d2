"""du/dt = 1/2 x(1-x) u'' + alpha u(1-u) on [0, 1] and its long-time limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import cauchy_run
from .flow import PDEError
from .pstar import GridFn1D, pstar_shoot

__all__ = ["CauchyResult", "cauchy_solve", "limit_class", "cauchy_limit", "upper_bound_infinite",
           "gamma_zero_limit_check"]


@dataclass
class CauchyResult:
    times: np.ndarray
    values: np.ndarray  # (len(times), m + 1)
    dt: float

    @property
    def final(self) -> GridFn1D:
        return GridFn1D(self.values[-1].copy())

    def at(self, k: int) -> GridFn1D:
        return GridFn1D(self.values[k].copy())


def cauchy_solve(f, alpha: float, t_end: float, m: int | None = None, dt: float | None = None,
                 snapshots=None) -> CauchyResult:
    """Method of lines with Lie splitting.

    Each step applies the explicit diffusion update (monotone for
    dt <= h^2 / max x(1-x) = 4 h^2), then the exact logistic flow
    u -> u e^{alpha dt} / (1 + u (e^{alpha dt} - 1)).  The endpoints carry no
    diffusion and so follow the logistic flow alone.  ``f`` is a GridFn1D,
    an array of grid values or a callable (then m defaults to 40).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if callable(f) and not isinstance(f, GridFn1D):
        f = GridFn1D.from_callable(f, 40 if m is None else m)
    vals = np.array(getattr(f, "values", f), dtype=float)
    if m is not None and vals.size != m + 1:
        vals = np.interp(np.linspace(0, 1, m + 1), np.linspace(0, 1, vals.size), vals)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("f must be finite and nonnegative")
    m = vals.size - 1
    h = 1.0 / m
    x = np.linspace(0.0, 1.0, m + 1)
    limit = 4.0 * h * h
    dt = 0.5 * limit if dt is None else float(dt)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the monotonicity limit {limit}")
    times = np.array([0.0, t_end] if snapshots is None else sorted(set([0.0, *snapshots])), dtype=float)
    a_over_h2 = 0.5 * x * (1 - x) / (h * h)
    guard = 10.0 * max(1.0, float(vals.max()))
    u = vals.copy()
    out = [u.copy()]
    t = 0.0
    for t_next in times[1:]:
        n = int(np.ceil((t_next - t) / dt - 1e-9))
        if n > 0:
            cauchy_run(u, a_over_h2, float(alpha), (t_next - t) / n, n)
        t = t_next
        if u.max() > guard or not np.all(np.isfinite(u)):
            raise PDEError(f"solution left the bound {guard} at t={t}")
        out.append(u.copy())
    return CauchyResult(times, np.array(out), dt)


def limit_class(f, tol: float = 0.0) -> str:
    """Which of the five long-time limits applies to the initial datum f."""
    v = np.asarray(getattr(f, "values", f), dtype=float)
    left, right = v[0] > tol, v[-1] > tol
    if left and right:
        return "11"
    if left:
        return "10"
    if right:
        return "01"
    # f >= 0 has positive integral iff some interior node is positive
    return "00" if v[1:-1].max(initial=0.0) > tol else "0"


def cauchy_limit(f, alpha: float, m: int = 40) -> GridFn1D:
    """The predicted limit of u_t as t -> infinity for datum f."""
    cls = limit_class(f)
    if cls == "0":
        return GridFn1D(np.zeros(m + 1))
    return pstar_shoot(alpha, cls, m=m)


def upper_bound_infinite(alpha: float, t: float) -> float:
    """Solution of du/dt = alpha u - alpha u^2 started from infinity."""
    return 1.0 / (-np.expm1(-alpha * t))


def gamma_zero_limit_check(p0, gamma_small: float = 0.05, n: int = 40, alpha: float = 1.0, mc: int = 4000,
                           seed: int = 0, dt: float | None = None, m: int = 40):
    """sup |U_gamma^n p0 - u_{n gamma}| on the shared grid, with u solving the Cauchy problem from p0.

    Returns (sup difference, the iterate, the PDE solution).  The iterate is
    computed with the weighted estimator of U_gamma.
    """
    from ..wf_renorm import CatalyzingFn, iterate_renorm

    if alpha != 1.0:
        raise ValueError("the renormalization bridge is at alpha = 1")
    vals = np.asarray(getattr(p0, "values", p0), dtype=float)
    if vals.size != m + 1:
        raise ValueError("p0 must live on the (m+1)-point grid")
    t_star = n * gamma_small
    pde = cauchy_solve(vals, alpha, t_star).final
    if np.all(vals == vals[0]) and vals[0] in (0.0, 1.0):
        # 0 and 1 are fixed by both maps
        return float(np.abs(vals - pde.values).max()), GridFn1D(vals.copy()), pde
    seq = iterate_renorm(CatalyzingFn(vals, np.zeros_like(vals)), [gamma_small] * n, mc=mc, dt=dt, seed=seed,
                         method="weighted")
    it = GridFn1D(seq[-1].values, {"se": seq[-1].se})
    return it.sup_distance(pde), it, pde
