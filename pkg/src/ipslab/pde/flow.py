"""The semilinear matrix flow dw/dt = 1/2 sum_ij w_ij d_i d_j w + w on the unit square."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._kernels import flow_rhs, flow_run

__all__ = ["PDEError", "DiffMatrixField", "FlowResult", "flow_solve", "flow_residual", "flow_case"]

log = logging.getLogger(__name__)


class PDEError(RuntimeError):
    pass


@dataclass
class DiffMatrixField:
    """Symmetric 2x2 matrices (w11, w12, w22) on the (m+1) x (m+1) grid of [0, 1]^2.

    Index [i, j] is the node (i h, j h).
    """

    w11: np.ndarray
    w12: np.ndarray
    w22: np.ndarray

    def __post_init__(self):
        self.w11, self.w12, self.w22 = (np.array(a, dtype=float) for a in (self.w11, self.w12, self.w22))
        if not (self.w11.shape == self.w12.shape == self.w22.shape) or self.w11.ndim != 2 \
                or self.w11.shape[0] != self.w11.shape[1] or self.w11.shape[0] < 3:
            raise ValueError("entries must be equal square grids with at least 3 points per side")
        if not all(np.all(np.isfinite(a)) for a in (self.w11, self.w12, self.w22)):
            raise ValueError("non-finite entries")

    @classmethod
    def from_callables(cls, f11, f22, f12=None, m: int = 40) -> "DiffMatrixField":
        x = np.linspace(0.0, 1.0, m + 1)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        w12 = np.zeros_like(X1) if f12 is None else np.broadcast_to(f12(X1, X2), X1.shape)
        return cls(np.broadcast_to(f11(X1, X2), X1.shape), w12, np.broadcast_to(f22(X1, X2), X1.shape))

    @property
    def m(self) -> int:
        return self.w11.shape[0] - 1

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def stack(self) -> np.ndarray:
        return np.stack([self.w11, self.w12, self.w22])

    def copy(self) -> "DiffMatrixField":
        return DiffMatrixField(self.w11.copy(), self.w12.copy(), self.w22.copy())

    def min_eigenvalue(self) -> float:
        tr = 0.5 * (self.w11 + self.w22)
        disc = np.sqrt(0.25 * (self.w11 - self.w22) ** 2 + self.w12 ** 2)
        return float((tr - disc).min())

    def sup_distance(self, other: "DiffMatrixField") -> float:
        return float(np.abs(self.stack() - other.stack()).max())

    def rows(self):
        """(x1, x2, w11, w12, w22) rows in node order."""
        x = self.grid
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel(), self.w11.ravel(), self.w12.ravel(), self.w22.ravel()])


@dataclass
class FlowResult:
    times: np.ndarray
    snapshots: list  # DiffMatrixField per output time
    steps: int
    max_clip: float
    blew_up: bool = False
    info: dict = field(default_factory=dict)

    @property
    def final(self) -> DiffMatrixField:
        return self.snapshots[-1]

    def sup_change(self) -> float:
        """Largest sup-distance of any snapshot from the first."""
        return max(s.sup_distance(self.snapshots[0]) for s in self.snapshots)


def flow_solve(w0: DiffMatrixField, t_end: float, snapshots=None, safety: float = 0.9, dt_max: float = 0.01,
               blowup: float = 1e3, clip_tol: float = 1e-6) -> FlowResult:
    """Explicit Euler for the flow with cone projection after every step.

    dt is re-chosen each step as min(dt_max, safety h^2 / (4 rho)) with rho
    the largest nodal spectral radius.  ``snapshots`` lists output times
    (default: 0 and t_end).  On blow-up (an entry above ``blowup``) the
    trajectory up to that point is returned with ``blew_up`` set.
    """
    if not (0 < safety <= 1):
        raise ValueError("safety must lie in (0, 1]")
    if w0.min_eigenvalue() < -1e-10:
        raise ValueError("w0 is not nonnegative definite")
    times = np.array([0.0, t_end] if snapshots is None else sorted(set([0.0, *snapshots])), dtype=float)
    if times[-1] > t_end + 1e-12 or times[0] < 0:
        raise ValueError("snapshot times must lie in [0, t_end]")
    cur = w0.copy()
    out = [cur.copy()]
    steps, clip, t = 0, 0.0, 0.0
    for t_next in times[1:]:
        t, n, c, status = flow_run(cur.w11, cur.w12, cur.w22, cur.h, t, float(t_next), float(safety),
                                   float(dt_max), float(blowup))
        steps += n
        clip = max(clip, c)
        if status == 1:
            log.warning("flow blew up at t=%.4g", t)
            return FlowResult(np.append(times[:len(out)], t), out + [cur.copy()], steps, clip, True)
        out.append(cur.copy())
    if clip > clip_tol:
        log.warning("cone projection clipped %.3g (tolerance %.1g)", clip, clip_tol)
    else:
        log.debug("largest cone clip %.3g", clip)
    return FlowResult(times, out, steps, clip)


def flow_residual(w: DiffMatrixField) -> tuple[np.ndarray, float]:
    """Discrete residual 1/2 sum_ij w_ij d_i d_j w + w and its sup over interior nodes."""
    res = np.empty((3,) + w.w11.shape)
    flow_rhs(w.w11, w.w12, w.w22, w.h, res)
    inner = res[:, 1:-1, 1:-1]
    return res, float(np.abs(inner).max()) if inner.size else 0.0


def flow_case(case: int, m: int = 40, p=None) -> DiffMatrixField:
    """Fixed point w* of the flow for the effective-boundary cases 1, 2 and 4.

    Case 2 needs the catalyzing function p (grid values on the x1 axis,
    e.g. the class-(0,1) solution of the boundary-value problem at alpha = 1).
    """
    x = np.linspace(0.0, 1.0, m + 1)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    wf1, wf2 = X1 * (1 - X1), X2 * (1 - X2)
    zero = np.zeros_like(X1)
    if case == 1:
        return DiffMatrixField(wf1, zero, wf2)
    if case == 2:
        if p is None:
            raise ValueError("case 2 needs p")
        pv = np.asarray(getattr(p, "values", p), dtype=float)
        if pv.size != m + 1:
            raise ValueError("p must live on the same grid")
        return DiffMatrixField(wf1, zero, pv[:, None] * wf2)
    if case == 4:
        return DiffMatrixField(wf1, zero, zero)
    raise ValueError("closed-form fixed points exist for cases 1, 2 and 4 only")

