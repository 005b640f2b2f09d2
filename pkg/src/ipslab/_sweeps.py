"""Compiled event sweeps over a realised graphical representation.

Events are stored as three parallel arrays sorted by time: ``times``,
``src`` and ``dst``.  A recovery mark at site i has ``src = i, dst = -1``;
an infection arrow i -> j has ``src = i, dst = j``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def sweep_forward(times, src, dst, state, t_start, t_end):
    """Advance ``state`` (uint8 per site) through events in (t_start, t_end]."""
    k = np.searchsorted(times, t_start, side="right")
    n = times.shape[0]
    while k < n and times[k] <= t_end:
        j = dst[k]
        if j < 0:
            state[src[k]] = 0
        elif state[src[k]]:
            state[j] = 1
        k += 1
    return state


@njit(cache=True)
def sweep_backward(times, src, dst, state, t_top, t_bottom):
    """Dual sweep: reversed arrows, events in [t_bottom, t_top), latest first."""
    k = np.searchsorted(times, t_top, side="left") - 1
    while k >= 0 and times[k] >= t_bottom:
        j = dst[k]
        if j < 0:
            state[src[k]] = 0
        elif state[j]:
            state[src[k]] = 1
        k -= 1
    return state


@njit(cache=True)
def sweep_counts(times, src, dst, state, t_start, grid):
    """Forward sweep from ``t_start`` recording |state| at each grid time."""
    out = np.empty(grid.shape[0], dtype=np.int64)
    size = 0
    for i in range(state.shape[0]):
        size += state[i]
    k = np.searchsorted(times, t_start, side="right")
    n = times.shape[0]
    for g in range(grid.shape[0]):
        tg = grid[g]
        while k < n and times[k] <= tg:
            j = dst[k]
            s = src[k]
            if j < 0:
                if state[s]:
                    state[s] = 0
                    size -= 1
            elif state[s] and not state[j]:
                state[j] = 1
                size += 1
            k += 1
        out[g] = size
    return out


@njit(cache=True)
def coupling_sweep(times, src, dst, a_state, b_state, t_end):
    """First event time at which two forward processes coincide.

    Returns (time, flag): flag 0 coupled, 1 one process died first,
    2 neither by t_end.  Coupling at time 0 is reported as (0.0, 0).
    """
    n_sites = a_state.shape[0]
    diff = 0
    na = 0
    nb = 0
    for i in range(n_sites):
        if a_state[i] != b_state[i]:
            diff += 1
        na += a_state[i]
        nb += b_state[i]
    if diff == 0:
        return 0.0, 0
    for k in range(times.shape[0]):
        t = times[k]
        if t > t_end:
            break
        j = dst[k]
        s = src[k]
        if j < 0:
            before = a_state[s] != b_state[s]
            if a_state[s]:
                na -= 1
            if b_state[s]:
                nb -= 1
            a_state[s] = 0
            b_state[s] = 0
            if before:
                diff -= 1
        else:
            before = a_state[j] != b_state[j]
            if a_state[s] and not a_state[j]:
                a_state[j] = 1
                na += 1
            if b_state[s] and not b_state[j]:
                b_state[j] = 1
                nb += 1
            after = a_state[j] != b_state[j]
            if before and not after:
                diff -= 1
            elif after and not before:
                diff += 1
        if na == 0 or nb == 0:
            return t, 1
        if diff == 0:
            return t, 0
    return np.inf, 2
