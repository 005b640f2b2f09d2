"""Compiled Gillespie and Euler-Maruyama loops."""

import numpy as np
from numba import njit


@njit(cache=True)
def _site_rate(x, m, leak, b, c, d):
    return x * (m + b + d + leak) + c * x * (x - 1.0)


@njit(cache=True)
def gillespie(x, indptr, indices, data, mig, leak, b, c, d, grid, seed, guard, stop_total):
    """Braco jump chain.  Records the state at each grid time.

    Returns (records, t_stop, status, events); status 0 ok, 1 guard
    exceeded, 2 stop_total reached (t_stop holds the hitting time).
    """
    np.random.seed(seed)
    n = x.shape[0]
    m = grid.shape[0]
    rec = np.zeros((m, n), dtype=np.int64)
    R = np.empty(n)
    tot = 0
    for i in range(n):
        R[i] = _site_rate(x[i], mig[i], leak[i], b, c, d)
        tot += x[i]
    total = R.sum()
    t = 0.0
    g = 0
    events = 0
    if stop_total >= 0 and tot == stop_total:
        for k in range(m):
            rec[k] = x
        return rec, 0.0, 2, 0
    while g < m:
        if total <= 0.0:
            break
        t += np.random.exponential(1.0 / total)
        while g < m and grid[g] < t:
            rec[g] = x
            g += 1
        if g >= m:
            break
        u = np.random.random() * total
        i = 0
        acc = R[0]
        while acc <= u and i < n - 1:
            i += 1
            acc += R[i]
        xi = float(x[i])
        v = np.random.random() * R[i]
        if v < xi * mig[i]:
            w = v / xi
            k = indptr[i]
            acc2 = data[k]
            while acc2 <= w and k < indptr[i + 1] - 1:
                k += 1
                acc2 += data[k]
            j = indices[k]
            x[i] -= 1
            x[j] += 1
            R[j] = _site_rate(x[j], mig[j], leak[j], b, c, d)
        else:
            v -= xi * mig[i]
            if v < xi * b:
                x[i] += 1
                tot += 1
            else:
                x[i] -= 1
                tot -= 1
        R[i] = _site_rate(x[i], mig[i], leak[i], b, c, d)
        events += 1
        total = 0.0
        for k in range(n):
            total += R[k]
        if tot > guard:
            return rec, t, 1, events
        if stop_total >= 0 and tot == stop_total:
            for k in range(g, m):
                rec[k] = x
            return rec, t, 2, events
    for k in range(g, m):
        rec[k] = x
    return rec, t, 0, events


@njit(cache=True)
def gillespie_coupled(y, z, indptr, indices, data, mig, leak, b, c, d, bt, ct, dt, t_end, seed):
    """Two-colour construction of braco processes X <= X~.

    y counts particles present in both systems, z particles only in X~.
    Requires b <= bt, c >= ct, d >= dt.  Returns (y, z, events).
    """
    np.random.seed(seed)
    n = y.shape[0]
    R = np.empty(n)

    def rate(yi, zi, i):
        return (yi * (mig[i] + bt + d + leak[i]) + c * yi * (yi - 1.0)
                + zi * (mig[i] + bt + dt + leak[i]) + ct * (zi * (zi - 1.0) + 2.0 * yi * zi))

    for i in range(n):
        R[i] = rate(float(y[i]), float(z[i]), i)
    total = R.sum()
    t = 0.0
    events = 0
    while total > 0.0:
        t += np.random.exponential(1.0 / total)
        if t > t_end:
            break
        u = np.random.random() * total
        i = 0
        acc = R[0]
        while acc <= u and i < n - 1:
            i += 1
            acc += R[i]
        yi = float(y[i])
        zi = float(z[i])
        v = np.random.random() * R[i]
        j = -1
        ry = yi * (mig[i] + bt + d + leak[i])
        if v < ry:
            w = v / yi
            if w < mig[i]:
                k = indptr[i]
                acc2 = data[k]
                while acc2 <= w and k < indptr[i + 1] - 1:
                    k += 1
                    acc2 += data[k]
                j = indices[k]
                y[i] -= 1
                y[j] += 1
            else:
                w -= mig[i]
                if w < b:
                    y[i] += 1
                elif w < bt:
                    z[i] += 1
                elif w < bt + dt + leak[i]:
                    y[i] -= 1
                else:
                    y[i] -= 1
                    z[i] += 1
        else:
            v -= ry
            rc = c * yi * (yi - 1.0)
            if v < rc:
                y[i] -= 1
                if v >= ct * yi * (yi - 1.0):
                    z[i] += 1
            else:
                v -= rc
                rz = zi * (mig[i] + bt + dt + leak[i])
                if v < rz:
                    w = v / zi
                    if w < mig[i]:
                        k = indptr[i]
                        acc2 = data[k]
                        while acc2 <= w and k < indptr[i + 1] - 1:
                            k += 1
                            acc2 += data[k]
                        j = indices[k]
                        z[i] -= 1
                        z[j] += 1
                    elif w < mig[i] + bt:
                        z[i] += 1
                    else:
                        z[i] -= 1
                else:
                    z[i] -= 1
        R[i] = rate(float(y[i]), float(z[i]), i)
        if j >= 0:
            R[j] = rate(float(y[j]), float(z[j]), j)
        events += 1
        total = 0.0
        for k in range(n):
            total += R[k]
    return y, z, events


@njit(cache=True)
def resem_path(phi, indptr, indices, data, inflow_total, b, c, d, dt, n_steps, grid_steps, seed):
    """Split-step Euler-Maruyama for the resem SDE.

    Each step applies the drift (migration with the transposed kernel given
    in CSR form, selection, mutation), clamps to [0, 1], then the diffusion
    increment sqrt(2c x(1-x) dt) Z and clamps again.  Both half-steps are
    monotone maps, so ordered initial states stay ordered under shared noise.
    ``inflow_total[i]`` is sum_j a(j, i).
    """
    np.random.seed(seed)
    n = phi.shape[0]
    m = grid_steps.shape[0]
    rec = np.empty((m, n))
    x = phi.copy()
    new = np.empty(n)
    g = 0
    while g < m and grid_steps[g] == 0:
        rec[g] = x
        g += 1
    sq = np.sqrt(dt)
    for s in range(1, n_steps + 1):
        for i in range(n):
            flow = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                flow += data[k] * x[indices[k]]
            xi = x[i]
            v = xi + dt * (flow - inflow_total[i] * xi + b * xi * (1.0 - xi) - d * xi)
            new[i] = min(1.0, max(0.0, v))
        for i in range(n):
            # one normal per site and step, so shared seeds give shared noise
            zeta = np.random.standard_normal()
            xi = new[i]
            if c > 0.0:
                xi += np.sqrt(2.0 * c * xi * (1.0 - xi)) * sq * zeta
                xi = min(1.0, max(0.0, xi))
            x[i] = xi
        while g < m and grid_steps[g] == s:
            rec[g] = x
            g += 1
    return rec
