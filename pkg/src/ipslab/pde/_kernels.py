"""Compiled loops for the flow, shooting and Cauchy solvers."""

import numpy as np
from numba import njit


@njit(cache=True)
def _d2(w, i, j, axis, m, h2):
    # central second difference; boundary rows use the quadratic-ghost formula
    if axis == 0:
        if i == 0:
            return (w[0, j] - 2.0 * w[1, j] + w[2, j]) / h2
        if i == m:
            return (w[m, j] - 2.0 * w[m - 1, j] + w[m - 2, j]) / h2
        return (w[i + 1, j] - 2.0 * w[i, j] + w[i - 1, j]) / h2
    if j == 0:
        return (w[i, 0] - 2.0 * w[i, 1] + w[i, 2]) / h2
    if j == m:
        return (w[i, m] - 2.0 * w[i, m - 1] + w[i, m - 2]) / h2
    return (w[i, j + 1] - 2.0 * w[i, j] + w[i, j - 1]) / h2


@njit(cache=True)
def _d1_axis1(w, i, j, m, h):
    if j == 0:
        return (-3.0 * w[i, 0] + 4.0 * w[i, 1] - w[i, 2]) / (2.0 * h)
    if j == m:
        return (3.0 * w[i, m] - 4.0 * w[i, m - 1] + w[i, m - 2]) / (2.0 * h)
    return (w[i, j + 1] - w[i, j - 1]) / (2.0 * h)


@njit(cache=True)
def _d12(w, i, j, m, h):
    if i == 0:
        return (-3.0 * _d1_axis1(w, 0, j, m, h) + 4.0 * _d1_axis1(w, 1, j, m, h) - _d1_axis1(w, 2, j, m, h)) / (2.0 * h)
    if i == m:
        return (3.0 * _d1_axis1(w, m, j, m, h) - 4.0 * _d1_axis1(w, m - 1, j, m, h)
                + _d1_axis1(w, m - 2, j, m, h)) / (2.0 * h)
    return (_d1_axis1(w, i + 1, j, m, h) - _d1_axis1(w, i - 1, j, m, h)) / (2.0 * h)


@njit(cache=True)
def flow_rhs(w11, w12, w22, h, out):
    """out[c] = 1/2 sum_ij w_ij d_i d_j w_c + w_c for c in (11, 12, 22)."""
    m = w11.shape[0] - 1
    h2 = h * h
    comps = (w11, w12, w22)
    for i in range(m + 1):
        for j in range(m + 1):
            a, b, c = w11[i, j], w12[i, j], w22[i, j]
            for k in range(3):
                w = comps[k]
                val = 0.5 * a * _d2(w, i, j, 0, m, h2) + 0.5 * c * _d2(w, i, j, 1, m, h2) + w[i, j]
                if b != 0.0:
                    val += b * _d12(w, i, j, m, h)
                out[k, i, j] = val


@njit(cache=True)
def project_cone(w11, w12, w22):
    """Clip negative eigenvalues of each 2x2 matrix at 0; returns the largest clipped magnitude."""
    worst = 0.0
    n0, n1 = w11.shape
    for i in range(n0):
        for j in range(n1):
            a, b, c = w11[i, j], w12[i, j], w22[i, j]
            tr = 0.5 * (a + c)
            disc = np.sqrt(0.25 * (a - c) ** 2 + b * b)
            lo = tr - disc
            if lo >= 0.0:
                continue
            worst = max(worst, -lo)
            hi = tr + disc
            if hi <= 0.0:
                w11[i, j] = 0.0
                w12[i, j] = 0.0
                w22[i, j] = 0.0
                continue
            # eigenvector of hi
            if b != 0.0:
                vx, vy = hi - c, b
            elif a >= c:
                vx, vy = 1.0, 0.0
            else:
                vx, vy = 0.0, 1.0
            nrm = vx * vx + vy * vy
            w11[i, j] = hi * vx * vx / nrm
            w12[i, j] = hi * vx * vy / nrm
            w22[i, j] = hi * vy * vy / nrm
    return worst


@njit(cache=True)
def max_spectral_radius(w11, w12, w22):
    r = 0.0
    n0, n1 = w11.shape
    for i in range(n0):
        for j in range(n1):
            a, b, c = w11[i, j], w12[i, j], w22[i, j]
            tr = 0.5 * (a + c)
            disc = np.sqrt(0.25 * (a - c) ** 2 + b * b)
            r = max(r, abs(tr) + disc)
    return r


@njit(cache=True)
def flow_run(w11, w12, w22, h, t0, t1, safety, dt_max, blowup):
    """Advance the flow in place from t0 to t1.

    Returns (t reached, steps, largest clip, status) with status 0 ok, 1 blow-up.
    """
    out = np.empty((3,) + w11.shape)
    t = t0
    steps = 0
    clip = 0.0
    while t < t1 - 1e-14:
        rho = max_spectral_radius(w11, w12, w22)
        dt = dt_max
        if rho > 0.0:
            dt = min(dt, safety * h * h / (4.0 * rho))
        dt = min(dt, t1 - t)
        flow_rhs(w11, w12, w22, h, out)
        w11 += dt * out[0]
        w12 += dt * out[1]
        w22 += dt * out[2]
        clip = max(clip, project_cone(w11, w12, w22))
        t += dt
        steps += 1
        if max(np.abs(w11).max(), np.abs(w12).max(), np.abs(w22).max()) > blowup:
            return t, steps, clip, 1
    return t, steps, clip, 0


@njit(cache=True)
def _pdd(x, p, alpha):
    return -2.0 * alpha * p * (1.0 - p) / (x * (1.0 - x))


@njit(cache=True)
def shoot(s, alpha, eps, dx, n_steps):
    """RK4 for p'' = -2 alpha p(1-p)/(x(1-x)) from x = eps with the series start.

    Returns (p values on x = eps + k dx, k = 0..n_steps, status, last index)
    with status 0 reached the end, 1 crossed above 1, 2 crossed below 0.
    """
    p_out = np.empty(n_steps + 1)
    p = s * eps - alpha * s * eps * eps
    q = s - 2.0 * alpha * s * eps
    x = eps
    p_out[0] = p
    for k in range(n_steps):
        k1p = q
        k1q = _pdd(x, p, alpha)
        k2p = q + 0.5 * dx * k1q
        k2q = _pdd(x + 0.5 * dx, p + 0.5 * dx * k1p, alpha)
        k3p = q + 0.5 * dx * k2q
        k3q = _pdd(x + 0.5 * dx, p + 0.5 * dx * k2p, alpha)
        k4p = q + dx * k3q
        k4q = _pdd(x + dx, p + dx * k3p, alpha)
        p = p + dx / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        q = q + dx / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        x = eps + (k + 1) * dx
        p_out[k + 1] = p
        if p > 1.0:
            return p_out, 1, k + 1
        if p < 0.0:
            return p_out, 2, k + 1
    return p_out, 0, n_steps


@njit(cache=True)
def cauchy_run(u, a_over_h2, alpha, dt, n_steps):
    """Lie splitting: explicit diffusion step, then the exact logistic flow."""
    m = u.shape[0] - 1
    e = np.exp(alpha * dt)
    new = np.empty_like(u)
    for _ in range(n_steps):
        new[0] = u[0]
        new[m] = u[m]
        for i in range(1, m):
            new[i] = u[i] + dt * a_over_h2[i] * (u[i + 1] - 2.0 * u[i] + u[i - 1])
        for i in range(m + 1):
            v = new[i]
            u[i] = v * e / (1.0 + v * (e - 1.0))
    return u
