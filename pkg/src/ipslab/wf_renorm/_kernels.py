"""Compiled Wright-Fisher path loops."""

import numpy as np
from numba import njit


@njit(cache=True)
def interp_uniform(vals, y):
    """Linear interpolation of grid values on the uniform grid of [0, 1]."""
    m = vals.shape[0] - 1
    s = y * m
    k = int(s)
    if k >= m:
        return vals[m]
    if k < 0:
        return vals[0]
    w = s - k
    return vals[k] * (1.0 - w) + vals[k + 1] * w


@njit(cache=True)
def _beta0(x, gamma):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return np.random.beta(x / gamma, (1.0 - x) / gamma)


@njit(cache=True)
def _log_beta_density(y, a, b):
    return (a - 1.0) * np.log(y) + (b - 1.0) * np.log(1.0 - y)


@njit(cache=True)
def _wf_step(y, x, gamma, h):
    """One Metropolis-adjusted Euler-Maruyama step of dy = (x-y)/gamma dt + sqrt(2y(1-y)) dB.

    The EM increment is used as a proposal and accepted with the
    Metropolis-Hastings ratio for the Beta(x/gamma, (1-x)/gamma) law, which
    the diffusion leaves invariant and is reversible for.  The chain is then
    exactly stationary, so no boundary bias builds up along a path.
    Proposals outside (0, 1) are rejected; the traps 0 and 1 are fixed.
    """
    if y <= 0.0 or y >= 1.0:
        return y
    a = x / gamma
    b = (1.0 - x) / gamma
    m = y + (x - y) / gamma * h
    v = 2.0 * y * (1.0 - y) * h
    yp = m + np.sqrt(v) * np.random.standard_normal()
    if yp <= 0.0 or yp >= 1.0:
        return y
    mp = yp + (x - yp) / gamma * h
    vp = 2.0 * yp * (1.0 - yp) * h
    # deep in the tail of Beta(a, .) with small a the variance underflows;
    # rejecting both directions there keeps the chain reversible
    if v <= 0.0 or vp <= 0.0:
        return y
    log_ratio = (_log_beta_density(yp, a, b) - _log_beta_density(y, a, b)
                 - (y - mp) ** 2 / (2.0 * vp) - 0.5 * np.log(vp)
                 + (yp - m) ** 2 / (2.0 * v) + 0.5 * np.log(v))
    if np.log(np.random.random()) < log_ratio:
        return yp
    return y


@njit(cache=True)
def u_integral_paths(vals, x, gamma, dt, n_paths, seed):
    """Samples of 1 - exp(-2 int_0^{tau/2} p(y(s)) ds), tau ~ Exp(mean gamma), y stationary."""
    np.random.seed(seed)
    out = np.empty(n_paths)
    for r in range(n_paths):
        half = 0.5 * np.random.exponential(gamma)
        y = _beta0(x, gamma)
        t = 0.0
        acc = 0.0
        f0 = interp_uniform(vals, y)
        while t < half:
            h = min(dt, half - t)
            y = _wf_step(y, x, gamma, h)
            f1 = interp_uniform(vals, y)
            acc += 0.5 * (f0 + f1) * h
            f0 = f1
            t += h
        out[r] = 1.0 - np.exp(-2.0 * acc)
    return out


@njit(cache=True)
def u_weighted_paths(vals, x, gamma, dt, n_paths, seed):
    """Same mean as :func:`u_integral_paths` with the exponential clock integrated out on [0, S].

    Column 0 is int_0^S 2 p(y) exp(-2s/gamma - 2 I(s)) ds with S = 2.5 gamma, plus
    1{tau/2 > S} (exp(-2 I(S)) - exp(-2 I(tau/2))) for the remaining
    (memoryless) part of the clock.  Column 1 is the control variate
    int_0^S 2 p(y) exp(-2s/gamma) ds, whose mean is known from the
    stationary law.
    """
    np.random.seed(seed)
    out = np.empty((n_paths, 2))
    horizon = 2.5 * gamma
    for r in range(n_paths):
        half = 0.5 * np.random.exponential(gamma)
        end = max(horizon, half)
        y = _beta0(x, gamma)
        t = 0.0
        acc = 0.0
        weighted = 0.0
        cv = 0.0
        f0 = interp_uniform(vals, y)
        g0 = 2.0 * f0
        c0 = 2.0 * f0
        i_at_s = 0.0
        while t < end:
            h = min(dt, end - t)
            if t < horizon:
                h = min(h, horizon - t)
            y = _wf_step(y, x, gamma, h)
            f1 = interp_uniform(vals, y)
            acc += 0.5 * (f0 + f1) * h
            if t < horizon:
                e = np.exp(-2.0 * (t + h) / gamma)
                g1 = 2.0 * f1 * e * np.exp(-2.0 * acc)
                c1 = 2.0 * f1 * e
                weighted += 0.5 * (g0 + g1) * h
                cv += 0.5 * (c0 + c1) * h
                g0 = g1
                c0 = c1
                if t + h >= horizon:
                    i_at_s = acc
            f0 = f1
            t += h
        if half > horizon:
            weighted += np.exp(-2.0 * i_at_s) - np.exp(-2.0 * acc)
        out[r, 0] = weighted
        out[r, 1] = cv
    return out


@njit(cache=True)
def u_product_paths(vals, x, gamma, dt, n_paths, seed):
    """Samples of prod_{sigma_k < tau'} (1 - f(y(sigma_k))), sigma_0 = 0, gaps Exp(mean 1/2), tau' ~ Exp(mean gamma/2)."""
    np.random.seed(seed)
    out = np.empty(n_paths)
    for r in range(n_paths):
        tau = np.random.exponential(0.5 * gamma)
        y = _beta0(x, gamma)
        prod = 1.0 - interp_uniform(vals, y)
        sigma = np.random.exponential(0.5)
        t = 0.0
        while sigma < tau and prod > 0.0:
            h = min(dt, tau - t)
            y1 = _wf_step(y, x, gamma, h)
            while sigma < t + h and sigma < tau:
                ys = y + (y1 - y) * (sigma - t) / h
                prod *= 1.0 - interp_uniform(vals, ys)
                sigma += np.random.exponential(0.5)
            y = y1
            t += h
        out[r] = prod
    return out


@njit(cache=True)
def stationary_path(x, gamma, dt, n_steps, seed):
    np.random.seed(seed)
    out = np.empty(n_steps + 1)
    y = _beta0(x, gamma)
    out[0] = y
    for k in range(n_steps):
        y = _wf_step(y, x, gamma, dt)
        out[k + 1] = y
    return out


@njit(cache=True)
def catalytic_averages(x1, x2, c, alpha, pvals, dt, burn_steps, n_steps, nbatch, seed):
    """Time averages of (y1, y2, y1^2, y2^2, y1 y2, y1(1-y1), p(y1) y2(1-y2)) per batch.

    The reactant y2 moves by clamped EM with the catalyst value at the start
    of the step.
    """
    np.random.seed(seed)
    y1 = _beta0(x1, alpha / c)
    y2 = x2
    sq = np.sqrt(dt)
    out = np.zeros((nbatch, 7))
    per = n_steps // nbatch
    for k in range(burn_steps + per * nbatch):
        z2 = np.random.standard_normal()
        p = interp_uniform(pvals, y1)
        n2 = y2 + c * (x2 - y2) * dt + np.sqrt(2.0 * max(p, 0.0) * y2 * (1.0 - y2)) * sq * z2
        # the catalyst is autonomous: a Wright-Fisher path run at speed alpha
        y1 = _wf_step(y1, x1, alpha / c, alpha * dt)
        y2 = min(1.0, max(0.0, n2))
        j = k - burn_steps
        if j >= 0:
            b = j // per
            p = interp_uniform(pvals, y1)
            out[b, 0] += y1
            out[b, 1] += y2
            out[b, 2] += y1 * y1
            out[b, 3] += y2 * y2
            out[b, 4] += y1 * y2
            out[b, 5] += y1 * (1.0 - y1)
            out[b, 6] += p * y2 * (1.0 - y2)
    return out / per


@njit(cache=True)
def driftless_alive(x, t_end, dt, n_paths, seed, tol):
    """Indicator y_t > 0 for dy = sqrt(y(1-y)) dB; absorbed within ``tol`` of a trap."""
    np.random.seed(seed)
    out = np.empty(n_paths)
    n_steps = int(np.ceil(t_end / dt))
    h = t_end / n_steps
    sq = np.sqrt(h)
    for r in range(n_paths):
        y = x
        for k in range(n_steps):
            if y <= tol or y >= 1.0 - tol:
                break
            y = y + np.sqrt(y * (1.0 - y)) * sq * np.random.standard_normal()
            y = min(1.0, max(0.0, y))
        if y <= tol:
            y = 0.0
        out[r] = 1.0 if y > 0.0 else 0.0
    return out


@njit(cache=True)
def binsplit_run(x0, alpha, t_end, dt, seed, guard, tol):
    """Binary splitting driftless WF particles; returns (status, n_alive, hit_time).

    status 1: some particle reached 1 (it stays there, so Y_T((0,1]) > 0);
    status 0: all particles absorbed at 0 (or none left);
    status 2: interior particles remain at t_end; status 3: guard exceeded.
    """
    np.random.seed(seed)
    if x0 >= 1.0 - tol:
        return 1, 1, 0.0
    if x0 <= tol:
        return 0, 0, 0.0
    pos = np.empty(guard)
    pos[0] = x0
    n = 1
    n_steps = int(np.ceil(t_end / dt))
    h = t_end / n_steps
    sq = np.sqrt(h)
    psplit = -np.expm1(-alpha * h)
    for k in range(n_steps):
        i = 0
        while i < n:
            y = pos[i] + np.sqrt(pos[i] * (1.0 - pos[i])) * sq * np.random.standard_normal()
            if y >= 1.0 - tol:
                return 1, n, (k + 1) * h
            if y <= tol:
                # absorbed at 0: drop it, move the last particle into slot i
                pos[i] = pos[n - 1]
                n -= 1
                continue
            pos[i] = y
            i += 1
        i = 0
        m = n
        while i < m:
            if np.random.random() < psplit:
                if n >= guard:
                    return 3, n, (k + 1) * h
                pos[n] = pos[i]
                n += 1
            i += 1
        if n == 0:
            return 0, 0, (k + 1) * h
    return 2, n, t_end
