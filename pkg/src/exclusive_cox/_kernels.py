"""Compiled inner loops for the Cox partial likelihood and coordinate descent.

All arrays here are in time-sorted order.  ``risk_start[k]`` is the first
sorted position whose time equals ``t_k`` (so the risk set of position ``k``
is ``risk_start[k]:n``) and ``block_end[k]`` is the last such position.
"""

import numpy as np
from numba import njit

MODE_COORDINATE = 0
MODE_EXCLUSIVE = 1
MODE_GROUP = 2

STATUS_OK = 0
STATUS_NONFINITE = 1

_MAX_BACKTRACK = 64


@njit(cache=True)
def risk_state(eta, delta, risk_start, block_end, log_s0, wc, work):
    """Log partial likelihood plus the per-row score weights.

    Fills ``log_s0[k] = log sum_{l in R(t_k)} exp(eta_l)`` at event rows and
    ``wc[k] = exp(eta_k) * sum_{events i, t_i <= t_k} 1 / S0(i)``, so that the
    score with respect to ``eta`` is ``delta - wc``.

    Risk-set sums are accumulated backwards relative to the running maximum
    of ``eta`` over the risk set, and the inverse sums forwards relative to
    the reciprocal of that maximum, so no exponent is ever positive.  Each
    pass rescales only when the running maximum moves.
    """
    n = eta.shape[0]
    # work[:n] = suffix max, work[n:2n] = suffix scaled sum, work[2n:] = exp(eta - suffix max)
    m = -np.inf
    s = 0.0
    for k in range(n - 1, -1, -1):
        v = eta[k]
        if v > m:
            s = s * np.exp(m - v) + 1.0
            m = v
            work[2 * n + k] = 1.0
        else:
            e = np.exp(v - m)
            s += e
            work[2 * n + k] = e
        work[k] = m
        work[n + k] = s

    ll = 0.0
    c = 0.0
    m_prev = np.inf
    for k in range(n):
        rs = risk_start[k]
        mk = work[rs]
        sk = work[n + rs]
        if delta[k] > 0.0:
            log_s0[k] = mk + np.log(sk)
            ll += eta[k] - log_s0[k]
        if mk != m_prev:
            if c > 0.0:
                c *= np.exp(mk - m_prev)
            m_prev = mk
        if delta[k] > 0.0:
            c += 1.0 / sk
        wc[k] = c
    # wc[k] holds the cumulative inverse sum scaled by exp(M_k); a row needs
    # the value at the end of its tie block times exp(eta_k - M_k)
    for k in range(n):
        mk = work[risk_start[k]]
        ek = work[2 * n + k]
        if work[k] != mk:
            ek *= np.exp(work[k] - mk)
        work[2 * n + k] = wc[block_end[k]] * ek
    for k in range(n):
        wc[k] = work[2 * n + k]
    return ll


@njit(cache=True)
def log_likelihood(eta, delta, risk_start, block_end):
    n = eta.shape[0]
    log_s0 = np.empty(n)
    wc = np.empty(n)
    work = np.empty(3 * n)
    return risk_state(eta, delta, risk_start, block_end, log_s0, wc, work)


@njit(cache=True)
def score(X, eta, delta, risk_start, block_end):
    """Full gradient of the log partial likelihood with respect to beta."""
    n, p = X.shape
    log_s0 = np.empty(n)
    wc = np.empty(n)
    work = np.empty(3 * n)
    risk_state(eta, delta, risk_start, block_end, log_s0, wc, work)
    out = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * (delta[i] - wc[i])
        out[j] = acc
    return out


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def penalty(beta, mode, l1_weight, ridge_weight, factors, order, group_ptr):
    """Unscaled structural penalty for the compiled modes."""
    n_groups = group_ptr.shape[0] - 1
    total = 0.0
    if mode == MODE_COORDINATE:
        for j in range(beta.shape[0]):
            b = beta[j]
            total += l1_weight * factors[j] * abs(b) + 0.5 * ridge_weight * b * b
    elif mode == MODE_EXCLUSIVE:
        for g in range(n_groups):
            s = 0.0
            for q in range(group_ptr[g], group_ptr[g + 1]):
                s += abs(beta[order[q]])
            total += 0.5 * s * s
    else:
        for g in range(n_groups):
            s = 0.0
            for q in range(group_ptr[g], group_ptr[g + 1]):
                b = beta[order[q]]
                s += b * b
            total += np.sqrt(group_ptr[g + 1] - group_ptr[g]) * np.sqrt(s)
    return total


@njit(cache=True)
def coordinate_descent(X, delta, risk_start, block_end, H, beta, order, group_ptr,
                       mode, lam, l1_weight, ridge_weight, factors, newton,
                       floor, tol, max_sweeps, trace):
    """Cyclic coordinate descent on ``-loglik + lam * P(beta)``.

    ``beta`` is updated in place.  Coordinates are visited group by group in
    ``order`` (``group_ptr`` delimits the groups).  With ``newton`` set, each
    update is the exact minimiser of a quadratic model of the likelihood with
    curvature ``H_j`` plus the penalty, and the curvature is doubled until the
    step does not increase the objective.  Without it the update uses the
    bare gradient numerator and is applied unconditionally.

    Returns ``(sweeps, final_change, initial_objective, status, evaluations)``; ``trace``
    receives the objective after every sweep.
    """
    n, p = X.shape
    n_groups = group_ptr.shape[0] - 1
    eta = X @ beta
    eta_t = np.empty(n)
    log_s0 = np.empty(n)
    wc = np.empty(n)
    log_s0_t = np.empty(n)
    wc_t = np.empty(n)
    work = np.empty(3 * n)
    beta_old = np.empty(p)

    ll = risk_state(eta, delta, risk_start, block_end, log_s0, wc, work)
    pen = penalty(beta, mode, l1_weight, ridge_weight, factors, order, group_ptr)
    obj = -ll + lam * pen
    obj0 = obj
    if not np.isfinite(obj):
        return 0, np.inf, obj0, STATUS_NONFINITE, 0

    gsum = np.zeros(n_groups)
    for g in range(n_groups):
        for q in range(group_ptr[g], group_ptr[g + 1]):
            gsum[g] += abs(beta[order[q]])

    change = np.inf
    sweep = 0
    evals = 0
    while sweep < max_sweeps:
        for j in range(p):
            beta_old[j] = beta[j]

        for g in range(n_groups):
            start = group_ptr[g]
            stop = group_ptr[g + 1]
            if mode == MODE_GROUP:
                size = stop - start
                r = np.zeros(size)
                b = np.zeros(size)
                hmax = floor
                for q in range(size):
                    j = order[start + q]
                    b[q] = beta[j]
                    if H[j] > hmax:
                        hmax = H[j]
                    acc = 0.0
                    for i in range(n):
                        acc += X[i, j] * (delta[i] - wc[i])
                    r[q] = acc
                c = hmax + lam
                thr_base = lam * np.sqrt(size)
                bnorm = 0.0
                for q in range(size):
                    bnorm += b[q] * b[q]
                bnorm = np.sqrt(bnorm)
                z = np.empty(size)
                new = np.empty(size)
                for attempt in range(_MAX_BACKTRACK):
                    znorm = 0.0
                    for q in range(size):
                        if newton:
                            z[q] = b[q] + r[q] / c
                        else:
                            z[q] = r[q] / c
                        znorm += z[q] * z[q]
                    znorm = np.sqrt(znorm)
                    scale = 0.0
                    if znorm > 0.0:
                        scale = 1.0 - thr_base / (c * znorm)
                        if scale < 0.0:
                            scale = 0.0
                    same = True
                    nnorm = 0.0
                    for q in range(size):
                        new[q] = scale * z[q]
                        nnorm += new[q] * new[q]
                        if new[q] != b[q]:
                            same = False
                    if same:
                        break
                    nnorm = np.sqrt(nnorm)
                    for i in range(n):
                        eta_t[i] = eta[i]
                    for q in range(size):
                        d = new[q] - b[q]
                        if d != 0.0:
                            j = order[start + q]
                            for i in range(n):
                                eta_t[i] += d * X[i, j]
                    evals += 1
                    ll_t = risk_state(eta_t, delta, risk_start, block_end,
                                      log_s0_t, wc_t, work)
                    pen_t = pen + np.sqrt(size) * (nnorm - bnorm)
                    obj_t = -ll_t + lam * pen_t
                    if newton and not (obj_t <= obj):
                        c *= 2.0
                        continue
                    if not np.isfinite(obj_t):
                        return sweep, change, obj0, STATUS_NONFINITE, evals
                    for i in range(n):
                        eta[i] = eta_t[i]
                        log_s0[i] = log_s0_t[i]
                        wc[i] = wc_t[i]
                    for q in range(size):
                        beta[order[start + q]] = new[q]
                    ll = ll_t
                    pen = pen_t
                    obj = obj_t
                    break
                continue

            for q in range(start, stop):
                j = order[q]
                acc = 0.0
                for i in range(n):
                    acc += X[i, j] * (delta[i] - wc[i])
                r = acc
                b = beta[j]
                if mode == MODE_EXCLUSIVE:
                    others = gsum[g] - abs(b)
                    if others < 0.0:
                        others = 0.0
                    thr = lam * others
                    ridge = lam
                else:
                    others = 0.0
                    thr = lam * l1_weight * factors[j]
                    ridge = lam * ridge_weight
                c = H[j]
                if c < floor:
                    c = floor
                for attempt in range(_MAX_BACKTRACK):
                    denom = c + ridge
                    if newton:
                        new = _soft((r + c * b) / denom, thr / denom)
                    else:
                        new = _soft(r / denom, thr / denom)
                    if new == b:
                        break
                    d = new - b
                    for i in range(n):
                        eta_t[i] = eta[i] + d * X[i, j]
                    evals += 1
                    ll_t = risk_state(eta_t, delta, risk_start, block_end,
                                      log_s0_t, wc_t, work)
                    if mode == MODE_EXCLUSIVE:
                        a_new = others + abs(new)
                        a_old = others + abs(b)
                        dpen = 0.5 * (a_new * a_new - a_old * a_old)
                    else:
                        dpen = (l1_weight * factors[j] * (abs(new) - abs(b))
                                + 0.5 * ridge_weight * (new * new - b * b))
                    obj_t = -ll_t + lam * (pen + dpen)
                    if newton and not (obj_t <= obj):
                        c *= 2.0
                        continue
                    if not np.isfinite(obj_t):
                        return sweep, change, obj0, STATUS_NONFINITE, evals
                    for i in range(n):
                        eta[i] = eta_t[i]
                        log_s0[i] = log_s0_t[i]
                        wc[i] = wc_t[i]
                    beta[j] = new
                    gsum[g] = others + abs(new)
                    ll = ll_t
                    pen = pen + dpen
                    obj = obj_t
                    break

        sweep += 1
        acc = 0.0
        for j in range(p):
            d = beta[j] - beta_old[j]
            acc += d * d
        change = np.sqrt(acc)
        # re-anchor the running penalty to avoid drift from incremental updates
        pen = penalty(beta, mode, l1_weight, ridge_weight, factors, order, group_ptr)
        obj = -ll + lam * pen
        trace[sweep - 1] = obj
        if change <= tol:
            break
    return sweep, change, obj0, STATUS_OK, evals
