"""Compiled hot loops for the response solver and dual evaluation.

The scalar math here mirrors user.stationary_power / model.capped_rate
exactly; the numpy versions stay the reference implementation for the public
single-tone operations and the property tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True, inline="always")
def _best_power(lam, h, s2, beta, w):
    """Stationary power clipped at zero (cap applied by the caller)."""
    if lam <= 0.0:
        # free power: stands in for the unbounded limit; callers clamp at q_cap
        return 1e300
    wh = w * h
    if lam >= wh / s2:
        return 0.0
    a = beta * (1.0 + beta) * h * h
    b = (2.0 * beta + 1.0) * h * s2
    c = s2 * (s2 - wh / lam)
    if 4.0 * a * abs(c) < 1e-14 * b * b:
        q = w / lam - s2 / h
    else:
        q = -2.0 * c / (b + np.sqrt(b * b - 4.0 * a * c))
    if q < 0.0:
        q = 0.0
    return q


@njit(cache=True, inline="always")
def _tone_value(q, lam, h, s2, beta, smax, w):
    """w * ln(1 + min(s(q), smax)) - lam*q."""
    hq = h * q
    s = hq / (s2 + beta * hq)
    if s > smax:
        s = smax
    return w * np.log1p(s) - lam * q


@njit(cache=True)
def eval_responses_kernel(lam, h, s2v, beta, smax, qcap, w, mu, mask, q_out, v_out):
    """Per-tone optimal powers and net benefits at fixed per-user lambdas."""
    num_k, num_n = h.shape
    for k in range(num_k):
        lk = lam[k]
        for n in range(num_n):
            if not mask[k, n]:
                q_out[k, n] = 0.0
                v_out[k, n] = -np.inf
                continue
            q = _best_power(lk, h[k, n], s2v[n], beta[k], w[k])
            if q > qcap[k, n]:
                q = qcap[k, n]
            q_out[k, n] = q
            v_out[k, n] = _tone_value(q, lk, h[k, n], s2v[n], beta[k], smax[k], w[k]) - mu[k, n]


@njit(cache=True)
def bisect_kernel(h, s2v, beta, smax, qcap, w, budget, mu, mask, lo, hi, iters):
    """Shrink [lo, hi] onto the smallest lambda whose demanded power fits.

    The demanded power sums per-tone optimal powers over tones with strictly
    positive net benefit; it is nonincreasing in lambda. lo stays on the
    infeasible side, hi on the feasible side.
    """
    num_k, num_n = h.shape
    for k in range(num_k):
        lo_k = lo[k]
        hi_k = hi[k]
        for _ in range(iters):
            mid = 0.5 * (lo_k + hi_k)
            demanded = 0.0
            for n in range(num_n):
                if not mask[k, n]:
                    continue
                q = _best_power(mid, h[k, n], s2v[n], beta[k], w[k])
                if q > qcap[k, n]:
                    q = qcap[k, n]
                v = _tone_value(q, mid, h[k, n], s2v[n], beta[k], smax[k], w[k]) - mu[k, n]
                if v > 0.0:
                    demanded += q
            if demanded > budget[k]:
                lo_k = mid
            else:
                hi_k = mid
        lo[k] = lo_k
        hi[k] = hi_k


@njit(cache=True)
def waterfill_kernel(h_row, s2v, beta_k, smax_k, qcap_row, w_k, p_k, mask_row,
                     iters, q_out):
    """Optimal free-price budget split of one user over a tone subset.

    Fills q_out and returns the achieved weighted rate. Equivalent to the
    budget bisection at zero prices restricted to mask_row.
    """
    num_n = h_row.shape[0]
    # lam = 0 feasible iff every masked cap is reachable and fits the budget
    cap_sum = 0.0
    capped = True
    lam_hi = 0.0
    any_tone = False
    for n in range(num_n):
        q_out[n] = 0.0
        if not mask_row[n]:
            continue
        any_tone = True
        m = w_k * h_row[n] / s2v[n]
        if m > lam_hi:
            lam_hi = m
        if np.isfinite(qcap_row[n]):
            cap_sum += qcap_row[n]
        else:
            capped = False
    if not any_tone:
        return 0.0
    if capped and cap_sum <= p_k:
        total = 0.0
        for n in range(num_n):
            if mask_row[n]:
                q_out[n] = qcap_row[n]
                total += w_k * np.log1p(smax_k)
        return total
    lo = 0.0
    hi = lam_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        demanded = 0.0
        for n in range(num_n):
            if not mask_row[n]:
                continue
            q = _best_power(mid, h_row[n], s2v[n], beta_k, w_k)
            if q > qcap_row[n]:
                q = qcap_row[n]
            demanded += q
        if demanded > p_k:
            lo = mid
        else:
            hi = mid
    total = 0.0
    for n in range(num_n):
        if not mask_row[n]:
            continue
        q = _best_power(hi, h_row[n], s2v[n], beta_k, w_k)
        if q > qcap_row[n]:
            q = qcap_row[n]
        q_out[n] = q
        hq = h_row[n] * q
        s = hq / (s2v[n] + beta_k * hq)
        if s > smax_k:
            s = smax_k
        total += w_k * np.log1p(s)
    return total


@njit(cache=True, inline="always")
def _phi_eval(lam, h_row, s2v, beta_k, smax_k, qcap_row, w_k, p_k, mu):
    """phi(lam) = sum_n (v_n(lam))_+ + lam*P for one user."""
    total = lam * p_k
    for n in range(h_row.shape[0]):
        q = _best_power(lam, h_row[n], s2v[n], beta_k, w_k)
        if q > qcap_row[n]:
            q = qcap_row[n]
        v = _tone_value(q, lam, h_row[n], s2v[n], beta_k, smax_k, w_k) - mu[n]
        if v > 0.0:
            total += v
    return total


@njit(cache=True)
def phi_min_kernel(h, s2v, beta, smax, qcap, w, budget, mu, lam_lo, lam_hi, iters):
    """Golden-section minimum of phi(lam) per user (phi is convex in lam)."""
    num_k = h.shape[0]
    out = np.empty(num_k)
    for k in range(num_k):
        lo = lam_lo[k]
        hi = lam_hi[k]
        a = hi - _GOLDEN * (hi - lo)
        b = lo + _GOLDEN * (hi - lo)
        fa = _phi_eval(a, h[k], s2v, beta[k], smax[k], qcap[k], w[k], budget[k], mu)
        fb = _phi_eval(b, h[k], s2v, beta[k], smax[k], qcap[k], w[k], budget[k], mu)
        for _ in range(iters):
            if fa < fb:
                hi = b
                b = a
                fb = fa
                a = hi - _GOLDEN * (hi - lo)
                fa = _phi_eval(a, h[k], s2v, beta[k], smax[k], qcap[k], w[k],
                               budget[k], mu)
            else:
                lo = a
                a = b
                fa = fb
                b = lo + _GOLDEN * (hi - lo)
                fb = _phi_eval(b, h[k], s2v, beta[k], smax[k], qcap[k], w[k],
                               budget[k], mu)
        out[k] = fa if fa < fb else fb
    return out
