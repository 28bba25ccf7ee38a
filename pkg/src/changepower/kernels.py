"""Hot loops: Binary Segmentation, PELT, rolling variance, Kendall tau.

Every kernel exists twice. The ``*_loop`` versions are explicit loops compiled
with numba; the ``*_np`` versions are vectorised numpy. The public names at the
bottom of the module point at one or the other depending on
``CHANGEPOWER_DISABLE_NUMBA`` (see :mod:`changepower._accel`). Both versions
perform the same floating-point operations in the same order wherever that is
practical, so breakpoints agree exactly and costs agree to rounding.

All breakpoint arrays use the half-open convention: breakpoint ``b`` starts the
right-hand segment, so segments are ``[0, b_1), [b_1, b_2), ..., [b_K, n)``.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._accel import HAVE_NUMBA, njit

MAD_SCALE = 1.4826
SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------


@njit
def _centred_prefix(x):
    n = x.shape[0]
    total = 0.0
    for t in range(n):
        total += x[t]
    mean = total / n
    cs = np.zeros(n + 1)
    cs2 = np.zeros(n + 1)
    for t in range(n):
        v = x[t] - mean
        cs[t + 1] = cs[t] + v
        cs2[t + 1] = cs2[t] + v * v
    return cs, cs2


def _centred_prefix_np(x):
    # np.cumsum is sequential, so this matches the loop bit for bit
    n = x.shape[0]
    mean = np.cumsum(x)[-1] / n
    v = x - mean
    cs = np.zeros(n + 1)
    cs2 = np.zeros(n + 1)
    np.cumsum(v, out=cs[1:])
    np.cumsum(v * v, out=cs2[1:])
    return cs, cs2


@njit
def _rss(cs, cs2, i, j):
    s = cs[j] - cs[i]
    v = cs2[j] - cs2[i] - s * s / (j - i)
    if v > 0.0:
        return v
    return 0.0


def _rss_np(cs, cs2, i, j):
    s = cs[j] - cs[i]
    v = cs2[j] - cs2[i] - s * s / (j - i)
    return np.maximum(v, 0.0)


@njit
def bic_value(n, rss, n_bkps, rss_floor):
    r = rss
    lo = rss_floor * n
    if r < lo:
        r = lo
    return n * math.log(r / n) + 2.0 * (n_bkps + 1) * math.log(n)


# --------------------------------------------------------------------------
# Binary Segmentation
# --------------------------------------------------------------------------


@njit
def _binseg_path_loop(x, k_max, min_seg_len):
    n = x.shape[0]
    cs, cs2 = _centred_prefix(x)
    order = np.full(k_max, -1, dtype=np.int64)
    rss = np.full(k_max + 1, np.nan)
    bounds = np.empty(k_max + 2, dtype=np.int64)
    bounds[0] = 0
    bounds[1] = n
    nb = 2
    total = _rss(cs, cs2, 0, n)
    rss[0] = total
    placed = 0
    for k in range(k_max):
        best_gain = -np.inf
        best_c = -1
        for s in range(nb - 1):
            a = bounds[s]
            b = bounds[s + 1]
            if b - a < 2 * min_seg_len:
                continue
            base = _rss(cs, cs2, a, b)
            seg_cost = np.inf
            seg_c = -1
            for c in range(a + min_seg_len, b - min_seg_len + 1):
                cost = _rss(cs, cs2, a, c) + _rss(cs, cs2, c, b)
                if cost < seg_cost:
                    seg_cost = cost
                    seg_c = c
            gain = base - seg_cost
            if gain > best_gain:
                best_gain = gain
                best_c = seg_c
        if best_c < 0:
            break
        # insert keeping bounds sorted
        pos = nb
        while bounds[pos - 1] > best_c:
            bounds[pos] = bounds[pos - 1]
            pos -= 1
        bounds[pos] = best_c
        nb += 1
        total = 0.0
        for s in range(nb - 1):
            total += _rss(cs, cs2, bounds[s], bounds[s + 1])
        order[k] = best_c
        rss[k + 1] = total
        placed += 1
    return order, rss, placed


def _binseg_path_np(x, k_max, min_seg_len):
    n = x.shape[0]
    cs, cs2 = _centred_prefix_np(x)
    order = np.full(k_max, -1, dtype=np.int64)
    rss = np.full(k_max + 1, np.nan)
    bounds = [0, n]
    rss[0] = _rss_np(cs, cs2, 0, n)
    placed = 0
    for k in range(k_max):
        best_gain = -np.inf
        best_c = -1
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b - a < 2 * min_seg_len:
                continue
            c = np.arange(a + min_seg_len, b - min_seg_len + 1)
            cost = _rss_np(cs, cs2, a, c) + _rss_np(cs, cs2, c, b)
            i = int(np.argmin(cost))
            gain = _rss_np(cs, cs2, a, b) - cost[i]
            if gain > best_gain:
                best_gain = gain
                best_c = int(c[i])
        if best_c < 0:
            break
        bounds.append(best_c)
        bounds.sort()
        edges = np.asarray(bounds)
        seg = _rss_np(cs, cs2, edges[:-1], edges[1:])
        total = 0.0
        for v in seg:
            total += v
        order[k] = best_c
        rss[k + 1] = total
        placed += 1
    return order, rss, placed


@njit
def _binseg_bic_batch_loop(X, k_max, min_seg_len, rss_floor):
    reps, n = X.shape
    k_hat = np.zeros(reps, dtype=np.int64)
    bkps = np.full((reps, k_max), -1, dtype=np.int64)
    delta = np.zeros(reps)
    for r in range(reps):
        order, rss, placed = _binseg_path_loop(X[r], k_max, min_seg_len)
        best = np.inf
        best_k = 0
        bic0 = 0.0
        for k in range(placed + 1):
            v = bic_value(n, rss[k], k, rss_floor)
            if k == 0:
                bic0 = v
            if v < best:
                best = v
                best_k = k
        k_hat[r] = best_k
        delta[r] = bic0 - best
        chosen = np.sort(order[:best_k])
        for i in range(best_k):
            bkps[r, i] = chosen[i]
    return k_hat, bkps, delta


def _binseg_bic_batch_np(X, k_max, min_seg_len, rss_floor):
    reps, n = X.shape
    k_hat = np.zeros(reps, dtype=np.int64)
    bkps = np.full((reps, k_max), -1, dtype=np.int64)
    delta = np.zeros(reps)
    for r in range(reps):
        order, rss, placed = _binseg_path_np(X[r], k_max, min_seg_len)
        bic = [bic_value_py(n, rss[k], k, rss_floor) for k in range(placed + 1)]
        best_k = int(np.argmin(bic))
        k_hat[r] = best_k
        delta[r] = bic[0] - bic[best_k]
        bkps[r, :best_k] = np.sort(order[:best_k])
    return k_hat, bkps, delta


def bic_value_py(n, rss, n_bkps, rss_floor):
    return n * math.log(max(rss, rss_floor * n) / n) + 2.0 * (n_bkps + 1) * math.log(n)


@njit
def _binseg_fixed_batch_loop(X, k, min_seg_len):
    reps = X.shape[0]
    out = np.full((reps, k), -1, dtype=np.int64)
    for r in range(reps):
        order, rss, placed = _binseg_path_loop(X[r], k, min_seg_len)
        chosen = np.sort(order[:placed])
        for i in range(placed):
            out[r, i] = chosen[i]
    return out


def _binseg_fixed_batch_np(X, k, min_seg_len):
    out = np.full((X.shape[0], k), -1, dtype=np.int64)
    for r in range(X.shape[0]):
        order, rss, placed = _binseg_path_np(X[r], k, min_seg_len)
        out[r, :placed] = np.sort(order[:placed])
    return out


# --------------------------------------------------------------------------
# PELT
# --------------------------------------------------------------------------


@njit
def _pelt_loop(x, penalty, min_seg_len):
    n = x.shape[0]
    m = min_seg_len
    cs, cs2 = _centred_prefix(x)
    F = np.full(n + 1, np.inf)
    F[0] = -penalty
    last = np.full(n + 1, -1, dtype=np.int64)
    cand = np.empty(n + 1, dtype=np.int64)
    nc = 0
    for t in range(m, n + 1):
        # candidates beaten at t0 can never be optimal for any t >= t0 + m
        t0 = t - m
        if t0 >= m and F[t0] < np.inf:
            keep = 0
            for i in range(nc):
                s = cand[i]
                if s < t0 and F[s] + _rss(cs, cs2, s, t0) > F[t0]:
                    continue
                cand[keep] = s
                keep += 1
            nc = keep
        if t0 == 0 or (t0 >= m and F[t0] < np.inf):
            cand[nc] = t0
            nc += 1
        best = np.inf
        arg = -1
        for i in range(nc):
            s = cand[i]
            v = F[s] + _rss(cs, cs2, s, t) + penalty
            if v < best:
                best = v
                arg = s
        F[t] = best
        last[t] = arg
    out = np.empty(n, dtype=np.int64)
    k = 0
    t = n
    while last[t] > 0:
        out[k] = last[t]
        k += 1
        t = last[t]
    return out[:k][::-1].copy(), F[n]


def _pelt_np(x, penalty, min_seg_len):
    n = x.shape[0]
    m = min_seg_len
    cs, cs2 = _centred_prefix_np(x)
    F = np.full(n + 1, np.inf)
    F[0] = -penalty
    last = np.full(n + 1, -1, dtype=np.int64)
    cand = np.empty(0, dtype=np.int64)
    for t in range(m, n + 1):
        t0 = t - m
        if t0 >= m and np.isfinite(F[t0]) and cand.size:
            early = cand < t0
            beaten = np.zeros(cand.size, dtype=bool)
            s = cand[early]
            beaten[early] = F[s] + _rss_np(cs, cs2, s, t0) > F[t0]
            cand = cand[~beaten]
        if t0 == 0 or (t0 >= m and np.isfinite(F[t0])):
            cand = np.append(cand, t0)
        v = F[cand] + _rss_np(cs, cs2, cand, t) + penalty
        i = int(np.argmin(v))
        F[t] = v[i]
        last[t] = cand[i]
    out = []
    t = n
    while last[t] > 0:
        out.append(int(last[t]))
        t = last[t]
    return np.asarray(out[::-1], dtype=np.int64), F[n]


@njit
def _sigma_mad_loop(x, rss_floor):
    n = x.shape[0]
    d = np.empty(n - 1)
    for t in range(n - 1):
        d[t] = x[t + 1] - x[t]
    med = np.median(d)
    mad = np.median(np.abs(d - med))
    if mad > 0.0:
        return MAD_SCALE * mad / SQRT2
    sd = np.std(d) * math.sqrt((n - 1) / (n - 2))
    if sd > 0.0:
        return sd / SQRT2
    return math.sqrt(rss_floor)


def _sigma_mad_np(x, rss_floor):
    d = np.diff(x)
    mad = np.median(np.abs(d - np.median(d)))
    if mad > 0.0:
        return MAD_SCALE * mad / SQRT2
    sd = np.std(d, ddof=1)
    if sd > 0.0:
        return sd / SQRT2
    return math.sqrt(rss_floor)


@njit
def _pelt_mad_batch_loop(X, min_seg_len, rss_floor):
    reps, n = X.shape
    width = n // min_seg_len
    k_hat = np.zeros(reps, dtype=np.int64)
    bkps = np.full((reps, width), -1, dtype=np.int64)
    for r in range(reps):
        s = _sigma_mad_loop(X[r], rss_floor)
        b, _ = _pelt_loop(X[r], 2.0 * s * s * math.log(n), min_seg_len)
        k_hat[r] = b.shape[0]
        for i in range(b.shape[0]):
            bkps[r, i] = b[i]
    return k_hat, bkps


def _pelt_mad_batch_np(X, min_seg_len, rss_floor):
    reps, n = X.shape
    k_hat = np.zeros(reps, dtype=np.int64)
    bkps = np.full((reps, n // min_seg_len), -1, dtype=np.int64)
    for r in range(reps):
        s = _sigma_mad_np(X[r], rss_floor)
        b, _ = _pelt_np(X[r], 2.0 * s * s * math.log(n), min_seg_len)
        k_hat[r] = b.size
        bkps[r, : b.size] = b
    return k_hat, bkps


# --------------------------------------------------------------------------
# EWS statistics
# --------------------------------------------------------------------------


@njit
def _rolling_variance_loop(x, window):
    n = x.shape[0]
    out = np.empty(n - window + 1)
    for t in range(window - 1, n):
        mean = 0.0
        for i in range(t - window + 1, t + 1):
            mean += x[i]
        mean /= window
        ss = 0.0
        for i in range(t - window + 1, t + 1):
            ss += (x[i] - mean) ** 2
        out[t - window + 1] = ss / (window - 1)
    return out


def _rolling_variance_np(x, window):
    return sliding_window_view(x, window).var(axis=1, ddof=1)


@njit
def _kendall_tau_loop(x):
    m = x.shape[0]
    s = 0
    for i in range(m):
        for j in range(i + 1, m):
            if x[j] > x[i]:
                s += 1
            elif x[j] < x[i]:
                s -= 1
    return s / (m * (m - 1) / 2.0)


def _kendall_tau_np(x):
    m = x.shape[0]
    signs = np.sign(x[None, :] - x[:, None])
    return float(np.triu(signs, 1).sum()) / (m * (m - 1) / 2.0)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

if HAVE_NUMBA:
    binseg_path = _binseg_path_loop
    binseg_bic_batch = _binseg_bic_batch_loop
    binseg_fixed_batch = _binseg_fixed_batch_loop
    pelt_kernel = _pelt_loop
    pelt_mad_batch = _pelt_mad_batch_loop
    sigma_mad = _sigma_mad_loop
    rolling_variance = _rolling_variance_loop
    kendall_tau = _kendall_tau_loop
else:
    binseg_path = _binseg_path_np
    binseg_bic_batch = _binseg_bic_batch_np
    binseg_fixed_batch = _binseg_fixed_batch_np
    pelt_kernel = _pelt_np
    pelt_mad_batch = _pelt_mad_batch_np
    sigma_mad = _sigma_mad_np
    rolling_variance = _rolling_variance_np
    kendall_tau = _kendall_tau_np

BACKEND = "numba" if HAVE_NUMBA else "numpy"
