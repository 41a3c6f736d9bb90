"""Numba @njit kernels: compiled twins of _kernels_np.

Loops are written out elementwise; results are bit-identical to the numpy
fallback (no fastmath, same add/max ordering).
"""

import numpy as np
from numba import njit

_S = 4


@njit(cache=True)
def _sat_add1(a, b, minv, maxv):
    s = a + b
    if a < 0 and b < 0 and s >= 0:  # int64 wraparound (word_bits == 64)
        return minv
    if a > 0 and b > 0 and s < 0:
        return maxv
    if s < minv:
        return minv
    if s > maxv:
        return maxv
    return s


def sat_add(a, b, minv, maxv):
    """Elementwise saturating int64 add; works on scalars and arrays."""
    if np.isscalar(a) and np.isscalar(b):
        return _sat_add1(np.int64(a), np.int64(b), np.int64(minv), np.int64(maxv))
    a, b = np.broadcast_arrays(np.asarray(a, np.int64), np.asarray(b, np.int64))
    return _sat_add_arr(np.ascontiguousarray(a), np.ascontiguousarray(b),
                        np.int64(minv), np.int64(maxv))


@njit(cache=True)
def _sat_add_arr(a, b, minv, maxv):
    out = np.empty_like(a)
    flat_a = a.ravel()
    flat_b = b.ravel()
    flat_o = out.ravel()
    for i in range(flat_a.shape[0]):
        flat_o[i] = _sat_add1(flat_a[i], flat_b[i], minv, maxv)
    return out


@njit(cache=True)
def viterbi_f64(init, trans, emis_cols):
    T = emis_cols.shape[0]
    psi = np.zeros((T, _S), np.int64)
    delta = np.empty(_S, np.float64)
    ndelta = np.empty(_S, np.float64)
    for s in range(_S):
        delta[s] = init[s] + emis_cols[0, s]
    for t in range(1, T):
        for s in range(_S):
            best = -np.inf
            arg = 0
            for sp in range(_S):
                v = delta[sp] + trans[sp, s]
                if v > best:
                    best = v
                    arg = sp
            ndelta[s] = best + emis_cols[t, s]
            psi[t, s] = arg
        for s in range(_S):
            delta[s] = ndelta[s]
    s_end = 0
    best = delta[0]
    for s in range(1, _S):
        if delta[s] > best:
            best = delta[s]
            s_end = s
    states = np.empty(T, np.int64)
    states[T - 1] = s_end
    for t in range(T - 1, 0, -1):
        s_end = psi[t, s_end]
        states[t - 1] = s_end
    return states, best, np.isfinite(best)


@njit(cache=True)
def viterbi_i64(init, trans, emis_cols, minv, maxv):
    T = emis_cols.shape[0]
    psi = np.zeros((T, _S), np.int64)
    delta = np.empty(_S, np.int64)
    ndelta = np.empty(_S, np.int64)
    for s in range(_S):
        delta[s] = _sat_add1(init[s], emis_cols[0, s], minv, maxv)
    for t in range(1, T):
        for s in range(_S):
            best = minv
            arg = 0
            for sp in range(_S):
                v = _sat_add1(delta[sp], trans[sp, s], minv, maxv)
                if v > best:
                    best = v
                    arg = sp
            ndelta[s] = _sat_add1(best, emis_cols[t, s], minv, maxv)
            psi[t, s] = arg
        for s in range(_S):
            delta[s] = ndelta[s]
    s_end = 0
    best = delta[0]
    for s in range(1, _S):
        if delta[s] > best:
            best = delta[s]
            s_end = s
    states = np.empty(T, np.int64)
    states[T - 1] = s_end
    for t in range(T - 1, 0, -1):
        s_end = psi[t, s_end]
        states[t - 1] = s_end
    return states, best


@njit(cache=True)
def detect_stream(emis_cols, window, policy_code, init, trans, minv, maxv):
    K = emis_cols.shape[0]
    delta = np.empty(_S, np.int64)
    ndelta = np.empty(_S, np.int64)
    psi = np.empty((window, _S), np.int64)
    for k in range(K):
        start = k - window + 1
        if start < 0:
            start = 0
        n = k + 1 - start
        if policy_code == 0 and n < window:
            continue  # FullWindow cannot fire before the buffer fills
        for s in range(_S):
            delta[s] = _sat_add1(init[s], emis_cols[start, s], minv, maxv)
        for j in range(1, n):
            t = start + j
            for s in range(_S):
                best = minv
                arg = 0
                for sp in range(_S):
                    v = _sat_add1(delta[sp], trans[sp, s], minv, maxv)
                    if v > best:
                        best = v
                        arg = sp
                ndelta[s] = _sat_add1(best, emis_cols[t, s], minv, maxv)
                psi[j, s] = arg
            for s in range(_S):
                delta[s] = ndelta[s]
        s_end = 0
        best = delta[0]
        for s in range(1, _S):
            if delta[s] > best:
                best = delta[s]
                s_end = s
        if policy_code == 1:
            if s_end >= 2:
                return k
        else:
            lo = s_end
            cur = s_end
            for j in range(n - 1, 0, -1):
                cur = psi[j, cur]
                if cur < lo:
                    lo = cur
            if lo >= 2:
                return k
    return -1


@njit(cache=True)
def demosaic3x3(samples, chan_map):
    H, W = samples.shape
    out = np.empty((H, W, 3), np.int64)
    for y in range(H):
        for x in range(W):
            own = chan_map[y & 1, x & 1]
            for c in range(3):
                if c == own:
                    out[y, x, c] = samples[y, x]
                    continue
                ssum = 0
                cnt = 0
                for dy in range(-1, 2):
                    yy = y + dy
                    if yy < 0:
                        yy = 0
                    elif yy >= H:
                        yy = H - 1
                    for dx in range(-1, 2):
                        xx = x + dx
                        if xx < 0:
                            xx = 0
                        elif xx >= W:
                            xx = W - 1
                        if chan_map[yy & 1, xx & 1] == c:
                            ssum += samples[yy, xx]
                            cnt += 1
                out[y, x, c] = (2 * ssum + cnt) // (2 * cnt)
    return out
