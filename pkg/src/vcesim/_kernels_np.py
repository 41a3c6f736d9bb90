"""Pure-numpy kernels: reference implementations of the hot loops.

Twin of _kernels_numba; same function names, signatures, and results.
Selected via VCESIM_BACKEND=numpy (see backend.py).
"""

import numpy as np

_S = 4
_IDX = np.arange(_S)


def sat_add(a, b, minv, maxv):
    """Elementwise saturating int64 add; works on scalars and arrays."""
    a = np.int64(a) if np.isscalar(a) else a
    s = a + b  # wraps only when word_bits == 64; detected below
    neg = (a < 0) & (b < 0) & (s >= 0)
    pos = (a > 0) & (b > 0) & (s < 0)
    s = np.where(neg, minv, s)
    s = np.where(pos, maxv, s)
    return np.clip(s, minv, maxv)


def viterbi_f64(init, trans, emis_cols):
    """Max-sum trellis in float64 with -inf for impossible entries.

    emis_cols is (T, S): per-step log-likelihood of each state. Ties break
    toward the lower state index. Returns (states, metric, feasible).
    """
    T = emis_cols.shape[0]
    psi = np.zeros((T, _S), np.int64)
    delta = init + emis_cols[0]
    for t in range(1, T):
        cand = delta[:, None] + trans
        arg = cand.argmax(axis=0)  # first max -> lowest predecessor
        delta = cand[arg, _IDX] + emis_cols[t]
        psi[t] = arg
    s = int(delta.argmax())
    metric = float(delta[s])
    states = np.empty(T, np.int64)
    states[T - 1] = s
    for t in range(T - 1, 0, -1):
        s = int(psi[t, s])
        states[t - 1] = s
    return states, metric, bool(np.isfinite(metric))


def viterbi_i64(init, trans, emis_cols, minv, maxv):
    """Fixed-point twin of viterbi_f64: saturating adds, minv as NEG_INF.

    Saturation makes the sentinel absorbing for nonpositive addends, so an
    all-saturated trellis still backtracks a (tie-broken) path instead of
    failing; callers cannot distinguish that from a merely awful metric.
    """
    T = emis_cols.shape[0]
    psi = np.zeros((T, _S), np.int64)
    delta = sat_add(init, emis_cols[0], minv, maxv)
    for t in range(1, T):
        cand = sat_add(delta[:, None], trans, minv, maxv)
        arg = cand.argmax(axis=0)
        delta = sat_add(cand[arg, _IDX], emis_cols[t], minv, maxv)
        psi[t] = arg
    s = int(delta.argmax())
    metric = int(delta[s])
    states = np.empty(T, np.int64)
    states[T - 1] = s
    for t in range(T - 1, 0, -1):
        s = int(psi[t, s])
        states[t - 1] = s
    return states, metric


def detect_stream(emis_cols, window, policy_code, init, trans, minv, maxv):
    """Walk a stream of quantized observation columns and return the index
    of the first one whose windowed decode satisfies the policy, else -1.

    Each step decodes the last <=window columns from scratch with `init`
    (normally a uniform prior). policy_code 0: full window decoded at state
    >= 2 and buffer full; 1: newest decoded state >= 2.
    """
    K = emis_cols.shape[0]
    for k in range(K):
        start = max(0, k - window + 1)
        if policy_code == 0 and k + 1 - start < window:
            continue
        states, _ = viterbi_i64(init, trans, emis_cols[start:k + 1], minv, maxv)
        if policy_code == 1:
            if states[-1] >= 2:
                return k
        elif states.min() >= 2:
            return k
    return -1


def demosaic3x3(samples, chan_map):
    """Bilinear 3x3 demosaic with replicate borders, integer arithmetic.

    samples is (H, W) int64, chan_map the (2, 2) channel index of each cell
    position. Sampled channels copy through; missing channels average the
    same-channel neighbors in the 3x3 patch, rounding half away from zero.
    """
    H, W = samples.shape
    chan = chan_map[np.arange(H)[:, None] & 1, np.arange(W)[None, :] & 1]
    pad = np.pad(samples, 1, mode="edge")
    padc = np.pad(chan, 1, mode="edge")
    out = np.empty((H, W, 3), np.int64)
    for c in range(3):
        mask = (padc == c).astype(np.int64)
        vals = pad * mask
        ssum = np.zeros((H, W), np.int64)
        cnt = np.zeros((H, W), np.int64)
        for dy in range(3):
            for dx in range(3):
                ssum += vals[dy:dy + H, dx:dx + W]
                cnt += mask[dy:dy + H, dx:dx + W]
        interp = (2 * ssum + cnt) // (2 * cnt)
        out[:, :, c] = np.where(chan == c, samples, interp)
    return out
