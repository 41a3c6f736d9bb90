"""Viterbi decoding over the 4-organ model.

Three routes: a float64 reference decoder, a saturating fixed-point decoder
mirroring the deployable integer arithmetic, and an exhaustive brute-force
search used as a test oracle. A WindowedDecoder wraps either model for
streaming use, re-decoding the last W observations from scratch per push
with a uniform prior over states.

Observations are either discrete labels (one int per frame) or score
vectors (one log-likelihood per state per frame); a sequence uses one form
throughout.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import ConfigError, NoFeasiblePathError
from .markov import N_STATES, LogHmm, QFormat, QuantHmm, quantize_value

MAX_BRUTE_FORCE_LEN = 12


@dataclass(frozen=True)
class DecodedPath:
    """Most likely state sequence and its accumulated metric.

    metric is a float log-likelihood from the float decoder and a raw
    fixed-point integer from the fixed decoder.
    """

    states: np.ndarray
    metric: float | int

    def __len__(self):
        return len(self.states)


def _obs_array(obs):
    a = np.asarray(obs)
    if a.ndim == 1 and a.dtype.kind in "iu":
        if a.size and (a.min() < 0 or a.max() >= N_STATES):
            raise ConfigError("observation labels must lie in 0..3")
        return a.astype(np.int64), True
    if a.ndim == 2 and a.shape[1] == N_STATES:
        return a, False
    raise ConfigError(
        "observations must be an int label sequence or a (T, 4) score array")


def _cols_log(model: LogHmm, obs) -> np.ndarray:
    a, is_labels = _obs_array(obs)
    if a.shape[0] == 0:
        raise ConfigError("observation sequence is empty")
    if is_labels:
        return np.ascontiguousarray(model.emission[:, a].T)
    return np.ascontiguousarray(a.astype(np.float64))


def _cols_quant(model: QuantHmm, obs) -> np.ndarray:
    a, is_labels = _obs_array(obs)
    if a.shape[0] == 0:
        raise ConfigError("observation sequence is empty")
    if is_labels:
        return np.ascontiguousarray(model.emission[:, a].T)
    if a.dtype.kind in "iu":
        return np.ascontiguousarray(a.astype(np.int64))  # pre-quantized scores
    q = model.qformat
    flat = np.array([quantize_value(float(x), q) for x in a.flat], dtype=np.int64)
    return np.ascontiguousarray(flat.reshape(a.shape))


def viterbi_float(model: LogHmm, obs) -> DecodedPath:
    """Float64 max-sum decode; ties break toward the lower organ index."""
    cols = _cols_log(model, obs)
    states, metric, feasible = kernels.viterbi_f64(model.initial, model.transition, cols)
    if not feasible:
        raise NoFeasiblePathError("no feasible path for the observation sequence")
    return DecodedPath(states, metric)


def viterbi_fixed(model: QuantHmm, obs) -> DecodedPath:
    """Fixed-point decode with saturating adds; the NEG_INF sentinel absorbs.

    Saturation erases the difference between "impossible" and "extremely
    unlikely", so unlike the float route this never raises on infeasible
    input: the tie-break still yields a path.
    """
    cols = _cols_quant(model, obs)
    q = model.qformat
    states, metric = kernels.viterbi_i64(model.initial, model.transition, cols,
                                         np.int64(q.min_value), np.int64(q.max_value))
    return DecodedPath(states, int(metric))


def score_path(model: LogHmm, obs, states, initial=None) -> float:
    """Accumulated float metric of a given state sequence.

    Adds terms in decoder order (init, emis, trans, emis, ...) so the result
    is bit-comparable with viterbi_float metrics.
    """
    cols = _cols_log(model, obs)
    init = model.initial if initial is None else np.asarray(initial, dtype=np.float64)
    states = np.asarray(states, dtype=np.int64)
    m = init[states[0]] + cols[0, states[0]]
    for t in range(1, len(states)):
        m = m + model.transition[states[t - 1], states[t]]
        m = m + cols[t, states[t]]
    return float(m)


def brute_force_decode(model: LogHmm, obs) -> DecodedPath:
    """Enumerate every state sequence and return the best one.

    Oracle use only; refuses sequences longer than MAX_BRUTE_FORCE_LEN.
    Tie-break matches viterbi_float: among equal-metric paths, the one whose
    reversed state tuple is lexicographically smallest (later states are
    minimized first, mirroring the backtracking argmax).
    """
    cols = _cols_log(model, obs)
    T = cols.shape[0]
    if T > MAX_BRUTE_FORCE_LEN:
        raise ConfigError(
            f"brute force refuses length {T} > {MAX_BRUTE_FORCE_LEN} (4^T paths)")
    n_paths = N_STATES ** T
    digits = (np.arange(n_paths)[:, None] // (N_STATES ** np.arange(T))) % N_STATES
    # Accumulate in the decoder's order so float metrics are bit-identical.
    score = model.initial[digits[:, 0]] + cols[0, digits[:, 0]]
    for t in range(1, T):
        score = score + model.transition[digits[:, t - 1], digits[:, t]]
        score = score + cols[t, digits[:, t]]
    best = score.max()
    if not np.isfinite(best):
        raise NoFeasiblePathError("no feasible path for the observation sequence")
    cand = digits[score == best]
    order = np.lexsort(tuple(cand[:, t] for t in range(T)))  # last key = primary
    return DecodedPath(cand[order[0]].astype(np.int64), float(best))


class WindowedDecoder:
    """Streaming decoder over a bounded window of recent observations.

    Each push appends one observation (evicting the oldest once the buffer
    holds window_size) and re-decodes the whole buffer from scratch under a
    uniform initial distribution, returning the window's path. Single-owner
    mutable object: one stream per instance.
    """

    def __init__(self, model: LogHmm | QuantHmm, window_size: int):
        if window_size < 1:
            raise ConfigError("window_size must be >= 1")
        self.model = model
        self.window_size = int(window_size)
        self._fixed = isinstance(model, QuantHmm)
        if self._fixed:
            self._init = np.array(
                [quantize_value(np.log(1.0 / N_STATES), model.qformat)] * N_STATES,
                dtype=np.int64)
        else:
            self._init = np.full(N_STATES, np.log(1.0 / N_STATES))
        self._cols = None  # (window_size, 4) ring of emission columns
        self._count = 0
        self._next = 0

    def __len__(self):
        return min(self._count, self.window_size)

    def _push_cols(self, col):
        if self._cols is None:
            self._cols = np.empty((self.window_size, N_STATES), col.dtype)
        self._cols[self._next] = col
        self._next = (self._next + 1) % self.window_size
        self._count += 1

    def _window(self):
        n = len(self)
        if self._count <= self.window_size:
            return self._cols[:n]
        start = self._next
        return np.roll(self._cols, -start, axis=0)

    def push(self, obs) -> DecodedPath:
        """Append one observation (label int or 4-vector of scores), decode."""
        if np.isscalar(obs) or (isinstance(obs, np.ndarray) and obs.ndim == 0):
            single = np.array([obs], dtype=np.int64)
        else:
            single = np.asarray(obs, dtype=np.float64)[None, :]
        if self._fixed:
            col = _cols_quant(self.model, single)[0]
        else:
            col = _cols_log(self.model, single)[0]
        self._push_cols(col)
        cols = np.ascontiguousarray(self._window())
        if self._fixed:
            q = self.model.qformat
            states, metric = kernels.viterbi_i64(
                self._init, self.model.transition, cols,
                np.int64(q.min_value), np.int64(q.max_value))
            return DecodedPath(states, int(metric))
        states, metric, feasible = kernels.viterbi_f64(
            self._init, self.model.transition, cols)
        if not feasible:
            raise NoFeasiblePathError("no feasible path for the buffered window")
        return DecodedPath(states, metric)
