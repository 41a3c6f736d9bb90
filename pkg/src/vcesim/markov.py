"""Four-organ left-to-right HMM in probability, log, and fixed-point form.

States follow the anatomical traversal order and can only self-loop or
advance to the next organ. Log-domain conversion turns the Viterbi products
into sums; quantization maps those sums onto signed fixed-point words so
the decoder can run on integer-only hardware.
"""

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError

NEG_INF = float("-inf")

N_STATES = 4

_ROW_SUM_TOL = 1e-9


class OrganState(IntEnum):
    ESOPHAGUS = 0
    STOMACH = 1
    SMALL_INTESTINE = 2
    COLON = 3


def _as_matrix(a, shape, name):
    m = np.asarray(a, dtype=np.float64)
    if m.shape != shape:
        raise ConfigError(f"{name} must have shape {shape}, got {m.shape}")
    return m


def _check_stochastic(m, name):
    if np.any(m < 0.0) or np.any(m > 1.0):
        raise ConfigError(f"{name} entries must lie in [0, 1]")
    sums = m.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
        raise ConfigError(f"{name} rows must sum to 1 (got {sums})")


@dataclass(frozen=True)
class HmmParams:
    """Probability-domain model: initial (4,), transition and emission (4,4).

    The transition matrix must be left-to-right: transition[i][j] == 0
    unless j == i or j == i + 1. Emission row i is the distribution of the
    classifier's observed label while the capsule is in organ i.
    """

    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "initial", _as_matrix(self.initial, (N_STATES,), "initial"))
        object.__setattr__(self, "transition",
                           _as_matrix(self.transition, (N_STATES, N_STATES), "transition"))
        object.__setattr__(self, "emission",
                           _as_matrix(self.emission, (N_STATES, N_STATES), "emission"))
        _check_stochastic(self.initial, "initial")
        _check_stochastic(self.transition, "transition")
        _check_stochastic(self.emission, "emission")
        for i in range(N_STATES):
            for j in range(N_STATES):
                if j != i and j != i + 1 and self.transition[i, j] != 0.0:
                    raise ConfigError(
                        f"transition[{i}][{j}] must be 0 in a left-to-right model")


@dataclass(frozen=True)
class LogHmm:
    """Natural-log domain model; zero probabilities become -inf."""

    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point layout: word_bits total, frac_bits fractional."""

    word_bits: int = 32
    frac_bits: int = 16

    def __post_init__(self):
        if not (0 < self.frac_bits < self.word_bits <= 64):
            raise ConfigError(
                f"need 0 < frac_bits < word_bits <= 64, got {self.word_bits}/{self.frac_bits}")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def min_value(self) -> int:
        return -(1 << (self.word_bits - 1))

    @property
    def max_value(self) -> int:
        return (1 << (self.word_bits - 1)) - 1


@dataclass(frozen=True)
class QuantHmm:
    """Fixed-point log-domain model; qformat.min_value is the NEG_INF sentinel."""

    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    qformat: QFormat = field(default_factory=QFormat)

    @property
    def neg_inf(self) -> int:
        return self.qformat.min_value


def to_log(p: HmmParams) -> LogHmm:
    """Entry-wise natural log; exact zeros map to NEG_INF."""
    with np.errstate(divide="ignore"):
        return LogHmm(np.log(p.initial), np.log(p.transition), np.log(p.emission))


def quantize_value(x: float, q: QFormat) -> int:
    """round(x * 2**frac_bits) half away from zero, saturated to the word range.

    -inf maps to the minimum word (the NEG_INF sentinel); +inf saturates high.
    """
    if math.isnan(x):
        raise ConfigError("cannot quantize NaN")
    if math.isinf(x):
        return q.min_value if x < 0 else q.max_value
    v = x * q.scale
    if math.isinf(v):
        return q.min_value if v < 0 else q.max_value
    r = int(math.floor(abs(v) + 0.5))
    if v < 0:
        r = -r
    return max(q.min_value, min(q.max_value, r))


def dequantize_value(r: int, q: QFormat) -> float:
    """Inverse scaling; the sentinel word reads back as -inf."""
    if r == q.min_value:
        return NEG_INF
    return r / q.scale


def _quantize_array(a: np.ndarray, q: QFormat) -> np.ndarray:
    return np.array([quantize_value(float(x), q) for x in a.flat],
                    dtype=np.int64).reshape(a.shape)


def quantize(h: LogHmm, q: QFormat | None = None) -> QuantHmm:
    q = q or QFormat()
    return QuantHmm(_quantize_array(h.initial, q),
                    _quantize_array(h.transition, q),
                    _quantize_array(h.emission, q), q)


def from_dwell(mean_dwell_frames) -> np.ndarray:
    """Left-to-right transition matrix from mean per-organ dwell times.

    A state with mean dwell m advances with probability 1/m per frame
    (geometric dwell). Takes 3 values for organs 0..2; the colon absorbs.
    """
    d = np.asarray(mean_dwell_frames, dtype=np.float64)
    if d.shape != (3,):
        raise ConfigError(f"mean_dwell_frames must have 3 entries, got shape {d.shape}")
    if np.any(d < 1.0):
        raise ConfigError("mean dwell must be >= 1 frame")
    t = np.zeros((N_STATES, N_STATES))
    for i in range(3):
        t[i, i + 1] = 1.0 / d[i]
        t[i, i] = 1.0 - 1.0 / d[i]
    t[3, 3] = 1.0
    return t


# Shipped defaults (plumbing, user-overridable via the HMM config file):
# uniform prior, geometric dwells of 24/1100/2000 recorded frames for
# esophagus/stomach/small intestine, and a 0.90-diagonal confusion matrix
# with the residual mass split evenly over the other labels.
DEFAULT_DWELL_FRAMES = (24.0, 1100.0, 2000.0)


def default_emission(diag: float = 0.90) -> np.ndarray:
    off = (1.0 - diag) / 3.0
    e = np.full((N_STATES, N_STATES), off)
    np.fill_diagonal(e, diag)
    return e


def default_hmm() -> HmmParams:
    return HmmParams(np.full(N_STATES, 0.25),
                     from_dwell(DEFAULT_DWELL_FRAMES),
                     default_emission())


def uniform_initial() -> np.ndarray:
    return np.full(N_STATES, 0.25)


def hmm_from_dict(cfg: dict) -> tuple[HmmParams, QFormat]:
    """Build (HmmParams, QFormat) from the JSON config schema.

    Keys: initial, emission, and either transition (4x4 rows) or
    dwell_frames (3 mean dwells); qformat: {word_bits, frac_bits}.
    Missing keys fall back to the shipped defaults.
    """
    base = default_hmm()
    initial = np.asarray(cfg.get("initial", base.initial), dtype=np.float64)
    emission = np.asarray(cfg.get("emission", base.emission), dtype=np.float64)
    if "transition" in cfg and "dwell_frames" in cfg:
        raise ConfigError("give either 'transition' or 'dwell_frames', not both")
    if "dwell_frames" in cfg:
        transition = from_dwell(cfg["dwell_frames"])
    else:
        transition = np.asarray(cfg.get("transition", base.transition), dtype=np.float64)
    qf_cfg = cfg.get("qformat", {})
    qformat = QFormat(int(qf_cfg.get("word_bits", 32)), int(qf_cfg.get("frac_bits", 16)))
    return HmmParams(initial, transition, emission), qformat


def load_hmm_config(path) -> tuple[HmmParams, QFormat]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
    return hmm_from_dict(cfg)
