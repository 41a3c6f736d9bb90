"""Capsule controller simulation over a recorded study trace.

The smart capsule walks the recording at a reduced pre-detection frame
rate, runs every captured frame through the quantized windowed decoder,
and starts transmitting (at the screening rate) once the detection policy
sees the small intestine. The baseline capsule captures and transmits
every recorded frame. Energy is attributed per captured frame from the
power table; energy_pre_si accumulates strictly before the ground-truth
small-intestine entry, so premature triggers pay screening-rate
transmission inside the pre-intestine window.
"""

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .backend import kernels
from .classifier import StudyTrace
from .errors import ConfigError
from .markov import (N_STATES, HmmParams, QFormat, QuantHmm, default_hmm,
                     hmm_from_dict, quantize, quantize_value, to_log)
from .power import EnergyBreakdown, PowerTable, frame_energy, power_from_dict

_LOG_UNIFORM = float(np.log(1.0 / N_STATES))


class Policy(Enum):
    """Transmission trigger: the whole decoded window in the small intestine
    (and the window full), or just the newest decoded state."""

    FULL_WINDOW = 0
    LAST_STATE = 1


@dataclass(frozen=True)
class CapsuleConfig:
    fps_pre: float = 0.25
    fps_screen: float = 2.0
    window_size: int = 20
    policy: Policy = Policy.FULL_WINDOW
    qformat: QFormat = field(default_factory=QFormat)
    power: PowerTable = field(default_factory=PowerTable)
    hmm: HmmParams = field(default_factory=default_hmm)

    def __post_init__(self):
        if self.window_size < 1:
            raise ConfigError("window_size must be >= 1")
        if self.fps_pre <= 0 or self.fps_screen <= 0:
            raise ConfigError("frame rates must be positive")

    def stride(self, recorded_fps: float, fps: float) -> int:
        s = recorded_fps / fps
        if abs(s - round(s)) > 1e-9 or round(s) < 1:
            raise ConfigError(
                f"fps {fps} is not an integer stride of the {recorded_fps} fps recording")
        return int(round(s))

    def quantized_model(self) -> QuantHmm:
        return quantize(to_log(self.hmm), self.qformat)


@dataclass
class SimResult:
    """Outcome of one capsule run over one study."""

    study_id: str
    detection_frame: int | None
    first_si_frame: int | None
    delay_frames: int | None
    delay_seconds: float | None
    energy_pre_si: EnergyBreakdown
    energy_total: EnergyBreakdown
    frames_captured: int
    frames_transmitted: int
    recorded_fps: float

    @property
    def delay_defined(self) -> bool:
        return self.delay_frames is not None

    def to_dict(self) -> dict:
        return {
            "study_id": self.study_id,
            "detection_frame": self.detection_frame,
            "first_si_frame": self.first_si_frame,
            "delay_frames": self.delay_frames,
            "delay_seconds": self.delay_seconds,
            "energy_pre_si": self.energy_pre_si.to_dict(),
            "energy_total": self.energy_total.to_dict(),
            "frames_captured": self.frames_captured,
            "frames_transmitted": self.frames_transmitted,
            "recorded_fps": self.recorded_fps,
        }


def policy_check(states, policy: Policy, window_size: int) -> bool:
    """Evaluate the trigger predicate on a decoded window path."""
    states = np.asarray(states)
    if len(states) == 0:
        return False
    if policy is Policy.LAST_STATE:
        return bool(states[-1] >= 2)
    return len(states) == window_size and bool(states.min() >= 2)


def delay_metric(result: SimResult) -> tuple[int, float]:
    """(frames, seconds) between detection and true small-intestine entry."""
    if result.detection_frame is None or result.first_si_frame is None:
        raise ConfigError("delay undefined: no detection or no small-intestine frame")
    frames = result.detection_frame - result.first_si_frame
    return frames, frames / result.recorded_fps


def _grid_count(limit: int, stride: int) -> int:
    """Number of capture indices k*stride in [0, limit)."""
    if limit <= 0:
        return 0
    return (limit - 1) // stride + 1


def _quant_obs_cols(model: QuantHmm, trace: StudyTrace, idx: np.ndarray) -> np.ndarray:
    if trace.labels is not None:
        return np.ascontiguousarray(model.emission[:, trace.labels[idx]].T)
    q = model.qformat
    rows = trace.scores[idx]
    flat = np.array([quantize_value(float(x), q) for x in rows.flat], dtype=np.int64)
    return np.ascontiguousarray(flat.reshape(rows.shape))


def run_capsule(trace: StudyTrace, cfg: CapsuleConfig) -> SimResult:
    """Simulate the smart capsule over one study.

    Pre-detection: capture every stride_pre-th recorded frame, spend
    capture+DNN+HMM energy, feed the windowed decoder. From the detection
    frame on (inclusive): capture every stride_post-th frame and
    additionally transmit it. Detection never reverts.
    """
    T = len(trace)
    if T == 0:
        raise ConfigError("trace is empty")
    s_pre = cfg.stride(trace.recorded_fps, cfg.fps_pre)
    s_post = cfg.stride(trace.recorded_fps, cfg.fps_screen)
    model = cfg.quantized_model()
    init = np.full(N_STATES, quantize_value(_LOG_UNIFORM, cfg.qformat), dtype=np.int64)

    pre_idx = np.arange(0, T, s_pre)
    cols = _quant_obs_cols(model, trace, pre_idx)
    k = int(kernels.detect_stream(cols, cfg.window_size, cfg.policy.value,
                                  init, model.transition,
                                  np.int64(cfg.qformat.min_value),
                                  np.int64(cfg.qformat.max_value)))
    detection = int(pre_idx[k]) if k >= 0 else None

    period_pre = s_pre / trace.recorded_fps * 1000.0
    period_post = s_post / trace.recorded_fps * 1000.0
    e_proc = frame_energy(cfg.power, period_pre, captured=True, inferred=True,
                          decoded=True)
    e_tx = frame_energy(cfg.power, period_post, captured=True, inferred=True,
                        decoded=True, transmitted=True)

    if detection is None:
        n_pre, n_post = len(pre_idx), 0
    else:
        n_pre = detection // s_pre + 1
        n_post = (T - 1 - detection) // s_post
    n_tx = (1 + n_post) if detection is not None else 0
    energy_total = e_proc.scaled(n_pre - (1 if detection is not None else 0)) \
        + e_tx.scaled(n_tx)

    F = trace.first_si_frame
    if F is None:
        energy_pre_si = energy_total
        delay = None
    else:
        limit = min(F, detection + 1) if detection is not None else F
        c_pre = _grid_count(limit, s_pre)
        tx_pre = 1 if (detection is not None and detection < F) else 0
        c_post = (F - detection - 1) // s_post \
            if (detection is not None and F > detection) else 0
        energy_pre_si = e_proc.scaled(c_pre - tx_pre) + e_tx.scaled(tx_pre + c_post)
        delay = detection - F if detection is not None else None

    return SimResult(
        study_id=trace.study_id,
        detection_frame=detection,
        first_si_frame=F,
        delay_frames=delay,
        delay_seconds=(delay / trace.recorded_fps) if delay is not None else None,
        energy_pre_si=energy_pre_si,
        energy_total=energy_total,
        frames_captured=n_pre + n_post,
        frames_transmitted=n_tx,
        recorded_fps=trace.recorded_fps)


def run_baseline(trace: StudyTrace, power: PowerTable | None = None) -> SimResult:
    """Ordinary capsule: capture and transmit every recorded frame.

    No on-board processing; detection_frame is 0 for delay bookkeeping (all
    frames are sent), giving a deeply negative delay.
    """
    T = len(trace)
    if T == 0:
        raise ConfigError("trace is empty")
    power = power or PowerTable()
    period = 1000.0 / trace.recorded_fps
    e_frame = frame_energy(power, period, captured=True, transmitted=True)
    F = trace.first_si_frame
    delay = -F if F is not None else None
    return SimResult(
        study_id=trace.study_id,
        detection_frame=0,
        first_si_frame=F,
        delay_frames=delay,
        delay_seconds=(delay / trace.recorded_fps) if delay is not None else None,
        energy_pre_si=e_frame.scaled(F if F is not None else T),
        energy_total=e_frame.scaled(T),
        frames_captured=T,
        frames_transmitted=T,
        recorded_fps=trace.recorded_fps)


_POLICY_NAMES = {"full_window": Policy.FULL_WINDOW, "fullwindow": Policy.FULL_WINDOW,
                 "last_state": Policy.LAST_STATE, "laststate": Policy.LAST_STATE}


def capsule_from_dict(cfg: dict) -> CapsuleConfig:
    """CapsuleConfig from the JSON schema; missing keys keep the defaults."""
    policy_name = str(cfg.get("policy", "full_window")).lower()
    if policy_name not in _POLICY_NAMES:
        raise ConfigError(f"unknown policy {cfg.get('policy')!r}")
    qf_cfg = cfg.get("qformat", {})
    qformat = QFormat(int(qf_cfg.get("word_bits", 32)), int(qf_cfg.get("frac_bits", 16)))
    hmm, hmm_qf = hmm_from_dict(cfg.get("hmm", {}))
    if "qformat" not in cfg and "qformat" in cfg.get("hmm", {}):
        qformat = hmm_qf  # top-level qformat wins when both are given
    return CapsuleConfig(
        fps_pre=float(cfg.get("fps_pre", 0.25)),
        fps_screen=float(cfg.get("fps_screen", 2.0)),
        window_size=int(cfg.get("window_size", 20)),
        policy=_POLICY_NAMES[policy_name],
        qformat=qformat,
        power=power_from_dict(cfg.get("power", {})),
        hmm=hmm)


def load_capsule_config(path) -> CapsuleConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
    return capsule_from_dict(cfg)
