"""Per-frame observation sources.

A StudyTrace pairs the ground-truth organ of every recorded frame with the
classifier's output for it, either as a discrete label or as a 4-vector of
log-likelihood scores. Traces come from CSV exports of real classifier
runs or from the synthesizer, which draws a monotone organ timeline with
log-normal dwell times, confusion-matrix label noise, and bursts of
consecutive corrupted frames ("dirt") that follow their own emission row.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .markov import N_STATES, HmmParams, OrganState, default_hmm

DEFAULT_RECORDED_FPS = 2.0

# Synthetic timeline defaults, in recorded frames at 2 fps. The esophagus
# transit is seconds, the stomach dominates the pre-intestine phase.
DEFAULT_TIMELINE_DWELL = (24.0, 1100.0, 2000.0, 400.0)
DEFAULT_DISPERSION = 0.35


@dataclass(frozen=True)
class BurstConfig:
    """Dirt-burst model: bursts arrive as a Poisson process (rate per 1000
    frames), last a geometric number of frames, and replace the emission row
    with corrupt_emission while active."""

    rate: float = 2.0
    mean_len: float = 12.0
    corrupt_emission: tuple = (0.05, 0.15, 0.70, 0.10)

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError("burst rate must be >= 0")
        if self.mean_len < 1:
            raise ConfigError("burst mean_len must be >= 1 frame")
        ce = np.asarray(self.corrupt_emission, dtype=np.float64)
        if ce.shape != (N_STATES,) or np.any(ce < 0) or abs(ce.sum() - 1.0) > 1e-9:
            raise ConfigError("corrupt_emission must be a probability 4-vector")

    @classmethod
    def off(cls) -> "BurstConfig":
        return cls(rate=0.0)


@dataclass
class StudyTrace:
    """One study: per-frame ground truth plus observed classifier output.

    Exactly one of labels/scores is set. Ground truth must be nondecreasing
    (anatomical traversal) and contain the small intestine, else the delay
    metric is undefined.
    """

    study_id: str
    truth: np.ndarray
    labels: np.ndarray | None = None
    scores: np.ndarray | None = None
    recorded_fps: float = DEFAULT_RECORDED_FPS

    def __post_init__(self):
        self.truth = np.asarray(self.truth, dtype=np.int64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores is not None:
            self.scores = np.asarray(self.scores, dtype=np.float64)
        if (self.labels is None) == (self.scores is None):
            raise DataError("trace needs exactly one of labels or scores")

    def __len__(self):
        return len(self.truth)

    @property
    def observations(self) -> np.ndarray:
        return self.labels if self.labels is not None else self.scores

    @property
    def first_si_frame(self) -> int | None:
        hits = np.nonzero(self.truth >= OrganState.SMALL_INTESTINE)[0]
        return int(hits[0]) if len(hits) else None

    def validate(self):
        if np.any(np.diff(self.truth) < 0):
            row = int(np.nonzero(np.diff(self.truth) < 0)[0][0]) + 2
            raise DataError(f"non-monotone ground truth at row {row}")
        if np.any((self.truth < 0) | (self.truth >= N_STATES)):
            raise DataError("truth labels must lie in 0..3")
        if self.first_si_frame is None:
            raise DataError(
                f"trace {self.study_id!r} has no small-intestine frame; delay undefined")


def _sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_trace(trace: StudyTrace, path) -> None:
    """Write the trace CSV plus its {study_id, recorded_fps} sidecar JSON."""
    path = Path(path)
    lines = []
    if trace.labels is not None:
        lines.append("frame,truth,pred")
        for i, (t, p) in enumerate(zip(trace.truth, trace.labels)):
            lines.append(f"{i},{t},{p}")
    else:
        lines.append("frame,truth,s0,s1,s2,s3")
        for i, (t, row) in enumerate(zip(trace.truth, trace.scores)):
            lines.append(f"{i},{t}," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"study_id": trace.study_id, "recorded_fps": trace.recorded_fps}
    _sidecar_path(path).write_text(
        json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def load_trace(path) -> StudyTrace:
    """Parse and validate a trace CSV (label or score form) and its sidecar."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise DataError(f"{path}: empty trace file")
    header = rows[0].strip()
    if header == "frame,truth,pred":
        score_form = False
    elif header == "frame,truth,s0,s1,s2,s3":
        score_form = True
    else:
        raise DataError(f"{path}: unrecognized header {header!r}")
    truth, labels, scores = [], [], []
    for n, ln in enumerate(rows[1:], start=1):
        parts = ln.split(",")
        want = 6 if score_form else 3
        if len(parts) != want:
            raise DataError(f"{path}: expected {want} columns at row {n}")
        try:
            frame = int(parts[0])
            t = int(parts[1])
            if score_form:
                s = [float(v) for v in parts[2:]]
            else:
                p = int(parts[2])
        except ValueError as e:
            raise DataError(f"{path}: unparseable value at row {n}: {e}") from None
        if frame != n - 1:
            raise DataError(f"{path}: frame index {frame} out of order at row {n}")
        if not 0 <= t < N_STATES:
            raise DataError(f"{path}: truth {t} out of range at row {n}")
        truth.append(t)
        if score_form:
            scores.append(s)
        else:
            if not 0 <= p < N_STATES:
                raise DataError(f"{path}: pred {p} out of range at row {n}")
            labels.append(p)
    study_id = path.stem
    fps = DEFAULT_RECORDED_FPS
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        study_id = meta.get("study_id", study_id)
        fps = float(meta.get("recorded_fps", fps))
    trace = StudyTrace(study_id, np.array(truth),
                       labels=np.array(labels) if not score_form else None,
                       scores=np.array(scores) if score_form else None,
                       recorded_fps=fps)
    trace.validate()
    return trace


def load_corpus(directory) -> list[StudyTrace]:
    """Load every *.csv trace in a directory, sorted by filename."""
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise DataError(f"no trace CSVs found in {directory}")
    return [load_trace(p) for p in paths]


def _lognormal_duration(rng, mean, dispersion):
    if dispersion == 0:
        return max(1, int(math.floor(mean + 0.5)))
    mu = math.log(mean) - dispersion ** 2 / 2.0
    return max(1, int(math.floor(rng.lognormal(mu, dispersion) + 0.5)))


def _burst_mask(rng, n, burst: BurstConfig) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    if burst.rate <= 0:
        return mask
    starts = np.nonzero(rng.random(n) < burst.rate / 1000.0)[0]
    lengths = rng.geometric(1.0 / burst.mean_len, size=len(starts))
    end = 0
    for s, ln in zip(starts, lengths):
        if s < end:
            continue  # start inside an ongoing burst: ignored
        end = min(n, s + int(ln))
        mask[s:end] = True
    return mask


def _labels_from_rows(rng, truth, burst_mask, emission, corrupt) -> np.ndarray:
    u = rng.random(len(truth))
    cum_e = np.cumsum(emission, axis=1)
    cum_c = np.cumsum(corrupt)
    base = (u[:, None] > cum_e[truth]).sum(axis=1)
    dirty = (u[:, None] > cum_c[None, :]).sum(axis=1)
    return np.where(burst_mask, dirty, base).astype(np.int64)


def _synth_from_durations(rng, durations, hmm, burst, study_id, recorded_fps):
    truth = np.repeat(np.arange(N_STATES), durations)
    mask = _burst_mask(rng, len(truth), burst)
    labels = _labels_from_rows(rng, truth, mask, hmm.emission,
                               np.asarray(burst.corrupt_emission))
    return StudyTrace(study_id, truth, labels=labels, recorded_fps=recorded_fps)


def synth_study(seed, dwell_frames=DEFAULT_TIMELINE_DWELL, hmm: HmmParams | None = None,
                burst: BurstConfig | None = None, dispersion: float = DEFAULT_DISPERSION,
                recorded_fps: float = DEFAULT_RECORDED_FPS,
                study_id: str | None = None) -> StudyTrace:
    """Synthesize one study, fully reproducible from the seed.

    dwell_frames gives the mean duration of each of the four organs in
    recorded frames; actual durations are log-normal around those means
    (dispersion is the sigma of the underlying normal; 0 pins the mean).
    """
    dwell = np.asarray(dwell_frames, dtype=np.float64)
    if dwell.shape != (N_STATES,) or np.any(dwell <= 0):
        raise ConfigError("dwell_frames must be 4 positive means")
    if dispersion < 0:
        raise ConfigError("dispersion must be >= 0")
    hmm = hmm or default_hmm()
    burst = burst or BurstConfig()
    rng = np.random.default_rng(seed)
    durations = [_lognormal_duration(rng, m, dispersion) for m in dwell]
    sid = study_id if study_id is not None else f"synth-{seed}"
    return _synth_from_durations(rng, durations, hmm, burst, sid, recorded_fps)


def calibrated_corpus(seed, n_studies, hmm: HmmParams | None = None,
                      burst: BurstConfig | None = None,
                      dispersion: float = DEFAULT_DISPERSION,
                      baseline_target_mj: float = 719.934,
                      baseline_frame_uj: float = 640.64,
                      recorded_fps: float = DEFAULT_RECORDED_FPS) -> list[StudyTrace]:
    """Corpus whose mean pre-intestine duration is calibrated so a plain
    2 fps capture-and-transmit capsule averages baseline_target_mj before
    reaching the small intestine.

    Pre-intestine durations are drawn log-normally, then jointly rescaled so
    the sample mean hits the target frame count (target energy / per-frame
    baseline energy) exactly up to rounding.
    """
    if n_studies < 1:
        raise ConfigError("n_studies must be >= 1")
    hmm = hmm or default_hmm()
    burst = burst if burst is not None else BurstConfig()
    target_frames = baseline_target_mj * 1000.0 / baseline_frame_uj
    rng = np.random.default_rng(seed)
    d_eso_mean = DEFAULT_TIMELINE_DWELL[0]
    d_sto_mean = target_frames - d_eso_mean
    pre = []
    for _ in range(n_studies):
        if dispersion == 0:
            pre.append((d_eso_mean, d_sto_mean))
        else:
            mu0 = math.log(d_eso_mean) - dispersion ** 2 / 2.0
            mu1 = math.log(d_sto_mean) - dispersion ** 2 / 2.0
            pre.append((rng.lognormal(mu0, dispersion), rng.lognormal(mu1, dispersion)))
    total = sum(a + b for a, b in pre)
    k = target_frames * n_studies / total
    studies = []
    for i, (a, b) in enumerate(pre):
        d0 = max(1, int(math.floor(a * k + 0.5)))
        d1 = max(1, int(math.floor(b * k + 0.5)))
        d2 = _lognormal_duration(rng, DEFAULT_TIMELINE_DWELL[2], dispersion)
        d3 = _lognormal_duration(rng, DEFAULT_TIMELINE_DWELL[3], dispersion)
        studies.append(_synth_from_durations(
            rng, [d0, d1, d2, d3], hmm, burst, f"synth-{seed}-{i:03d}", recorded_fps))
    return studies
