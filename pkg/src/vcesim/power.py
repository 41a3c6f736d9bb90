"""Per-event energy model of the capsule.

Each frame is a bag of events (capture, CNN inference, HMM decode step,
transmission); every event carries a power, a duration, and a stored
per-event energy. Stored energies are authoritative; powers and durations
back a consistency check and a recompute mode for edited tables. Idle draw
between events is modeled but off by default: the shipped defaults and all
headline numbers use active-event accounting only.
"""

import json
from dataclasses import dataclass, field, replace

from .errors import ConfigError

# On-body receiver link: 5 mW at 2048 KiB/s moves a 320x320 frame
# (102400 B) in 50 ms for ~250 uJ.
DEFAULT_TX_RATE_BYTES_PER_S = 2_048_000
DEFAULT_TX_POWER_MW = 5.0

_CONSISTENCY_TOL = 0.005


@dataclass(frozen=True)
class TaskPower:
    power_mw: float
    duration_ms: float
    energy_uj: float

    def recomputed(self) -> "TaskPower":
        return replace(self, energy_uj=self.power_mw * self.duration_ms)


@dataclass(frozen=True)
class CapturePower:
    """Image capture runs sensor, LEDs, and MCU concurrently for one exposure."""

    sensor_mw: float = 8.51
    leds_mw: float = 14.78
    mcu_mw: float = 7.23
    duration_ms: float = 12.79
    sensor_uj: float = 108.93
    leds_uj: float = 189.15
    mcu_uj: float = 92.56

    @property
    def energy_uj(self) -> float:
        return self.sensor_uj + self.leds_uj + self.mcu_uj

    def recomputed(self) -> "CapturePower":
        return replace(self,
                       sensor_uj=self.sensor_mw * self.duration_ms,
                       leds_uj=self.leds_mw * self.duration_ms,
                       mcu_uj=self.mcu_mw * self.duration_ms)


def _default_dnn():
    return TaskPower(16.63, 0.31, 5.14)


def _default_hmm():
    return TaskPower(9.94, 0.02, 0.17)


def _default_tx():
    return TaskPower(DEFAULT_TX_POWER_MW, 50.0, 250.0)


@dataclass(frozen=True)
class PowerTable:
    """Per-event constants; the defaults describe the demonstrator hardware."""

    capture: CapturePower = field(default_factory=CapturePower)
    dnn: TaskPower = field(default_factory=_default_dnn)
    hmm: TaskPower = field(default_factory=_default_hmm)
    tx: TaskPower = field(default_factory=_default_tx)
    idle_mcu_mw: float = 5.85
    idle_sensor_mw: float = 3.0
    include_idle: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        vals = [self.capture.sensor_mw, self.capture.leds_mw, self.capture.mcu_mw,
                self.capture.duration_ms, self.capture.sensor_uj, self.capture.leds_uj,
                self.capture.mcu_uj, self.dnn.power_mw, self.dnn.duration_ms,
                self.dnn.energy_uj, self.hmm.power_mw, self.hmm.duration_ms,
                self.hmm.energy_uj, self.tx.power_mw, self.tx.duration_ms,
                self.tx.energy_uj, self.idle_mcu_mw, self.idle_sensor_mw]
        if any(v <= 0 for v in vals):
            raise ConfigError("power table entries must be strictly positive")
        triples = [
            ("capture.sensor", self.capture.sensor_mw, self.capture.duration_ms,
             self.capture.sensor_uj),
            ("capture.leds", self.capture.leds_mw, self.capture.duration_ms,
             self.capture.leds_uj),
            ("capture.mcu", self.capture.mcu_mw, self.capture.duration_ms,
             self.capture.mcu_uj),
            ("dnn", self.dnn.power_mw, self.dnn.duration_ms, self.dnn.energy_uj),
            ("tx", self.tx.power_mw, self.tx.duration_ms, self.tx.energy_uj),
            # hmm row exempt: its published energy does not match P*t and the
            # stored energy wins.
        ]
        for name, p, t, e in triples:
            if abs(p * t - e) / e > _CONSISTENCY_TOL:
                raise ConfigError(
                    f"{name}: power*duration = {p * t:.4f} uJ disagrees with stored "
                    f"energy {e} uJ by more than {_CONSISTENCY_TOL:.1%}")

    @property
    def idle_mw(self) -> float:
        return self.idle_mcu_mw + self.idle_sensor_mw

    def recomputed(self) -> "PowerTable":
        """New table whose stored energies are power*duration (edited-table mode)."""
        return replace(self, capture=self.capture.recomputed(),
                       dnn=self.dnn.recomputed(), hmm=self.hmm.recomputed(),
                       tx=self.tx.recomputed())


@dataclass
class EnergyBreakdown:
    """Accumulated energy per task, microjoules."""

    capture_uj: float = 0.0
    dnn_uj: float = 0.0
    hmm_uj: float = 0.0
    tx_uj: float = 0.0
    idle_uj: float = 0.0

    @property
    def total_uj(self) -> float:
        return self.capture_uj + self.dnn_uj + self.hmm_uj + self.tx_uj + self.idle_uj

    @property
    def total_mj(self) -> float:
        return self.total_uj / 1000.0

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown(self.capture_uj + other.capture_uj,
                               self.dnn_uj + other.dnn_uj,
                               self.hmm_uj + other.hmm_uj,
                               self.tx_uj + other.tx_uj,
                               self.idle_uj + other.idle_uj)

    def scaled(self, k: float) -> "EnergyBreakdown":
        return EnergyBreakdown(self.capture_uj * k, self.dnn_uj * k,
                               self.hmm_uj * k, self.tx_uj * k, self.idle_uj * k)

    def to_dict(self) -> dict:
        return {"capture_uj": self.capture_uj, "dnn_uj": self.dnn_uj,
                "hmm_uj": self.hmm_uj, "tx_uj": self.tx_uj,
                "idle_uj": self.idle_uj, "total_uj": self.total_uj}


def energy_capture(t: PowerTable) -> float:
    """Per-capture energy in uJ: sensor + LEDs + MCU stored energies."""
    return t.capture.energy_uj


def energy_tx_formula(n_bytes: float, rate_bytes_per_s: float = DEFAULT_TX_RATE_BYTES_PER_S,
                      power_mw: float = DEFAULT_TX_POWER_MW) -> tuple[float, float]:
    """(duration_ms, energy_uj) to push n_bytes through the radio link."""
    if n_bytes < 0 or rate_bytes_per_s <= 0 or power_mw <= 0:
        raise ConfigError("transmission formula needs nonnegative bytes, positive rate/power")
    duration_ms = n_bytes / rate_bytes_per_s * 1000.0
    return duration_ms, power_mw * duration_ms


def frame_energy(t: PowerTable, period_ms: float, *, captured: bool = False,
                 inferred: bool = False, decoded: bool = False,
                 transmitted: bool = False) -> EnergyBreakdown:
    """Energy of one frame slot of length period_ms with the given events.

    With include_idle, the slot's remaining time draws MCU + sensor idle
    power. period_ms must cover the active time of the selected events.
    """
    active_ms = 0.0
    b = EnergyBreakdown()
    if captured:
        b.capture_uj = t.capture.energy_uj
        active_ms += t.capture.duration_ms
    if inferred:
        b.dnn_uj = t.dnn.energy_uj
        active_ms += t.dnn.duration_ms
    if decoded:
        b.hmm_uj = t.hmm.energy_uj
        active_ms += t.hmm.duration_ms
    if transmitted:
        b.tx_uj = t.tx.energy_uj
        active_ms += t.tx.duration_ms
    if period_ms < active_ms:
        raise ConfigError(
            f"frame period {period_ms} ms shorter than active time {active_ms} ms")
    if t.include_idle:
        b.idle_uj = t.idle_mw * (period_ms - active_ms)
    return b


def _task_from_dict(d: dict, base: TaskPower) -> TaskPower:
    return TaskPower(float(d.get("power_mw", base.power_mw)),
                     float(d.get("duration_ms", base.duration_ms)),
                     float(d.get("energy_uj", base.energy_uj)))


def power_from_dict(cfg: dict) -> PowerTable:
    """PowerTable from the JSON schema; an empty dict gives the defaults."""
    base = PowerTable()
    cap_cfg = cfg.get("capture", {})
    cap = CapturePower(
        float(cap_cfg.get("sensor_mw", base.capture.sensor_mw)),
        float(cap_cfg.get("leds_mw", base.capture.leds_mw)),
        float(cap_cfg.get("mcu_mw", base.capture.mcu_mw)),
        float(cap_cfg.get("duration_ms", base.capture.duration_ms)),
        float(cap_cfg.get("sensor_uj", base.capture.sensor_uj)),
        float(cap_cfg.get("leds_uj", base.capture.leds_uj)),
        float(cap_cfg.get("mcu_uj", base.capture.mcu_uj)))
    dnn = _task_from_dict(cfg.get("dnn", {}), base.dnn)
    hmm = _task_from_dict(cfg.get("hmm", {}), base.hmm)
    tx = _task_from_dict(cfg.get("tx", {}), base.tx)
    if cfg.get("recompute_energies", False):
        # Recompute before construction: an edited power with a stale stored
        # energy would otherwise fail the consistency check.
        cap, dnn, hmm, tx = cap.recomputed(), dnn.recomputed(), hmm.recomputed(), tx.recomputed()
    idle_cfg = cfg.get("idle", {})
    return PowerTable(
        capture=cap, dnn=dnn, hmm=hmm, tx=tx,
        idle_mcu_mw=float(idle_cfg.get("mcu_mw", base.idle_mcu_mw)),
        idle_sensor_mw=float(idle_cfg.get("sensor_mw", base.idle_sensor_mw)),
        include_idle=bool(cfg.get("include_idle", False)))


def load_power_config(path) -> PowerTable:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
    return power_from_dict(cfg)
