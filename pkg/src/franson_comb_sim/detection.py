"""
Loss budget, pump-rejection filters and the Monte-Carlo detector model.

Time tags are int64 picoseconds. Each pair that reaches both detectors is
placed in one of the three Franson peaks; photons whose partner is lost (or
leaves through the unmonitored port) become uncorrelated singles, and dark
counts are merged per stream before the dead-time filter.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba as nb
import numpy as np

from .franson import histogram_weights

PS_PER_S = 10**12
PS_PER_US = 10**6

# Monitored-port probability for a single photon of the folded interferometer.
PORT_PROBABILITY = 0.5


@dataclass(frozen=True)
class DetectorParams:
    """
    One free-running InGaAs APD arm.

    ``arm_loss_dB`` is the full arm budget (coupling, demux, detector
    efficiency); ``efficiency`` is informational and never applied.
    """

    label: str = "signal"
    arm_loss_dB: float = 22.0
    dark_rate: float = 250.0  # counts/s
    dead_time: float = 16.0  # us
    jitter_sigma: float = 250.0  # ps
    background_rate: float = 0.0  # counts/s
    efficiency: float | None = None

    def __post_init__(self):
        if self.label not in ("signal", "idler"):
            raise ValueError(f"label must be 'signal' or 'idler', got {self.label!r}")
        if self.arm_loss_dB < 0:
            raise ValueError("arm_loss_dB must be >= 0")
        if not self.dead_time > 0:
            raise ValueError("dead_time must be > 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.dark_rate < 0 or self.background_rate < 0:
            raise ValueError("dark_rate and background_rate must be >= 0")

    @property
    def transmittance(self) -> float:
        return 10 ** (-self.arm_loss_dB / 10)

    @property
    def noise_rate(self) -> float:
        return self.dark_rate + self.background_rate


# IDQ-230 on the signal arm, IDQ-220 on the idler arm.
SIGNAL_APD = DetectorParams("signal", 22.0, 250.0, 16.0, 250.0, efficiency=0.25)
IDLER_APD = DetectorParams("idler", 22.0, 1100.0, 16.0, 250.0, efficiency=0.20)


def effective_rate(internal_rate, loss_dB: float):
    if np.any(np.asarray(internal_rate) < 0):
        raise ValueError("internal_rate must be >= 0")
    return internal_rate * 10 ** (-loss_dB / 10)


@dataclass(frozen=True)
class FilterStage:
    center: float  # THz
    bandwidth: float  # GHz, full passband width
    off_band_isolation_dB: float

    def isolation(self, freq):
        inside = np.abs(np.asarray(freq, dtype=float) - self.center) * 1e3 <= 0.5 * self.bandwidth
        return np.where(inside, 0.0, self.off_band_isolation_dB)


@dataclass(frozen=True)
class FilterCascade:
    stages: tuple[FilterStage, ...] = field(default_factory=tuple)

    @property
    def total_isolation(self) -> float:
        return float(sum(s.off_band_isolation_dB for s in self.stages))


def cascade_isolation(cascade: FilterCascade, freq):
    """Summed stage isolation [dB] at ``freq`` [THz]; 0 dB inside a passband."""
    if not cascade.stages:
        raise ValueError("cascade has no stages")
    total = sum(s.isolation(freq) for s in cascade.stages)
    return float(total) if np.ndim(total) == 0 else total


@dataclass(frozen=True)
class TimeTagStream:
    label: str
    tags: np.ndarray  # int64 ps, sorted
    duration: float  # s
    seed: int | None = None

    def __len__(self):
        return int(self.tags.size)

    @property
    def rate(self) -> float:
        return self.tags.size / self.duration


@nb.njit(cache=True)
def _dead_time_mask(tags, dead):
    n = tags.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    last = 0
    have = False
    for k in range(n):
        t = tags[k]
        if not have or t - last >= dead:
            keep[k] = True
            last = t
            have = True
    return keep


def apply_dead_time(tags, dead_time: float) -> np.ndarray:
    """
    Non-paralyzable dead-time filter.

    A tag is kept iff it arrives at least ``dead_time`` microseconds after the
    previously kept tag. ``tags`` must be sorted integer picoseconds.
    """
    tags = np.asarray(tags, dtype=np.int64)
    if tags.size > 1 and np.any(np.diff(tags) < 0):
        raise ValueError("tags must be sorted in non-decreasing order")
    dead = int(round(dead_time * PS_PER_US))
    if tags.size == 0:
        return tags.copy()
    return tags[_dead_time_mask(tags, dead)]


@dataclass(frozen=True)
class TagScenario:
    """
    Inputs for one time-tag acquisition.

    ``pair_rate`` is the internal pair rate [pairs/s] of the channel pair being
    measured. ``weights`` overrides the Franson (minus, central, plus) peak
    fractions; by default they follow from ``phase`` and ``visibility``.
    """

    pair_rate: float
    signal: DetectorParams = SIGNAL_APD
    idler: DetectorParams = IDLER_APD
    visibility: float = 1.0
    phase: float = 0.0
    delta_T: float = 350.0  # ps
    duration: float = 1.0  # s
    seed: int = 0
    weights: tuple[float, float, float] | None = None
    dead_time_enabled: bool = True

    def peak_weights(self) -> np.ndarray:
        if self.weights is None:
            w = np.asarray(histogram_weights(self.phase, self.visibility), dtype=float)
        else:
            w = np.asarray(self.weights, dtype=float)
        if w.shape != (3,) or np.any(w < 0):
            raise ValueError(f"invalid Franson weights {tuple(w)}: need three non-negative values")
        if w.sum() > PORT_PROBABILITY:
            raise ValueError("joint monitored-port probability cannot exceed the single-photon port probability")
        return w


def detected_rates(scenario: TagScenario) -> dict[str, float]:
    """Analytic Poisson rates [1/s] of each event class before dead time."""
    w = scenario.peak_weights()
    eta_s = scenario.signal.transmittance
    eta_i = scenario.idler.transmittance
    r = scenario.pair_rate
    both = w.sum()
    return {
        "coincidence": r * eta_s * eta_i * both,
        "signal_unpaired": r * eta_s * (PORT_PROBABILITY - eta_i * both),
        "idler_unpaired": r * eta_i * (PORT_PROBABILITY - eta_s * both),
        "signal_noise": scenario.signal.noise_rate,
        "idler_noise": scenario.idler.noise_rate,
        "signal_singles": r * eta_s * PORT_PROBABILITY + scenario.signal.noise_rate,
        "idler_singles": r * eta_i * PORT_PROBABILITY + scenario.idler.noise_rate,
    }


def _uniform_tags(rng, rate, span_ps):
    n = rng.poisson(rate * span_ps / PS_PER_S)
    return rng.integers(0, span_ps, n, dtype=np.int64)


def _jitter(rng, n, sigma):
    if sigma == 0:
        return np.zeros(n, dtype=np.int64)
    return np.rint(rng.normal(0.0, sigma, n)).astype(np.int64)


def generate_timetags(scenario: TagScenario) -> tuple[TimeTagStream, TimeTagStream]:
    """Draw signal and idler tag streams for one acquisition; deterministic per seed."""
    if not scenario.duration > 0:
        raise ValueError("duration must be > 0")
    if scenario.pair_rate < 0:
        raise ValueError("pair_rate must be >= 0")
    w = scenario.peak_weights()
    rates = detected_rates(scenario)
    span = int(round(scenario.duration * PS_PER_S))
    rng = np.random.default_rng(scenario.seed)

    t0 = _uniform_tags(rng, rates["coincidence"], span)
    if t0.size:
        peak = rng.choice(3, size=t0.size, p=w / w.sum())
    else:
        peak = np.zeros(0, dtype=np.int64)
    dt = int(round(scenario.delta_T))
    offsets = np.array([-dt, 0, dt], dtype=np.int64)[peak]
    sig_pair = t0 + _jitter(rng, t0.size, scenario.signal.jitter_sigma)
    idl_pair = t0 + offsets + _jitter(rng, t0.size, scenario.idler.jitter_sigma)

    sig_other = _uniform_tags(rng, rates["signal_unpaired"] + rates["signal_noise"], span)
    idl_other = _uniform_tags(rng, rates["idler_unpaired"] + rates["idler_noise"], span)

    streams = []
    for det, paired, other in ((scenario.signal, sig_pair, sig_other), (scenario.idler, idl_pair, idl_other)):
        tags = np.concatenate((paired, other))
        tags = tags[(tags >= 0) & (tags <= span)]
        tags.sort()
        if scenario.dead_time_enabled:
            tags = apply_dead_time(tags, det.dead_time)
        streams.append(TimeTagStream(det.label, tags, scenario.duration, scenario.seed))
    return streams[0], streams[1]


def derive_seed(master: int, *keys: int) -> int:
    """Per-task seed: first 63-bit word of SeedSequence(master, spawn_key=keys)."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# Binary tag file: header "<4sBdQ" (magic, version, duration s, seed), then
# packed little-endian records (label u1: 0 signal / 1 idler, timestamp_ps u8)
# in time order.
TAG_MAGIC = b"FTAG"
TAG_VERSION = 1
_HEADER = struct.Struct("<4sBdQ")
_RECORD = np.dtype([("label", "u1"), ("timestamp_ps", "<u8")])
_LABEL_CODES = {"signal": 0, "idler": 1}


def write_tag_file(path, streams: Sequence[TimeTagStream], seed: int = 0) -> None:
    duration = max(s.duration for s in streams)
    labels = np.concatenate([np.full(len(s), _LABEL_CODES[s.label], dtype=np.uint8) for s in streams])
    times = np.concatenate([s.tags for s in streams]).astype(np.uint64)
    order = np.lexsort((labels, times))
    rec = np.empty(times.size, dtype=_RECORD)
    rec["label"] = labels[order]
    rec["timestamp_ps"] = times[order]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TAG_MAGIC, TAG_VERSION, float(duration), int(seed)))
        fh.write(rec.tobytes())


def read_tag_file(path) -> tuple[dict[str, TimeTagStream], int]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("tag file truncated")
    magic, version, duration, seed = _HEADER.unpack_from(data)
    if magic != TAG_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != TAG_VERSION:
        raise ValueError(f"unsupported tag file version {version}")
    body = data[_HEADER.size:]
    if len(body) % _RECORD.itemsize:
        raise ValueError("tag file has a partial record")
    rec = np.frombuffer(body, dtype=_RECORD)
    out = {}
    for name, code in _LABEL_CODES.items():
        tags = rec["timestamp_ps"][rec["label"] == code].astype(np.int64)
        out[name] = TimeTagStream(name, tags, duration, seed)
    return out, seed
