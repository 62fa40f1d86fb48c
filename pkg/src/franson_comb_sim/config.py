"""
Scenario configuration files.

Grammar, one entry per line::

    # comment
    section.sub.key = v1[, v2, ...] [unit]

Blank lines and ``#`` comments are ignored; a key may appear once. Values of
dimensional keys must carry a unit suffix (``500 uW``, ``350 ps``,
``250 /s``); a bare number is rejected. Dimensionless keys (Q factor,
visibilities, counts, channel numbers) take no unit. Entries override the
selected preset field by field.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .detection import DetectorParams
from .experiment import Scenario
from .pairgen import make_channel_pair
from .resonator import group_index_for_fsr


class ConfigError(ValueError):
    pass


# dimension -> {unit: factor to the canonical unit}
UNITS: dict[str, dict[str, float]] = {
    "length_um": {"um": 1.0, "µm": 1.0, "nm": 1e-3, "mm": 1e3},
    "freq_THz": {"THz": 1.0, "GHz": 1e-3},
    "freq_GHz": {"GHz": 1.0, "MHz": 1e-3, "THz": 1e3},
    "power_uW": {"uW": 1.0, "µW": 1.0, "nW": 1e-3, "mW": 1e3, "W": 1e6},
    "time_ps": {"ps": 1.0, "fs": 1e-3, "ns": 1e3, "us": 1e6, "µs": 1e6},
    "time_ns": {"ns": 1.0, "ps": 1e-3, "us": 1e3, "µs": 1e3},
    "time_us": {"us": 1.0, "µs": 1.0, "ns": 1e-3, "ms": 1e3},
    "time_s": {"s": 1.0, "ms": 1e-3, "min": 60.0, "h": 3600.0},
    "rate": {"/s": 1.0, "Hz": 1.0, "cps": 1.0, "kHz": 1e3, "MHz": 1e6},
    "freq_Hz": {"Hz": 1.0, "kHz": 1e3},
    "dB": {"dB": 1.0},
    "kelvin": {"K": 1.0, "mK": 1e-3},
    "GHz_per_K": {"GHz/K": 1.0, "MHz/K": 1e-3},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180},
    "drift": {"rad/sqrt(s)": 1.0, "rad/√s": 1.0},
}


@dataclass(frozen=True)
class KeySpec:
    dim: str | None  # None: dimensionless number; "int", "word", "bool" for non-numeric kinds
    count: int | None = 1  # None: any number of values


def _detector_keys(arm):
    p = f"detector.{arm}."
    return {
        p + "arm_loss": KeySpec("dB"),
        p + "dark_rate": KeySpec("rate"),
        p + "dead_time": KeySpec("time_us"),
        p + "jitter": KeySpec("time_ps"),
        p + "background_rate": KeySpec("rate"),
        p + "efficiency": KeySpec(None),
    }


SCHEMA: dict[str, KeySpec] = {
    "seed": KeySpec("int"),
    "resonator.radius": KeySpec("length_um"),
    "resonator.group_index": KeySpec(None),
    "resonator.fsr": KeySpec("freq_GHz"),
    "resonator.q_factor": KeySpec(None),
    "resonator.extinction": KeySpec("dB"),
    "resonator.dispersion_d2": KeySpec("freq_GHz"),
    "resonator.pump_frequency": KeySpec("freq_THz"),
    "resonator.temperature_offset": KeySpec("kelvin"),
    "resonator.thermal_coeff": KeySpec("GHz_per_K"),
    "resonator.modes": KeySpec("int", 2),
    "grid.passband_halfwidth": KeySpec("freq_GHz"),
    "source.calib_power": KeySpec("power_uW"),
    "source.calib_rate": KeySpec("rate"),
    "source.pump_channel": KeySpec("int"),
    "source.pair_offsets": KeySpec("int", None),
    "source.weights": KeySpec(None, None),
    "source.pump_power": KeySpec("power_uW"),
    "interferometer.delta_T": KeySpec("time_ps"),
    "interferometer.visibility": KeySpec(None, None),
    "interferometer.phase_setpoint": KeySpec("angle"),
    "interferometer.residual_phase_rms": KeySpec("angle"),
    "interferometer.loop_bandwidth": KeySpec("freq_Hz"),
    "interferometer.pump_coherence": KeySpec("time_ns"),
    "interferometer.multipair": KeySpec("bool"),
    **_detector_keys("signal"),
    **_detector_keys("idler"),
    "scan.points": KeySpec("int"),
    "scan.acquisition": KeySpec("time_s"),
    "analysis.bin_width": KeySpec("time_ps"),
    "analysis.hist_range": KeySpec("time_ps"),
    "analysis.window": KeySpec("time_ps"),
    "analysis.accidentals": KeySpec("word"),
    "spectrum.span": KeySpec("freq_THz", 2),
    "spectrum.points": KeySpec("int"),
    "rates.powers": KeySpec("power_uW", None),
    "rates.duration": KeySpec("time_s"),
    "stabilization.drift_rate": KeySpec("drift"),
    "stabilization.duration": KeySpec("time_s"),
    "stabilization.step": KeySpec("time_s"),
}

_NUMBER = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def _parse_value(key: str, raw: str, spec: KeySpec, lineno: int):
    where = f"line {lineno}: {key}"
    if spec.dim == "word":
        word = raw.strip()
        if not re.fullmatch(r"[A-Za-z_][\w-]*", word):
            raise ConfigError(f"{where}: expected a single word, got {raw!r}")
        return word
    if spec.dim == "bool":
        low = raw.strip().lower()
        if low not in ("true", "false", "yes", "no", "on", "off", "1", "0"):
            raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
        return low in ("true", "yes", "on", "1")
    tokens = raw.replace(",", " ").split()
    nums = []
    while tokens and _NUMBER.match(tokens[0]):
        nums.append(float(tokens.pop(0)))
    unit = " ".join(tokens)
    if not nums:
        raise ConfigError(f"{where}: no numeric value in {raw!r}")
    if spec.count is not None and len(nums) != spec.count:
        raise ConfigError(f"{where}: expected {spec.count} value(s), got {len(nums)}")
    if spec.dim in (None, "int"):
        if unit:
            raise ConfigError(f"{where}: dimensionless key takes no unit, got {unit!r}")
        if spec.dim == "int":
            if any(x != int(x) for x in nums):
                raise ConfigError(f"{where}: expected integer value(s)")
            nums = [int(x) for x in nums]
    else:
        table = UNITS[spec.dim]
        if not unit:
            raise ConfigError(f"{where}: unit suffix required (one of {', '.join(table)})")
        if unit not in table:
            raise ConfigError(f"{where}: unit {unit!r} not valid here (one of {', '.join(table)})")
        nums = [x * table[unit] for x in nums]
    return nums[0] if spec.count == 1 else tuple(nums)


def parse_config(text: str) -> dict:
    """Parse config text into ``{key: canonical value}``."""
    entries: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value [unit]'")
        key, raw = (s.strip() for s in line.split("=", 1))
        spec = SCHEMA.get(key)
        if spec is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = _parse_value(key, raw, spec, lineno)
    return entries


def load_config(path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _take(entries, mapping):
    return {field: entries[key] for key, field in mapping.items() if key in entries}


def apply_config(base: Scenario, entries: dict) -> Scenario:
    """Return ``base`` with every configured field replaced."""
    try:
        return _apply(base, entries)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _apply(base: Scenario, entries: dict) -> Scenario:
    res_kw = _take(entries, {
        "resonator.radius": "radius",
        "resonator.group_index": "group_index",
        "resonator.q_factor": "q_factor",
        "resonator.extinction": "extinction_dB",
        "resonator.dispersion_d2": "dispersion_d2",
        "resonator.pump_frequency": "pump_resonance_freq",
        "resonator.temperature_offset": "temperature_offset",
        "resonator.thermal_coeff": "thermal_coeff",
    })
    if "resonator.fsr" in entries:
        if "resonator.group_index" in entries:
            raise ConfigError("resonator.fsr and resonator.group_index are mutually exclusive")
        radius = res_kw.get("radius", base.resonator.radius)
        res_kw["group_index"] = group_index_for_fsr(entries["resonator.fsr"], radius)
    resonator = replace(base.resonator, **res_kw) if res_kw else base.resonator

    grid = base.grid
    if "grid.passband_halfwidth" in entries:
        grid = replace(grid, passband_halfwidth=entries["grid.passband_halfwidth"])

    source = base.source
    src_kw = _take(entries, {"source.calib_power": "calib_power", "source.calib_rate": "calib_rate",
                             "source.pump_channel": "pump_channel"})
    pump = src_kw.get("pump_channel", source.pump_channel)
    if "source.pair_offsets" in entries or "pump_channel" in src_kw:
        offsets = entries.get("source.pair_offsets", tuple(p.offset for p in source.active_pairs))
        src_kw["active_pairs"] = tuple(make_channel_pair(pump, int(k)) for k in offsets)
        src_kw["per_pair_weights"] = None
    if "source.weights" in entries:
        src_kw["per_pair_weights"] = tuple(entries["source.weights"])
    if src_kw:
        source = replace(source, **src_kw)

    ifm_kw = _take(entries, {"interferometer.delta_T": "delta_T",
                             "interferometer.phase_setpoint": "phase_setpoint",
                             "interferometer.residual_phase_rms": "residual_phase_rms",
                             "interferometer.loop_bandwidth": "loop_bandwidth"})
    interferometer = replace(base.interferometer, **ifm_kw) if ifm_kw else base.interferometer

    detectors = {}
    for arm in ("signal", "idler"):
        p = f"detector.{arm}."
        kw = _take(entries, {p + "arm_loss": "arm_loss_dB", p + "dark_rate": "dark_rate",
                             p + "dead_time": "dead_time", p + "jitter": "jitter_sigma",
                             p + "background_rate": "background_rate", p + "efficiency": "efficiency"})
        det: DetectorParams = getattr(base, arm)
        detectors[arm] = replace(det, **kw) if kw else det

    scen_kw = _take(entries, {
        "seed": "seed",
        "source.pump_power": "pump_power",
        "interferometer.pump_coherence": "pump_coherence",
        "interferometer.multipair": "multipair",
        "scan.points": "n_phases",
        "scan.acquisition": "acquisition",
        "analysis.hist_range": "hist_half_range",
        "analysis.window": "window",
        "analysis.accidentals": "accidentals",
        "spectrum.points": "spectrum_points",
        "rates.duration": "rates_duration",
        "stabilization.drift_rate": "drift_rate",
        "stabilization.duration": "stabilization_duration",
        "stabilization.step": "loop_step",
    })
    if "analysis.bin_width" in entries:
        bw = entries["analysis.bin_width"]
        if bw != int(bw):
            raise ConfigError("analysis.bin_width must be a whole number of ps")
        scen_kw["bin_width"] = int(bw)
    if "resonator.modes" in entries:
        scen_kw["mode_range"] = tuple(entries["resonator.modes"])
    if "spectrum.span" in entries:
        lo, hi = entries["spectrum.span"]
        if not lo < hi:
            raise ConfigError("spectrum.span must be increasing")
        scen_kw["spectrum_span"] = (lo, hi)
    if "rates.powers" in entries:
        scen_kw["powers"] = tuple(entries["rates.powers"])
    if "interferometer.visibility" in entries:
        scen_kw["visibilities"] = tuple(entries["interferometer.visibility"])
    elif source is not base.source and base.visibilities is not None \
            and len(base.visibilities) != len(source.active_pairs):
        scen_kw["visibilities"] = None
    return replace(base, resonator=resonator, grid=grid, source=source, interferometer=interferometer,
                   signal=detectors["signal"], idler=detectors["idler"], **scen_kw)


def format_scenario(s: Scenario) -> str:
    """Render a scenario back into config syntax (round-trips through parse_config)."""
    def nums(values):
        return ", ".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in values)

    lines = [
        "# franson-comb-sim v1",
        f"seed = {s.seed}",
        f"resonator.radius = {s.resonator.radius!r} um",
        f"resonator.group_index = {s.resonator.group_index!r}",
        f"resonator.q_factor = {s.resonator.q_factor!r}",
        f"resonator.extinction = {s.resonator.extinction_dB!r} dB",
        f"resonator.dispersion_d2 = {s.resonator.dispersion_d2!r} GHz",
        f"resonator.pump_frequency = {s.resonator.pump_resonance_freq!r} THz",
        f"resonator.temperature_offset = {s.resonator.temperature_offset!r} K",
        f"resonator.thermal_coeff = {s.resonator.thermal_coeff!r} GHz/K",
        f"resonator.modes = {s.mode_range[0]}, {s.mode_range[1]}",
        f"grid.passband_halfwidth = {s.grid.passband_halfwidth!r} GHz",
        f"source.calib_power = {s.source.calib_power!r} uW",
        f"source.calib_rate = {s.source.calib_rate!r} /s",
        f"source.pump_channel = {s.source.pump_channel}",
        f"source.pair_offsets = {nums([p.offset for p in s.pairs])}",
        f"source.weights = {nums(s.source.per_pair_weights)}",
        f"source.pump_power = {s.pump_power!r} uW",
        f"interferometer.delta_T = {s.interferometer.delta_T!r} ps",
        f"interferometer.visibility = {nums(s.visibilities or (s.interferometer.intrinsic_visibility,))}",
        f"interferometer.phase_setpoint = {s.interferometer.phase_setpoint!r} rad",
        f"interferometer.residual_phase_rms = {s.interferometer.residual_phase_rms!r} rad",
        f"interferometer.loop_bandwidth = {s.interferometer.loop_bandwidth!r} Hz",
        f"interferometer.pump_coherence = {s.pump_coherence!r} ns",
        f"interferometer.multipair = {str(s.multipair).lower()}",
    ]
    for arm in ("signal", "idler"):
        d: DetectorParams = getattr(s, arm)
        lines += [
            f"detector.{arm}.arm_loss = {d.arm_loss_dB!r} dB",
            f"detector.{arm}.dark_rate = {d.dark_rate!r} /s",
            f"detector.{arm}.dead_time = {d.dead_time!r} us",
            f"detector.{arm}.jitter = {d.jitter_sigma!r} ps",
            f"detector.{arm}.background_rate = {d.background_rate!r} /s",
        ]
        if d.efficiency is not None:
            lines.append(f"detector.{arm}.efficiency = {d.efficiency!r}")
    lines += [
        f"scan.points = {s.n_phases}",
        f"scan.acquisition = {s.acquisition!r} s",
        f"analysis.bin_width = {s.bin_width} ps",
        f"analysis.hist_range = {s.hist_half_range!r} ps",
        f"analysis.accidentals = {s.accidentals}",
        f"spectrum.points = {s.spectrum_points}",
        f"rates.powers = {nums(s.powers)} uW",
        f"rates.duration = {s.rates_duration!r} s",
        f"stabilization.drift_rate = {s.drift_rate!r} rad/sqrt(s)",
        f"stabilization.duration = {s.stabilization_duration!r} s",
        f"stabilization.step = {s.loop_step!r} s",
    ]
    if s.window is not None:
        lines.append(f"analysis.window = {s.window!r} ps")
    if s.spectrum_span is not None:
        lines.append(f"spectrum.span = {s.spectrum_span[0]!r}, {s.spectrum_span[1]!r} THz")
    return "\n".join(lines) + "\n"

