"""
Micro-ring resonance comb, ITU-grid mapping and thermo-optic tuning.

Frequencies are carried in THz for absolute positions and in GHz for
spacings, linewidths and shifts. The ring radius is in micrometres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

C_M_S = 299_792_458.0

ITU_BASE_THZ = 190.0
ITU_SPACING_THZ = 0.1
ITU_MIN_CHANNEL = 0
ITU_MAX_CHANNEL = 100

# Minimax FSR over [220, 240] GHz placing lines +-1..+-4 on channel offsets
# 2, 5, 7, 9 (see search_fsr). Frozen to 0.01 GHz.
DEFAULT_FSR_GHZ = 233.33
DEFAULT_RADIUS_UM = 60.0
DEFAULT_PASSBAND_HALFWIDTH_GHZ = 40.0

# Assignment tolerance; absorbs float rounding of exact grid offsets.
_ASSIGN_TOL_GHZ = 1e-6


def group_index_for_fsr(fsr_ghz: float, radius_um: float) -> float:
    """Group index giving ``fsr_ghz`` for a ring of ``radius_um``."""
    if fsr_ghz <= 0 or radius_um <= 0:
        raise ValueError("fsr and radius must be positive")
    return C_M_S / (fsr_ghz * 1e9 * 2 * math.pi * radius_um * 1e-6)


DEFAULT_GROUP_INDEX = group_index_for_fsr(DEFAULT_FSR_GHZ, DEFAULT_RADIUS_UM)


@dataclass(frozen=True)
class ResonatorParams:
    """
    Ring resonator description.

    Parameters
    ----------
    radius : float
        Ring radius [um].
    group_index : float
        Group index, in (1, 5].
    q_factor : float
        Loaded quality factor; sets every linewidth as nu / Q.
    extinction_dB : float
        Depth of each transmission dip [dB].
    dispersion_d2 : float
        Quadratic comb term [GHz per mode index squared].
    pump_resonance_freq : float
        Cold-cavity frequency of mode 0 [THz].
    temperature_offset : float
        Chip temperature relative to the reference [K].
    thermal_coeff : float
        Magnitude of the thermo-optic shift [GHz/K].
    """

    radius: float = DEFAULT_RADIUS_UM
    group_index: float = DEFAULT_GROUP_INDEX
    q_factor: float = 40_000.0
    extinction_dB: float = 15.0
    dispersion_d2: float = 0.0
    pump_resonance_freq: float = 195.0
    temperature_offset: float = 0.0
    thermal_coeff: float = 10.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if not 1.0 < self.group_index <= 5.0:
            raise ValueError(f"group_index must lie in (1, 5], got {self.group_index}")
        if not self.q_factor > 0:
            raise ValueError(f"q_factor must be > 0, got {self.q_factor}")
        if not self.extinction_dB >= 0:
            raise ValueError(f"extinction_dB must be >= 0, got {self.extinction_dB}")
        if not self.pump_resonance_freq > 0:
            raise ValueError("pump_resonance_freq must be > 0")

    @classmethod
    def from_fsr(cls, fsr_ghz: float = DEFAULT_FSR_GHZ, radius: float = DEFAULT_RADIUS_UM, **kwargs) -> "ResonatorParams":
        return cls(radius=radius, group_index=group_index_for_fsr(fsr_ghz, radius), **kwargs)

    @property
    def fsr(self) -> float:
        """Free spectral range [GHz]."""
        return C_M_S / (self.group_index * 2 * math.pi * self.radius * 1e-6) / 1e9

    @property
    def pump_linewidth(self) -> float:
        """Linewidth of the (thermally shifted) pump resonance [GHz]."""
        return self.line_freq(0) * 1e3 / self.q_factor

    @property
    def min_transmission(self) -> float:
        return 10 ** (-self.extinction_dB / 10)

    def line_freq(self, m):
        """Centre frequency [THz] of mode ``m`` (scalar or array)."""
        m = np.asarray(m, dtype=float)
        shift_ghz = thermal_shift(self.temperature_offset, self.thermal_coeff)
        offset_ghz = m * self.fsr + 0.5 * self.dispersion_d2 * m**2 + shift_ghz
        out = self.pump_resonance_freq + offset_ghz / 1e3
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CombLine:
    mode_index: int
    center_freq: float  # THz
    linewidth: float  # GHz
    extinction_dB: float


@dataclass(frozen=True)
class ItuGrid:
    """100 GHz DWDM grid; channel n sits at base_freq + n * spacing."""

    base_freq: float = ITU_BASE_THZ
    spacing: float = ITU_SPACING_THZ
    passband_halfwidth: float = DEFAULT_PASSBAND_HALFWIDTH_GHZ  # GHz

    def __post_init__(self):
        if not 0 < self.passband_halfwidth <= 0.5 * self.spacing * 1e3:
            raise ValueError(
                f"passband_halfwidth must lie in (0, {0.5 * self.spacing * 1e3:g}] GHz, "
                f"got {self.passband_halfwidth}"
            )

    def center(self, channel: int) -> float:
        return self.base_freq + channel * self.spacing

    def shifted(self, delta_thz: float) -> "ItuGrid":
        return replace(self, base_freq=self.base_freq + delta_thz)


def itu_channel_center_ghz(channel: int) -> int:
    """Exact integer channel centre in GHz."""
    if not isinstance(channel, (int, np.integer)) or isinstance(channel, bool):
        raise TypeError("channel must be an integer")
    if not ITU_MIN_CHANNEL <= channel <= ITU_MAX_CHANNEL:
        raise ValueError(f"ITU channel {channel} outside [{ITU_MIN_CHANNEL}, {ITU_MAX_CHANNEL}]")
    return 190_000 + 100 * int(channel)


def itu_channel_center(channel: int) -> float:
    """Centre frequency [THz] of ITU channel ``channel``."""
    return itu_channel_center_ghz(channel) / 1e3


def frequency_to_wavelength_nm(freq_thz):
    return C_M_S / (np.asarray(freq_thz, dtype=float) * 1e12) * 1e9


def wavelength_to_frequency_thz(wavelength_nm):
    return C_M_S / (np.asarray(wavelength_nm, dtype=float) * 1e-9) / 1e12


def itu_channel_wavelength(channel: int) -> float:
    """Vacuum wavelength [nm] of ITU channel ``channel``."""
    return float(frequency_to_wavelength_nm(itu_channel_center(channel)))


def thermal_shift(delta_T: float, coeff: float) -> float:
    """Resonance shift [GHz] for a temperature change; heating red-shifts."""
    return -coeff * delta_T


def _mode_indices(mode_range) -> np.ndarray:
    if isinstance(mode_range, range):
        modes = np.asarray(mode_range, dtype=int)
    else:
        lo, hi = mode_range
        modes = np.arange(int(lo), int(hi) + 1)
    if modes.size == 0 or not (modes.min() <= 0 <= modes.max()):
        raise ValueError("mode_range must be non-empty and contain mode 0")
    return modes


def comb_spectrum(params: ResonatorParams, mode_range=(-10, 10)) -> list[CombLine]:
    """
    Resonance lines for the requested mode indices.

    ``mode_range`` is either a ``range`` or an inclusive ``(lo, hi)`` pair.
    """
    if not params.fsr > 0:
        raise ValueError("free spectral range must be positive")
    modes = _mode_indices(mode_range)
    freqs = params.line_freq(modes)
    return [
        CombLine(int(m), float(f), float(f) * 1e3 / params.q_factor, params.extinction_dB)
        for m, f in zip(modes, np.atleast_1d(freqs))
    ]


def transmission(params: ResonatorParams, freq):
    """
    Through-port power transmission at ``freq`` [THz].

    Each point sees the Lorentzian dip of its nearest resonance only.
    """
    freq = np.asarray(freq, dtype=float)
    shift = thermal_shift(params.temperature_offset, params.thermal_coeff)
    offset_ghz = (freq - params.pump_resonance_freq) * 1e3 - shift
    m0 = np.rint(offset_ghz / params.fsr)
    # dispersion can move the nearest line one index away from the uniform guess
    candidates = np.stack([np.asarray(params.line_freq(m0 + dm)) for dm in (-1, 0, 1)])
    nearest = np.argmin(np.abs(candidates - freq), axis=0)
    best_nu = np.take_along_axis(candidates, nearest[None, ...], axis=0)[0]
    linewidth_thz = best_nu / params.q_factor
    depth = 1.0 - params.min_transmission
    t = 1.0 - depth / (1.0 + (2.0 * (freq - best_nu) / linewidth_thz) ** 2)
    t = np.clip(t, 0.0, 1.0)
    return float(t) if t.ndim == 0 else t


def assign_channels(comb: Sequence[CombLine], grid: ItuGrid) -> dict[int, int | None]:
    """Map each line's mode index to the ITU channel whose passband holds it."""
    out: dict[int, int | None] = {}
    hw = grid.passband_halfwidth
    for line in comb:
        n = int(round((line.center_freq - grid.base_freq) / grid.spacing))
        miss_ghz = abs(line.center_freq - grid.center(n)) * 1e3
        if ITU_MIN_CHANNEL <= n <= ITU_MAX_CHANNEL and miss_ghz <= hw + _ASSIGN_TOL_GHZ:
            out[line.mode_index] = n
        else:
            out[line.mode_index] = None
    return out


def symmetric_pairs(assignment: dict[int, int | None], pump_channel: int = 50) -> list[tuple[int, int]]:
    """(signal, idler) channels for mode pairs +m/-m that both land on the grid
    symmetrically about ``pump_channel``."""
    pairs = []
    for m, ch in sorted(assignment.items()):
        if m <= 0 or ch is None:
            continue
        partner = assignment.get(-m)
        if partner is not None and ch + partner == 2 * pump_channel:
            pairs.append((ch, partner))
    return pairs


def coherence_time(linewidth: float) -> float:
    """Single-photon coherence time [ps] of a Lorentzian line of FWHM ``linewidth`` [GHz]."""
    if not linewidth > 0:
        raise ValueError("linewidth must be > 0")
    return 1e3 / (math.pi * linewidth)


def search_fsr(
    channel_offsets: Iterable[int] = (2, 5, 7, 9),
    fsr_bounds: tuple[float, float] = (220.0, 240.0),
    step: float = 0.01,
    spacing_ghz: float = 100.0,
) -> tuple[float, float]:
    """
    Grid search for the FSR that places comb line k (k = 1, 2, ...) closest to
    the k-th requested channel offset.

    Returns ``(fsr_ghz, worst_miss_ghz)`` minimising the worst-case distance
    between a line and its target channel centre.
    """
    targets = np.asarray(sorted(channel_offsets), dtype=float) * spacing_ghz
    k = np.arange(1, targets.size + 1, dtype=float)
    fsr = np.arange(fsr_bounds[0], fsr_bounds[1] + 0.5 * step, step)
    miss = np.abs(fsr[:, None] * k[None, :] - targets[None, :]).max(axis=1)
    i = int(np.argmin(miss))
    return round(float(fsr[i]), 9), round(float(miss[i]), 9)
