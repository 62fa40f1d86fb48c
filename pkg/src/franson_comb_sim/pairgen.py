"""Phenomenological SFWM pair source: quadratic rate law and channel-pair allocation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Default channel offsets about the pump (ITU 48/52, 45/55, 43/57, 41/59).
DEFAULT_OFFSETS = (2, 5, 7, 9)
DEFAULT_PUMP_CHANNEL = 50


@dataclass(frozen=True)
class ChannelPair:
    """Energy-conserving signal/idler channel pair on the ITU grid."""

    signal_channel: int
    idler_channel: int
    pump_channel: int = DEFAULT_PUMP_CHANNEL

    def __post_init__(self):
        if self.signal_channel == self.idler_channel:
            raise ValueError("degenerate pair: signal and idler share a channel")
        if self.signal_channel + self.idler_channel != 2 * self.pump_channel:
            raise ValueError(
                f"channels {self.signal_channel}/{self.idler_channel} are not symmetric "
                f"about pump channel {self.pump_channel}"
            )

    @property
    def offset(self) -> int:
        return self.signal_channel - self.pump_channel

    @property
    def label(self) -> str:
        return f"{min(self.signal_channel, self.idler_channel)}_{max(self.signal_channel, self.idler_channel)}"

    def __str__(self):
        return f"{self.idler_channel}/{self.signal_channel}"


def make_channel_pair(pump: int, offset: int) -> ChannelPair:
    """Signal at ``pump + offset``, idler at ``pump - offset``."""
    if offset == 0:
        raise ValueError("offset 0 gives a degenerate pair")
    return ChannelPair(pump + offset, pump - offset, pump)


def _default_pairs():
    return tuple(make_channel_pair(DEFAULT_PUMP_CHANNEL, k) for k in DEFAULT_OFFSETS)


@dataclass(frozen=True)
class PairSourceModel:
    """
    Quadratic pair-rate law calibrated at a single point, plus the split of
    the total internal rate across the active channel pairs.

    ``calib_rate`` is treated as the total internal rate summed over all
    active pairs. ``per_pair_weights`` defaults to a flat split.
    """

    calib_power: float = 500.0  # uW
    calib_rate: float = 2.0e6  # pairs/s
    pump_channel: int = DEFAULT_PUMP_CHANNEL
    active_pairs: tuple[ChannelPair, ...] = field(default_factory=_default_pairs)
    per_pair_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.calib_power > 0 or not self.calib_rate > 0:
            raise ValueError("calibration power and rate must be > 0")
        pairs = tuple(self.active_pairs)
        object.__setattr__(self, "active_pairs", pairs)
        if not pairs:
            raise ValueError("at least one active pair is required")
        for p in pairs:
            if p.pump_channel != self.pump_channel:
                raise ValueError(f"pair {p} does not share pump channel {self.pump_channel}")
        if self.per_pair_weights is None:
            w = np.full(len(pairs), 1.0 / len(pairs))
        else:
            w = np.asarray(self.per_pair_weights, dtype=float)
            if w.shape != (len(pairs),):
                raise ValueError("one weight per active pair is required")
            if np.any(w < 0) or not w.sum() > 0:
                raise ValueError("weights must be non-negative with a positive sum")
            w = w / w.sum()
        object.__setattr__(self, "per_pair_weights", tuple(float(x) for x in w))

    @property
    def rate_coefficient(self) -> float:
        """k in pairs/s/uW^2."""
        return self.calib_rate / self.calib_power**2

    @property
    def rate_coefficient_si(self) -> float:
        """k in pairs/s/W^2."""
        return self.rate_coefficient * 1e12

    def weight(self, pair: ChannelPair) -> float:
        try:
            i = self.active_pairs.index(pair)
        except ValueError:
            raise KeyError(f"channel pair {pair} is not active in this source") from None
        return self.per_pair_weights[i]


def pair_rate(power, model: PairSourceModel):
    """Total internal pair rate [pairs/s] at coupled pump ``power`` [uW]."""
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ValueError("pump power must be >= 0")
    r = model.rate_coefficient * p**2
    return float(r) if r.ndim == 0 else r


def per_pair_rate(model: PairSourceModel, pair: ChannelPair, power):
    return pair_rate(power, model) * model.weight(pair)


def spectral_brightness(rate: float, linewidth: float) -> float:
    """Pairs/s/MHz for ``rate`` pairs/s spread over ``linewidth`` GHz."""
    if not linewidth > 0:
        raise ValueError("linewidth must be > 0")
    return rate / (linewidth * 1e3)


def mean_pairs_per_window(rate: float, window_ps: float) -> float:
    """Mean pair number per coherence window, mu = rate * tau."""
    return rate * window_ps * 1e-12
