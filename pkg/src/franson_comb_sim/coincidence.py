"""
Start-stop-free cross-correlation of signal/idler tag streams.

Bins are centred on integer multiples of ``bin_width`` with a bin centred on
zero delay. A delay lying exactly on a bin edge is rounded away from zero, so
swapping the two streams mirrors the histogram exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .detection import TimeTagStream


@dataclass(frozen=True)
class CoincidenceHistogram:
    bin_width: int  # ps
    half_bins: int  # bins on either side of the zero-delay bin
    counts: np.ndarray
    total_pairs_examined: int
    acquisition_time: float  # s

    @property
    def half_range(self) -> float:
        """T such that the histogram covers delays in (-T, T) ps."""
        return (self.half_bins + 0.5) * self.bin_width

    @property
    def bin_centers(self) -> np.ndarray:
        return np.arange(-self.half_bins, self.half_bins + 1) * self.bin_width

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class WindowCounts:
    center: float  # ps
    width: float  # ps
    counts: int
    accidentals_estimate: float = 0.0


@nb.njit(cache=True)
def _correlate(signal, idler, bin_width, half_bins):
    nbins = 2 * half_bins + 1
    counts = np.zeros(nbins, dtype=np.int64)
    limit2 = (2 * half_bins + 1) * bin_width  # |dt| < T  <=>  2|dt| < limit2
    lo = 0
    ns = signal.shape[0]
    for k in range(idler.shape[0]):
        ti = idler[k]
        while lo < ns and 2 * (ti - signal[lo]) >= limit2:
            lo += 1
        j = lo
        while j < ns:
            d = ti - signal[j]
            if -2 * d >= limit2:
                break
            a = d if d >= 0 else -d
            b = (2 * a + bin_width) // (2 * bin_width)
            if d < 0:
                b = -b
            counts[b + half_bins] += 1
            j += 1
    return counts


def _as_tags(stream) -> np.ndarray:
    tags = stream.tags if isinstance(stream, TimeTagStream) else stream
    tags = np.ascontiguousarray(tags, dtype=np.int64)
    if tags.size > 1 and np.any(np.diff(tags) < 0):
        raise ValueError("tag streams must be sorted")
    return tags


def build_histogram(signal, idler, bin_width: int = 10, half_range: float = 1000.0) -> CoincidenceHistogram:
    """
    Histogram of delays idler - signal over every tag pair with |delay| < T.

    ``half_range`` is snapped down to a whole number of bins plus half a bin:
    T = (floor(half_range / bin_width) + 1/2) * bin_width.
    """
    bin_width = int(bin_width)
    if bin_width <= 0:
        raise ValueError("bin_width must be a positive integer number of ps")
    half_bins = int(half_range // bin_width)
    if half_bins < 0:
        raise ValueError("half_range must be >= 0")
    s, i = _as_tags(signal), _as_tags(idler)
    counts = _correlate(s, i, np.int64(bin_width), np.int64(half_bins))
    duration = next((x.duration for x in (signal, idler) if isinstance(x, TimeTagStream)), float("nan"))
    return CoincidenceHistogram(bin_width, half_bins, counts, int(counts.sum()), duration)


def window_count(hist: CoincidenceHistogram, center: float = 0.0, width: float = 350.0) -> WindowCounts:
    """Sum of bins whose centres lie in [center - width/2, center + width/2]."""
    if not width > 0:
        raise ValueError("window width must be > 0")
    lo, hi = center - width / 2, center + width / 2
    if lo < -hist.half_range or hi > hist.half_range:
        raise ValueError(f"window [{lo:g}, {hi:g}] ps exceeds histogram range +-{hist.half_range:g} ps")
    c = hist.bin_centers
    sel = (c >= lo) & (c <= hi)
    return WindowCounts(center, width, int(hist.counts[sel].sum()))


def window_span(hist: CoincidenceHistogram, center: float, width: float) -> float:
    """Delay span [ps] actually covered by the bins a window selects."""
    c = hist.bin_centers
    return float(np.count_nonzero((c >= center - width / 2) & (c <= center + width / 2)) * hist.bin_width)


def accidental_rate(rate_s: float, rate_i: float, window: float) -> float:
    """Uncorrelated coincidence rate [1/s] for singles rates [1/s] and a window [ps]."""
    if rate_s < 0 or rate_i < 0 or window < 0:
        raise ValueError("rates and window must be >= 0")
    return rate_s * rate_i * window * 1e-12


def net_counts(raw: WindowCounts, accidentals: float) -> tuple[float, float]:
    """Accidental-subtracted counts (floored at 0) and their uncertainty."""
    if accidentals < 0:
        raise ValueError("accidentals must be >= 0")
    return max(0.0, raw.counts - accidentals), math.sqrt(raw.counts + accidentals)
