"""
Fringe fitting, visibility extraction, Bell-threshold verdicts and peak crosstalk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf, ndtr

from .pairgen import ChannelPair

BELL_THRESHOLD = 1 / math.sqrt(2)


class FitError(ValueError):
    """The scan does not constrain a sinusoid."""


@dataclass(frozen=True)
class FringeScan:
    phases: np.ndarray  # rad
    counts: np.ndarray
    acquisition_time_per_point: float  # s
    channel_pair: ChannelPair | None = None

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        counts = np.asarray(self.counts)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "counts", counts)
        if phases.shape != counts.shape or phases.ndim != 1:
            raise ValueError("phases and counts must be 1-D arrays of equal length")
        if np.any(counts < 0):
            raise ValueError("counts must be >= 0")
        if not self.acquisition_time_per_point > 0:
            raise ValueError("acquisition_time_per_point must be > 0")


@dataclass(frozen=True)
class VisibilityResult:
    visibility: float
    sigma: float
    amplitude: float  # a * V, counts
    offset: float  # a, counts
    phase0: float
    kind: str = "raw"
    chi2: float = float("nan")
    n_points: int = 0

    def model(self, phases):
        return self.offset * (1 + self.visibility * np.cos(np.asarray(phases) + self.phase0))


def _check_scan(scan: FringeScan):
    distinct = np.unique(np.round(np.mod(scan.phases, 2 * math.pi), 12))
    n = scan.phases.size
    if distinct.size < 5:
        raise FitError(f"need at least 5 distinct phases, got {distinct.size}")
    span = scan.phases.max() - scan.phases.min()
    if span < 2 * math.pi * (n - 1) / n - 1e-9:
        raise FitError("phases must span one full period")


def _wls_sinusoid(phases, y, var, kind, data_var=None) -> VisibilityResult:
    """
    Weighted fit with weights 1/var. When the data variance differs from the
    weighting variance, ``data_var`` gives it and the sandwich covariance is used.
    """
    X = np.column_stack((np.ones_like(phases), np.cos(phases), np.sin(phases)))
    w = 1.0 / var
    A = X.T @ (X * w[:, None])
    try:
        bread = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise FitError("singular design matrix") from None
    c0, c1, c2 = bread @ (X.T @ (w * y))
    if data_var is None:
        cov = bread
    else:
        meat = X.T @ (X * (w * w * data_var)[:, None])
        cov = bread @ meat @ bread
    if not c0 > 0:
        raise FitError("fitted mean level is not positive")
    r = math.hypot(c1, c2)
    V = r / c0
    if r > 0:
        J = np.array([-r / c0**2, c1 / (r * c0), c2 / (r * c0)])
        sigma = math.sqrt(J @ cov @ J)
    else:
        sigma = math.sqrt(0.5 * (cov[1, 1] + cov[2, 2])) / c0
    resid = y - X @ np.array([c0, c1, c2])
    return VisibilityResult(
        visibility=float(V),
        sigma=float(sigma),
        amplitude=float(r),
        offset=float(c0),
        phase0=float(math.atan2(-c2, c1)),
        kind=kind,
        chi2=float(np.sum(w * resid**2)),
        n_points=int(phases.size),
    )


def fit_fringe(scan: FringeScan) -> VisibilityResult:
    """
    Poisson-weighted least-squares fit of counts = a (1 + V cos(phase + phase0)).

    The fit is solved exactly in the linear basis (1, cos, sin) with weights
    1/max(N, 1), so zero-count points keep a finite weight; V and its
    uncertainty follow from the covariance by the delta method.
    """
    _check_scan(scan)
    counts = scan.counts.astype(float)
    if np.all(counts == counts[0]) and counts.size < 5:
        raise FitError("degenerate scan")
    var = np.maximum(counts, 1.0)
    return _wls_sinusoid(scan.phases, counts, var, "raw")


def net_visibility(scan: FringeScan, accidental_rate: float) -> VisibilityResult:
    """
    Refit after removing ``accidental_rate`` [1/s] x acquisition time from
    every point (floored at zero).

    The point estimate reuses the raw-fit weights; sigma comes from the
    sandwich covariance with per-point variance counts + accidentals.
    """
    if accidental_rate < 0:
        raise ValueError("accidental_rate must be >= 0")
    _check_scan(scan)
    acc = accidental_rate * scan.acquisition_time_per_point
    if acc == 0:
        raw = fit_fringe(scan)
        return VisibilityResult(**{**raw.__dict__, "kind": "net"})
    counts = scan.counts.astype(float)
    net = np.maximum(0.0, counts - acc)
    # keep the raw-fit weights so the subtraction only lowers the fitted mean;
    # the uncertainty includes the variance of the subtracted estimate
    var = np.maximum(counts, 1.0)
    return _wls_sinusoid(scan.phases, net, var, "net", data_var=counts + acc)


def visibility_from_extremes(c_max: float, c_min: float) -> float:
    if c_min < 0 or c_max < c_min:
        raise ValueError("need c_max >= c_min >= 0")
    if c_max + c_min == 0:
        raise ValueError("visibility undefined when both extremes are zero")
    return (c_max - c_min) / (c_max + c_min)


@dataclass(frozen=True)
class BellVerdict:
    passed: bool
    significance: float
    threshold: float = BELL_THRESHOLD


def bell_verdict(result: VisibilityResult) -> BellVerdict:
    """Pass iff V > 1/sqrt(2); significance in units of the fit sigma."""
    if not result.sigma > 0:
        raise ValueError("sigma must be > 0")
    return BellVerdict(result.visibility > BELL_THRESHOLD, (result.visibility - BELL_THRESHOLD) / result.sigma)


def peak_masses(delta_T: float, coincidence_sigma: float, window: float) -> tuple[float, float]:
    """
    Fractions of the central Gaussian peak (Gc) and of one side peak at
    +-delta_T (Gs) falling inside a central window of full width ``window``.
    """
    h = 0.5 * window
    if coincidence_sigma == 0:
        gc = 1.0 if h > 0 else 0.0
        gs = 0.0 if h < delta_T else (0.5 if h == delta_T else 1.0)
        return gc, gs
    s = coincidence_sigma
    gc = float(erf(h / (s * math.sqrt(2))))
    gs = float(ndtr((h - delta_T) / s) - ndtr((-h - delta_T) / s))
    return gc, gs


def crosstalk_degradation(delta_T: float, coincidence_sigma: float, window: float, V: float) -> float:
    """
    Absolute visibility lost to side-peak leakage into the central window.

    With peak weights 1:2:1 (side, phase-averaged central, side) the two side
    tails add Gs/8 against a central signal of Gc/8, so the measured contrast
    is V Gc / (Gc + Gs).
    """
    if window > 2 * delta_T:
        raise ValueError("window must not exceed 2 * delta_T")
    if coincidence_sigma < 0 or window < 0:
        raise ValueError("sigma and window must be >= 0")
    gc, gs = peak_masses(delta_T, coincidence_sigma, window)
    if gc + gs == 0:
        return 0.0
    return V - V * gc / (gc + gs)


def sigma_for_crosstalk(delta_T: float, window: float, target: float, V: float = 1.0) -> float:
    """Coincidence sigma [ps] at which the crosstalk loss equals ``target``."""
    hi = 10 * delta_T
    f = lambda s: crosstalk_degradation(delta_T, s, window, V) - target
    if f(1e-9) > 0 or f(hi) < 0:
        raise ValueError("target degradation not bracketed")
    return brentq(f, 1e-9, hi, xtol=1e-9)


@dataclass(frozen=True)
class CrosstalkSearch:
    sigmas: np.ndarray  # coincidence sigma, ps
    windows: np.ndarray  # full window width, ps
    degradation: np.ndarray  # shape (len(sigmas), len(windows))
    target: float
    contour: list  # (window, sigma) pairs reproducing the target


def crosstalk_search(
    delta_T: float = 350.0,
    target: float = 0.003,
    sigmas=None,
    windows=None,
    V: float = 1.0,
) -> CrosstalkSearch:
    """Tabulate crosstalk loss over (sigma, window) and trace the target contour."""
    sigmas = np.linspace(0.0, 300.0, 61) if sigmas is None else np.asarray(sigmas, dtype=float)
    windows = np.linspace(50.0, 2 * delta_T, 14) if windows is None else np.asarray(windows, dtype=float)
    grid = np.array([[crosstalk_degradation(delta_T, s, w, V) for w in windows] for s in sigmas])
    contour = []
    for w in windows:
        try:
            contour.append((float(w), float(sigma_for_crosstalk(delta_T, w, target, V))))
        except ValueError:
            continue
    return CrosstalkSearch(sigmas, windows, grid, target, contour)
