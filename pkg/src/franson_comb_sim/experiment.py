"""
End-to-end scenarios: the apparatus parameter set, the ``paper-4pairs``
preset, and the spectrum / rates / fringe / histogram pipelines.

Per-task seeds come from :func:`detection.derive_seed` with spawn keys
``(pair_index, phase_index)`` for fringe points, ``(pair_index, 10000 + k)``
for the k-th requested histogram phase and ``(20000, power_index)`` for the
rate sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis, coincidence, detection, franson, pairgen, resonator
from .analysis import FringeScan, VisibilityResult
from .coincidence import CoincidenceHistogram
from .detection import DetectorParams, TagScenario
from .franson import InterferometerParams, TimingBudget
from .pairgen import ChannelPair, PairSourceModel
from .resonator import ItuGrid, ResonatorParams

REPORTED_RAW_VISIBILITIES = (0.992, 0.989, 0.981, 0.988)
REPORTED_RAW_SIGMAS = (0.023, 0.027, 0.009, 0.015)
REPORTED_NET_VISIBILITIES = (0.997, 0.994, 0.986, 0.993)
REPORTED_CROSSTALK = 0.003
MIN_CENTRAL_COINCIDENCES = 10_000

_HIST_SEED_BASE = 10_000
_RATES_SEED_KEY = 20_000


class PhysicsError(RuntimeError):
    """A scenario violates a physical precondition (e.g. Franson timing)."""


@dataclass(frozen=True)
class Scenario:
    resonator: ResonatorParams = field(default_factory=ResonatorParams)
    source: PairSourceModel = field(default_factory=PairSourceModel)
    interferometer: InterferometerParams = field(default_factory=InterferometerParams)
    signal: DetectorParams = detection.SIGNAL_APD
    idler: DetectorParams = detection.IDLER_APD
    grid: ItuGrid = field(default_factory=ItuGrid)
    pump_power: float = 500.0  # uW
    pump_coherence: float = 100.0  # ns
    # intrinsic visibility per active pair; None -> interferometer value
    visibilities: tuple[float, ...] | None = None
    n_phases: int = 16
    acquisition: float = 60.0  # s per phase point
    bin_width: int = 10  # ps
    hist_half_range: float = 1000.0  # ps
    window: float | None = None  # ps, full width; None -> delta_T
    accidentals: str = "singles"  # or "dark"
    multipair: bool = False
    seed: int = 0
    mode_range: tuple[int, int] = (-10, 10)
    spectrum_span: tuple[float, float] | None = None  # THz
    spectrum_points: int = 4001
    powers: tuple[float, ...] = tuple(float(p) for p in range(50, 501, 50))  # uW
    rates_duration: float = 600.0  # s per power point
    drift_rate: float = franson.DEFAULT_DRIFT_RATE  # rad/sqrt(s)
    stabilization_duration: float = 100.0  # s
    loop_step: float = franson.DEFAULT_LOOP_STEP_S  # s

    def __post_init__(self):
        if self.visibilities is not None:
            v = tuple(float(x) for x in self.visibilities)
            if len(v) == 1:
                v = v * len(self.source.active_pairs)
            if len(v) != len(self.source.active_pairs):
                raise ValueError("visibilities needs one value per active pair")
            if any(not 0 <= x <= 1 for x in v):
                raise ValueError("visibilities must lie in [0, 1]")
            object.__setattr__(self, "visibilities", v)
        if self.pump_power < 0:
            raise ValueError("pump_power must be >= 0")
        if not self.pump_coherence > 0:
            raise ValueError("pump_coherence must be > 0")
        if self.n_phases < 5:
            raise ValueError("n_phases must be >= 5")
        if not self.acquisition > 0:
            raise ValueError("acquisition must be > 0")
        if int(self.bin_width) != self.bin_width or self.bin_width <= 0:
            raise ValueError("bin_width must be a positive integer number of ps")
        if self.accidentals not in ("singles", "dark"):
            raise ValueError("accidentals must be 'singles' or 'dark'")
        if self.window is not None and not 0 < self.window <= 2 * self.interferometer.delta_T:
            raise ValueError("window must lie in (0, 2 * delta_T]")
        if self.hist_half_range < self.interferometer.delta_T + 0.5 * self.window_width:
            raise ValueError("hist_half_range must cover the side-peak windows")
        if not self.rates_duration > 0:
            raise ValueError("rates_duration must be > 0")

    @property
    def window_width(self) -> float:
        return self.interferometer.delta_T if self.window is None else self.window

    @property
    def pairs(self) -> tuple[ChannelPair, ...]:
        return self.source.active_pairs

    @property
    def phases(self) -> np.ndarray:
        return np.linspace(0.0, 2 * math.pi, self.n_phases, endpoint=False)

    def intrinsic_visibility(self, pair: ChannelPair) -> float:
        if self.visibilities is None:
            return self.interferometer.intrinsic_visibility
        return self.visibilities[self.pairs.index(pair)]

    def effective_visibility(self, pair: ChannelPair) -> float:
        """Intrinsic visibility washed by stabilization residual and, if enabled, multi-pair emission."""
        v = self.intrinsic_visibility(pair) * math.exp(-0.5 * self.interferometer.residual_phase_rms**2)
        if self.multipair:
            mu = pairgen.mean_pairs_per_window(self.pair_rate(pair), self.photon_coherence)
            v = franson.multipair_visibility_penalty(v, mu)
        return v

    def pair_rate(self, pair: ChannelPair) -> float:
        return pairgen.per_pair_rate(self.source, pair, self.pump_power)

    @property
    def photon_coherence(self) -> float:
        return resonator.coherence_time(self.resonator.pump_linewidth)

    def timing_budget(self) -> TimingBudget:
        return TimingBudget(self.photon_coherence, self.interferometer.delta_T, self.pump_coherence)

    def check(self) -> None:
        verdict = franson.validate_timing(self.timing_budget())
        if not verdict.valid:
            raise PhysicsError(verdict.reason)

    def tag_scenario(self, pair: ChannelPair, phase: float, seed: int, duration: float | None = None,
                     power: float | None = None) -> TagScenario:
        rate = self.pair_rate(pair) if power is None else pairgen.per_pair_rate(self.source, pair, power)
        return TagScenario(
            pair_rate=rate,
            signal=self.signal,
            idler=self.idler,
            visibility=self.effective_visibility(pair),
            phase=phase + self.interferometer.phase_setpoint,
            delta_T=self.interferometer.delta_T,
            duration=self.acquisition if duration is None else duration,
            seed=seed,
        )


# ---------------------------------------------------------------- analytics


def _dead_time_survival(rate: float, dead_time_us: float) -> float:
    # non-paralyzable: fraction of input events registered
    return 1.0 / (1.0 + rate * dead_time_us * 1e-6)


def expected_window_rates(scenario: Scenario, pair: ChannelPair, phase: float) -> dict[str, float]:
    """
    Analytic central-window rates [1/s] at ``phase``: correlated signal,
    side-peak leakage and accidentals, after dead-time losses.
    """
    ts = scenario.tag_scenario(pair, phase, 0)
    rates = detection.detected_rates(ts)
    ws, wc, _ = franson.histogram_weights(phase, ts.visibility)
    sigma_c = math.hypot(scenario.signal.jitter_sigma, scenario.idler.jitter_sigma)
    gc, gs = analysis.peak_masses(scenario.interferometer.delta_T, sigma_c, scenario.window_width)
    live_s = _dead_time_survival(rates["signal_singles"], scenario.signal.dead_time)
    live_i = _dead_time_survival(rates["idler_singles"], scenario.idler.dead_time)
    pairs = ts.pair_rate * scenario.signal.transmittance * scenario.idler.transmittance * live_s * live_i
    if scenario.accidentals == "dark":
        m_s, m_i = scenario.signal.dark_rate, scenario.idler.dark_rate
    else:
        m_s, m_i = rates["signal_singles"] * live_s, rates["idler_singles"] * live_i
    acc = coincidence.accidental_rate(
        rates["signal_singles"] * live_s, rates["idler_singles"] * live_i, scenario.window_width
    )
    return {
        "central": pairs * wc * gc,
        "leakage": pairs * 2 * ws * gs,
        "accidental": acc,
        "subtracted": coincidence.accidental_rate(m_s, m_i, scenario.window_width),
    }


def expected_raw_visibility(scenario: Scenario, pair: ChannelPair) -> float:
    hi = expected_window_rates(scenario, pair, 0.0)
    lo = expected_window_rates(scenario, pair, math.pi)
    c_max = hi["central"] + hi["leakage"] + hi["accidental"]
    c_min = lo["central"] + lo["leakage"] + lo["accidental"]
    return analysis.visibility_from_extremes(c_max, c_min)


def mean_central_rate(scenario: Scenario, pair: ChannelPair) -> float:
    r = expected_window_rates(scenario, pair, 0.5 * math.pi)
    return r["central"] + r["leakage"] + r["accidental"]


# ---------------------------------------------------------------- presets


def paper_4pairs(seed: int = 0) -> Scenario:
    """
    Four-pair apparatus: 60 um ring at the grid-searched FSR, 500 uW pump, ITU
    pairs 48/52, 45/55, 43/57, 41/59, 22 dB arms, 250/1100 dark counts/s,
    16 us dead time and a 350 ps interferometer.

    Detector jitter is set so that a +-delta_T/2 window loses 0.3 % visibility
    to side-peak crosstalk; the intrinsic visibility of each pair is chosen so
    that the expected raw visibility equals the reported one. Acquisition per
    point gives at least 1e4 central-window coincidences per scan.
    """
    delta_T = 350.0
    window = delta_T
    sigma_c = analysis.sigma_for_crosstalk(delta_T, window, REPORTED_CROSSTALK)
    jitter = round(sigma_c / math.sqrt(2), 1)
    base = Scenario(
        resonator=ResonatorParams(),
        source=PairSourceModel(),
        interferometer=InterferometerParams(delta_T=delta_T, intrinsic_visibility=1.0, residual_phase_rms=0.02),
        signal=replace(detection.SIGNAL_APD, jitter_sigma=jitter),
        idler=replace(detection.IDLER_APD, jitter_sigma=jitter),
        grid=ItuGrid(),
        visibilities=(1.0,) * 4,
        seed=seed,
    )
    vis = []
    for pair, target in zip(base.pairs, REPORTED_RAW_VISIBILITIES):
        # raw visibility is proportional to the intrinsic one
        vis.append(round(target / expected_raw_visibility(base, pair), 6))
    rate = min(mean_central_rate(replace(base, visibilities=tuple(vis)), p) for p in base.pairs)
    acquisition = math.ceil(MIN_CENTRAL_COINCIDENCES / (rate * base.n_phases) * 1.05)
    return replace(base, visibilities=tuple(vis), acquisition=float(acquisition))


PRESETS = {"paper-4pairs": paper_4pairs, "default": lambda seed=0: Scenario(seed=seed)}


def get_preset(name: str, seed: int = 0) -> Scenario:
    try:
        return PRESETS[name](seed=seed)
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ---------------------------------------------------------------- pipelines


@dataclass(frozen=True)
class SpectrumResult:
    lines: list
    assignment: dict
    freqs: np.ndarray
    transmission: np.ndarray
    symmetric_pairs: list


def run_spectrum(scenario: Scenario) -> SpectrumResult:
    comb = resonator.comb_spectrum(scenario.resonator, scenario.mode_range)
    if scenario.spectrum_span is None:
        lo, hi = comb[0].center_freq, comb[-1].center_freq
        pad = 0.5 * scenario.resonator.fsr / 1e3
        span = (lo - pad, hi + pad)
    else:
        span = scenario.spectrum_span
    lines = [c for c in comb if span[0] <= c.center_freq <= span[1]]
    assignment = resonator.assign_channels(lines, scenario.grid)
    freqs = np.linspace(span[0], span[1], scenario.spectrum_points)
    trans = np.asarray(resonator.transmission(scenario.resonator, freqs))
    pump_ch = scenario.source.pump_channel
    return SpectrumResult(lines, assignment, freqs, trans, resonator.symmetric_pairs(assignment, pump_ch))


@dataclass(frozen=True)
class FringeRun:
    pair: ChannelPair
    scan: FringeScan
    raw: VisibilityResult
    net: VisibilityResult
    accidental_rate: float  # 1/s subtracted for the net fit
    singles: tuple[float, float]  # mean measured signal/idler rates
    intrinsic_visibility: float

    @property
    def bell(self):
        return analysis.bell_verdict(self.raw)

    @property
    def total_central(self) -> int:
        return int(self.scan.counts.sum())


def measure_point(scenario: Scenario, pair: ChannelPair, phase: float, seed: int):
    sig, idl = detection.generate_timetags(scenario.tag_scenario(pair, phase, seed))
    hist = coincidence.build_histogram(sig, idl, scenario.bin_width, scenario.hist_half_range)
    return sig, idl, hist


def run_fringe(scenario: Scenario, pair: ChannelPair) -> FringeRun:
    scenario.check()
    k = scenario.pairs.index(pair)
    counts, rs, ri = [], [], []
    span = None
    for j, phase in enumerate(scenario.phases):
        sig, idl, hist = measure_point(scenario, pair, phase, detection.derive_seed(scenario.seed, k, j))
        counts.append(coincidence.window_count(hist, 0.0, scenario.window_width).counts)
        span = coincidence.window_span(hist, 0.0, scenario.window_width)
        rs.append(sig.rate)
        ri.append(idl.rate)
    scan = FringeScan(scenario.phases, np.asarray(counts, dtype=np.int64), scenario.acquisition, pair)
    if scenario.accidentals == "dark":
        m_s, m_i = scenario.signal.dark_rate, scenario.idler.dark_rate
    else:
        m_s, m_i = float(np.mean(rs)), float(np.mean(ri))
    acc = coincidence.accidental_rate(m_s, m_i, span)
    raw = analysis.fit_fringe(scan)
    net = analysis.net_visibility(scan, acc)
    return FringeRun(pair, scan, raw, net, acc, (float(np.mean(rs)), float(np.mean(ri))),
                     scenario.intrinsic_visibility(pair))


def run_fringes(scenario: Scenario) -> list[FringeRun]:
    return [run_fringe(scenario, p) for p in scenario.pairs]


def run_histogram(scenario: Scenario, pair: ChannelPair, phase: float, index: int = 0) -> CoincidenceHistogram:
    scenario.check()
    k = scenario.pairs.index(pair)
    _, _, hist = measure_point(scenario, pair, phase, detection.derive_seed(scenario.seed, k, _HIST_SEED_BASE + index))
    return hist


@dataclass(frozen=True)
class RatesTable:
    powers: np.ndarray  # uW
    internal_rate: np.ndarray  # analytic total, pairs/s
    signal_singles: np.ndarray  # measured, 1/s
    idler_singles: np.ndarray
    coincidence_estimate: np.ndarray  # analytic phase-averaged three-peak rate, 1/s
    internal_rate_mc: np.ndarray  # total internal rate inferred from the singles
    internal_rate_mc_err: np.ndarray
    slope_analytic: float
    slope_mc: float
    slope_mc_err: float


def loglog_slope(x, y, yerr=None) -> tuple[float, float]:
    """Weighted straight-line fit of log y against log x; returns (slope, sigma).

    Without ``yerr`` the sigma is NaN.
    """
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        raise ValueError("need at least two points")
    w = np.ones_like(lx) if yerr is None else (np.asarray(y, float) / np.asarray(yerr, float)) ** 2
    X = np.column_stack((np.ones_like(lx), lx))
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    coef = cov @ (X.T @ (w * ly))
    return float(coef[1]), (float(math.sqrt(cov[1, 1])) if yerr is not None else float("nan"))


def run_rates(scenario: Scenario, powers=None) -> RatesTable:
    """
    Pump-power sweep through the source and detector models.

    The internal rate is recovered from each arm's singles: correct for dead
    time, subtract the known dark and background rate, then divide by the arm
    transmittance, the monitored-port probability and the channel-pair share.
    """
    powers = np.asarray(scenario.powers if powers is None else powers, dtype=float)
    if powers.size == 0:
        raise ValueError("power list is empty")
    if np.any(powers <= 0):
        raise ValueError("powers must be > 0")
    pair = scenario.pairs[0]
    weight = scenario.source.weight(pair)
    T = scenario.rates_duration
    internal = pairgen.pair_rate(powers, scenario.source)
    s_rates, i_rates, est, err = [], [], [], []
    for j, p in enumerate(powers):
        ts = scenario.tag_scenario(pair, 0.5 * math.pi, detection.derive_seed(scenario.seed, _RATES_SEED_KEY, j),
                                   duration=T, power=float(p))
        sig, idl = detection.generate_timetags(ts)
        s_rates.append(sig.rate)
        i_rates.append(idl.rate)
        photons, var = 0.0, 0.0
        gain = 0.0
        for stream, det in ((sig, scenario.signal), (idl, scenario.idler)):
            m = stream.rate
            tau = det.dead_time * 1e-6
            true = m / (1.0 - m * tau)
            photons += true - det.noise_rate
            # Poisson error of the measured count, propagated through the dead-time correction
            var += (len(stream) / T**2) / (1.0 - m * tau) ** 4
            gain += det.transmittance * detection.PORT_PROBABILITY * weight
        est.append(photons / gain)
        err.append(math.sqrt(var) / gain)
    est, err = np.asarray(est), np.asarray(err)
    # phase-averaged three-peak weight 1/16 + 1/8 + 1/16
    coinc = internal * weight * scenario.signal.transmittance * scenario.idler.transmittance * 0.25
    slope_a = loglog_slope(powers, internal)[0] if powers.size > 1 else float("nan")
    if powers.size > 1 and np.all(est > 0):
        slope_mc, slope_err = loglog_slope(powers, est, err)
    else:
        slope_mc, slope_err = float("nan"), float("nan")
    return RatesTable(powers, np.asarray(internal, float), np.asarray(s_rates), np.asarray(i_rates), coinc,
                      est, err, slope_a, slope_mc, slope_err)
