"""
Folded Franson interferometer: timing conditions, three-peak coincidence
weights, fringe model and the phase-stabilization loop.

Times are in ps unless a name says otherwise; phases in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

PHASE_STABILITY_LIMIT = 2 * math.pi / 50
DEFAULT_LOOP_BANDWIDTH_HZ = 300.0
DEFAULT_LOOP_STEP_S = 1e-4
# Largest half-unit drift under the analytic ceiling max_drift_rate() = 7.04
# rad/sqrt(s) for the 300 Hz loop sampled at 100 us.
DEFAULT_DRIFT_RATE = 6.5  # rad/sqrt(s)


@dataclass(frozen=True)
class InterferometerParams:
    """
    Unbalanced Michelson shared by both photons.

    ``residual_phase_rms`` is the stabilized phase jitter averaged over by each
    acquisition; it washes the fringe by exp(-rms**2 / 2).
    """

    delta_T: float = 350.0  # ps
    intrinsic_visibility: float = 1.0
    phase_setpoint: float = 0.0
    residual_phase_rms: float = 0.0
    loop_bandwidth: float = DEFAULT_LOOP_BANDWIDTH_HZ

    def __post_init__(self):
        if not self.delta_T > 0:
            raise ValueError(f"delta_T must be > 0, got {self.delta_T}")
        if not 0.0 <= self.intrinsic_visibility <= 1.0:
            raise ValueError("intrinsic_visibility must lie in [0, 1]")
        if self.residual_phase_rms < 0:
            raise ValueError("residual_phase_rms must be >= 0")
        if self.loop_bandwidth < 0:
            raise ValueError("loop_bandwidth must be >= 0")

    @property
    def effective_visibility(self) -> float:
        return self.intrinsic_visibility * math.exp(-0.5 * self.residual_phase_rms**2)


@dataclass(frozen=True)
class TimingBudget:
    photon_coherence: float  # ps
    delta_T: float  # ps
    pump_coherence: float  # ns


@dataclass(frozen=True)
class TimingVerdict:
    valid: bool
    failed: str | None = None
    reason: str = ""

    def __bool__(self):
        return self.valid


def validate_timing(budget: TimingBudget) -> TimingVerdict:
    """Check photon coherence < delta_T < pump coherence."""
    tc, dt, pump_ps = budget.photon_coherence, budget.delta_T, budget.pump_coherence * 1e3
    if min(tc, dt, pump_ps) <= 0:
        raise ValueError("all durations must be > 0")
    if not tc < dt:
        return TimingVerdict(
            False,
            "photon_coherence",
            f"delta_T = {dt:g} ps does not exceed the photon coherence time {tc:g} ps: "
            "first-order interference is not suppressed",
        )
    if not dt < pump_ps:
        return TimingVerdict(
            False,
            "pump_coherence",
            f"delta_T = {dt:g} ps is not shorter than the pump coherence time {pump_ps:g} ps: "
            "short-short and long-long paths are not coherent",
        )
    return TimingVerdict(True, None, "ok")


def path_amplitudes(phase: float) -> dict[str, complex]:
    """Amplitudes of the four (signal, idler) path combinations reaching the
    monitored port; S = short arm, L = long arm."""
    a = 0.25
    return {
        "SS": complex(a),
        "SL": complex(a),
        "LS": complex(a),
        "LL": a * complex(math.cos(phase), math.sin(phase)),
    }


def histogram_weights(phase, V: float):
    """
    Relative coincidence weights of the (-delta_T, 0, +delta_T) peaks as a
    fraction of detected pairs.

    Side peaks carry 1/16 each; the central peak 1/8 (1 + V cos phase).
    """
    if not 0.0 <= V <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    central = 0.125 * (1.0 + V * np.cos(phase))
    if np.ndim(central) == 0:
        return 0.0625, float(central), 0.0625
    side = np.full(np.shape(central), 0.0625)
    return side, central, side


def fringe_curve(phases, V: float, mean_central: float):
    """Expected central-peak counts mean_central * (1 + V cos phase)."""
    if not mean_central > 0:
        raise ValueError("mean_central must be > 0")
    return mean_central * (1.0 + V * np.cos(np.asarray(phases, dtype=float)))


def multipair_visibility_penalty(V: float, mu: float) -> float:
    """First-order visibility dilution by multi-pair emission, V / (1 + 2 mu)."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    return V / (1.0 + 2.0 * mu)


@dataclass(frozen=True)
class PhaseSeries:
    times: np.ndarray  # s
    phases: np.ndarray  # rad
    setpoint: float
    residual_rms: float


def loop_pole(loop_bandwidth: float, step: float) -> float:
    """Per-step decay of the first-order loop error, exp(-2 pi f_bw step)."""
    return math.exp(-2 * math.pi * loop_bandwidth * step)


def max_drift_rate(
    loop_bandwidth: float = DEFAULT_LOOP_BANDWIDTH_HZ,
    step: float = DEFAULT_LOOP_STEP_S,
    target_rms: float = PHASE_STABILITY_LIMIT,
) -> float:
    """Largest drift rate [rad/sqrt(s)] whose stationary residual stays at ``target_rms``."""
    a = loop_pole(loop_bandwidth, step)
    return target_rms * math.sqrt((1 - a * a) / step)


def expected_residual_rms(drift_rms_rate: float, loop_bandwidth: float, step: float = DEFAULT_LOOP_STEP_S) -> float:
    """Stationary residual RMS of the closed loop (loop_bandwidth > 0)."""
    a = loop_pole(loop_bandwidth, step)
    return drift_rms_rate * math.sqrt(step / (1 - a * a))


def stabilized_phase_series(
    drift_rms_rate: float = DEFAULT_DRIFT_RATE,
    loop_bandwidth: float = DEFAULT_LOOP_BANDWIDTH_HZ,
    duration: float = 100.0,
    step: float = DEFAULT_LOOP_STEP_S,
    seed: int = 0,
    setpoint: float = 0.0,
) -> PhaseSeries:
    """
    Random-walk phase drift corrected by a discrete first-order proportional loop.

    The error follows e[k+1] = a e[k] + w[k] with a = exp(-2 pi f_bw step) and
    w ~ N(0, drift**2 step). The loop starts locked (e[0] = 0); the residual is
    the RMS of e over the whole series.
    """
    if loop_bandwidth < 0 or drift_rms_rate < 0:
        raise ValueError("loop_bandwidth and drift_rms_rate must be >= 0")
    if not step > 0:
        raise ValueError("step must be > 0")
    if loop_bandwidth > 0 and not step < 1.0 / (2.0 * loop_bandwidth):
        raise ValueError(
            f"step {step:g} s undersamples a {loop_bandwidth:g} Hz loop; need step < {1 / (2 * loop_bandwidth):g} s"
        )
    n = int(round(duration / step))
    if n < 100:
        raise ValueError("duration must cover at least 100 steps")
    rng = np.random.default_rng(seed)
    kicks = rng.normal(0.0, drift_rms_rate * math.sqrt(step), n)
    a = loop_pole(loop_bandwidth, step)
    err = lfilter([1.0], [1.0, -a], kicks)
    err = np.concatenate(([0.0], err[:-1]))
    times = np.arange(n) * step
    return PhaseSeries(times, setpoint + err, setpoint, float(np.sqrt(np.mean(err**2))))
