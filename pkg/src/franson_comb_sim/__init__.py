"""Simulator and analysis chain for a silicon micro-ring entangled photon-pair
source distributed over DWDM channels and analysed with a folded Franson
interferometer."""

from .analysis import (
    BELL_THRESHOLD,
    FitError,
    FringeScan,
    VisibilityResult,
    bell_verdict,
    crosstalk_degradation,
    fit_fringe,
    net_visibility,
    visibility_from_extremes,
)
from .coincidence import accidental_rate, build_histogram, net_counts, window_count
from .detection import DetectorParams, TagScenario, TimeTagStream, apply_dead_time, effective_rate, generate_timetags
from .experiment import PhysicsError, Scenario, get_preset, paper_4pairs
from .franson import InterferometerParams, TimingBudget, histogram_weights, validate_timing
from .pairgen import ChannelPair, PairSourceModel, make_channel_pair, pair_rate, spectral_brightness
from .resonator import CombLine, ItuGrid, ResonatorParams, assign_channels, comb_spectrum, itu_channel_center

__version__ = "0.1.0"
