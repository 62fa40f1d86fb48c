from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from franson_comb_sim.analysis import (
    BELL_THRESHOLD,
    FitError,
    FringeScan,
    VisibilityResult,
    bell_verdict,
    crosstalk_degradation,
    crosstalk_search,
    fit_fringe,
    net_visibility,
    peak_masses,
    sigma_for_crosstalk,
    visibility_from_extremes,
)
from franson_comb_sim.coincidence import build_histogram, window_count
from franson_comb_sim.detection import IDLER_APD, SIGNAL_APD, TagScenario, derive_seed, generate_timetags
from franson_comb_sim.franson import fringe_curve

PHASES = np.linspace(0, 2 * math.pi, 16, endpoint=False)


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


# ---------------------------------------------------------------- fitting


def test_noiseless_round_trip_20_points():
    phases = np.linspace(0, 2 * math.pi, 20, endpoint=False)
    r = fit_fringe(FringeScan(phases, fringe_curve(phases, 0.99, 1000.0), 1.0))
    assert abs(r.visibility - 0.99) < 1e-6
    assert r.kind == "raw"


@settings(max_examples=200)
@given(V=st.floats(0.0, 1.0), phi0=st.floats(0.0, 2 * math.pi, exclude_max=True), a=st.floats(10.0, 1e6),
       n=st.integers(5, 40))
def test_fit_round_trip(V, phi0, a, n):
    phases = np.linspace(0, 2 * math.pi, n, endpoint=False)
    counts = fringe_curve(phases + phi0, V, a)
    r = fit_fringe(FringeScan(phases, counts, 1.0))
    assert round(r.visibility, 6) == pytest.approx(round(V, 6), abs=1.1e-6)
    assert r.offset == pytest.approx(a, rel=1e-6)
    if V > 1e-3:
        assert abs(_wrap(r.phase0 - phi0)) < 1e-6
    np.testing.assert_allclose(r.model(phases), counts, rtol=1e-6, atol=1e-6 * a)


def test_fit_requires_five_distinct_phases():
    with pytest.raises(FitError):
        fit_fringe(FringeScan(np.linspace(0, 2 * math.pi, 4, endpoint=False), [5, 6, 7, 8], 1.0))
    with pytest.raises(FitError):
        fit_fringe(FringeScan(np.zeros(8), np.arange(8), 1.0))


def test_fit_requires_full_period():
    with pytest.raises(FitError):
        fit_fringe(FringeScan(np.linspace(0, math.pi, 8), np.arange(8) + 1, 1.0))


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        FringeScan(PHASES, -np.ones(16), 1.0)


def test_zero_count_points_are_fit():
    counts = np.round(fringe_curve(PHASES, 1.0, 50.0)).astype(int)
    assert counts.min() == 0
    r = fit_fringe(FringeScan(PHASES, counts, 1.0))
    assert 0.95 < r.visibility <= 1.0 + 3 * r.sigma
    assert r.sigma > 0


def test_reported_noise_48_52_interval():
    # Poisson fringe at the reported raw level for ITU 48/52
    rng = np.random.default_rng(5)
    counts = rng.poisson(fringe_curve(PHASES, 0.992, 650.0))
    r = fit_fringe(FringeScan(PHASES, counts, 1.0))
    assert 0.992 - 0.023 <= r.visibility <= 0.992 + 0.023


# ---------------------------------------------------------------- extremes


@pytest.mark.parametrize("cmax, cmin, expected", [(199, 1, 0.99), (37, 37, 0.0), (37, 0, 1.0)])
def test_visibility_from_extremes(cmax, cmin, expected):
    assert visibility_from_extremes(cmax, cmin) == pytest.approx(expected, abs=1e-15)


def test_extremes_undefined():
    with pytest.raises(ValueError):
        visibility_from_extremes(0, 0)
    with pytest.raises(ValueError):
        visibility_from_extremes(1, 2)


# ---------------------------------------------------------------- net visibility


def test_net_without_accidentals_equals_raw():
    counts = np.random.default_rng(1).poisson(fringe_curve(PHASES, 0.9, 300.0))
    scan = FringeScan(PHASES, counts, 10.0)
    raw, net = fit_fringe(scan), net_visibility(scan, 0.0)
    assert net.visibility == raw.visibility and net.sigma == raw.sigma
    assert net.kind == "net"


def test_net_example_43_57():
    S, V0 = 10_000.0, 0.986
    A = 0.0051 * S
    counts = fringe_curve(PHASES, V0, S) + A
    scan = FringeScan(PHASES, counts, 2.0)
    raw = fit_fringe(scan)
    net = net_visibility(scan, A / 2.0)
    assert raw.visibility == pytest.approx(S * V0 / (S + A), abs=1e-9)
    assert round(raw.visibility, 3) == 0.981
    assert round(net.visibility, 3) == 0.986


def test_net_recovers_ground_truth_with_known_floor():
    S, V0, A = 2000.0, 0.95, 400.0
    counts = np.round(fringe_curve(PHASES, V0, S) + A)
    net = net_visibility(FringeScan(PHASES, counts, 1.0), A)
    assert abs(net.visibility - V0) < net.sigma


@pytest.mark.parametrize("V0", [0.8, 0.9, 0.95, 0.99])
@pytest.mark.parametrize("floor", [0.5, 5.0, 50.0])
@pytest.mark.parametrize("mean", [100.0, 1000.0])
def test_net_at_least_raw(V0, floor, mean):
    rng = np.random.default_rng(derive_seed(3, int(100 * V0), int(10 * floor), int(mean)))
    counts = rng.poisson(fringe_curve(PHASES, V0, mean) + floor)
    scan = FringeScan(PHASES, counts, 1.0)
    raw = fit_fringe(scan)
    if raw.visibility < 1:
        assert net_visibility(scan, floor).visibility >= raw.visibility


@settings(max_examples=300)
@given(V0=st.floats(0.3, 1.0), floor=st.floats(0.05, 100.0), mean=st.floats(10.0, 1e4), seed=st.integers(0, 2**32))
def test_net_at_least_raw_random_scans(V0, floor, mean, seed):
    counts = np.random.default_rng(seed).poisson(fringe_curve(PHASES, V0, mean) + floor)
    scan = FringeScan(PHASES, counts, 1.0)
    raw = fit_fringe(scan)
    if raw.visibility < 1:
        assert net_visibility(scan, floor).visibility >= raw.visibility


# ---------------------------------------------------------------- estimator statistics


def test_coverage_of_one_sigma_interval():
    """Tag-level Monte Carlo of a known-visibility fringe, 200 repetitions."""
    V = 0.9
    det_s = replace(SIGNAL_APD, arm_loss_dB=3.0, dark_rate=0.0, jitter_sigma=20.0, dead_time=0.01)
    det_i = replace(IDLER_APD, arm_loss_dB=3.0, dark_rate=0.0, jitter_sigma=20.0, dead_time=0.01)
    hits = 0
    reps = 200
    for rep in range(reps):
        counts = []
        for j, phase in enumerate(PHASES):
            sc = TagScenario(4e4, signal=det_s, idler=det_i, visibility=V, phase=phase, duration=1.0,
                             seed=derive_seed(2024, rep, j))
            h = build_histogram(*generate_timetags(sc), 10, 1000.0)
            counts.append(window_count(h, 0.0, 350.0).counts)
        r = fit_fringe(FringeScan(PHASES, counts, 1.0))
        hits += abs(r.visibility - V) <= r.sigma
    assert hits / reps == pytest.approx(0.68, abs=0.07)


def test_null_case():
    """A flat source: V is a length, so judge the signed components and the Rayleigh spread."""
    n = 400
    ratios, signed = [], []
    for seed in range(n):
        counts = np.random.default_rng(seed).poisson(np.full(16, 500.0))
        r = fit_fringe(FringeScan(PHASES, counts, 1.0))
        ratios.append(r.visibility / r.sigma)
        signed.append(r.visibility * math.cos(r.phase0) / r.sigma)
    ratios, signed = np.asarray(ratios), np.asarray(signed)
    # each in-phase component is N(0, 1) in sigma units: |.| < 2 sigma for ~95 % of seeds
    assert np.mean(np.abs(signed) < 2) == pytest.approx(stats.norm.cdf(2) - stats.norm.cdf(-2), abs=0.04)
    # the magnitude follows a Rayleigh law: P(V < 2 sigma) = 1 - exp(-2), mean sqrt(pi / 2)
    assert np.mean(ratios < 2) == pytest.approx(1 - math.exp(-2), abs=0.05)
    assert ratios.mean() == pytest.approx(math.sqrt(math.pi / 2), abs=0.1)


def test_sigma_positive_and_visibility_bounded():
    rng = np.random.default_rng(8)
    for _ in range(50):
        counts = rng.poisson(fringe_curve(PHASES, 1.0, 200.0))
        r = fit_fringe(FringeScan(PHASES, counts, 1.0))
        assert r.sigma > 0
        assert 0 <= r.visibility <= 1 + 3 * r.sigma


# ---------------------------------------------------------------- Bell


def _result(v, s):
    return VisibilityResult(v, s, 0.0, 1.0, 0.0)


def test_bell_examples():
    b = bell_verdict(_result(0.992, 0.023))
    assert b.passed and round(b.significance, 1) == 12.4
    assert not bell_verdict(_result(0.7071, 0.01)).passed
    assert not bell_verdict(_result(BELL_THRESHOLD, 0.01)).passed
    assert not bell_verdict(_result(0.5, 0.01)).passed


def test_bell_requires_sigma():
    with pytest.raises(ValueError):
        bell_verdict(_result(0.9, 0.0))


# ---------------------------------------------------------------- crosstalk


def _crosstalk_oracle(delta_T, sigma, window, V):
    """Quadrature of the three-peak density at fringe max and min."""
    h = window / 2

    def counts(phase):
        w = (1 / 16, 0.125 * (1 + V * math.cos(phase)), 1 / 16)
        f = lambda t: sum(wk * stats.norm.pdf(t, c, sigma) for wk, c in zip(w, (-delta_T, 0.0, delta_T)))
        return integrate.quad(f, -h, h, points=[0.0], epsabs=1e-14, epsrel=1e-12)[0]

    cmax, cmin = counts(0.0), counts(math.pi)
    return V - (cmax - cmin) / (cmax + cmin)


@pytest.mark.parametrize("sigma, window, V", [
    (63.66, 350.0, 1.0), (100.0, 350.0, 0.99), (250.0, 350.0, 1.0), (354.0, 200.0, 0.9), (40.0, 600.0, 1.0),
])
def test_crosstalk_matches_quadrature(sigma, window, V):
    assert crosstalk_degradation(350.0, sigma, window, V) == pytest.approx(
        _crosstalk_oracle(350.0, sigma, window, V), abs=1e-10)


@pytest.mark.parametrize("window", [10.0, 350.0, 699.0])
def test_crosstalk_vanishes_for_sharp_peaks(window):
    assert crosstalk_degradation(350.0, 0.0, window, 1.0) == 0.0


def test_crosstalk_narrow_window_limit():
    # as window -> 0 the loss tends to V rho / (1 + rho), rho = exp(-dT^2 / 2 sigma^2)
    for sigma in (30.0, 100.0, 250.0):
        rho = math.exp(-350.0**2 / (2 * sigma**2))
        assert crosstalk_degradation(350.0, sigma, 1e-3, 1.0) == pytest.approx(rho / (1 + rho), rel=1e-6)
    # resolved peaks: the limit is zero to machine precision
    assert crosstalk_degradation(350.0, 350.0 / 8, 1e-3, 1.0) < 1e-12


def test_crosstalk_window_bound():
    with pytest.raises(ValueError):
        crosstalk_degradation(350.0, 50.0, 701.0, 1.0)


@settings(max_examples=100)
@given(window=st.floats(1.0, 700.0), s1=st.floats(0.0, 500.0), s2=st.floats(0.0, 500.0))
def test_crosstalk_monotone_in_sigma(window, s1, s2):
    lo, hi = sorted((s1, s2))
    assert crosstalk_degradation(350.0, lo, window, 1.0) <= crosstalk_degradation(350.0, hi, window, 1.0) + 1e-15


@settings(max_examples=100)
@given(sigma=st.floats(1.0, 300.0), f1=st.floats(0.0, 1.0), f2=st.floats(0.0, 1.0))
def test_crosstalk_monotone_in_window_beyond_core(sigma, f1, f2):
    # windows wider than one coincidence sigma
    w_min = min(sigma, 700.0)
    w1, w2 = sorted(w_min + f * (700.0 - w_min) for f in (f1, f2))
    assert crosstalk_degradation(350.0, sigma, w1, 1.0) <= crosstalk_degradation(350.0, sigma, w2, 1.0) + 1e-15


def test_peak_masses_limits():
    assert peak_masses(350.0, 0.0, 350.0) == (1.0, 0.0)
    gc, gs = peak_masses(350.0, 100.0, 700.0)
    assert gc == pytest.approx(math.erf(350 / (100 * math.sqrt(2))))
    assert gs == pytest.approx(stats.norm.cdf(0.0) - stats.norm.cdf(-7.0))


def test_crosstalk_search_finds_target():
    s = sigma_for_crosstalk(350.0, 350.0, 0.003)
    assert crosstalk_degradation(350.0, s, 350.0, 1.0) == pytest.approx(0.003, abs=1e-9)
    assert s == pytest.approx(63.66, abs=0.01)
    search = crosstalk_search(350.0, 0.003)
    assert search.degradation.shape == (search.sigmas.size, search.windows.size)
    assert search.contour
    for w, sig in search.contour:
        assert crosstalk_degradation(350.0, sig, w, 1.0) == pytest.approx(0.003, abs=1e-8)
    assert any(abs(w - 350.0) < 1e-9 for w, _ in crosstalk_search(350.0, 0.003, windows=[200.0, 350.0]).contour)
