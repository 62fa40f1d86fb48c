"""
End-to-end acceptance checks, one test group per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from franson_comb_sim import analysis, coincidence, detection, franson, pairgen, resonator
from franson_comb_sim.analysis import FringeScan, fit_fringe
from franson_comb_sim.experiment import (
    REPORTED_RAW_VISIBILITIES,
    paper_4pairs,
    run_fringes,
    run_histogram,
    run_rates,
)

FOUR_PAIRS = {(52, 48), (55, 45), (57, 43), (59, 41)}


# ---------------------------------------------------------------- 1. quadratic law


@pytest.mark.acceptance(1)
def test_rate_calibration_is_exact():
    source = pairgen.PairSourceModel()
    assert pairgen.pair_rate(500.0, source) == 2e6


@pytest.mark.acceptance(1)
def test_rates_sweep_slope_and_runtime():
    scenario = paper_4pairs()
    assert scenario.powers == tuple(float(p) for p in range(50, 501, 50))
    t0 = time.perf_counter()
    table = run_rates(scenario)
    elapsed = time.perf_counter() - t0
    print(f"slope {table.slope_mc:.4f} +- {table.slope_mc_err:.4f} in {elapsed:.1f} s")
    assert abs(table.slope_mc - 2.0) <= 0.05
    assert table.slope_analytic == pytest.approx(2.0, abs=1e-12)
    assert elapsed < 10.0


# ---------------------------------------------------------------- 2. brightness


@pytest.mark.acceptance(2)
def test_spectral_brightness():
    assert pairgen.spectral_brightness(2e6, 5.0) == 400.0


# ---------------------------------------------------------------- 3. channel pairs


@pytest.mark.acceptance(3)
def test_default_fsr_gives_the_four_pairs():
    p = resonator.ResonatorParams()
    assert p.fsr == pytest.approx(resonator.DEFAULT_FSR_GHZ, rel=1e-12)
    comb = resonator.comb_spectrum(p, (-10, 10))
    pairs = resonator.symmetric_pairs(resonator.assign_channels(comb, resonator.ItuGrid()), 50)
    assert FOUR_PAIRS <= set(pairs)
    centre = resonator.itu_channel_center_ghz(50)
    for s, i in pairs:
        assert resonator.itu_channel_center_ghz(s) + resonator.itu_channel_center_ghz(i) == 2 * centre


@pytest.mark.acceptance(3)
def test_preset_pairs_conserve_energy():
    for pair in paper_4pairs().pairs:
        assert (pair.signal_channel, pair.idler_channel) in FOUR_PAIRS
        assert pair.signal_channel + pair.idler_channel == 2 * pair.pump_channel


# ---------------------------------------------------------------- 4 and 5. fringes


@pytest.fixture(scope="module")
def fringe_runs():
    t0 = time.perf_counter()
    runs = {seed: run_fringes(paper_4pairs(seed=seed)) for seed in range(10)}
    return runs, time.perf_counter() - t0


@pytest.mark.acceptance(4)
def test_raw_visibilities_reproduced(fringe_runs):
    runs, elapsed = fringe_runs
    print(f"10 seeds x 4 pairs in {elapsed:.1f} s")
    for seed, seed_runs in runs.items():
        for run, target in zip(seed_runs, REPORTED_RAW_VISIBILITIES):
            print(f"seed {seed} ITU {run.pair}: raw {100 * run.raw.visibility:.2f} %, "
                  f"net {100 * run.net.visibility:.2f} %, {run.total_central} coincidences")
            assert abs(run.raw.visibility - target) <= 0.015
    assert elapsed < 60.0


@pytest.mark.acceptance(4)
def test_net_exceeds_raw_in_every_run(fringe_runs):
    for seed_runs in fringe_runs[0].values():
        for run in seed_runs:
            assert run.net.visibility > run.raw.visibility


@pytest.mark.acceptance(4)
def test_scans_collect_enough_coincidences(fringe_runs):
    for seed_runs in fringe_runs[0].values():
        for run in seed_runs:
            assert run.total_central >= 10_000


@pytest.mark.acceptance(5)
def test_bell_threshold_exceeded(fringe_runs):
    for seed_runs in fringe_runs[0].values():
        for run in seed_runs:
            assert run.bell.passed
            assert run.bell.significance > 5.0


# ---------------------------------------------------------------- 6. three-peak structure


def _window_expectations(scenario, pair, phase):
    """Expected counts in the central and the two side windows for one acquisition."""
    ts = scenario.tag_scenario(pair, phase, 0)
    rates = detection.detected_rates(ts)
    live_s = 1 / (1 + rates["signal_singles"] * scenario.signal.dead_time * 1e-6)
    live_i = 1 / (1 + rates["idler_singles"] * scenario.idler.dead_time * 1e-6)
    pairs = ts.pair_rate * scenario.signal.transmittance * scenario.idler.transmittance * live_s * live_i
    ws, wc, _ = franson.histogram_weights(phase, ts.visibility)
    sigma_c = math.hypot(scenario.signal.jitter_sigma, scenario.idler.jitter_sigma)
    dT, w = scenario.interferometer.delta_T, scenario.window_width
    gc, gs = analysis.peak_masses(dT, sigma_c, w)
    # a peak two delays away from the window centre
    far = float(stats.norm.cdf((0.5 * w - 2 * dT) / sigma_c) - stats.norm.cdf((-0.5 * w - 2 * dT) / sigma_c))
    acc = coincidence.accidental_rate(rates["signal_singles"] * live_s, rates["idler_singles"] * live_i, w)
    T = scenario.acquisition
    central = (pairs * (wc * gc + 2 * ws * gs) + acc) * T
    side = (pairs * (ws * gc + wc * gs + ws * far) + acc) * T
    return central, side


def _window_counts(hist, scenario):
    dT, w = scenario.interferometer.delta_T, scenario.window_width
    assert coincidence.window_span(hist, 0.0, w) == w
    return (coincidence.window_count(hist, 0.0, w).counts,
            coincidence.window_count(hist, -dT, w).counts,
            coincidence.window_count(hist, dT, w).counts)


@pytest.mark.acceptance(6)
def test_analytic_weights_are_four_to_one():
    side, central, other = franson.histogram_weights(0.0, 1.0)
    assert side == other
    assert central / side == 4.0


@pytest.mark.acceptance(6)
def test_fringe_maximum_histogram_matches_weights():
    scenario = replace(paper_4pairs(seed=17), acquisition=1000.0)
    pair = scenario.pairs[0]
    h = run_histogram(scenario, pair, 0.0)
    n_c, n_m, n_p = _window_counts(h, scenario)
    e_c, e_s = _window_expectations(scenario, pair, 0.0)
    print(f"central {n_c} (expected {e_c:.0f}), sides {n_m}, {n_p} (expected {e_s:.0f} each)")
    for n, e in ((n_c, e_c), (n_m, e_s), (n_p, e_s)):
        assert abs(n - e) < 3 * math.sqrt(e)
    # central : side against the analytic expectation, with Poisson error propagation
    ratio = 2 * n_c / (n_m + n_p)
    sigma = ratio * math.sqrt(1 / n_c + 1 / (n_m + n_p))
    assert abs(ratio - e_c / e_s) < 3 * sigma
    assert abs(ratio - 4.0) < 3 * sigma + abs(e_c / e_s - 4.0)


@pytest.mark.parametrize("jitter", [None, 250.0], ids=["preset-jitter", "jitter-250ps"])
@pytest.mark.acceptance(6)
def test_fringe_minimum_is_accidentals_plus_leakage(jitter):
    base = paper_4pairs(seed=31)
    if jitter is not None:
        base = replace(base, signal=replace(base.signal, jitter_sigma=jitter),
                       idler=replace(base.idler, jitter_sigma=jitter))
    # ideal interference: the fringe-minimum central window holds only leakage and accidentals
    scenario = replace(base, visibilities=(1.0,) * 4,
                       interferometer=replace(base.interferometer, residual_phase_rms=0.0))
    pair = scenario.pairs[0]
    expected, _ = _window_expectations(scenario, pair, math.pi)
    counts = []
    for seed in range(20):
        h = run_histogram(replace(scenario, seed=seed), pair, math.pi)
        counts.append(_window_counts(h, scenario)[0])
    counts = np.asarray(counts, dtype=float)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    p = float(stats.chi2.sf(chi2, counts.size))
    print(f"expected {expected:.2f} per run, observed mean {counts.mean():.2f}, chi2 {chi2:.1f}, p {p:.3f}")
    assert p > 0.01


# ---------------------------------------------------------------- 7. crosstalk


@pytest.mark.acceptance(7)
@pytest.mark.parametrize("window", [50.0, 200.0, 350.0, 500.0])
def test_crosstalk_vanishes_without_jitter(window):
    assert analysis.crosstalk_degradation(350.0, 0.0, window, 1.0) == 0.0


@pytest.mark.acceptance(7)
def test_crosstalk_search_finds_the_reported_loss():
    search = analysis.crosstalk_search(350.0, target=0.003)
    contour = dict(search.contour)
    assert 350.0 in contour
    sigma = contour[350.0]
    print(f"0.3 % loss at window 350 ps needs coincidence sigma {sigma:.2f} ps")
    assert analysis.crosstalk_degradation(350.0, sigma, 350.0, 1.0) == pytest.approx(0.003, abs=1e-9)
    # the preset's rounded detector jitter stays on the contour
    s = paper_4pairs()
    sigma_c = math.hypot(s.signal.jitter_sigma, s.idler.jitter_sigma)
    assert analysis.crosstalk_degradation(350.0, sigma_c, s.window_width, 1.0) == pytest.approx(0.003, abs=1e-4)


# ---------------------------------------------------------------- 8. stabilization


@pytest.mark.acceptance(8)
def test_stabilization_contract():
    limit = 2 * math.pi / 50
    residuals = [franson.stabilized_phase_series(franson.DEFAULT_DRIFT_RATE, 300.0, 100.0, seed=s).residual_rms
                 for s in range(20)]
    print(f"residual rms {min(residuals):.4f} .. {max(residuals):.4f} rad, limit {limit:.4f}")
    assert max(residuals) < limit


# ---------------------------------------------------------------- 9. property spot checks


@pytest.mark.acceptance(9)
def test_poisson_variance_equals_mean():
    det_s = replace(detection.SIGNAL_APD, arm_loss_dB=10.0)
    counts = []
    for seed in range(50):
        sc = detection.TagScenario(2e4, signal=det_s, duration=1.0, seed=seed, dead_time_enabled=False)
        sig, _ = detection.generate_timetags(sc)
        counts.append(np.bincount((sig.tags // 10**10).astype(np.int64), minlength=100)[:100])
    counts = np.concatenate(counts)
    assert counts.var(ddof=1) / counts.mean() == pytest.approx(1.0, abs=0.05)


@pytest.mark.acceptance(9)
def test_dead_time_ceiling():
    det = replace(detection.SIGNAL_APD, dark_rate=5e6)
    for stream in detection.generate_timetags(detection.TagScenario(0.0, signal=det, idler=det, duration=0.2)):
        assert stream.rate <= 62_500


@pytest.mark.acceptance(9)
def test_histogram_symmetry_and_conservation():
    rng = np.random.default_rng(9)
    s = np.sort(rng.integers(0, 10**8, 2000))
    i = np.sort(rng.integers(0, 10**8, 2000))
    a = coincidence.build_histogram(s, i, 10, 5000.0)
    b = coincidence.build_histogram(i, s, 10, 5000.0)
    assert np.array_equal(a.counts, b.counts[::-1])
    d = i[:, None] - s[None, :]
    assert a.total == int(np.count_nonzero(np.abs(d) < a.half_range))


@pytest.mark.acceptance(9)
def test_fit_round_trip_six_decimals():
    rng = np.random.default_rng(4)
    for _ in range(50):
        V, phi0, n = rng.uniform(0, 1), rng.uniform(0, 2 * math.pi), int(rng.integers(5, 40))
        phases = np.linspace(0, 2 * math.pi, n, endpoint=False)
        r = fit_fringe(FringeScan(phases, franson.fringe_curve(phases + phi0, V, 1000.0), 1.0))
        assert round(r.visibility, 6) == round(V, 6)


@pytest.mark.acceptance(9)
def test_estimator_coverage():
    V = 0.9
    phases = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    det_s = replace(detection.SIGNAL_APD, arm_loss_dB=3.0, dark_rate=0.0, jitter_sigma=20.0, dead_time=0.01)
    det_i = replace(detection.IDLER_APD, arm_loss_dB=3.0, dark_rate=0.0, jitter_sigma=20.0, dead_time=0.01)
    reps, hits = 200, 0
    for rep in range(reps):
        counts = []
        for j, phase in enumerate(phases):
            sc = detection.TagScenario(4e4, signal=det_s, idler=det_i, visibility=V, phase=phase, duration=1.0,
                                       seed=detection.derive_seed(77, rep, j))
            h = coincidence.build_histogram(*detection.generate_timetags(sc), 10, 1000.0)
            counts.append(coincidence.window_count(h, 0.0, 350.0).counts)
        r = fit_fringe(FringeScan(phases, counts, 1.0))
        hits += abs(r.visibility - V) <= r.sigma
    assert hits / reps == pytest.approx(0.68, abs=0.07)
