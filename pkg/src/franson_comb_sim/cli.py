"""
``franson-comb-sim`` command line.

Exit codes: 0 success, 2 configuration error, 3 physics-invariant violation,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, franson, pairgen
from .config import ConfigError, apply_config, format_scenario, load_config
from .experiment import (
    REPORTED_RAW_VISIBILITIES,
    PhysicsError,
    Scenario,
    get_preset,
    run_fringe,
    run_histogram,
    run_rates,
    run_spectrum,
)
from .export import COMB_HEADER, atomic_write, comb_rows, kv_text, write_csv, write_fringe, write_histogram
from .pairgen import ChannelPair

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4
DEFAULT_HIST_PHASES = (0.0, 0.5 * math.pi, math.pi)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file overriding the preset")
    common.add_argument("--preset", default="paper-4pairs", help="base parameter set (default: paper-4pairs)")
    common.add_argument("--seed", type=int, help="master seed (overrides preset and config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--plot", action="store_true", help="also render figures for this subcommand")

    p = argparse.ArgumentParser(prog="franson-comb-sim", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="resonance comb table and transmission curve")
    sub.add_parser("rates", parents=[common], help="pump-power sweep of pair and singles rates")
    fr = sub.add_parser("fringe", parents=[common], help="two-photon fringe scans and visibility report")
    fr.add_argument("--pair", action="append", help="channel pair as IDLER/SIGNAL, e.g. 48/52 (repeatable)")
    hi = sub.add_parser("histogram", parents=[common], help="coincidence histograms at fixed phases")
    hi.add_argument("--pair", action="append", help="channel pair as IDLER/SIGNAL (default: first active pair)")
    hi.add_argument("--phase", type=float, action="append", help="two-photon phase in rad (repeatable)")
    sub.add_parser("report", parents=[common], help="run everything and render all figures")
    return p


def load_scenario(args) -> Scenario:
    try:
        scenario = get_preset(args.preset, seed=args.seed or 0)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    if args.config is not None:
        scenario = apply_config(scenario, load_config(args.config))
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return scenario


def _select_pairs(scenario: Scenario, specs) -> list[ChannelPair]:
    if not specs:
        return list(scenario.pairs)
    out = []
    for spec in specs:
        try:
            a, b = (int(x) for x in spec.split("/"))
        except ValueError:
            raise ConfigError(f"bad --pair {spec!r}; expected e.g. 48/52") from None
        match = [p for p in scenario.pairs if {p.signal_channel, p.idler_channel} == {a, b}]
        if not match:
            raise ConfigError(f"pair {spec} is not active; active pairs: {', '.join(map(str, scenario.pairs))}")
        out.append(match[0])
    return out


# ---------------------------------------------------------------- commands


def do_spectrum(scenario: Scenario, out: Path, plot: bool) -> list:
    spec = run_spectrum(scenario)
    write_csv(out / "comb.csv", COMB_HEADER, comb_rows(spec.lines, spec.assignment),
              [f"fsr_GHz = {scenario.resonator.fsr!r}", f"group_index = {scenario.resonator.group_index!r}"])
    write_csv(out / "transmission.csv", ("freq_THz", "transmission"), zip(spec.freqs.tolist(), spec.transmission.tolist()))
    pairs = ", ".join(f"{i}/{s}" for s, i in spec.symmetric_pairs) or "none"
    print(f"{len(spec.lines)} comb lines, FSR {scenario.resonator.fsr:.3f} GHz; symmetric ITU pairs: {pairs}")
    if plot:
        from . import plotting
        atomic_write(out / "spectrum.png", plotting.spectrum_figure(spec, scenario.grid))
    return [
        ("resonator.fsr_GHz", scenario.resonator.fsr),
        ("resonator.group_index", scenario.resonator.group_index),
        ("resonator.linewidth_GHz", scenario.resonator.pump_linewidth),
        ("resonator.coherence_time_ps", scenario.photon_coherence),
        ("resonator.symmetric_pairs", pairs.replace(", ", " ")),
    ]


def do_rates(scenario: Scenario, out: Path, plot: bool) -> list:
    t = run_rates(scenario)
    rows = zip(t.powers, t.internal_rate, t.signal_singles, t.idler_singles, t.coincidence_estimate,
               t.internal_rate_mc, t.internal_rate_mc_err)
    lw = scenario.resonator.pump_linewidth
    calib_brightness = pairgen.spectral_brightness(scenario.source.calib_rate, lw)
    write_csv(out / "rates.csv",
              ("power_uW", "internal_rate", "signal_singles", "idler_singles", "coincidence_estimate",
               "internal_rate_mc", "internal_rate_mc_err"),
              rows,
              [f"slope_analytic = {t.slope_analytic!r}", f"slope_mc = {t.slope_mc!r} +- {t.slope_mc_err!r}",
               f"brightness_at_calibration = {calib_brightness!r} pairs/s/MHz"])
    print(f"log-log slope: analytic {t.slope_analytic:.3f}, Monte Carlo {t.slope_mc:.3f} ± {t.slope_mc_err:.3f}")
    if plot:
        from . import plotting
        atomic_write(out / "rates.png", plotting.rates_figure(t))
    return [
        ("rates.slope_analytic", t.slope_analytic),
        ("rates.slope_mc", t.slope_mc),
        ("rates.slope_mc_sigma", t.slope_mc_err),
        ("source.calib_rate", scenario.source.calib_rate),
        ("source.spectral_brightness_at_calibration", calib_brightness),
    ]


def do_fringe(scenario: Scenario, out: Path, plot: bool, pairs=None):
    scenario.check()
    runs = []
    for pair in _select_pairs(scenario, pairs):
        run = run_fringe(scenario, pair)
        runs.append(run)
        write_fringe(out / f"fringe_{pair.label}.csv", run.scan, [f"pair = {pair}"])
        b = run.bell
        print(f"ITU {pair}: raw V = {100 * run.raw.visibility:.2f} ± {100 * run.raw.sigma:.2f} %, "
              f"net V = {100 * run.net.visibility:.2f} %, Bell {'pass' if b.passed else 'FAIL'} "
              f"({b.significance:.1f} sigma)")
    items = []
    for run in runs:
        key = f"pair.{run.pair.label}"
        b = run.bell
        items += [
            (f"{key}.raw_visibility", run.raw.visibility),
            (f"{key}.raw_sigma", run.raw.sigma),
            (f"{key}.net_visibility", run.net.visibility),
            (f"{key}.net_sigma", run.net.sigma),
            (f"{key}.bell_pass", b.passed),
            (f"{key}.bell_significance", b.significance),
            (f"{key}.central_coincidences", run.total_central),
            (f"{key}.accidental_rate", run.accidental_rate),
            (f"{key}.intrinsic_visibility", run.intrinsic_visibility),
        ]
    if plot:
        from . import plotting
        atomic_write(out / "fringes.png", plotting.fringes_figure(runs))
        atomic_write(out / "visibilities.png", plotting.visibility_summary_figure(runs))
    return items, runs


def do_histogram(scenario: Scenario, out: Path, plot: bool, pairs=None, phases=None):
    scenario.check()
    phases = list(phases) if phases else list(DEFAULT_HIST_PHASES)
    pair = _select_pairs(scenario, pairs)[0] if pairs else scenario.pairs[0]
    hists = []
    for k, phase in enumerate(phases):
        h = run_histogram(scenario, pair, phase, k)
        hists.append(h)
        write_histogram(out / f"histogram_{pair.label}_phase{k}.csv", h, [f"pair = {pair}", f"phase_rad = {phase!r}"])
        print(f"ITU {pair}, phase {phase:.3f} rad: {h.total} coincidences in ±{h.half_range:g} ps")
    if plot:
        from . import plotting
        atomic_write(out / "histograms.png",
                     plotting.histograms_figure(hists, phases, scenario.window_width, scenario.interferometer.delta_T))
    return hists


def do_report(scenario: Scenario, out: Path, preset: str) -> None:
    from . import plotting

    items = [("preset", preset), ("seed", scenario.seed)]
    items += do_spectrum(scenario, out, True)
    items += do_rates(scenario, out, True)
    do_histogram(scenario, out, True)
    fringe_items, runs = do_fringe(scenario, out, True)
    items += fringe_items

    sigma_c = math.hypot(scenario.signal.jitter_sigma, scenario.idler.jitter_sigma)
    dT, window = scenario.interferometer.delta_T, scenario.window_width
    search = analysis.crosstalk_search(dT, target=0.003)
    write_csv(out / "crosstalk.csv", ("window_ps", "coincidence_sigma_ps"), search.contour,
              [f"delta_T = {dT!r} ps", f"target_degradation = {search.target!r}"])
    atomic_write(out / "crosstalk.png", plotting.crosstalk_figure(search, (window, sigma_c)))
    crosstalk = analysis.crosstalk_degradation(dT, sigma_c, window, 1.0)

    stab = franson.stabilized_phase_series(scenario.drift_rate, scenario.interferometer.loop_bandwidth,
                                           scenario.stabilization_duration, scenario.loop_step, scenario.seed)
    items += [
        ("timing.photon_coherence_ps", scenario.photon_coherence),
        ("timing.delta_T_ps", dT),
        ("timing.pump_coherence_ns", scenario.pump_coherence),
        ("crosstalk.coincidence_sigma_ps", sigma_c),
        ("crosstalk.window_ps", window),
        ("crosstalk.degradation", crosstalk),
        ("stabilization.drift_rate", scenario.drift_rate),
        ("stabilization.residual_rms_rad", stab.residual_rms),
        ("stabilization.within_limit", stab.residual_rms < franson.PHASE_STABILITY_LIMIT),
    ]
    write_reports(out, items, runs)
    atomic_write(out / "visibilities.png",
                 plotting.visibility_summary_figure(runs, REPORTED_RAW_VISIBILITIES if len(runs) == 4 else None))


def write_reports(out: Path, items, runs) -> None:
    atomic_write(out / "report.kv", kv_text(items))
    lines = ["franson-comb-sim v1 visibility report", ""]
    lines.append(f"{'pair':>7}  {'raw V (%)':>14}  {'net V (%)':>14}  {'Bell':>5}  {'signif.':>8}")
    for run in runs:
        b = run.bell
        lines.append(
            f"{str(run.pair):>7}  {100 * run.raw.visibility:7.2f} ± {100 * run.raw.sigma:4.2f}  "
            f"{100 * run.net.visibility:7.2f} ± {100 * run.net.sigma:4.2f}  {'pass' if b.passed else 'fail':>5}  "
            f"{b.significance:7.1f}σ"
        )
    lines.append("")
    lines.append(f"Bell threshold 1/sqrt(2) = {100 * analysis.BELL_THRESHOLD:.2f} %")
    other = [(k, v) for k, v in items if not k.startswith("pair.")]
    if other:
        lines.append("")
        lines += [f"{k}: {v}" for k, v in other]
    atomic_write(out / "report.txt", "\n".join(lines) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "scenario.cfg", format_scenario(scenario))
        if args.command == "spectrum":
            do_spectrum(scenario, out, args.plot)
        elif args.command == "rates":
            do_rates(scenario, out, args.plot)
        elif args.command == "fringe":
            items, runs = do_fringe(scenario, out, args.plot, args.pair)
            write_reports(out, [("preset", args.preset), ("seed", scenario.seed)] + items, runs)
        elif args.command == "histogram":
            do_histogram(scenario, out, args.plot, args.pair, args.phase)
        elif args.command == "report":
            do_report(scenario, out, args.preset)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
