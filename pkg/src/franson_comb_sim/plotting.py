"""Report figures. Every function draws onto a fresh figure and saves it to ``path``."""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import BELL_THRESHOLD  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
}


def _golden(width):
    return (width, width * (math.sqrt(5) - 1) / 2)


def _save(fig) -> bytes:
    buf = io.BytesIO()
    # strip the Software tag so repeated runs produce identical bytes
    fig.savefig(buf, format="png", bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return buf.getvalue()


def spectrum_figure(spectrum, grid) -> bytes:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=_golden(6.5))
        ax.plot(spectrum.freqs, 10 * np.log10(np.maximum(spectrum.transmission, 1e-12)), color="k")
        lo, hi = spectrum.freqs[0], spectrum.freqs[-1]
        n0 = math.ceil((lo - grid.base_freq) / grid.spacing)
        n1 = math.floor((hi - grid.base_freq) / grid.spacing)
        for n in range(n0, n1 + 1):
            c = grid.center(n)
            ax.axvspan(c - grid.passband_halfwidth / 1e3, c + grid.passband_halfwidth / 1e3, color="0.9", lw=0)
        for line in spectrum.lines:
            ch = spectrum.assignment.get(line.mode_index)
            if ch is not None:
                ax.annotate(str(ch), (line.center_freq, 0.5), ha="center", fontsize=6, color="C0")
        ax.set_xlabel("frequency (THz)")
        ax.set_ylabel("transmission (dB)")
        ax.set_ylim(top=2.0)
        return _save(fig)


def rates_figure(table) -> bytes:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=_golden(4.5))
        ax.loglog(table.powers, table.internal_rate, "-", color="k", label=f"quadratic law (slope {table.slope_analytic:.3f})")
        ax.errorbar(table.powers, table.internal_rate_mc, yerr=table.internal_rate_mc_err, fmt="o", ms=3,
                    color="C3", label=f"from simulated singles (slope {table.slope_mc:.3f})")
        ax.set_xlabel("coupled pump power (µW)")
        ax.set_ylabel("internal pair rate (pairs/s)")
        ax.legend(loc="upper left")
        return _save(fig)


def fringes_figure(runs) -> bytes:
    with plt.rc_context(RC):
        n = len(runs)
        ncols = 2 if n > 1 else 1
        nrows = math.ceil(n / ncols)
        fig, axes = plt.subplots(nrows, ncols, figsize=(6.5, 2.3 * nrows), squeeze=False)
        dense = np.linspace(0, 2 * math.pi, 400)
        for ax, run in zip(axes.flat, runs):
            scan = run.scan
            ax.errorbar(scan.phases, scan.counts, yerr=np.sqrt(scan.counts), fmt="o", ms=3, color="k")
            ax.plot(dense, run.raw.model(dense), color="C0")
            ax.set_title(f"ITU {run.pair}: V = {100 * run.raw.visibility:.1f} ± {100 * run.raw.sigma:.1f} %")
            ax.set_xlabel("two-photon phase (rad)")
            ax.set_ylabel("coincidences")
        for ax in list(axes.flat)[n:]:
            ax.set_visible(False)
        fig.tight_layout()
        return _save(fig)


def histograms_figure(hists, phases, window, delta_T) -> bytes:
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(hists), figsize=(6.5, 2.2), sharey=True, squeeze=False)
        for ax, h, ph in zip(axes.flat, hists, phases):
            ax.step(h.bin_centers, h.counts, where="mid", color="k")
            for c in (-delta_T, 0.0, delta_T):
                ax.axvspan(c - window / 2, c + window / 2, color="C0" if c == 0 else "0.9", alpha=0.25, lw=0)
            ax.set_title(f"phase {ph:.2f} rad")
            ax.set_xlabel("idler - signal delay (ps)")
        axes.flat[0].set_ylabel("coincidences / bin")
        fig.tight_layout()
        return _save(fig)


def crosstalk_figure(search, chosen=None) -> bytes:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=_golden(4.5))
        W, S = np.meshgrid(search.windows, search.sigmas)
        levels = [1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
        cs = ax.contour(W, S, np.maximum(search.degradation, 1e-12), levels=levels, colors="0.5", linewidths=0.8)
        ax.clabel(cs, fmt=lambda v: f"{100 * v:g} %", fontsize=6)
        if search.contour:
            w, s = zip(*search.contour)
            ax.plot(w, s, color="C3", label=f"{100 * search.target:g} % loss")
        if chosen is not None:
            ax.plot(*chosen, "k*", ms=8, label="preset")
        ax.set_xlabel("central window width (ps)")
        ax.set_ylabel("coincidence jitter sigma (ps)")
        ax.legend(loc="upper right")
        return _save(fig)


def visibility_summary_figure(runs, reported_raw=None) -> bytes:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=_golden(4.5))
        x = np.arange(len(runs))
        ax.errorbar(x - 0.1, [r.raw.visibility for r in runs], yerr=[r.raw.sigma for r in runs], fmt="o", label="raw")
        ax.errorbar(x + 0.1, [r.net.visibility for r in runs], yerr=[r.net.sigma for r in runs], fmt="s", label="net")
        if reported_raw is not None:
            ax.plot(x, reported_raw, "k_", ms=14, label="reported raw")
        ax.axhline(BELL_THRESHOLD, color="C3", ls="--", lw=0.8)
        ax.set_xticks(x, [str(r.pair) for r in runs])
        ax.set_ylabel("visibility")
        ax.legend(loc="lower right")
        return _save(fig)
