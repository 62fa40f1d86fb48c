"""Delimited outputs and reports. Every file is written atomically (temp file + rename)."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import FringeScan
from .coincidence import CoincidenceHistogram

VERSION_LINE = "# franson-comb-sim v1"


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if isinstance(data, bytes) else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(VERSION_LINE + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, comments=()) -> Path:
    return atomic_write(path, csv_text(header, rows, comments))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a file written by :func:`write_csv` (comment lines skipped)."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def comb_rows(lines, assignment):
    return [(c.mode_index, c.center_freq, c.linewidth, assignment.get(c.mode_index)) for c in lines]


COMB_HEADER = ("mode_index", "center_freq_THz", "linewidth_GHz", "itu_channel")
HISTOGRAM_HEADER = ("bin_center_ps", "counts")
FRINGE_HEADER = ("phase_rad", "counts", "acquisition_s")


def write_histogram(path, hist: CoincidenceHistogram, comments=()) -> Path:
    rows = zip(hist.bin_centers.tolist(), hist.counts.tolist())
    return write_csv(path, HISTOGRAM_HEADER, rows, comments)


def write_fringe(path, scan: FringeScan, comments=()) -> Path:
    rows = [(float(p), int(c), scan.acquisition_time_per_point) for p, c in zip(scan.phases, scan.counts)]
    return write_csv(path, FRINGE_HEADER, rows, comments)


def read_fringe(path, channel_pair=None) -> FringeScan:
    header, rows = read_csv(path)
    if tuple(header) != FRINGE_HEADER:
        raise ValueError(f"{path}: unexpected fringe header {header}")
    phases = np.array([float(r[0]) for r in rows])
    counts = np.array([int(r[1]) for r in rows])
    acq = {float(r[2]) for r in rows}
    if len(acq) != 1:
        raise ValueError(f"{path}: acquisition time must be uniform across points")
    return FringeScan(phases, counts, acq.pop(), channel_pair)


def _kv_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return _fmt(v)


def kv_text(items: Sequence[tuple[str, object]]) -> str:
    return "\n".join([VERSION_LINE] + [f"{k} = {_kv_value(v)}" for k, v in items]) + "\n"


def read_kv(path) -> dict[str, str]:
    out = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if not ln.strip() or ln.startswith("#"):
            continue
        k, v = ln.split("=", 1)
        out[k.strip()] = v.strip()
    return out
