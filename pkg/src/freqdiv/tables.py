"""CSV tables for time series and sweeps, plus stand-alone plotting scripts that read them."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import OBSERVABLES, TimeSeries
from .experiments import EfficiencyPoint

TIMESERIES_HEADER = ("time_ns",) + OBSERVABLES
SWEEP_HEADER = ("swept_value", "n_b_s", "n_c_s", "T", "converged")
FIGURE_KINDS = ("timeseries", "efficiency")


def fmt(x: float) -> str:
    # + 0.0 folds -0.0 into 0.0
    return "%.12g" % (float(x) + 0.0)


def fmt_time(x: float) -> str:
    s = fmt(x)
    return s if any(c in s for c in ".eni") else s + ".0"


def emit_timeseries_csv(ts: TimeSeries, path) -> Path:
    path = Path(path)
    lines = [",".join(TIMESERIES_HEADER)]
    cols = [ts[name] for name in OBSERVABLES]
    for i, t in enumerate(ts.times):
        lines.append(",".join([fmt_time(t * 1e9)] + [fmt(c[i]) for c in cols]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_timeseries_csv(path) -> TimeSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TIMESERIES_HEADER:
            raise ValueError(f"unexpected time-series header {header}")
        rows = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(header))
    return TimeSeries(rows[:, 0] * 1e-9, {name: rows[:, i + 1] for i, name in enumerate(OBSERVABLES)})


def emit_sweep_csv(points: Sequence[EfficiencyPoint], path, unit: float = 1.0) -> Path:
    """One row per point, sorted by swept value; ``swept_value`` is divided by ``unit``."""
    if not points:
        raise ValueError("sweep table needs at least one point")
    path = Path(path)
    lines = [",".join(SWEEP_HEADER)]
    for pt in sorted(points, key=lambda q: q.value):
        lines.append(",".join([fmt(pt.value / unit), fmt(pt.n_b_s), fmt(pt.n_c_s), fmt(pt.T),
                               "true" if pt.converged else "false"]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_sweep_csv(path, unit: float = 1.0) -> list[EfficiencyPoint]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SWEEP_HEADER:
            raise ValueError(f"unexpected sweep header {header}")
        return [EfficiencyPoint(float(v) * unit, float(nb), float(nc), float(T), c == "true")
                for v, nb, nc, T, c in reader]


_TIMESERIES_SCRIPT = '''\
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = {csv!r}
OUT = sys.argv[1] if len(sys.argv) > 1 else {png!r}

with open(CSV, newline="") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["time_ns"]) for r in rows]

fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
for name in ("n_a", "n_b", "n_c"):
    top.plot(t, [float(r[name]) for r in rows], label=name)
top.set_ylabel("photon number")
top.legend(frameon=False)
for name in ("P_1", "P_2"):
    bottom.plot(t, [float(r[name]) for r in rows], label=name)
bottom.set_ylabel("excited population")
bottom.set_xlabel("time (ns)")
bottom.legend(frameon=False)
fig.tight_layout()
fig.savefig(OUT, dpi=150)
'''

_EFFICIENCY_SCRIPT = '''\
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = {csv!r}
OUT = sys.argv[1] if len(sys.argv) > 1 else {png!r}

with open(CSV, newline="") as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["swept_value"]) for r in rows]
T = [float(r["T"]) for r in rows]

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(x, T, "o-", ms=3)
ax.set_xlabel({xlabel!r})
ax.set_ylabel("conversion efficiency T")
fig.tight_layout()
fig.savefig(OUT, dpi=150)
'''


def emit_plot_script(csv_path, figure_kind: str, script_path=None, xlabel: str = "swept value") -> Path:
    """Write a matplotlib script that turns ``csv_path`` into a PNG next to it."""
    if figure_kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {figure_kind!r}; choose from {FIGURE_KINDS}")
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(csv_path)
    png = csv_path.with_suffix(".png").name
    if figure_kind == "timeseries":
        text = _TIMESERIES_SCRIPT.format(csv=csv_path.name, png=png)
    else:
        text = _EFFICIENCY_SCRIPT.format(csv=csv_path.name, png=png, xlabel=xlabel)
    script_path = Path(script_path) if script_path else csv_path.with_name(f"plot_{csv_path.stem}.py")
    script_path.write_text(text)
    return script_path
