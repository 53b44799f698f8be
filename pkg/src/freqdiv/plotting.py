"""PNG figures for CLI reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .dynamics import TimeSeries  # noqa: E402
from .experiments import EfficiencyPoint  # noqa: E402


def render_timeseries(series: Sequence[tuple[str, TimeSeries]], path) -> Path:
    """Photon numbers (top) and qubit populations (bottom) for one or more labelled runs."""
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    styles = ["-", "--", "-.", ":"]
    for k, (label, ts) in enumerate(series):
        t = ts.times * 1e9
        ls = styles[k % len(styles)]
        suffix = f" {label}" if label else ""
        top.plot(t, ts["n_a"], ls, color="C0", label="n_a" + suffix)
        top.plot(t, ts["n_b"], ls, color="C1", label="n_b" + suffix)
        bottom.plot(t, ts["P_1"], ls, color="C2", label="P_1" + suffix)
    top.set_ylabel("photon number")
    bottom.set_ylabel("excited population")
    bottom.set_xlabel("time (ns)")
    top.legend(frameon=False, fontsize=7)
    bottom.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_efficiency(points: Sequence[EfficiencyPoint], path, unit: float = 1.0,
                      xlabel: str = "swept value") -> Path:
    pts = sorted(points, key=lambda q: q.value)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([q.value / unit for q in pts], [q.T for q in pts], "o-", ms=3)
    bad = [q for q in pts if not q.converged]
    if bad:
        ax.plot([q.value / unit for q in bad], [q.T for q in bad], "x", color="C3", label="not converged")
        ax.legend(frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("conversion efficiency T")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
