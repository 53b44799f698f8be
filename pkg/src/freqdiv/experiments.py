"""Parameter sweeps behind the amplitude, detuning, coupling and pulse studies."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .dynamics import (
    IntegratorConfig, SteadyEstimate, TimeSeries, integrate, integrate_until_stable, observables,
    steady_state_direct,
)
from .model import DividerParams, DriveSchedule
from .units import mhz, ns

# minimum drop between neighbouring maxima, as a fraction of the global peak
PEAK_SEPARATION = 0.2

SWEEP_PARAMETERS = ("detuning", "common_freq", "lambda", "drive_amp", "g3", "t_w", "tau")


class UndefinedEfficiencyError(ValueError):
    pass


def conversion_efficiency(n_b_s: float, n_c_s: float, p: DividerParams, amp: float | None = None) -> float:
    """Output power of resonators b and c over the pump power ``w_a |Omega|^2 / (2 gamma_a)``."""
    amp = p.drive_amp if amp is None else amp
    if amp <= 0:
        raise UndefinedEfficiencyError("conversion efficiency is undefined without a drive")
    if n_b_s < 0 or n_c_s < 0:
        raise ValueError("steady photon numbers must be non-negative")
    out = p.gamma_b * n_b_s * p.omega_b + p.gamma_c * n_c_s * p.omega_c
    return abs(out / (p.omega_a * amp ** 2 / (2.0 * p.gamma_a)))


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep.  ``values`` are in SI units of the swept quantity.

    ``detuning`` is ``Delta2 = w_a - (w_1 + w_2)`` in rad/s and moves both
    qubits and both low-frequency resonators together; ``common_freq`` sets
    those four frequencies directly; ``lambda`` sets ``lambda1 = lambda2``.
    """

    parameter: str
    values: tuple[float, ...]
    base: DividerParams
    schedule: DriveSchedule | None = None
    outputs: tuple[str, ...] = ("n_b_s", "n_c_s", "T")
    method: str = "direct"

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; choose from {SWEEP_PARAMETERS}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.method not in ("direct", "trajectory"):
            raise ValueError(f"unknown steady-state method {self.method!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class EfficiencyPoint:
    value: float
    n_b_s: float
    n_c_s: float
    T: float
    converged: bool


def apply_sweep_value(parameter: str, value: float, base: DividerParams,
                      schedule: DriveSchedule | None = None) -> tuple[DividerParams, DriveSchedule]:
    schedule = DriveSchedule.continuous(base.drive_amp) if schedule is None else schedule
    if parameter == "detuning":
        w = 0.5 * (base.omega_a - value)
        return base.replace(omega_q1=w, omega_q2=w, omega_b=w, omega_c=w), schedule
    if parameter == "common_freq":
        return base.replace(omega_q1=value, omega_q2=value, omega_b=value, omega_c=value), schedule
    if parameter == "lambda":
        return base.replace(lambda1=value, lambda2=value), schedule
    if parameter == "drive_amp":
        return base.replace(drive_amp=value), replace(schedule, amp=value)
    if parameter == "g3":
        return base.replace(g3=value), schedule
    if parameter in ("t_w", "tau"):
        return base, replace(schedule, **{parameter: value})
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def steady_point(p: DividerParams, value: float = 0.0, method: str = "direct",
                 cfg: IntegratorConfig | None = None) -> EfficiencyPoint:
    """Steady photon numbers of b and c under continuous drive, and the resulting efficiency."""
    if method == "direct":
        obs = observables(steady_state_direct(p))
        n_b, n_c, converged = obs["n_b"], obs["n_c"], True
    else:
        cfg = cfg or IntegratorConfig(method="rk45", sample_interval=2e-9)
        _, est = integrate_until_stable(p, cfg=cfg)
        n_b, n_c, converged = est.n_b, est.n_c, est.converged
    n_b, n_c = max(n_b, 0.0), max(n_c, 0.0)
    T = conversion_efficiency(n_b, n_c, p) if p.drive_amp > 0 else 0.0
    return EfficiencyPoint(value, n_b, n_c, T, converged)


def _run_point(args) -> EfficiencyPoint:
    spec, value, cfg = args
    p, _ = apply_sweep_value(spec.parameter, value, spec.base, spec.schedule)
    return steady_point(p, value, spec.method, cfg)


def run_sweep(spec: SweepSpec, cfg: IntegratorConfig | None = None, workers: int = 1) -> list[EfficiencyPoint]:
    """Evaluate every sweep point; results come back sorted by swept value."""
    if spec.parameter in ("t_w", "tau"):
        raise ValueError("pulse parameters have no steady state; use run_pulse_study")
    jobs = [(spec, v, cfg) for v in spec.values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_run_point, jobs))
    else:
        points = [_run_point(j) for j in jobs]
    return sorted(points, key=lambda pt: pt.value)


def run_detuning_sweep(spec: SweepSpec, cfg: IntegratorConfig | None = None, workers: int = 1) -> list[EfficiencyPoint]:
    if spec.parameter != "detuning":
        raise ValueError("detuning sweep needs parameter='detuning'")
    return run_sweep(spec, cfg, workers)


def run_coupling_sweep(spec: SweepSpec, cfg: IntegratorConfig | None = None, workers: int = 1) -> list[EfficiencyPoint]:
    if spec.parameter != "lambda":
        raise ValueError("coupling sweep needs parameter='lambda'")
    return run_sweep(spec, cfg, workers)


def local_maxima(points: Sequence[EfficiencyPoint]) -> list[float]:
    """Swept values of interior strict local maxima of T."""
    T = [pt.T for pt in points]
    return [points[i].value for i in range(1, len(T) - 1) if T[i] > T[i - 1] and T[i] > T[i + 1]]


def detuning_curve_summary(points: Sequence[EfficiencyPoint], tail: float = mhz(50.0)) -> dict:
    peaks = local_maxima(points)
    t_max = max(pt.T for pt in points)
    tails = [pt.T for pt in points if abs(pt.value) >= tail]
    neg = [v for v in peaks if v < 0]
    pos = [v for v in peaks if v > 0]
    symmetric = bool(neg and pos and math.isclose(-max(neg), min(pos), rel_tol=1e-6))
    return {
        "peaks": peaks,
        "two_flanking_peaks": bool(neg and pos),
        "symmetric": symmetric,
        "max_T": t_max,
        "tail_ratio": (max(tails) / t_max) if tails and t_max > 0 else float("nan"),
        "all_converged": all(pt.converged for pt in points),
    }


def coupling_curve_summary(points: Sequence[EfficiencyPoint]) -> dict:
    best = max(points, key=lambda pt: pt.T)
    return {"argmax": best.value, "max_T": best.T, "all_converged": all(pt.converged for pt in points)}


@dataclass
class AmplitudeRun:
    amp: float
    series: TimeSeries
    steady: SteadyEstimate


def run_amplitude_study(amps: Sequence[float], base: DividerParams,
                        cfg: IntegratorConfig | None = None, tol: float = 1e-4,
                        t_max: float = 20e-6) -> list[AmplitudeRun]:
    """Continuous-drive trajectories from the ground state, one per amplitude, run to their plateau."""
    cfg = cfg or IntegratorConfig(method="rk45", sample_interval=1e-9)
    runs = []
    for amp in amps:
        p = base.replace(drive_amp=amp)
        ts, est = integrate_until_stable(p, DriveSchedule.continuous(amp), cfg, tol=tol, t_max=t_max)
        runs.append(AmplitudeRun(amp, ts, est))
    return runs


def has_early_oscillation(ts: TimeSeries, name: str, before: float) -> bool:
    """True when the series has an interior local maximum followed by a local minimum before ``before``."""
    v = ts[name][ts.times <= before]
    d = np.diff(v)
    sign = np.sign(d[np.abs(d) > 1e-12 * max(1.0, np.abs(v).max())])
    turns = np.diff(sign)
    maxima = np.flatnonzero(turns < 0)
    minima = np.flatnonzero(turns > 0)
    return bool(len(maxima) and len(minima) and minima.max() > maxima.min())


def amplitude_study_summary(runs: Sequence[AmplitudeRun], g3: float) -> dict:
    runs = sorted(runs, key=lambda r: r.amp)
    out = {}
    for name in ("n_a", "n_b", "n_c", "P_1", "P_2"):
        plateau = [getattr(r.steady, name) for r in runs]
        out[f"{name}_increasing"] = all(b > a for a, b in zip(plateau, plateau[1:]))
    out["all_converged"] = all(r.steady.converged for r in runs)
    out["starts_at_zero"] = all(abs(r.series[k][0]) == 0.0 for r in runs for k in ("n_a", "n_b", "P_1"))
    return out


def count_separated_peaks(values, drop: float = PEAK_SEPARATION) -> int:
    """Number of maxima that stand at least ``drop * max(values)`` above the dips separating them."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or v.max() <= 0:
        return 0
    # pad so that maxima at either end of the record are seen as peaks
    padded = np.concatenate(([v.min() - 1.0], v, [v.min() - 1.0]))
    peaks, _ = find_peaks(padded, prominence=drop * v.max())
    return len(peaks)


def pulse_schedules(widths: Sequence[float], intervals: Sequence[float], amp: float,
                    n_pulses: int) -> list[DriveSchedule]:
    return [DriveSchedule.square(amp, t_w, tau, n_pulses) for t_w in widths for tau in intervals]


@dataclass
class PulseRun:
    schedule: DriveSchedule
    series: TimeSeries
    peaks: int = field(default=0)

    @property
    def max_n_b(self) -> float:
        return float(self.series["n_b"].max())


def run_pulse_study(widths: Sequence[float], intervals: Sequence[float], base: DividerParams,
                    n_pulses: int = 1, amp: float | None = None, t_end: float | None = None,
                    tail: float = ns(300.0), cfg: IntegratorConfig | None = None,
                    drop: float = PEAK_SEPARATION) -> list[PulseRun]:
    """Square-pulse trains from the ground state; one trajectory per ``(t_w, tau)`` pair.

    Each run lasts until ``tail`` after the last pulse unless ``t_end`` is given.
    """
    amp = base.drive_amp if amp is None else amp
    cfg = cfg or IntegratorConfig(method="rk4", sample_interval=1e-9)
    runs = []
    for s in pulse_schedules(widths, intervals, amp, n_pulses):
        end = t_end if t_end is not None else s.windows()[-1][1] + tail
        ts = integrate(None, base.replace(drive_amp=amp), s, end, cfg)
        runs.append(PulseRun(s, ts, count_separated_peaks(ts["n_b"], drop)))
    return runs
