"""TOML run configuration in engineering units (GHz/2pi, MHz/2pi, ns).

Every unit-bearing key also accepts an SI spelling: ``<name>_rad_s`` for
frequencies and rates, ``<name>_s`` for times.  The resolved echo written to
run manifests uses the SI spelling, so it re-parses to an identical config.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import IntegratorConfig
from .experiments import SWEEP_PARAMETERS
from .model import DividerParams, DriveSchedule, InvalidParamsError
from .units import ghz, mhz, ns

EXPERIMENTS = ("simulate", "amplitude-study", "detuning-sweep", "coupling-sweep", "pulse-study", "steady-state")

_GHZ_PARAMS = ("omega_a", "omega_b", "omega_c", "omega_q1", "omega_q2")
_MHZ_PARAMS = ("g3", "g_e", "lambda1", "lambda2", "gamma_a", "gamma_b", "gamma_c", "kappa1", "kappa2", "drive_amp")
_INT_PARAMS = ("n_tr", "n_tr_a", "n_tr_b", "n_tr_c")
_SWEEP_UNITS = {"detuning": mhz, "common_freq": ghz, "lambda": mhz, "drive_amp": mhz, "g3": mhz, "t_w": ns, "tau": ns}
SWEEP_UNIT_LABELS = {"detuning": "detuning (MHz/2pi)", "common_freq": "frequency (GHz/2pi)",
                     "lambda": "lambda (MHz/2pi)", "drive_amp": "drive amplitude (MHz/2pi)",
                     "g3": "g3 (MHz/2pi)", "t_w": "t_w (ns)", "tau": "tau (ns)"}


class ConfigError(ValueError):
    pass


def sweep_unit(parameter: str) -> float:
    """Size of one display unit of the swept quantity in SI."""
    return _SWEEP_UNITS[parameter](1.0)


def _si(value: float) -> float:
    return value


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple[float, ...]
    method: str = "direct"
    workers: int = 1


@dataclass(frozen=True)
class PulseConfig:
    widths: tuple[float, ...] = (ns(50.0), ns(80.0), ns(110.0), ns(150.0))
    intervals: tuple[float, ...] = (0.0,)
    n_pulses: int = 1
    tail: float = ns(300.0)


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    params: DividerParams = field(default_factory=DividerParams.standard)
    schedule: DriveSchedule | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output_dir: str = "out"
    t_end: float = ns(1000.0)
    amplitudes: tuple[float, ...] = (mhz(2.0), mhz(3.0), mhz(4.0))
    sweep: SweepConfig | None = None
    pulse: PulseConfig = field(default_factory=PulseConfig)
    # product-basis labels [q1, q2, a, b, c] of the initial state; None is the global ground state
    initial_state: tuple[int, ...] | None = None

    @property
    def drive(self) -> DriveSchedule:
        return self.schedule or DriveSchedule.continuous(self.params.drive_amp)


class _Section:
    """Pops keys from one TOML table and complains about whatever is left."""

    def __init__(self, table, path: str):
        if not isinstance(table, dict):
            raise ConfigError(f"{path or 'config'}: expected a table")
        self.table = dict(table)
        self.path = path

    def key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def pop(self, name: str, kind=None, default=None):
        if name not in self.table:
            return default
        value = self.table.pop(name)
        if kind is None:
            return value
        return _coerce(value, kind, self.key(name))

    def scaled(self, name: str, unit, si_suffix: str, default=None):
        """Value given in engineering units under ``name`` or in SI under ``name + si_suffix``."""
        si = name + si_suffix
        if name in self.table and si in self.table:
            raise ConfigError(f"{self.key(name)}: given both as {name} and {si}")
        if si in self.table:
            return _coerce(self.table.pop(si), float, self.key(si))
        if name in self.table:
            return unit(_coerce(self.table.pop(name), float, self.key(name)))
        return default

    def scaled_list(self, name: str, unit, si_suffix: str, default=None):
        si = name + si_suffix
        if name in self.table and si in self.table:
            raise ConfigError(f"{self.key(name)}: given both as {name} and {si}")
        for key, convert in ((si, _si), (name, unit)):
            if key in self.table:
                raw = self.table.pop(key)
                if not isinstance(raw, list) or not raw:
                    raise ConfigError(f"{self.key(key)}: expected a non-empty list of numbers")
                return tuple(convert(_coerce(v, float, self.key(key))) for v in raw)
        return default

    def finish(self):
        if self.table:
            name = sorted(self.table)[0]
            raise ConfigError(f"{self.key(name)}: unknown key")


def _coerce(value, kind, path: str):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
        if not np.isfinite(value):
            raise ConfigError(f"{path}: expected a finite number, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise TypeError(kind)


def _positive(value, path: str):
    if value is not None and not value > 0:
        raise ConfigError(f"{path}: must be positive, got {value}")
    return value


def _parse_params(sec: _Section) -> DividerParams:
    base = DividerParams.standard()
    values = {}
    for name in _GHZ_PARAMS:
        values[name] = sec.scaled(name, ghz, "_rad_s", getattr(base, name))
    for name in _MHZ_PARAMS:
        values[name] = sec.scaled(name, mhz, "_rad_s", getattr(base, name))
    for name in _INT_PARAMS:
        values[name] = sec.pop(name, int, getattr(base, name))
    for name in ("gamma_a", "gamma_b", "gamma_c", "kappa1", "kappa2"):
        _positive(values[name], sec.key(name))
    sec.finish()
    try:
        return DividerParams(**values)
    except InvalidParamsError as exc:
        raise ConfigError(f"{sec.path}: {exc}") from exc


def _parse_schedule(sec: _Section, params: DividerParams) -> DriveSchedule:
    kind = sec.pop("kind", str, "continuous")
    amp = sec.scaled("amp", mhz, "_rad_s", params.drive_amp)
    t_w = sec.scaled("t_w", ns, "_s", 0.0)
    tau = sec.scaled("tau", ns, "_s", 0.0)
    n_pulses = sec.pop("n_pulses", int, 1)
    sec.finish()
    try:
        return DriveSchedule(kind, amp, t_w, tau, n_pulses)
    except InvalidParamsError as exc:
        raise ConfigError(f"{sec.path}: {exc}") from exc


def _parse_integrator(sec: _Section) -> IntegratorConfig:
    d = IntegratorConfig()
    method = sec.pop("method", str, d.method)
    values = dict(
        method=method,
        dt=_positive(sec.scaled("dt", ns, "_s", d.dt), sec.key("dt")),
        sample_interval=_positive(sec.scaled("sample_interval", ns, "_s", d.sample_interval),
                                  sec.key("sample_interval")),
    )
    for name in ("abs_tol", "rel_tol", "trace_tol", "positivity_tol"):
        values[name] = _positive(sec.pop(name, float, getattr(d, name)), sec.key(name))
    sec.finish()
    try:
        return IntegratorConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"{sec.path}: {exc}") from exc


def _parse_sweep(sec: _Section) -> SweepConfig:
    parameter = sec.pop("parameter", str)
    if parameter is None:
        raise ConfigError(f"{sec.key('parameter')}: missing required key")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"{sec.key('parameter')}: unknown sweep parameter {parameter!r}")
    unit = _SWEEP_UNITS[parameter]
    values = sec.scaled_list("values", unit, "_si")
    if values is None:
        start, stop = sec.pop("start", float), sec.pop("stop", float)
        num = sec.pop("num", int, 41)
        if start is None or stop is None:
            raise ConfigError(f"{sec.key('values')}: missing required key (or give start/stop/num)")
        if num < 1:
            raise ConfigError(f"{sec.key('num')}: must be >= 1")
        values = tuple(unit(float(v)) for v in np.linspace(start, stop, num))
    method = sec.pop("method", str, "direct")
    if method not in ("direct", "trajectory"):
        raise ConfigError(f"{sec.key('method')}: unknown steady-state method {method!r}")
    workers = sec.pop("workers", int, 1)
    if workers < 1:
        raise ConfigError(f"{sec.key('workers')}: must be >= 1")
    sec.finish()
    return SweepConfig(parameter, values, method, workers)


def _parse_pulse(sec: _Section) -> PulseConfig:
    d = PulseConfig()
    widths = sec.scaled_list("widths", ns, "_s", d.widths)
    intervals = sec.scaled_list("intervals", ns, "_s", d.intervals)
    n_pulses = sec.pop("n_pulses", int, d.n_pulses)
    tail = sec.scaled("tail", ns, "_s", d.tail)
    sec.finish()
    if any(w <= 0 for w in widths):
        raise ConfigError(f"{sec.key('widths')}: widths must be positive")
    if any(t < 0 for t in intervals):
        raise ConfigError(f"{sec.key('intervals')}: intervals must be non-negative")
    if n_pulses < 1:
        raise ConfigError(f"{sec.key('n_pulses')}: must be >= 1")
    return PulseConfig(widths, intervals, n_pulses, tail)


def _parse_labels(raw, params: DividerParams) -> tuple[int, ...]:
    dims = params.space.dims
    if not isinstance(raw, list) or len(raw) != len(dims):
        raise ConfigError(f"initial_state: expected {len(dims)} integer labels [q1, q2, a, b, c]")
    labels = tuple(_coerce(v, int, "initial_state") for v in raw)
    if any(not 0 <= k < d for k, d in zip(labels, dims)):
        raise ConfigError(f"initial_state: labels {list(labels)} outside dimensions {list(dims)}")
    return labels


def config_from_dict(doc: dict) -> RunConfig:
    top = _Section(doc, "")
    experiment = top.pop("experiment", str)
    if experiment is None:
        raise ConfigError("experiment: missing required key")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    output_dir = top.pop("output_dir", str, "out")
    initial_state = top.pop("initial_state")
    t_end = _positive(top.scaled("t_end", ns, "_s", ns(1000.0)), "t_end")
    params = _parse_params(_Section(top.pop("params", default={}), "params"))
    schedule = None
    if "schedule" in top.table:
        schedule = _parse_schedule(_Section(top.pop("schedule"), "schedule"), params)
    integrator = _parse_integrator(_Section(top.pop("integrator", default={}), "integrator"))
    amp_sec = _Section(top.pop("amplitude", default={}), "amplitude")
    amplitudes = amp_sec.scaled_list("amps", mhz, "_rad_s", (mhz(2.0), mhz(3.0), mhz(4.0)))
    amp_sec.finish()
    sweep = None
    if "sweep" in top.table:
        sweep = _parse_sweep(_Section(top.pop("sweep"), "sweep"))
    elif experiment in ("detuning-sweep", "coupling-sweep"):
        raise ConfigError("sweep: missing required section")
    pulse = _parse_pulse(_Section(top.pop("pulse", default={}), "pulse"))
    top.finish()
    if initial_state is not None:
        initial_state = _parse_labels(initial_state, params)
    if experiment == "detuning-sweep" and sweep.parameter != "detuning":
        raise ConfigError("sweep.parameter: detuning-sweep needs parameter = \"detuning\"")
    if experiment == "coupling-sweep" and sweep.parameter != "lambda":
        raise ConfigError("sweep.parameter: coupling-sweep needs parameter = \"lambda\"")
    return RunConfig(experiment, params, schedule, integrator, output_dir, t_end, amplitudes, sweep, pulse,
                     initial_state)


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return config_from_dict(doc)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def resolved_dict(cfg: RunConfig) -> dict:
    """Fully resolved config in SI spellings; ``config_from_dict`` maps it back to ``cfg``."""
    params = {}
    for f in fields(cfg.params):
        v = getattr(cfg.params, f.name)
        if f.name in _INT_PARAMS:
            if v is not None:
                params[f.name] = v
        else:
            params[f.name + "_rad_s"] = v
    it = cfg.integrator
    doc = {
        "experiment": cfg.experiment,
        "output_dir": cfg.output_dir,
        "t_end_s": cfg.t_end,
        "params": params,
        "integrator": {"method": it.method, "dt_s": it.dt, "sample_interval_s": it.sample_interval,
                       "abs_tol": it.abs_tol, "rel_tol": it.rel_tol, "trace_tol": it.trace_tol,
                       "positivity_tol": it.positivity_tol},
        "amplitude": {"amps_rad_s": list(cfg.amplitudes)},
        "pulse": {"widths_s": list(cfg.pulse.widths), "intervals_s": list(cfg.pulse.intervals),
                  "n_pulses": cfg.pulse.n_pulses, "tail_s": cfg.pulse.tail},
    }
    if cfg.initial_state is not None:
        doc["initial_state"] = list(cfg.initial_state)
    if cfg.schedule is not None:
        s = cfg.schedule
        doc["schedule"] = {"kind": s.kind, "amp_rad_s": s.amp, "t_w_s": s.t_w, "tau_s": s.tau,
                           "n_pulses": s.n_pulses}
    if cfg.sweep is not None:
        doc["sweep"] = {"parameter": cfg.sweep.parameter, "values_si": list(cfg.sweep.values),
                        "method": cfg.sweep.method, "workers": cfg.sweep.workers}
    return doc


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(resolved_dict(cfg))
