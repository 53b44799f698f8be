"""Command-line entry point: ``freqdiv {simulate,sweep,steady,pulse,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .algebra import DensityMatrix
from .config import (
    SWEEP_UNIT_LABELS, ConfigError, RunConfig, config_from_dict, load_config, resolved_dict, sweep_unit,
)
from .dynamics import (
    DegenerateSteadyStateError, IntegrationDivergedError, PositivityViolationError, integrate, observables,
    steady_state_direct,
)
from .experiments import (
    SweepSpec, amplitude_study_summary, apply_sweep_value, conversion_efficiency, coupling_curve_summary,
    detuning_curve_summary, run_amplitude_study, run_pulse_study, run_sweep,
)
from .tables import emit_plot_script, emit_sweep_csv, emit_timeseries_csv, fmt
from .units import to_mhz, to_ns

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

COMMAND_EXPERIMENTS = {
    "simulate": ("simulate", "amplitude-study"),
    "sweep": ("detuning-sweep", "coupling-sweep"),
    "steady": ("steady-state",),
    "pulse": ("pulse-study",),
}

DEFAULT_DOCS = {
    "simulate": {"experiment": "simulate"},
    "sweep": {"experiment": "detuning-sweep",
              "sweep": {"parameter": "detuning", "start": -80.0, "stop": 80.0, "num": 41}},
    "steady": {"experiment": "steady-state"},
    "pulse": {"experiment": "pulse-study",
              "params": {"drive_amp": 7.0, "omega_q1": 4.096, "omega_q2": 4.096,
                         "omega_b": 4.096, "omega_c": 4.096}},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqdiv", description="Two-qubit microwave frequency divider simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("simulate", "time evolution (single run or amplitude study)"),
                            ("sweep", "conversion-efficiency sweep"),
                            ("steady", "steady state of a continuously driven divider"),
                            ("pulse", "square-pulse trains"),
                            ("validate", "cross-check integrators against reference solutions")):
        p = sub.add_parser(name, help=help_text)
        if name == "validate":
            continue
        p.add_argument("--config", type=Path, help="TOML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--truncation", type=int, help="Fock levels per resonator (overrides params.n_tr)")
        p.add_argument("--method", choices=("rk4", "rk45", "expm"), help="integration method")
        p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    return parser


def resolve_config(args) -> RunConfig:
    if args.config is not None:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    else:
        cfg = config_from_dict(json.loads(json.dumps(DEFAULT_DOCS[args.command])))
    if cfg.experiment not in COMMAND_EXPERIMENTS[args.command]:
        raise ConfigError(f"experiment: {cfg.experiment!r} cannot run under the {args.command!r} command")
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    if args.truncation is not None:
        if args.truncation < 2:
            raise ConfigError("--truncation: must be >= 2")
        cfg = replace(cfg, params=cfg.params.replace(n_tr=args.truncation))
    if args.method is not None:
        cfg = replace(cfg, integrator=replace(cfg.integrator, method=args.method))
    return cfg


def _series_summary(ts) -> dict:
    return {name: float(ts[name][-1]) for name in ("n_a", "n_b", "n_c", "P_1", "P_2")} if len(ts) else {}


def run_simulate(cfg: RunConfig, out: Path, plots: bool) -> tuple[list[Path], dict]:
    files, labelled = [], []
    if cfg.experiment == "simulate":
        rho0 = None if cfg.initial_state is None else DensityMatrix.basis_state(cfg.params.space, cfg.initial_state)
        ts = integrate(rho0, cfg.params, cfg.drive, cfg.t_end, cfg.integrator)
        csv = emit_timeseries_csv(ts, out / "timeseries.csv")
        files += [csv, emit_plot_script(csv, "timeseries")]
        labelled.append(("", ts))
        summary = {"final": _series_summary(ts)}
    else:
        runs = run_amplitude_study(cfg.amplitudes, cfg.params, cfg.integrator)
        summary = {"plateaus": {}}
        for r in runs:
            tag = f"amp_{fmt(to_mhz(r.amp))}MHz"
            csv = emit_timeseries_csv(r.series, out / f"{tag}.csv")
            files += [csv, emit_plot_script(csv, "timeseries")]
            labelled.append((f"{fmt(to_mhz(r.amp))} MHz", r.series))
            summary["plateaus"][tag] = dict(r.steady.as_dict(), converged=r.steady.converged)
        summary.update(amplitude_study_summary(runs, cfg.params.g3))
    if plots:
        from .plotting import render_timeseries
        files.append(render_timeseries(labelled, out / "timeseries.png"))
    return files, summary


def run_sweep_command(cfg: RunConfig, out: Path, plots: bool) -> tuple[list[Path], dict]:
    sw = cfg.sweep
    spec = SweepSpec(sw.parameter, sw.values, cfg.params, cfg.schedule, method=sw.method)
    points = run_sweep(spec, cfg.integrator, sw.workers)
    unit = sweep_unit(sw.parameter)
    csv = emit_sweep_csv(points, out / "sweep.csv", unit)
    files = [csv, emit_plot_script(csv, "efficiency", xlabel=SWEEP_UNIT_LABELS[sw.parameter])]
    if plots:
        from .plotting import render_efficiency
        files.append(render_efficiency(points, out / "sweep.png", unit, SWEEP_UNIT_LABELS[sw.parameter]))
    summary = detuning_curve_summary(points) if sw.parameter == "detuning" else coupling_curve_summary(points)
    if sw.parameter == "detuning":
        summary["peaks"] = [v / unit for v in summary["peaks"]]
    elif "argmax" in summary:
        summary["argmax"] = summary["argmax"] / unit
    summary["points"] = [
        {"swept_value": pt.value / unit, "T": pt.T, "converged": pt.converged,
         "params": apply_sweep_value(sw.parameter, pt.value, cfg.params, cfg.schedule)[0].as_dict()}
        for pt in points
    ]
    return files, summary


def run_steady(cfg: RunConfig, out: Path, plots: bool) -> tuple[list[Path], dict]:
    obs = observables(steady_state_direct(cfg.params))
    T = conversion_efficiency(max(obs["n_b"], 0.0), max(obs["n_c"], 0.0), cfg.params) \
        if cfg.params.drive_amp > 0 else 0.0
    obs["T"] = T
    path = out / "steady.csv"
    path.write_text("quantity,value\n" + "".join(f"{k},{fmt(v)}\n" for k, v in obs.items()))
    return [path], obs


def run_pulse(cfg: RunConfig, out: Path, plots: bool) -> tuple[list[Path], dict]:
    pc = cfg.pulse
    runs = run_pulse_study(pc.widths, pc.intervals, cfg.params, pc.n_pulses, tail=pc.tail, cfg=cfg.integrator)
    files, labelled, summary = [], [], {"runs": []}
    for r in runs:
        tag = f"pulse_tw{fmt(to_ns(r.schedule.t_w))}ns_tau{fmt(to_ns(r.schedule.tau))}ns"
        csv = emit_timeseries_csv(r.series, out / f"{tag}.csv")
        files += [csv, emit_plot_script(csv, "timeseries")]
        labelled.append((f"t_w={fmt(to_ns(r.schedule.t_w))} tau={fmt(to_ns(r.schedule.tau))}", r.series))
        summary["runs"].append({"t_w_ns": to_ns(r.schedule.t_w), "tau_ns": to_ns(r.schedule.tau),
                                "n_pulses": r.schedule.n_pulses, "max_n_b": r.max_n_b, "peaks_n_b": r.peaks})
    if plots:
        from .plotting import render_timeseries
        files.append(render_timeseries(labelled, out / "pulses.png"))
    return files, summary


def run_validate() -> int:
    from .oracle import validation_suite
    ok = True
    for name, passed, detail in validation_suite():
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_NUMERICAL


RUNNERS = {"simulate": run_simulate, "sweep": run_sweep_command, "steady": run_steady, "pulse": run_pulse}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return run_validate()
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        files, summary = RUNNERS[args.command](cfg, out, not args.no_plots)
    except (IntegrationDivergedError, PositivityViolationError, DegenerateSteadyStateError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = {
        "tool": "freqdiv",
        "version": __version__,
        "command": args.command,
        "config": resolved_dict(cfg),
        "wall_time_s": time.perf_counter() - start,
        "outputs": [p.name for p in files],
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=float) + "\n")
    print(f"wrote {len(files)} files and manifest.json to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
