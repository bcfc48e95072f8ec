"""Command-line driver: simulate -> measure -> fit -> scale -> report.

Exit codes: 0 success, 2 usage error, 3 data-integrity error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .control import ControlConfig, ControlLaw
from .fd import (FilterConfig, FitError, ScaleFactors, drake_eval, filter_and_fit, fit_document, fit_from_document,
                 parse_document, scaled_summary)
from .geom import DegenerateGeometryError
from .io import DataIntegrityError, atomic_write_text, fmt_float, read_trajectory, write_trajectory
from .measure import FlowDensitySamples, MeasureConfig, accumulate, read_samples, write_samples
from .scenario import ScenarioConfig, ScenarioType
from .sim import SimConfig, SimulationError, run

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
OUTDIR_ENV = "UAMFLOW_OUTDIR"


class UsageError(Exception):
    pass


def _out_path(value, default_name: str) -> Path:
    base = Path(os.environ.get(OUTDIR_ENV, "."))
    if value is None:
        return base / default_name
    p = Path(value)
    return p if p.is_absolute() else base / p


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _write_manifest(out: Path, command: str, config: dict, inputs=(), seed=None) -> None:
    doc = {"tool": "uamflow", "version": __version__, "command": command, "config": config, "seed": seed,
           "inputs": [str(p) for p in inputs], "outputs": [str(out)]}
    atomic_write_text(_manifest_path(out), json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if hasattr(o, "value"):
        return o.value
    return str(o)


def _positive(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return conv


def _nonneg(name):
    def conv(text):
        v = float(text)
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be non-negative")
        return v
    return conv


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.config:
        scen = ScenarioConfig.from_text(Path(args.config).read_text())
    else:
        scen = ScenarioConfig(ScenarioType.from_number(args.scenario), args.radius, args.drones, args.flights,
                              args.seed, args.zone_half_angle)
    n_steps = int(round(args.duration / args.dt))
    if n_steps < 1:
        raise UsageError("--duration must cover at least one time step")
    cfg = SimConfig(scen, ControlConfig(args.control, args.spacing, args.candidates), args.dt, n_steps,
                    args.speed, args.radius)
    out = _out_path(args.out, "trajectory.csv")
    write_trajectory(run(cfg), out)
    _write_manifest(out, "simulate", {"sim": asdict(cfg)}, seed=scen.rng_seed)
    return 0


def cmd_measure(args) -> int:
    cfg = MeasureConfig(args.mbar, args.trim_start, args.trim_end, args.dt, args.radius, args.equal_area)
    paths = [Path(p) for p in args.inputs.split(",") if p]
    if not paths:
        raise UsageError("--in needs at least one trajectory file")
    parts = []
    for p in paths:
        try:
            traj = read_trajectory(p, cfg.dt, cfg.radius)
            parts.append(accumulate(traj, cfg, run=p.stem))
        except DataIntegrityError as exc:
            raise DataIntegrityError(f"{p}: {exc}") from exc
    samples = FlowDensitySamples.concat(parts)
    out = _out_path(args.out, "samples.csv")
    write_samples(samples, out)
    _write_manifest(out, "measure", {"measure": asdict(cfg)}, inputs=paths)
    return 0


def _samples_echo(path: Path) -> dict:
    echo = {"mbar": "NA", "trim_start": "NA", "trim_end": "NA"}
    mpath = _manifest_path(path)
    if mpath.exists():
        m = json.loads(mpath.read_text()).get("config", {}).get("measure", {})
        echo.update(mbar=m.get("m_bar", "NA"), trim_start=m.get("trim_start", "NA"), trim_end=m.get("trim_end", "NA"))
    return echo


def cmd_fit(args) -> int:
    path = Path(args.inputs)
    samples = read_samples(path).nonzero()
    if len(samples) == 0:
        raise DataIntegrityError(f"{path}: no occupied cells to fit")
    fcfg = FilterConfig(args.bins, args.percentile)
    fit, keep = filter_and_fit(samples.k, samples.q, fcfg)
    echo = _samples_echo(path)
    echo.update(bins=fcfg.n_bins, percentile=fcfg.percentile)
    for tag in args.tag or []:
        key, sep, value = tag.partition("=")
        if not sep:
            raise UsageError(f"--tag expects key=value, got {tag!r}")
        echo[key.strip()] = value.strip()
    out = _out_path(args.out, "fit.txt")
    atomic_write_text(out, fit_document(fit, echo))
    _write_manifest(out, "fit", {"filter": asdict(fcfg), "tags": args.tag or []}, inputs=[path])

    if args.plot_data:
        kk, qq = samples.k[keep], samples.q[keep]
        grid = np.linspace(0.0, float(samples.k.max()), 200)
        lines = ["kind,k,q"]
        lines += [f"point,{fmt_float(a)},{fmt_float(b)}" for a, b in zip(kk, qq)]
        lines += [f"curve,{fmt_float(a)},{fmt_float(b)}" for a, b in zip(grid, drake_eval(grid, fit.v_f, fit.alpha))]
        atomic_write_text(_out_path(args.plot_data, "plot.csv"), "\n".join(lines) + "\n")
    return 0


def cmd_scale(args) -> int:
    try:
        factors = ScaleFactors.from_physical(args.size_from, args.size_to, args.speed_from, args.speed_to)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fd_path = Path(args.fd)
    doc = parse_document(fd_path.read_text())
    fit = fit_from_document(doc)
    scaled = scaled_summary(fit, factors, empirical=not args.analytic)
    config = {k: v for k, v in doc.items() if k not in ("rmse_unit",) and k not in asdict(fit)}
    config = {k: v for k, v in config.items() if k not in ("delta_eta", "delta_v", "v_f_scaled",
                                                           "k_c_scaled_per_km2", "q_max_scaled_per_km_h")}
    config["scaled_pair"] = "analytic" if args.analytic else "empirical"
    text = fit_document(fit, config, scaled, factors)
    if args.out:
        out = _out_path(args.out, "fit_scaled.txt")
        atomic_write_text(out, text)
        _write_manifest(out, "scale", {"factors": asdict(factors), "analytic": args.analytic}, inputs=[fd_path])
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    from .sweep import write_report

    directory = Path(args.dir)
    if not directory.is_dir():
        raise UsageError(f"{directory} is not a directory")
    rows, _ = write_report(directory)
    sys.stdout.write((directory / "report.txt").read_text())
    return 0


def cmd_sweep(args) -> int:
    from .sweep import SweepConfig, run_sweep

    cfg = SweepConfig(
        fleet_sizes=tuple(int(x) for x in args.drones.split(",")),
        replications=args.replications,
        duration=args.duration,
        base_seed=args.seed,
        measure=MeasureConfig(args.mbar, args.trim_start, 0.0, 0.1, 1.0, args.area == "equal"),
        filter=FilterConfig(args.bins, args.percentile),
    )
    out = _out_path(args.out, "sweep")
    results = run_sweep(cfg, out, jobs=args.jobs, progress=lambda m: print(m, file=sys.stderr))
    sys.stdout.write((out / "report.txt").read_text())
    return EXIT_NUMERIC if any("error" in r for r in results) else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uamflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"uamflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation and write a trajectory CSV")
    s.add_argument("--drones", type=int, default=4)
    s.add_argument("--scenario", type=int, choices=(1, 2, 3), default=1)
    s.add_argument("--control", choices=[c.value for c in ControlLaw], default="stop")
    s.add_argument("--spacing", type=_positive("--spacing"), default=0.5)
    s.add_argument("--dt", type=_positive("--dt"), default=0.1)
    s.add_argument("--speed", type=_positive("--speed"), default=0.5)
    s.add_argument("--radius", type=_positive("--radius"), default=1.0)
    s.add_argument("--duration", type=_positive("--duration"), default=50.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--flights", type=int, default=1000)
    s.add_argument("--candidates", type=int, default=64)
    s.add_argument("--zone-half-angle", type=float, default=np.pi / 3)
    s.add_argument("--config", help="scenario config file (key=value); overrides scenario flags")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("measure", help="Edie flow/density samples from trajectory CSVs")
    m.add_argument("--in", dest="inputs", required=True, help="comma-separated trajectory files")
    m.add_argument("--mbar", type=int, default=7)
    m.add_argument("--trim-start", type=_nonneg("--trim-start"), default=15.0)
    m.add_argument("--trim-end", type=_nonneg("--trim-end"), default=0.0)
    m.add_argument("--dt", type=_positive("--dt"), default=0.1)
    m.add_argument("--radius", type=_positive("--radius"), default=1.0)
    m.add_argument("--equal-area", action="store_true", help="use the mean cell area for every cell")
    m.add_argument("--out")
    m.set_defaults(func=cmd_measure)

    f = sub.add_parser("fit", help="filter samples and fit Drake's model")
    f.add_argument("--in", dest="inputs", required=True)
    f.add_argument("--bins", type=int, default=20)
    f.add_argument("--percentile", type=float, default=75.0)
    f.add_argument("--out")
    f.add_argument("--plot-data")
    f.add_argument("--tag", action="append", help="key=value echoed into the fit document")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("scale", help="scale a fit to another vehicle size and cruise speed")
    c.add_argument("--fd", required=True)
    c.add_argument("--size-from", type=float, default=0.1)
    c.add_argument("--size-to", type=float, default=2.0)
    c.add_argument("--speed-from", type=float, default=0.5)
    c.add_argument("--speed-to", type=float, default=10.0)
    c.add_argument("--analytic", action="store_true", help="scale the analytic (k_c, q_max) pair")
    c.add_argument("--out")
    c.set_defaults(func=cmd_scale)

    r = sub.add_parser("report", help="aggregate fit documents of a sweep directory")
    r.add_argument("--dir", required=True)
    r.set_defaults(func=cmd_report)

    w = sub.add_parser("sweep", help="run the full simulation protocol")
    w.add_argument("--out")
    w.add_argument("--drones", default="2,4,6,8")
    w.add_argument("--replications", type=int, default=4)
    w.add_argument("--duration", type=_positive("--duration"), default=50.0)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--mbar", type=int, default=7)
    w.add_argument("--trim-start", type=_nonneg("--trim-start"), default=15.0)
    w.add_argument("--area", choices=("equal", "exact"), default="equal")
    w.add_argument("--bins", type=int, default=20)
    w.add_argument("--percentile", type=float, default=75.0)
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataIntegrityError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, SimulationError, DegenerateGeometryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"uamflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
