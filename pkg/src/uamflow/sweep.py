"""Protocol sweep: simulate, measure, pool, fit, report for every configuration."""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .control import ControlConfig, ControlLaw
from .fd import FdFit, FilterConfig, FitError, envelope_slope, filter_and_fit, fit_document, parse_document
from .io import atomic_write_text, read_trajectory, write_trajectory
from .measure import FlowDensitySamples, MeasureConfig, accumulate, write_samples
from .scenario import ScenarioConfig, ScenarioType
from .sim import SimConfig, run

PROTOCOL_SPACINGS = {ControlLaw.STOP: (0.5, 0.6), ControlLaw.DETOUR: (0.6, 0.7)}

REPORT_COLUMNS = ("scenario", "control", "spacing", "n_samples_used", "v_f", "alpha", "k_c_analytic",
                  "q_max_analytic", "k_c_empirical", "q_max_empirical", "r2", "rmse")


@dataclass(frozen=True)
class SweepConfig:
    scenarios: tuple = (1, 2, 3)
    fleet_sizes: tuple = (2, 4, 6, 8)
    replications: int = 4
    duration: float = 50.0
    dt: float = 0.1
    speed: float = 0.5
    radius: float = 1.0
    n_flights: int = 1000
    n_candidates: int = 64
    base_seed: int = 0
    measure: MeasureConfig = field(default_factory=lambda: MeasureConfig(equal_area=True))
    filter: FilterConfig = field(default_factory=FilterConfig)


def run_seed(base: int, scenario: int, law: ControlLaw, spacing: float, n_drones: int, rep: int) -> int:
    law_idx = 0 if law is ControlLaw.STOP else 1
    ss = np.random.SeedSequence([base, scenario, law_idx, int(round(spacing * 1000)), n_drones, rep])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def config_dirname(scenario: int, law: ControlLaw, spacing: float) -> str:
    return f"s{scenario}_{law.value}_h{spacing:g}"


def configurations(cfg: SweepConfig):
    for sc in cfg.scenarios:
        for law in (ControlLaw.STOP, ControlLaw.DETOUR):
            for h in PROTOCOL_SPACINGS[law]:
                yield sc, law, h


def sim_config(cfg: SweepConfig, scenario: int, law: ControlLaw, spacing: float, n_drones: int, seed: int):
    return SimConfig(
        scenario=ScenarioConfig(ScenarioType.from_number(scenario), cfg.radius, n_drones, cfg.n_flights, seed),
        control=ControlConfig(law, spacing, cfg.n_candidates),
        dt=cfg.dt, n_steps=int(round(cfg.duration / cfg.dt)), cruise_speed=cfg.speed, radius=cfg.radius,
    )


def _manifest(command: str, config: dict, inputs=(), outputs=()) -> str:
    doc = {"tool": "uamflow", "version": __version__, "command": command, "config": config,
           "inputs": [str(p) for p in inputs], "outputs": [str(p) for p in outputs]}
    return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"


def run_configuration(cfg: SweepConfig, scenario: int, law: ControlLaw, spacing: float, outdir: Path) -> dict:
    """Simulate every (fleet size, replication), pool the samples and fit one FD."""
    cdir = outdir / config_dirname(scenario, law, spacing)
    cdir.mkdir(parents=True, exist_ok=True)
    parts = []
    files = []
    for n in cfg.fleet_sizes:
        for rep in range(cfg.replications):
            seed = run_seed(cfg.base_seed, scenario, law, spacing, n, rep)
            scfg = sim_config(cfg, scenario, law, spacing, n, seed)
            path = cdir / f"traj_I{n}_r{rep}.csv"
            write_trajectory(run(scfg), path)
            atomic_write_text(path.with_suffix(".manifest.json"),
                              _manifest("simulate", {"sim": asdict(scfg), "seed": seed}, outputs=[path.name]))
            traj = read_trajectory(path, cfg.dt, cfg.radius)
            parts.append(accumulate(traj, cfg.measure, run=path.stem))
            files.append(path.name)

    samples = FlowDensitySamples.concat(parts)
    write_samples(samples, cdir / "samples.csv")
    atomic_write_text(cdir / "samples.manifest.json",
                      _manifest("measure", {"measure": asdict(cfg.measure)}, inputs=files, outputs=["samples.csv"]))

    nz = samples.nonzero()
    echo = {"scenario": scenario, "control": law.value, "spacing": spacing, "bins": cfg.filter.n_bins,
            "percentile": cfg.filter.percentile, "mbar": cfg.measure.m_bar, "trim_start": cfg.measure.trim_start,
            "trim_end": cfg.measure.trim_end, "equal_area": cfg.measure.equal_area}
    result = {"scenario": scenario, "control": law.value, "spacing": spacing, "dir": cdir.name}
    try:
        result["envelope_slope"] = envelope_slope(nz.k, nz.q)
    except ValueError:
        result["envelope_slope"] = float("nan")
    try:
        fit, _ = filter_and_fit(nz.k, nz.q, cfg.filter)
    except FitError as exc:
        atomic_write_text(cdir / "fit_error.txt", f"{exc}\nv_f = {exc.v_f!r}\nalpha = {exc.alpha!r}\n")
        result["error"] = str(exc)
        return result
    atomic_write_text(cdir / "fit.txt", fit_document(fit, echo))
    result["fit"] = asdict(fit)
    return result


def _run_one(args):
    return run_configuration(*args)


def run_sweep(cfg: SweepConfig, outdir, jobs: int = 1, progress=None) -> list[dict]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, sc, law, h, outdir) for sc, law, h in configurations(cfg)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_run_one(t))
            if progress:
                progress(f"done {config_dirname(t[1], t[2], t[3])}")
    atomic_write_text(outdir / "sweep.manifest.json", _manifest("sweep", {"sweep": asdict(cfg)}))
    write_report(outdir)
    return results


# ---------------------------------------------------------------------------
# report


def collect_report(directory) -> tuple[list[dict], list[str]]:
    """One row per fit document under ``directory``; also returns the subdirectories lacking one."""
    directory = Path(directory)
    rows, missing = [], []
    for sub in sorted(p for p in directory.iterdir() if p.is_dir()):
        fit_path = sub / "fit.txt"
        if not fit_path.exists():
            missing.append(sub.name)
            continue
        doc = parse_document(fit_path.read_text())
        rows.append({c: doc.get(c, "NA") for c in REPORT_COLUMNS})
    rows.sort(key=lambda r: (r["scenario"], r["control"], r["spacing"]))
    return rows, missing


def report_text(rows: list[dict], missing: list[str]) -> tuple[str, str]:
    csv_lines = [",".join(REPORT_COLUMNS)]
    csv_lines += [",".join(str(r[c]) for c in REPORT_COLUMNS) for r in rows]

    def cell(c, v):
        if c in ("scenario", "control", "spacing", "n_samples_used") or v == "NA":
            return str(v)
        return f"{float(v):.4f}"

    table = [list(REPORT_COLUMNS)] + [[cell(c, r[c]) for c in REPORT_COLUMNS] for r in rows]
    widths = [max(len(row[j]) for row in table) for j in range(len(REPORT_COLUMNS))]
    txt = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in table]
    if missing:
        txt.append("")
        txt.append("missing fit.txt: " + ", ".join(missing))
    return "\n".join(csv_lines) + "\n", "\n".join(txt) + "\n"


def write_report(directory, stream=None) -> tuple[list[dict], list[str]]:
    directory = Path(directory)
    rows, missing = collect_report(directory)
    csv_text, txt = report_text(rows, missing)
    atomic_write_text(directory / "report.csv", csv_text)
    atomic_write_text(directory / "report.txt", txt)
    err = stream or sys.stderr
    if not rows:
        print(f"warning: no fit documents under {directory}", file=err)
    for m in missing:
        print(f"warning: {m} has no fit.txt", file=err)
    return rows, missing
