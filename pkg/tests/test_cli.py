import json
import math
import subprocess
import sys

import numpy as np
import pytest

from uamflow.cli import main
from uamflow.fd import parse_document
from uamflow.io import write_trajectory
from uamflow.measure import read_samples

from conftest import equator_orbit


def simulate(out, *extra):
    return main(["simulate", "--drones", "4", "--scenario", "1", "--control", "stop", "--spacing", "0.5",
                 "--seed", "7", "--duration", "20", "--out", str(out), *extra])


def test_simulate_deterministic(tmp_path):
    assert simulate(tmp_path / "a.csv") == 0
    assert simulate(tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 7


def test_negative_spacing_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        simulate(tmp_path / "x.csv", "--spacing", "-1")
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_bad_scale_factor_is_usage_error(tmp_path, capsys):
    assert main(["scale", "--fd", str(tmp_path / "none.txt"), "--size-from", "0"]) == 2
    assert "usage" in capsys.readouterr().err


def test_outdir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("UAMFLOW_OUTDIR", str(tmp_path))
    assert simulate("rel.csv") == 0
    assert (tmp_path / "rel.csv").exists()


def test_measure_free_flight(tmp_path):
    traj = equator_orbit(500)
    write_trajectory(traj, tmp_path / "orbit.csv")
    out = tmp_path / "samples.csv"
    assert main(["measure", "--in", str(tmp_path / "orbit.csv"), "--mbar", "7", "--trim-start", "15",
                 "--out", str(out)]) == 0
    s = read_samples(out)
    assert len(s) == 49
    nz = s.k > 0
    assert np.allclose(s.q[nz] / s.k[nz], 0.5, rtol=5e-3)
    # 350 in-window steps spread over the visited cells
    assert math.isclose(float(np.sum(s.k * s.area)) * 350 * 0.1, 35.0, rel_tol=1e-12)


def test_measure_pools_files(tmp_path):
    paths = []
    for n in range(2):
        p = tmp_path / f"t{n}.csv"
        write_trajectory(equator_orbit(200, lead=0.5 + n), p)
        paths.append(str(p))
    assert main(["measure", "--in", ",".join(paths), "--trim-start", "0", "--out", str(tmp_path / "s.csv")]) == 0
    s = read_samples(tmp_path / "s.csv")
    assert len(s) == 98 and sorted(set(s.run)) == ["t0", "t1"]


def test_measure_gap_is_data_error(tmp_path, capsys):
    (tmp_path / "g.csv").write_text("id,time,px,py,pz,dest_px,dest_py,dest_pz\n"
                                    "1,0,1,0,0,0,1,0\n1,0.3,1,0,0,0,1,0\n")
    assert main(["measure", "--in", str(tmp_path / "g.csv"), "--out", str(tmp_path / "s.csv")]) == 3
    assert "g.csv:3" in capsys.readouterr().err


def drake_samples(path, n=60, seed=0):
    rng = np.random.default_rng(seed)
    k = np.linspace(0.05, 3.0, n)
    q = k * 0.43 * np.exp(-k) * (1 + 0.03 * rng.standard_normal(n))
    lines = ["run,region_id,theta_bin,phi_bin,area_m2,k,q"]
    lines += [f"x,{j},{j // 8},{j % 8},0.2,{float(k[j])!r},{float(q[j])!r}" for j in range(n)]
    path.write_text("\n".join(lines) + "\n")


def test_fit_and_plot_data(tmp_path):
    drake_samples(tmp_path / "s.csv")
    out, plot = tmp_path / "fit.txt", tmp_path / "plot.csv"
    assert main(["fit", "--in", str(tmp_path / "s.csv"), "--bins", "1", "--percentile", "0", "--out", str(out),
                 "--plot-data", str(plot), "--tag", "scenario=1"]) == 0
    doc = parse_document(out.read_text())
    assert int(doc["n_samples_used"]) == 60
    assert float(doc["v_f"]) == pytest.approx(0.43, rel=0.05)
    assert doc["scenario"] == "1"
    rows = plot.read_text().splitlines()
    assert rows[0] == "kind,k,q"
    assert len(rows) - 1 == int(doc["n_samples_used"]) + 200


def test_fit_failure_exit_code(tmp_path):
    k = np.linspace(0.1, 2.0, 30)
    lines = ["run,region_id,theta_bin,phi_bin,area_m2,k,q"]
    lines += [f"x,{j},0,{j},0.2,{float(k[j])!r},{float(k[j]) ** 2!r}" for j in range(30)]
    (tmp_path / "s.csv").write_text("\n".join(lines) + "\n")
    assert main(["fit", "--in", str(tmp_path / "s.csv"), "--bins", "1", "--percentile", "0",
                 "--out", str(tmp_path / "f.txt")]) == 4


def test_scale(tmp_path, capsys):
    drake_samples(tmp_path / "s.csv")
    main(["fit", "--in", str(tmp_path / "s.csv"), "--out", str(tmp_path / "fit.txt")])
    capsys.readouterr()
    assert main(["scale", "--fd", str(tmp_path / "fit.txt"), "--size-from", "1", "--size-to", "1",
                 "--speed-from", "1", "--speed-to", "1"]) == 0
    doc = parse_document(capsys.readouterr().out)
    assert float(doc["v_f_scaled"]) == float(doc["v_f"])
    assert float(doc["q_max_scaled_per_km_h"]) == pytest.approx(float(doc["q_max_empirical"]) * 3.6e6, rel=1e-12)
    assert main(["scale", "--fd", str(tmp_path / "fit.txt"), "--out", str(tmp_path / "scaled.txt")]) == 0
    scaled = parse_document((tmp_path / "scaled.txt").read_text())
    assert float(scaled["delta_eta"]) == pytest.approx(20.0) and float(scaled["delta_v"]) == pytest.approx(20.0)


def test_report_empty_dir(tmp_path, capsys):
    assert main(["report", "--dir", str(tmp_path)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert (tmp_path / "report.csv").read_text().count("\n") == 1


def test_report_lists_missing(tmp_path, capsys):
    drake_samples(tmp_path / "s.csv")
    (tmp_path / "s1_stop_h0.5").mkdir()
    (tmp_path / "s2_stop_h0.5").mkdir()
    main(["fit", "--in", str(tmp_path / "s.csv"), "--out", str(tmp_path / "s1_stop_h0.5" / "fit.txt"),
          "--tag", "scenario=1", "--tag", "control=stop", "--tag", "spacing=0.5"])
    assert main(["report", "--dir", str(tmp_path)]) == 0
    first = (tmp_path / "report.csv").read_bytes()
    assert "s2_stop_h0.5" in capsys.readouterr().err
    assert len(first.splitlines()) == 2
    main(["report", "--dir", str(tmp_path)])
    assert (tmp_path / "report.csv").read_bytes() == first


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "uamflow", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "uamflow" in res.stdout
