import json
import os
from pathlib import Path

import numpy as np
import pytest

from cavitytd.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def small_config(**overrides):
    config = {
        "scene": {
            "eps0": 1.0,
            "mu0": 1.0,
            "polarization": "TE",
            "cavities": [
                {"aperture": [-0.5, 0.5], "depth": 1.0, "epsilon": 1.0, "mu": 1.0}
            ],
        },
        "mesh": {"h": 0.2},
        "trace": {"L": 4.0, "N": 64},
        "incident": {
            "profile": {"kind": "gaussian-pulse", "center": 3.5, "width": 0.5},
            "theta": 1.5707963267948966,
        },
        "scheme": {"dt": 0.2, "steps": 32, "contour_tol": 1e-20},
        "sweep": {"s_values": [[1.0, 0.0], [2.0, 1.0]]},
        "probes": [[0.0, -0.5]],
        "snapshots": {"every": 16},
        "validate": {"trials": 40},
        "seed": 11,
    }
    config.update(overrides)
    return config


def write_config(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


class TestValidate:
    def test_shipped_reference_config(self, tmp_path):
        code = main(
            ["validate", "--config", str(CONFIG_DIR / "reference_single.json"),
             "--out", str(tmp_path)]
        )
        assert code == 0
        summary = (tmp_path / "validate_summary.txt").read_text()
        assert "FAIL" not in summary
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["passed"] is True

    def test_overlapping_apertures_exit_2(self, tmp_path):
        config = small_config()
        config["scene"]["cavities"] = [
            {"aperture": [0.0, 1.0], "depth": 1.0, "epsilon": 1.0, "mu": 1.0},
            {"aperture": [1.0, 2.0], "depth": 1.0, "epsilon": 1.0, "mu": 1.0},
        ]
        path = write_config(tmp_path, config)
        assert main(["validate", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path)]) == 2

    def test_malformed_json_exit_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["validate", "--config", str(path), "--out", str(tmp_path)]) == 2


class TestSolveFreq:
    def test_writes_solutions_and_report(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out = tmp_path / "out"
        assert main(["solve-freq", "--config", str(path), "--out", str(out)]) == 0
        files = sorted(p.name for p in out.glob("solution_*.csv"))
        assert files == ["solution_s000_cavity0.csv", "solution_s001_cavity0.csv"]
        report = (out / "estimate_report.csv").read_text().splitlines()
        assert report[0] == "s1,s2,lhs,rhs,ratio"
        assert len(report) == 3

    def test_sweep_count_contract(self, tmp_path):
        config = small_config(sweep={"s_re": [0.5, 4.0], "count": 20, "s_im": 0.0})
        path = write_config(tmp_path, config)
        out = tmp_path / "out"
        assert main(["solve-freq", "--config", str(path), "--out", str(out)]) == 0
        assert len(list(out.glob("solution_*.csv"))) == 20
        assert len((out / "estimate_report.csv").read_text().splitlines()) == 21

    def test_nonpositive_sweep_frequency_exit_2(self, tmp_path):
        config = small_config(sweep={"s_values": [[-1.0, 0.0]]})
        path = write_config(tmp_path, config)
        assert main(["solve-freq", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_zero_amplitude_zero_field_files(self, tmp_path):
        config = small_config()
        config["incident"]["profile"]["amplitude"] = 0.0
        path = write_config(tmp_path, config)
        out = tmp_path / "out"
        assert main(["solve-freq", "--config", str(path), "--out", str(out),
                     "--s", "1+0j"]) == 0
        field = np.loadtxt(out / "solution_s000_cavity0.csv", delimiter=",", skiprows=1)
        assert np.all(field[:, 2:] == 0.0)

    def test_s_flag_override(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out = tmp_path / "out"
        assert main(["solve-freq", "--config", str(path), "--out", str(out),
                     "--s", "1+0.5j"]) == 0
        assert len(list(out.glob("solution_*.csv"))) == 1

    def test_byte_identical_reruns(self, tmp_path):
        path = write_config(tmp_path, small_config())
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["solve-freq", "--config", str(path), "--out", str(out)]) == 0
            outs.append((out / "estimate_report.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_threads_byte_identical(self, tmp_path):
        config = small_config(sweep={"s_re": [0.5, 4.0], "count": 6, "s_im": 0.5})
        path = write_config(tmp_path, config)
        blobs = []
        for run, threads in (("a", "1"), ("b", "3")):
            out = tmp_path / run
            assert main(["solve-freq", "--config", str(path), "--out", str(out),
                         "--threads", threads]) == 0
            blobs.append((out / "estimate_report.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_tm_scene_exit_2(self, tmp_path):
        config = small_config()
        config["scene"]["polarization"] = "TM"
        path = write_config(tmp_path, config)
        assert main(["solve-freq", "--config", str(path), "--out", str(tmp_path)]) == 2


class TestSolveTime:
    def test_zero_amplitude_all_zero(self, tmp_path):
        config = small_config()
        config["incident"]["profile"]["amplitude"] = 0.0
        path = write_config(tmp_path, config)
        out = tmp_path / "out"
        assert main(["solve-time", "--config", str(path), "--out", str(out)]) == 0
        probes = np.loadtxt(out / "probes.csv", delimiter=",", skiprows=1)
        assert np.all(probes[:, 1] == 0.0)
        energy = np.loadtxt(out / "energy.csv", delimiter=",", skiprows=1)
        assert np.all(energy[:, 1] == 0.0)

    def test_reference_outputs(self, tmp_path):
        path = write_config(tmp_path, small_config(scheme={"dt": 0.125, "steps": 64,
                                                           "contour_tol": 1e-20}))
        out = tmp_path / "out"
        assert main(["solve-time", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "energy.csv").exists()
        assert (out / "probes.csv").exists()
        assert (out / "stability_report.csv").exists()
        snapshots = list(out.glob("snapshot_*.vtk"))
        assert len(snapshots) == 5  # steps 0, 16, 32, 48, 64
        head = snapshots[0].read_text().splitlines()
        assert head[0].startswith("# vtk DataFile")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["checks"]["causality"] is True
        assert manifest["checks"]["realness"] is True

    def test_deterministic_probes(self, tmp_path):
        path = write_config(tmp_path, small_config())
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["solve-time", "--config", str(path), "--out", str(out)]) == 0
            blobs.append((out / "probes.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_causality_violation_exit_1(self, tmp_path):
        # A contour radius too close to one folds the late-time field back
        # into t = 0; the run must fail loudly with exit 1.
        config = small_config(scheme={"dt": 0.2, "steps": 32, "contour_tol": 1e-3})
        path = write_config(tmp_path, config)
        assert main(["solve-time", "--config", str(path), "--out", str(tmp_path)]) == 1

    def test_threads_flag(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        assert main(["solve-time", "--config", str(path), "--out", str(out1)]) == 0
        assert main(["solve-time", "--config", str(path), "--out", str(out2),
                     "--threads", "2"]) == 0
        assert (out1 / "probes.csv").read_bytes() == (out2 / "probes.csv").read_bytes()


class TestMeshExport:
    def test_roundtrip(self, tmp_path):
        path = write_config(tmp_path, small_config())
        out = tmp_path / "out"
        assert main(["mesh-export", "--config", str(path), "--out", str(out)]) == 0
        from cavitytd.scene import load_mesh

        mesh = load_mesh(out / "cavity0.mesh.txt")
        assert mesh.n_vertices > 0

    def test_env_override(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, small_config())
        env_out = tmp_path / "env_out"
        monkeypatch.setenv("CAVITY_TD_OUT", str(env_out))
        assert main(["mesh-export", "--config", str(path),
                     "--out", str(tmp_path / "ignored")]) == 0
        assert (env_out / "cavity0.mesh.txt").exists()
        assert not (tmp_path / "ignored").exists()
