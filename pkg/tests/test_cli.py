"""End-to-end command-line tests on small configurations."""

import json

import numpy as np
import pytest
import yaml

from tvgpucb.cli import main
from tvgpucb.traces import read_trace_csv


def write_config(tmp_path, **overrides):
    cfg = {
        "name": "t",
        "horizon": 6,
        "seeds": 2,
        "output_dir": str(tmp_path / "out"),
        "environment": {
            "kind": "synthetic_rkhs",
            "domain": [-50.0, 50.0],
            "n_centers": 5,
            "sigma_sq": 0.1,
        },
        "kernel": {"amplitude_sq": 0.5, "lengthscale": 3.0},
        "candidates": {"grid_size": 25},
        "policy_defaults": {"alpha": 1.0},
        "policies": [
            {"variant": "SPARQ", "budget_c": 1.0},
            {"variant": "SW_GP_UCB", "params": {"window": 3}},
        ],
    }
    cfg.update(overrides)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p, cfg


class TestValidate:
    def test_ok(self, tmp_path, capsys):
        p, _ = write_config(tmp_path)
        assert main(["validate", str(p)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_bad_variant_exits_two(self, tmp_path):
        p, _ = write_config(tmp_path, policies=[{"variant": "NOPE"}])
        assert main(["validate", str(p)]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.yaml")]) == 2

    def test_missing_window_exits_two(self, tmp_path):
        p, _ = write_config(tmp_path, policies=[{"variant": "SW_GP_UCB"}])
        assert main(["validate", str(p)]) == 2


class TestRun:
    def test_artifacts(self, tmp_path):
        p, cfg = write_config(tmp_path)
        assert main(["run", str(p)]) == 0
        out = tmp_path / "out"
        names = {f.name for f in out.iterdir()}
        assert "summary.csv" in names and "mean_regret.csv" in names
        for variant in ("SPARQ", "SW_GP_UCB"):
            for seed in (0, 1):
                assert f"trace_{variant}_{seed}.csv" in names
        trace = read_trace_csv(out / "trace_SPARQ_0.csv")
        assert len(trace) == 6
        assert trace.config_snapshot["policy"]["variant"] == "SPARQ"
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0] == "variant,seed,status,final_regret,total_queries,error"
        assert len(lines) == 5

    def test_byte_identical_reruns(self, tmp_path):
        p, _ = write_config(tmp_path)
        assert main(["run", str(p)]) == 0
        out = tmp_path / "out"
        first = {f.name: f.read_bytes() for f in out.glob("trace_*.csv")}
        assert main(["run", str(p)]) == 0
        for f in out.glob("trace_*.csv"):
            assert f.read_bytes() == first[f.name]

    def test_parallel_matches_serial(self, tmp_path):
        p1, _ = write_config(tmp_path, output_dir=str(tmp_path / "serial"))
        assert main(["run", str(p1)]) == 0
        p2, _ = write_config(
            tmp_path, output_dir=str(tmp_path / "parallel"), parallelism=2
        )
        assert main(["run", str(p2)]) == 0
        for f in (tmp_path / "serial").glob("trace_*.csv"):
            twin = tmp_path / "parallel" / f.name
            assert twin.read_bytes() == f.read_bytes()

    def test_output_root_env_override(self, tmp_path, monkeypatch):
        p, _ = write_config(tmp_path)
        monkeypatch.setenv("TVGPUCB_OUTPUT_ROOT", str(tmp_path / "root"))
        assert main(["run", str(p)]) == 0
        assert (tmp_path / "root" / "out" / "summary.csv").exists()

    def test_failed_run_exits_one(self, tmp_path):
        # grid_csv with a 3-step file cannot serve a horizon of 6.
        series = tmp_path / "series.csv"
        rows = ["t,x1,value"]
        for t in (1, 2, 3):
            for x in (0.0, 1.0):
                rows.append(f"{t},{x},{t + x}")
        series.write_text("\n".join(rows) + "\n")
        p, _ = write_config(
            tmp_path,
            environment={"kind": "grid_csv", "csv_path": str(series), "sigma_sq": 0.1},
        )
        assert main(["run", str(p)]) == 1
        summary = (tmp_path / "out" / "summary.csv").read_text()
        assert "failed" in summary


class TestAnalyze:
    def test_reports(self, tmp_path):
        p, _ = write_config(tmp_path)
        assert main(["run", str(p)]) == 0
        out = tmp_path / "out"
        assert main(["analyze", str(out), "--overlay", "BANDIT_UPPER"]) == 0
        an = out / "analysis"
        assert (an / "regret_curves.csv").exists()
        assert (an / "query_rates.csv").exists()
        assert (an / "overlays.csv").exists()
        rates = (an / "query_rates.csv").read_text().splitlines()
        assert rates[0] == "variant,seed,T,total_queries,queries_per_step"
        assert len(rates) == 5

    def test_empty_dir_exits_two(self, tmp_path):
        assert main(["analyze", str(tmp_path)]) == 2


class TestSweep:
    def test_subdirectories_per_value(self, tmp_path):
        p, _ = write_config(tmp_path, seeds=1, policies=[{"variant": "GP_UCB"}])
        code = main(["sweep", str(p), "--param", "policy_defaults.alpha=0.5,1.0"])
        assert code == 0
        base = tmp_path / "out"
        for v in ("0.5", "1.0"):
            assert (base / f"policy_defaults_alpha_{v}" / "summary.csv").exists()

    def test_bad_param_exits_two(self, tmp_path):
        p, _ = write_config(tmp_path)
        assert main(["sweep", str(p), "--param", "no_values"]) == 2


class TestAdversary:
    def test_json_report(self, tmp_path, capsys):
        code = main([
            "adversary", "--gamma", "9e-5", "--lengthscale", "0.15",
            "--domain", "0", "1", "--out", str(tmp_path / "members.csv"),
        ])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["member_count"] >= 2
        header = (tmp_path / "members.csv").read_text().splitlines()[0]
        assert header.startswith("x,member0")

    def test_infeasible_exits_two(self):
        assert main(["adversary", "--gamma", "0.5", "--lengthscale", "0.15"]) == 2
