"""Batch runner: config validation, outputs, reproducibility, comparison."""

import json

import numpy as np
import pytest

from corrtomo.experiments import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, _main, build_model, compare, run

SURVIVAL_CFG = {
    "experiment": "survival",
    "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
    "seed": 7,
    "params": {
        "n_gates": [0, 5, 10],
        "circuits_per_point": 6,
        "eval_n_gates": [0, 5],
        "eval_circuits_per_point": 3,
    },
}


class TestConfigValidation:
    def test_unknown_key_rejected_without_outputs(self, tmp_path):
        bad = dict(SURVIVAL_CFG, bogus=1)
        out = tmp_path / "out"
        assert run(bad, out_dir=out) == EXIT_CONFIG
        assert not out.exists()

    def test_unknown_experiment(self, tmp_path):
        cfg = dict(SURVIVAL_CFG, experiment="teleport")
        assert run(cfg, out_dir=tmp_path / "x") == EXIT_CONFIG

    def test_unknown_model_kind(self, tmp_path):
        cfg = dict(SURVIVAL_CFG, model={"kind": "unicorn"})
        assert run(cfg, out_dir=tmp_path / "x") == EXIT_CONFIG

    def test_unreadable_config_path(self, tmp_path):
        assert run(tmp_path / "missing.json", out_dir=tmp_path / "x") == EXIT_CONFIG

    def test_missing_output_dir(self):
        assert run(dict(SURVIVAL_CFG)) == EXIT_CONFIG

    def test_params_unknown_key(self, tmp_path):
        cfg = dict(SURVIVAL_CFG, params=dict(SURVIVAL_CFG["params"], extra=1))
        assert run(cfg, out_dir=tmp_path / "x") == EXIT_CONFIG


class TestModelBuilding:
    def test_all_kinds(self):
        build_model({"kind": "low_freq", "sigma": 1.0, "eta": 0.1, "m": 2})
        build_model({"kind": "dense", "sigma": 1.0, "eta": 1.0, "n_points": 101})
        build_model({"kind": "constant", "epsilon": 0.05})
        build_model({"kind": "second_order", "sigma": 0.5, "gate_gammas": {"H": 0.1}})
        build_model(
            {
                "kind": "context",
                "labels": ["H", "S"],
                "rates": {"H": {"H": 0.01, "S": 0.02}, "S": {"H": 0.0, "S": 0.03}},
            }
        )


class TestSurvivalRun:
    def test_outputs_and_manifest(self, tmp_path):
        out = tmp_path / "out"
        assert run(SURVIVAL_CFG, out_dir=out) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"survival.csv", "records.json"}
        # every file in the directory is accounted for: no orphan writes
        on_disk = {p.name for p in out.iterdir()}
        assert on_disk == set(manifest["files"]) | {"manifest.json"}
        header = (out / "survival.csv").read_text().splitlines()[0]
        assert header == "n_gates,mean,stderr,circuits,shots,seed"

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(SURVIVAL_CFG, out_dir=a) == EXIT_OK
        assert run(SURVIVAL_CFG, out_dir=b) == EXIT_OK
        for name in ("survival.csv", "records.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_override_changes_outputs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(SURVIVAL_CFG, out_dir=a)
        run(SURVIVAL_CFG, out_dir=b, seed=8)
        assert (a / "survival.csv").read_bytes() != (b / "survival.csv").read_bytes()


class TestOtherExperiments:
    def test_exact_lot_run(self, tmp_path):
        cfg = {
            "experiment": "exact-lot",
            "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
            "seed": 0,
            "params": {"d": 7, "n_check_sequences": 10},
        }
        out = tmp_path / "exact"
        assert run(cfg, out_dir=out) == EXIT_OK
        report = json.loads((out / "factorization.json").read_text())
        assert report["max_residual"] <= 1e-9

    def test_exact_lot_numerical_failure(self, tmp_path):
        # a one-point device cannot supply seven independent fiducials
        cfg = {
            "experiment": "exact-lot",
            "model": {"kind": "constant", "epsilon": 0.01},
            "seed": 0,
            "params": {"d": 7, "n_check_sequences": 5},
        }
        assert run(cfg, out_dir=tmp_path / "fail") == EXIT_NUMERICAL

    def test_lim_run(self, tmp_path):
        cfg = {
            "experiment": "lim",
            "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
            "seed": 0,
            "params": {"preset": "d4", "d": 4, "eval_n_gates": [0, 4], "eval_circuits_per_point": 2},
        }
        out = tmp_path / "lim"
        assert run(cfg, out_dir=out) == EXIT_OK
        names = set(json.loads((out / "manifest.json").read_text())["files"])
        assert {"spectrum.csv", "error_model.json", "predictions.csv", "ptm_diff_H.csv"} <= names

    def test_mle_run(self, tmp_path):
        cfg = {
            "experiment": "mle",
            "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
            "seed": 0,
            "params": {
                "l_size": 1,
                "preset": "d4",
                "n_starts": 3,
                "eval_n_gates": [0, 4],
                "eval_circuits_per_point": 2,
            },
        }
        out = tmp_path / "mle"
        assert run(cfg, out_dir=out) == EXIT_OK
        report = json.loads((out / "fit_report.json").read_text())
        assert "param_model" in report and "nll" in report

    def test_bounds_run(self, tmp_path):
        cfg = {
            "experiment": "bounds",
            "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
            "seed": 0,
            "params": {"subspace_dims": [7, 3], "n_sequences": 30, "max_len": 8, "pool_max_len": 4},
        }
        out = tmp_path / "bounds"
        assert run(cfg, out_dir=out) == EXIT_OK
        report = json.loads((out / "bounds_report.json").read_text())
        assert report["semigroup_max_deviation"] <= 1e-12
        assert all(not rep["violations"] for rep in report["subspaces"].values())


class TestCompare:
    def make_reports(self, tmp_path):
        lim_cfg = {
            "experiment": "lim",
            "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
            "seed": 0,
            "params": {"preset": "d7", "d": 7, "eval_n_gates": [0, 6], "eval_circuits_per_point": 2},
        }
        run(lim_cfg, out_dir=tmp_path / "m7")
        run(dict(lim_cfg, params=dict(lim_cfg["params"], d=4)), out_dir=tmp_path / "m4")
        run(SURVIVAL_CFG, out_dir=tmp_path / "truth")
        return tmp_path / "m7" / "error_model.json", tmp_path / "m4" / "error_model.json", tmp_path / "truth" / "records.json"

    def test_identical_models_have_zero_difference(self, tmp_path):
        a, _, circuits = self.make_reports(tmp_path)
        rows = compare(a, a, circuits)
        assert rows
        assert all(r["pred_a"] == r["pred_b"] for r in rows)

    def test_larger_model_dominates(self, tmp_path):
        a, b, circuits = self.make_reports(tmp_path)
        rows = compare(a, b, circuits, out_csv=tmp_path / "cmp.csv")
        assert max(r["abs_error_a"] for r in rows) <= max(r["abs_error_b"] for r in rows)
        assert (tmp_path / "cmp.csv").exists()

    def test_empty_circuit_list(self, tmp_path):
        a, b, _ = self.make_reports(tmp_path)
        assert compare(a, b, []) == []

    def test_gate_mismatch_raises(self, tmp_path):
        a, b, _ = self.make_reports(tmp_path)
        with pytest.raises(KeyError):
            compare(a, b, [{"gates": ["T"], "mean": 1.0}])


class TestCommandLine:
    def test_run_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SURVIVAL_CFG))
        code = _main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out"), "--seed", "3"])
        assert code == EXIT_OK
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 3

    def test_compare_subcommand(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SURVIVAL_CFG))
        _main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        lim_cfg = {
            "experiment": "lim",
            "model": {"kind": "low_freq", "sigma": 1.0, "eta": 0.02, "m": 2},
            "seed": 0,
            "params": {"preset": "d4", "d": 4, "eval_n_gates": [0], "eval_circuits_per_point": 1},
        }
        lim_path = tmp_path / "lim.json"
        lim_path.write_text(json.dumps(lim_cfg))
        _main(["run", "--config", str(lim_path), "--out", str(tmp_path / "lim")])
        code = _main(
            [
                "compare",
                str(tmp_path / "lim" / "error_model.json"),
                str(tmp_path / "lim" / "error_model.json"),
                str(tmp_path / "out" / "records.json"),
            ]
        )
        assert code == EXIT_OK
        assert "max |error|" in capsys.readouterr().out
