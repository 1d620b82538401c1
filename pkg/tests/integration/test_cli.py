from __future__ import annotations

import json

import numpy as np
import pytest

pytestmark = pytest.mark.integration

STEP_WEIGHT = """
domain: {kind: interval, n: 32}
weight: {kind: step, x0: 0.5, c1: 1.0, c2: -1.0}
load: {kind: constant, value: 1.0}
"""


class TestEigenCommand:
    def test_constant_weight(self, experiment, run_cli, read_json, capsys):
        config = experiment("domain: {kind: interval, n: 64}\n")
        code, out = run_cli("eigen", config)
        assert code == 0
        report = read_json(out / "eigen.json")
        assert report["regime"] == "nonnegative"
        assert report["lambda_plus"]["lambda"] == pytest.approx(np.pi**2, rel=1e-2)
        assert report["lambda_minus"] is None
        assert (out / "eigenfunction_plus.csv").exists()
        assert read_json(out / "mesh.json")["dimension"] == 1
        assert not (out / "eigenfunction_minus.csv").exists()
        assert capsys.readouterr().out.startswith("eigen: regime=nonnegative")

    def test_step_weight_has_both_eigenvalues(self, experiment, run_cli, read_json):
        code, out = run_cli("eigen", experiment(STEP_WEIGHT))
        assert code == 0
        report = read_json(out / "eigen.json")
        plus, minus = report["lambda_plus"]["lambda"], report["lambda_minus"]["lambda"]
        assert minus == pytest.approx(-plus, rel=1e-6)
        assert report["lambda_minus"]["sign_class"] == "negative_weight_side"
        lines = (out / "eigenfunction_minus.csv").read_text().splitlines()
        assert lines[:2] == ["# schema_version=1", "x,u"]
        assert len(lines) == 2 + 33

    def test_rerun_is_byte_identical(self, experiment, run_cli):
        config = experiment(STEP_WEIGHT)
        run_cli("eigen", config, out="first")
        _, first = run_cli("eigen", config, out="first")
        _, second = run_cli("eigen", config, out="second")
        assert (first / "eigen.json").read_bytes() == (second / "eigen.json").read_bytes()

    def test_nonpositive_weight_exits_3(self, experiment, run_cli, capsys):
        code, _ = run_cli("eigen", experiment("weight: {kind: constant, value: -1.0}\n"))
        assert code == 3
        envelope = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert envelope["error"]["code"] == "INFEASIBLE_CONSTRAINT"
        assert envelope["error"]["command"] == "eigen"


class TestSweepCommand:
    def test_step_weight_interval(self, experiment, run_cli, read_json):
        config = experiment(STEP_WEIGHT + "sweep: {points: 21}\n")
        code, out = run_cli("sweep", config)
        assert code == 0
        report = read_json(out / "interval_report.json")
        assert report["status"] == "consistent"
        assert report["regime"] == "sign_changing"
        assert report["block"]["left"] <= 0.0 <= report["block"]["right"]
        assert report["right_discrepancy"] <= report["tolerance"]
        assert report["left_discrepancy"] <= report["tolerance"]

        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[1].split(",") == [
            "lambda",
            "verdict",
            "min_interior",
            "max_interior",
            "converged",
            "residual_norm",
            "iterations",
            "energy_balance",
        ]
        assert len(lines) == 2 + 21
        assert (out / "positivity.dat").read_text().startswith("# schema_version=1")

    def test_negative_load_expects_negative_rows(self, experiment, run_cli, read_json):
        config = experiment(
            "domain: {kind: interval, n: 32}\nload: {kind: constant, value: -2.0}\n"
            "sweep: {points: 11}\n"
        )
        code, out = run_cli("sweep", config)
        assert code == 0
        report = read_json(out / "interval_report.json")
        assert report["load_sign"] == "-"
        assert report["expected_verdict"] == "Negative"
        assert report["status"] == "consistent"

    def test_sign_changing_load_exits_3(self, experiment, run_cli, capsys):
        config = experiment(STEP_WEIGHT + "load: {kind: expression, expr: 'x - 0.5'}\n")
        code, out = run_cli("sweep", config)
        assert code == 3
        envelope = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert envelope["error"]["code"] == "INVALID_LOAD"
        assert not (out / "sweep.csv").exists()


class TestBranchCommand:
    def test_crossing_hypothesis_exits_4(self, experiment, run_cli, capsys):
        config = experiment(
            "domain: {kind: interval, n: 32}\nnonlinearity: {family: saturating, a: 1, b: 0}\n"
        )
        code, _ = run_cli("branch", config)
        assert code == 4
        envelope = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert envelope["error"]["code"] == "HYPOTHESIS_VIOLATED"

    @pytest.mark.slow
    def test_saturating_branches(self, experiment, run_cli, read_json):
        config = experiment(
            """
            domain: {kind: interval, n: 32}
            nonlinearity: {family: saturating, a: 8, b: 4}
            autonomous_points: 1
            continuation: {snapshot_every: 10}
            """
        )
        code, out = run_cli("branch", config)
        assert code == 0
        report = read_json(out / "branch_report.json")
        assert report["status"] == "consistent"
        assert report["detachment_lambda"]["plus"] == pytest.approx(report["lambda1"], rel=1e-2)
        for label in ("plus", "minus"):
            assert (out / f"branch_{label}.csv").exists()
            assert (out / f"crossing_{label}_0.csv").exists()
            assert (out / f"branch_{label}_snapshots.json").exists()
            assert abs(report["lambda_at_max_norm"][label] - report["asymptote_target"]) <= 0.6

        bound = read_json(out / "lemma31.json")
        assert all(entry["satisfied"] for entry in bound["bounds"])
        verdicts = {c["sigma"]: c["verdict"] for c in report["crossings"]}
        assert verdicts == {"+": "Positive", "-": "Negative"}
        assert [a["found"] for a in report["autonomous"]] == [True, True]


class TestPiconeCommand:
    def test_random_trials(self, experiment, run_cli, read_json):
        config = experiment("domain: {kind: interval, n: 32}\npicone: {trials: 10}\np: 3.0\n")
        code, out = run_cli("picone", config)
        assert code == 0
        report = read_json(out / "picone_report.json")
        assert report["trials"] == 10
        assert report["all_nonnegative"]
        assert report["failures"] == 0
        assert len((out / "picone.csv").read_text().splitlines()) == 2 + 10

    def test_seed_override_changes_trials(self, experiment, run_cli):
        config = experiment("domain: {kind: interval, n: 16}\npicone: {trials: 3}\n")
        _, first = run_cli("picone", config, out="a")
        _, second = run_cli("picone", config, "--seed", "5", out="b")
        assert (first / "picone.csv").read_text() != (second / "picone.csv").read_text()


class TestEntryPoint:
    def test_version(self, capsys):
        from plapmax.cli.main import main

        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert "plapmax" in capsys.readouterr().out

    def test_invalid_yaml_exits_3(self, experiment, run_cli, capsys):
        code, _ = run_cli("eigen", experiment("domain: {kind: interval\n"))
        assert code == 3
        envelope = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert envelope["error"]["code"] == "CONFIG_ERROR"
        assert "line" in envelope["error"]["details"]

    def test_missing_config_exits_3(self, run_cli, tmp_path):
        code, _ = run_cli("sweep", tmp_path / "nope.yaml")
        assert code == 3
