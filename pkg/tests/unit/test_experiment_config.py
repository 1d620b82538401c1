from __future__ import annotations

import textwrap
from pathlib import Path

import numpy as np
import pytest

from plapmax.errors import ConfigError
from plapmax.experiments.config import (
    ExperimentConfig,
    IntervalDomain,
    RectangleDomain,
    StepField,
    dump_experiment,
    load_experiment,
    parse_experiment,
)

EXPERIMENTS = Path(__file__).resolve().parents[2] / "config" / "experiments"


class TestDefaults:
    def test_empty_file_is_reference_setup(self):
        config = parse_experiment("")
        assert isinstance(config.domain, IntervalDomain)
        assert config.p == 2.0
        assert config.nonlinearity.family == "saturating"
        assert (config.nonlinearity.a, config.nonlinearity.b) == (8.0, 4.0)

    def test_sections_fall_back_to_settings(self, settings):
        config = parse_experiment("solver:\n  max_newton_steps: 7\n")
        assert config.solver.max_newton_steps == 7
        assert config.solver.newton_tolerance == settings.solver.newton_tolerance
        assert config.eigen == settings.eigen

    def test_seeded_eigen(self):
        config = parse_experiment("seed: 42\n")
        assert config.seeded_eigen().seed == 42
        assert config.eigen.seed == 0


class TestFields:
    def test_step_weight_on_interval(self):
        config = parse_experiment(
            textwrap.dedent(
                """
                domain: {kind: interval, n: 4}
                weight: {kind: step, x0: 0.5, c1: 1.0, c2: -1.0}
                """
            )
        )
        assert isinstance(config.weight, StepField)
        mesh = config.mesh()
        np.testing.assert_allclose(config.weight_field(mesh).values, [1, 1, 0, -1, -1])

    def test_expression_on_rectangle(self):
        config = parse_experiment(
            textwrap.dedent(
                """
                domain: {kind: rectangle, lx: 2.0, ly: 1.0, nx: 4, ny: 2}
                load: {kind: expression, expr: "x + y"}
                """
            )
        )
        assert isinstance(config.domain, RectangleDomain)
        mesh = config.mesh()
        expected = mesh.nodes[:, 0] + mesh.nodes[:, 1]
        np.testing.assert_allclose(config.load_field(mesh).values, expected)

    def test_nonlinearity_uses_experiment_p(self):
        config = parse_experiment("p: 3.0\nnonlinearity: {family: exponential, a: 1, b: 2}\n")
        f = config.build_nonlinearity()
        assert f.p == 3.0
        assert f.name == "exponential"


class TestErrors:
    def test_yaml_syntax_error_has_location(self):
        with pytest.raises(ConfigError) as info:
            parse_experiment("p: 2\ndomain: {kind: interval\n", source="exp.yaml")
        assert info.value.details["source"] == "exp.yaml"
        assert info.value.details["line"] >= 2
        assert "column" in info.value.details

    def test_top_level_must_be_mapping(self):
        with pytest.raises(ConfigError):
            parse_experiment("- 1\n- 2\n")

    @pytest.mark.parametrize(
        ("text", "field"),
        [
            ("p: 1.0\n", "p"),
            ("colour: red\n", "colour"),
            ("domain: {kind: disc}\n", "domain"),
            ("nonlinearity: {family: cubic}\n", "nonlinearity.family"),
            ("weight: {kind: expression, expr: 'sin('}\n", "weight.expression.expr"),
        ],
    )
    def test_field_errors_are_named(self, text, field):
        with pytest.raises(ConfigError) as info:
            parse_experiment(text)
        fields = [err["field"] for err in info.value.details["errors"]]
        assert any(f.startswith(field) for f in fields)

    def test_y_on_interval_rejected(self):
        with pytest.raises(ConfigError):
            parse_experiment("weight: {kind: expression, expr: 'x * y'}\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_experiment(tmp_path / "absent.yaml")
        assert info.value.exit_code == 3


class TestDump:
    def test_dump_then_parse_is_stable(self, tmp_path):
        config = parse_experiment("p: 2.5\nweight: {kind: step, x0: 0.3}\nseed: 9\n")
        path = tmp_path / "exp.yaml"
        path.write_text(dump_experiment(config))
        again = load_experiment(path)
        assert again == config

    def test_dump_keeps_field_order(self):
        text = dump_experiment(ExperimentConfig.model_validate({}))
        assert text.index("domain:") < text.index("p:") < text.index("solver:")


class TestShippedExperiments:
    @pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_loads(self, path):
        config = load_experiment(path)
        mesh = config.mesh()
        assert config.weight_field(mesh).values.shape == (mesh.node_count,)

    def test_saturating_branch_family(self):
        config = load_experiment(EXPERIMENTS / "saturating_branch.yaml")
        f = config.build_nonlinearity()
        assert (f.f0, f.finf) == (8.0, 12.0)
