"""Integration test fixtures.

The CLI is driven in-process through ``plapmax.cli.main.main`` with an
experiment file written to ``tmp_path``.
"""

from __future__ import annotations

import json
import textwrap

import pytest


@pytest.fixture
def experiment(tmp_path):
    """Write YAML text to an experiment file and return its path."""

    def _write(text: str, name: str = "experiment.yaml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return path

    return _write


@pytest.fixture
def run_cli(tmp_path):
    """Run a subcommand; returns (exit code, output directory)."""
    from plapmax.cli.main import main

    def _run(command: str, config, *extra: str, out: str = "results"):
        out_dir = tmp_path / out
        code = main([command, str(config), "--out", str(out_dir), *extra])
        return code, out_dir

    return _run


@pytest.fixture
def read_json():
    def _read(path):
        return json.loads(path.read_text())

    return _read
