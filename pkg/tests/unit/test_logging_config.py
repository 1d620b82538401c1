from __future__ import annotations

import json
import logging

import numpy as np
import pytest
import structlog

from plapmax.observability.logging_config import (
    bind_run_context,
    configure_logging,
    numpy_to_builtin,
)


@pytest.fixture(autouse=True)
def _restore_logging():
    yield
    logging.getLogger().handlers.clear()
    logging.getLogger().setLevel(logging.WARNING)
    logging.captureWarnings(False)
    structlog.contextvars.clear_contextvars()
    structlog.reset_defaults()


@pytest.fixture
def json_events(capsys):
    configure_logging(json_output=True, log_level="DEBUG")
    return lambda: [json.loads(line) for line in capsys.readouterr().err.splitlines() if line]


class TestNumpyToBuiltin:
    def test_scalars(self):
        event = numpy_to_builtin(None, "info", {"count": np.int64(3), "lam": np.float64(9.5)})
        assert event == {"count": 3, "lam": 9.5}
        assert type(event["count"]) is int

    def test_small_array_becomes_list(self):
        event = numpy_to_builtin(None, "info", {"u": np.array([0.0, 1.0, 0.0])})
        assert event["u"] == [0.0, 1.0, 0.0]

    def test_large_array_is_summarized(self):
        event = numpy_to_builtin(None, "info", {"u": np.zeros((129,))})
        assert event["u"] == "<array shape=(129,) dtype=float64>"


class TestConfigureLogging:
    def test_json_events_on_stderr(self, json_events):
        structlog.get_logger("plapmax.test").info("sweep_row_done", iterations=np.int64(4))
        (event,) = json_events()
        assert event["event"] == "sweep_row_done"
        assert event["iterations"] == 4
        assert event["level"] == "info"

    def test_level_filters_debug(self, capsys):
        configure_logging(json_output=True, log_level="WARNING")
        structlog.get_logger("plapmax.test").debug("newton_step")
        assert capsys.readouterr().err == ""


class TestRunContext:
    def test_context_is_merged(self, json_events):
        bind_run_context(command="sweep", experiment="step_weight.yaml", seed=7)
        structlog.get_logger("plapmax.test").info("sweep_complete")
        (event,) = json_events()
        assert (event["command"], event["experiment"], event["seed"]) == (
            "sweep",
            "step_weight.yaml",
            7,
        )

    def test_rebinding_replaces_context(self, json_events):
        bind_run_context(command="eigen", experiment="a.yaml", seed=1)
        bind_run_context(command="branch", experiment="b.yaml", seed=2)
        structlog.get_logger("plapmax.test").info("branch_terminated")
        (event,) = json_events()
        assert event["command"] == "branch"
        assert event["seed"] == 2
