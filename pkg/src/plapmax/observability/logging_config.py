"""Structlog setup for plapmax runs.

``configure_logging()`` is called once by the CLI before the experiment is
loaded. Events go to stderr; stdout carries only the command summary line.
``bind_run_context()`` then tags every event of the run, including those
emitted from sweep and branch worker threads, with the command, the
experiment file and the seed.
"""

from __future__ import annotations

import logging
import sys
from typing import Any

import numpy as np
import structlog

# larger arrays are summarized by shape
_MAX_ARRAY_ITEMS = 8


def numpy_to_builtin(_logger: Any, _method: str, event_dict: dict[str, Any]) -> dict[str, Any]:
    """Turn numpy scalars and small arrays into builtins so JSONRenderer can emit them."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            if value.size <= _MAX_ARRAY_ITEMS:
                event_dict[key] = value.tolist()
            else:
                event_dict[key] = f"<array shape={value.shape} dtype={value.dtype}>"
    return event_dict


def configure_logging(*, json_output: bool = False, log_level: str = "INFO") -> None:
    """Route structlog events of every plapmax module through one stderr handler.

    Parameters
    ----------
    json_output:
        One JSON object per event (CI runs). Otherwise the console renderer,
        coloured only when stderr is a terminal.
    log_level:
        Root level: DEBUG, INFO, WARNING or ERROR. Newton and continuation
        step events are DEBUG.
    """
    shared_processors: list = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        numpy_to_builtin,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
    ]

    if json_output:
        renderer = structlog.processors.JSONRenderer()
    else:
        renderer = structlog.dev.ConsoleRenderer(  # type: ignore[assignment]
            colors=sys.stderr.isatty()
        )

    # not cached: tests call main() repeatedly with different levels
    structlog.configure(
        processors=[
            *shared_processors,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )

    formatter = structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root = logging.getLogger()
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(getattr(logging, log_level.upper(), logging.INFO))
    logging.captureWarnings(True)


def bind_run_context(*, command: str, experiment: str, seed: int) -> None:
    """Replace the run context merged into every event of this run."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, experiment=experiment, seed=seed)
