"""Structured error handling for plapmax.

Provides a standard error envelope, the exception hierarchy raised by the
numerical modules, and the mapping from exceptions to CLI exit codes.
"""

from __future__ import annotations

import traceback
from typing import Any

import structlog
from pydantic import BaseModel

logger = structlog.get_logger(__name__)


# ---------------------------------------------------------------------------
# Error envelope schema
# ---------------------------------------------------------------------------


class ErrorDetail(BaseModel):
    code: str
    message: str
    command: str = ""
    details: dict[str, Any] | None = None


class ErrorResponse(BaseModel):
    error: ErrorDetail


# ---------------------------------------------------------------------------
# Custom exceptions
# ---------------------------------------------------------------------------


class PlapmaxError(Exception):
    """Base exception for all plapmax errors."""

    exit_code: int = 1
    error_code: str = "INTERNAL_ERROR"

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details


class PreconditionError(PlapmaxError):
    exit_code = 3
    error_code = "PRECONDITION_VIOLATED"


class InvalidMeshError(PreconditionError):
    error_code = "INVALID_MESH"


class MeshMismatchError(PreconditionError):
    error_code = "MESH_MISMATCH"


class InfeasibleConstraintError(PreconditionError):
    error_code = "INFEASIBLE_CONSTRAINT"


class InvalidLoadError(PreconditionError):
    error_code = "INVALID_LOAD"


class UndefinedQuotientError(PreconditionError):
    error_code = "UNDEFINED_QUOTIENT"


class ConfigError(PreconditionError):
    error_code = "CONFIG_ERROR"


class ExpressionError(ConfigError):
    error_code = "EXPRESSION_ERROR"


class SingularJacobianError(PlapmaxError):
    exit_code = 2
    error_code = "SINGULAR_JACOBIAN"


class ConvergenceError(PlapmaxError):
    """Iteration budget exhausted; ``last_iterate`` holds the final state."""

    exit_code = 2
    error_code = "CONVERGENCE_FAILURE"

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
        last_iterate: Any = None,
    ) -> None:
        super().__init__(message, details)
        self.last_iterate = last_iterate


class NoSolutionFoundError(PlapmaxError):
    exit_code = 2
    error_code = "NO_SOLUTION_FOUND"


class HypothesisError(PlapmaxError):
    exit_code = 4
    error_code = "HYPOTHESIS_VIOLATED"


# ---------------------------------------------------------------------------
# Envelope construction
# ---------------------------------------------------------------------------


def build_error_response(
    exc: Exception,
    *,
    command: str = "",
    include_trace: bool = False,
) -> ErrorResponse:
    if isinstance(exc, PlapmaxError):
        code, message, details = exc.error_code, exc.message, exc.details
    else:
        code, message, details = "INTERNAL_ERROR", str(exc) or type(exc).__name__, None

    if include_trace:
        details = dict(details or {})
        details["traceback"] = traceback.format_exception(exc)

    return ErrorResponse(
        error=ErrorDetail(code=code, message=message, command=command, details=details)
    )


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, PlapmaxError):
        logger.warning("plapmax_error", error_code=exc.error_code, message=exc.message)
        return exc.exit_code
    logger.exception("unhandled_exception")
    return 1
