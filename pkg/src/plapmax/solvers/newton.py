"""Damped Newton iteration with a halving line search.

Shared by the boundary-value solver, the inner solves of the eigen-iteration
and the continuation corrector. Every run is recorded in the process-wide
``SolverMetrics`` collector.
"""

from __future__ import annotations

import warnings
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import structlog
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from plapmax.errors import SingularJacobianError
from plapmax.observability.metrics import SolveMetric, get_metrics

logger = structlog.get_logger(__name__)

Residual = Callable[[np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray], sparse.spmatrix]


@dataclass
class NewtonResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    path: list[tuple[int, float]] = field(default_factory=list)
    reason: str = "converged"  # converged | max_steps | line_search | singular | blowup


def solve_linear(matrix: sparse.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Sparse direct solve; singular or non-finite outcomes raise ``SingularJacobianError``."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            x = spsolve(sparse.csc_matrix(matrix), rhs)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise SingularJacobianError(
                "Linear system is singular", details={"n": rhs.size}
            ) from exc
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SingularJacobianError(
            "Linear solve produced non-finite values", details={"n": rhs.size}
        )
    return x


def damped_newton(
    residual: Residual,
    jacobian: Jacobian,
    x0: np.ndarray,
    *,
    tolerance: float,
    max_steps: int,
    min_step: float = 2.0**-20,
    sufficient_decrease: float = 1e-4,
    blowup_threshold: float | None = None,
    kind: str = "newton",
) -> NewtonResult:
    """Drive ``residual`` to Euclidean norm ``<= tolerance``.

    A trial step ``x + a * dx`` is accepted when its residual norm is at most
    ``(1 - sufficient_decrease * a)`` times the current one; ``a`` starts at 1
    and halves down to ``min_step``.
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    norm = float(np.linalg.norm(r))
    path = [(0, norm)]
    iterations = 0
    reason = "max_steps"

    while True:
        if norm <= tolerance:
            reason = "converged"
            break
        if iterations >= max_steps:
            break
        if blowup_threshold is not None and np.abs(x).max(initial=0.0) > blowup_threshold:
            reason = "blowup"
            break

        try:
            dx = solve_linear(jacobian(x), -r)
        except SingularJacobianError:
            reason = "singular"
            break

        step = 1.0
        accepted = False
        while step >= min_step:
            trial = x + step * dx
            r_trial = residual(trial)
            norm_trial = float(np.linalg.norm(r_trial))
            if np.isfinite(norm_trial) and norm_trial <= (1.0 - sufficient_decrease * step) * norm:
                accepted = True
                break
            step *= 0.5

        iterations += 1
        if not accepted:
            reason = "line_search"
            break
        x, r, norm = trial, r_trial, norm_trial
        path.append((iterations, norm))

    converged = reason == "converged"
    if blowup_threshold is not None and np.abs(x).max(initial=0.0) > blowup_threshold:
        converged, reason = False, "blowup"

    get_metrics().record(
        SolveMetric(kind=kind, iterations=iterations, residual_norm=norm, converged=converged)
    )
    if not converged:
        logger.debug(
            "newton_failed", kind=kind, reason=reason, iterations=iterations, residual=norm
        )
    return NewtonResult(
        x=x,
        converged=converged,
        iterations=iterations,
        residual_norm=norm,
        path=path,
        reason=reason,
    )
