"""Numerical checks of the maximum principle for the weighted problem.

For a one-signed load h the solution of  -Delta_p u - lam m phi_p(u) = h  is
one-signed exactly when lam lies strictly between the two principal
eigenvalues. ``max_principle_sweep`` solves along a lambda grid and records a
positivity verdict per row; ``summarize_sweep`` locates the block of
one-signed rows and compares its edges with the eigenvalues.

The module also evaluates the Picone gap used in the necessity argument.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass

import numpy as np
import structlog

from plapmax.config import SolverConfig
from plapmax.errors import InvalidLoadError, PreconditionError
from plapmax.fem.mesh import Mesh, NodalField
from plapmax.fem.pcore import WeightedForm, check_p, p_dirichlet_energy, weighted_p_moment
from plapmax.fem.quadrature import QuadratureRule, production_rule, reference_rule
from plapmax.schemas import IntervalReport, PositiveBlock, Sign, Verdict, WeightRegime
from plapmax.solvers.eigen import weight_regime
from plapmax.solvers.pde import solve_weighted_problem

logger = structlog.get_logger(__name__)

__all__ = [
    "SweepRow",
    "default_lambda_grid",
    "energy_balance",
    "load_sign",
    "max_principle_sweep",
    "max_principle_sweep_async",
    "picone_gap",
    "picone_quadrature_error",
    "positivity_verdict",
    "summarize_sweep",
    "weight_regime",
]

POSITIVITY_RTOL = 1e-10
_DEFAULT_CONCURRENCY = 4


def positivity_verdict(mesh: Mesh, u: NodalField, tol: float) -> Verdict:
    """Classify the interior values of ``u`` against the threshold ``tol``."""
    if not u.dirichlet_zero:
        raise PreconditionError("Positivity verdict needs a Dirichlet-zero field")
    interior = u.interior(mesh)
    if np.all(np.abs(interior) <= tol):
        return Verdict.ZERO
    if np.all(interior > tol):
        return Verdict.POSITIVE
    if np.all(interior < -tol):
        return Verdict.NEGATIVE
    return Verdict.SIGN_CHANGING


@dataclass(frozen=True)
class SweepRow:
    lam: float
    verdict: Verdict
    min_interior: float
    max_interior: float
    solver_converged: bool
    residual_norm: float
    iterations: int
    energy_balance: float


def energy_balance(
    mesh: Mesh, m: NodalField, p: float, lam: float, h: NodalField, u: NodalField
) -> float:
    """|E(u) - lam Mom(u) - <h, u>| relative to the energy E(u).

    Testing the equation with u itself; zero for an exact discrete solution.
    """
    mesh.check(m, h, u)
    energy = p_dirichlet_energy(mesh, u, p)
    moment = weighted_p_moment(mesh, m, u, p)
    work = WeightedForm.of(mesh, h.values).integral(u.values, lambda s: s)
    return abs(energy - lam * moment - work) / max(energy, np.finfo(float).tiny)


def load_sign(mesh: Mesh, h: NodalField) -> Sign:
    """Sign of a one-signed load; sign-indefinite or zero loads are rejected."""
    mesh.check(h)
    values = h.values
    interior = values[mesh.interior_nodes]
    if np.all(values >= 0) and np.any(interior > 0):
        return Sign.PLUS
    if np.all(values <= 0) and np.any(interior < 0):
        return Sign.MINUS
    raise InvalidLoadError(
        "Load must be one-signed and not identically zero on interior nodes",
        details={"min": float(values.min()), "max": float(values.max())},
    )


def default_lambda_grid(
    regime: WeightRegime,
    lambda_minus: float | None,
    lambda_plus: float | None,
    points: int = 41,
) -> np.ndarray:
    """Equally spaced grid over [lo - d/2, hi + d/2], d = hi - lo.

    With a one-signed weight the missing eigenvalue is replaced by 0.
    """
    if regime == WeightRegime.NONNEGATIVE:
        lo, hi = 0.0, lambda_plus
    elif regime == WeightRegime.NONPOSITIVE:
        lo, hi = lambda_minus, 0.0
    elif regime == WeightRegime.SIGN_CHANGING:
        lo, hi = lambda_minus, lambda_plus
    else:
        raise PreconditionError("No eigenvalues to bracket for a zero weight")
    if lo is None or hi is None or not lo < hi:
        raise PreconditionError(
            "Eigenvalue bracket is missing or empty", details={"lo": lo, "hi": hi}
        )
    width = hi - lo
    return np.linspace(lo - 0.5 * width, hi + 0.5 * width, points)


def _sweep_row(
    mesh: Mesh, m: NodalField, p: float, lam: float, h: NodalField, cfg: SolverConfig
) -> SweepRow:
    report = solve_weighted_problem(mesh, m, p, lam, h, cfg)
    interior = report.u.interior(mesh)
    if report.converged:
        verdict = positivity_verdict(mesh, report.u, POSITIVITY_RTOL * report.u.sup_norm)
        balance = energy_balance(mesh, m, p, lam, h, report.u)
    else:
        verdict = Verdict.DIVERGED
        balance = float("nan")
    logger.debug("sweep_row_done", lam=lam, verdict=str(verdict), converged=report.converged)
    return SweepRow(
        lam=float(lam),
        verdict=verdict,
        min_interior=float(interior.min()),
        max_interior=float(interior.max()),
        solver_converged=report.converged,
        residual_norm=report.residual_norm,
        iterations=report.iterations,
        energy_balance=balance,
    )


async def max_principle_sweep_async(
    mesh: Mesh,
    m: NodalField,
    p: float,
    h: NodalField,
    lambda_grid: list[float] | np.ndarray,
    cfg: SolverConfig,
    *,
    max_concurrency: int = _DEFAULT_CONCURRENCY,
) -> list[SweepRow]:
    check_p(p)
    mesh.check(m, h)
    sign = load_sign(mesh, h)
    grid = [float(lam) for lam in lambda_grid]
    semaphore = asyncio.Semaphore(max_concurrency)

    async def _run(lam: float) -> SweepRow:
        async with semaphore:
            return await asyncio.to_thread(_sweep_row, mesh, m, p, lam, h, cfg)

    rows = await asyncio.gather(*[_run(lam) for lam in grid])
    logger.info("sweep_complete", p=p, rows=len(rows), load_sign=str(sign))
    return list(rows)


def max_principle_sweep(
    mesh: Mesh,
    m: NodalField,
    p: float,
    h: NodalField,
    lambda_grid: list[float] | np.ndarray,
    cfg: SolverConfig,
    *,
    max_concurrency: int = _DEFAULT_CONCURRENCY,
) -> list[SweepRow]:
    """One ``SweepRow`` per grid point, in grid order."""
    return asyncio.run(
        max_principle_sweep_async(
            mesh, m, p, h, lambda_grid, cfg, max_concurrency=max_concurrency
        )
    )


# ---------------------------------------------------------------------------
# Interval report
# ---------------------------------------------------------------------------


def summarize_sweep(
    rows: list[SweepRow],
    *,
    regime: WeightRegime,
    sign: Sign,
    lambda_minus: float | None,
    lambda_plus: float | None,
    newton_tolerance: float,
) -> IntervalReport:
    expected = Verdict.POSITIVE if sign is Sign.PLUS else Verdict.NEGATIVE
    lams = np.array([row.lam for row in rows])
    spacing = float(np.max(np.diff(lams))) if lams.size > 1 else 0.0
    tolerance = spacing + 10.0 * newton_tolerance

    hits = [i for i, row in enumerate(rows) if row.verdict == expected]
    contiguous = bool(hits) and hits == list(range(hits[0], hits[-1] + 1))
    notes: list[str] = []
    block = None
    left_gap = right_gap = None

    if hits:
        left, right = rows[hits[0]].lam, rows[hits[-1]].lam
        block = PositiveBlock(left=left, right=right, size=len(hits))
        if regime != WeightRegime.NONNEGATIVE and lambda_minus is not None:
            left_gap = abs(left - lambda_minus)
        if regime != WeightRegime.NONPOSITIVE and lambda_plus is not None:
            right_gap = abs(right - lambda_plus)
    else:
        notes.append(f"no {expected} rows in the sweep")

    if not contiguous and hits:
        notes.append(f"{expected} rows do not form a single block")

    if regime == WeightRegime.NONNEGATIVE:
        below = [row for row in rows if row.lam < 0]
        count = sum(row.verdict == expected for row in below)
        notes.append(
            f"nonnegative weight: {count} of {len(below)} rows with lambda < 0 are {expected}; "
            "lower edge not asserted"
        )
    elif regime == WeightRegime.NONPOSITIVE:
        above = [row for row in rows if row.lam > 0]
        count = sum(row.verdict == expected for row in above)
        notes.append(
            f"nonpositive weight: {count} of {len(above)} rows with lambda > 0 are {expected}; "
            "upper edge not asserted"
        )

    consistent = contiguous
    for gap in (left_gap, right_gap):
        if gap is not None and gap > tolerance:
            consistent = False
    if block is not None and regime == WeightRegime.SIGN_CHANGING:
        if not block.left <= 0.0 <= block.right:
            consistent = False
            notes.append("block does not contain lambda = 0")

    diverged = sum(row.verdict == Verdict.DIVERGED for row in rows)
    if diverged:
        notes.append(f"{diverged} rows diverged")

    return IntervalReport(
        status="consistent" if consistent else "inconsistent",
        regime=regime,
        load_sign=sign,
        expected_verdict=expected,
        lambda_minus=lambda_minus,
        lambda_plus=lambda_plus,
        grid_spacing=spacing,
        block=block,
        contiguous=contiguous,
        left_discrepancy=left_gap,
        right_discrepancy=right_gap,
        tolerance=tolerance,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Picone gap
# ---------------------------------------------------------------------------


def _picone_density(
    mesh: Mesh, u: np.ndarray, v: np.ndarray, p: float, eps: float, rule: QuadratureRule
) -> np.ndarray:
    """Per-element integral of the pointwise Picone Lagrangian, shape (E,).

    L = |grad u|^p + (p-1) r^p |grad v|^p - p r^{p-1} grad u . |grad v|^{p-2} grad v
    with r = u / (v + eps); L >= 0 pointwise.
    """
    grad_u = mesh.element_gradients(u)
    grad_v = mesh.element_gradients(v)
    norm_u = np.linalg.norm(grad_u, axis=1)
    norm_v = np.linalg.norm(grad_v, axis=1)
    scale = np.zeros_like(norm_v)
    moving = norm_v > 0
    scale[moving] = norm_v[moving] ** (p - 2.0)
    coupling = scale * np.einsum("ed,ed->e", grad_u, grad_v)

    u_q = u[mesh.elements] @ rule.barycentric.T
    v_q = v[mesh.elements] @ rule.barycentric.T
    ratio = u_q / (v_q + eps)
    lagrangian = (
        (norm_u**p)[:, None]
        + (p - 1.0) * ratio**p * (norm_v**p)[:, None]
        - p * ratio ** (p - 1.0) * coupling[:, None]
    )
    return mesh.element_measures * (lagrangian @ rule.weights)


def _picone_inputs(mesh: Mesh, u: NodalField, v: NodalField, p: float, eps: float) -> None:
    check_p(p)
    mesh.check(u, v)
    if not eps > 0:
        raise PreconditionError("Picone shift eps must be positive", details={"eps": eps})
    if np.any(u.values < 0) or np.any(v.values < 0):
        raise PreconditionError(
            "Picone gap needs nonnegative u and v",
            details={"min_u": float(u.values.min()), "min_v": float(v.values.min())},
        )


def picone_gap(
    mesh: Mesh,
    u: NodalField,
    v: NodalField,
    p: float,
    eps: float,
    rule: QuadratureRule | None = None,
) -> float:
    """Integral of |grad u|^p - grad(u^p / (v + eps)^{p-1}) . |grad v|^{p-2} grad v."""
    _picone_inputs(mesh, u, v, p, eps)
    rule = rule or production_rule(mesh.dimension)
    return float(_picone_density(mesh, u.values, v.values, p, eps, rule).sum())


def picone_quadrature_error(
    mesh: Mesh,
    u: NodalField,
    v: NodalField,
    p: float,
    eps: float,
    reference_points: int = 10,
) -> float:
    """Distance between the production rule and a high-order reference rule."""
    _picone_inputs(mesh, u, v, p, eps)
    production = _picone_density(mesh, u.values, v.values, p, eps, production_rule(mesh.dimension))
    reference = _picone_density(
        mesh, u.values, v.values, p, eps, reference_rule(mesh.dimension, reference_points)
    )
    return float(abs(production.sum() - reference.sum()))
