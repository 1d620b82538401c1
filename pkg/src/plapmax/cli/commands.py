"""CLI command handlers.

Each handler takes a validated ``ExperimentConfig`` and an output directory,
writes its result files there and returns the process exit code. Errors are
raised as ``PlapmaxError`` subclasses and mapped to exit codes by ``main``.
"""

from __future__ import annotations

import asyncio
from pathlib import Path

import numpy as np
import structlog

from plapmax.cli.output import write_csv, write_gnuplot, write_json, write_nodal_csv
from plapmax.errors import NoSolutionFoundError
from plapmax.experiments.config import ExperimentConfig
from plapmax.fem.pcore import p_dirichlet_energy
from plapmax.observability.metrics import get_metrics
from plapmax.schemas import (
    AutonomousDocument,
    BranchBoundDocument,
    BranchBoundReport,
    BranchReport,
    BranchSnapshot,
    BranchSnapshots,
    CrossingDocument,
    EigenReport,
    PiconeReport,
    Sign,
    SolverStats,
    Verdict,
    WeightRegime,
)
from plapmax.solvers.eigen import (
    principal_eigenpair_negative,
    principal_eigenpair_positive,
    weight_regime,
)
from plapmax.solvers.pde import solve_autonomous_problem
from plapmax.verification.bifurcate import (
    Branch,
    asymptote_lambda,
    branch_crossings,
    branch_lambda_bound,
    branch_residual,
    continue_branch,
    detachment_lambda,
    lambda_star,
)
from plapmax.verification.maxprin import (
    POSITIVITY_RTOL,
    default_lambda_grid,
    load_sign,
    max_principle_sweep,
    picone_gap,
    picone_quadrature_error,
    positivity_verdict,
    summarize_sweep,
)
from plapmax.verification.nonlinearity import (
    autonomous_lambda_interval,
    check_boundedness,
    check_crossing,
)

logger = structlog.get_logger(__name__)

_PICONE_ROUNDING = 1e-12
_EQUALITY_EPS = 1e-10


def _solver_stats() -> SolverStats:
    return SolverStats(**get_metrics().summary())


def _print_summary(command: str, **fields: object) -> None:
    parts = " ".join(f"{key}={value}" for key, value in fields.items())
    print(f"{command}: {parts}")


# ---------------------------------------------------------------------------
# eigen
# ---------------------------------------------------------------------------


def cmd_eigen(config: ExperimentConfig, out: Path) -> int:
    get_metrics().reset()
    mesh = config.mesh()
    m = config.weight_field(mesh)
    regime = weight_regime(mesh, m)
    eigen_cfg = config.seeded_eigen()

    plus = principal_eigenpair_positive(mesh, m, config.p, eigen_cfg)
    minus = None
    if regime == WeightRegime.SIGN_CHANGING:
        minus = principal_eigenpair_negative(mesh, m, config.p, eigen_cfg)

    write_json(out / "mesh.json", mesh.to_document())
    write_nodal_csv(out / "eigenfunction_plus.csv", mesh, ("u", plus.u))
    if minus is not None:
        write_nodal_csv(out / "eigenfunction_minus.csv", mesh, ("u", minus.u))

    report = EigenReport(
        regime=regime,
        p=config.p,
        node_count=mesh.node_count,
        lambda_plus=plus.to_document(),
        lambda_minus=minus.to_document() if minus is not None else None,
        solver_stats=_solver_stats(),
    )
    write_json(out / "eigen.json", report)
    _print_summary(
        "eigen",
        regime=regime,
        lambda_plus=f"{plus.lam:.10g}",
        lambda_minus=f"{minus.lam:.10g}" if minus is not None else "-",
    )
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(config: ExperimentConfig, out: Path) -> int:
    get_metrics().reset()
    mesh = config.mesh()
    m = config.weight_field(mesh)
    h = config.load_field(mesh)
    sign = load_sign(mesh, h)
    regime = weight_regime(mesh, m)
    eigen_cfg = config.seeded_eigen()

    lambda_plus = lambda_minus = None
    if regime in (WeightRegime.SIGN_CHANGING, WeightRegime.NONNEGATIVE):
        lambda_plus = principal_eigenpair_positive(mesh, m, config.p, eigen_cfg).lam
    if regime in (WeightRegime.SIGN_CHANGING, WeightRegime.NONPOSITIVE):
        lambda_minus = principal_eigenpair_negative(mesh, m, config.p, eigen_cfg).lam

    grid = default_lambda_grid(regime, lambda_minus, lambda_plus, config.sweep.points)
    rows = max_principle_sweep(
        mesh, m, config.p, h, grid, config.solver, max_concurrency=config.sweep.max_concurrency
    )
    report = summarize_sweep(
        rows,
        regime=regime,
        sign=sign,
        lambda_minus=lambda_minus,
        lambda_plus=lambda_plus,
        newton_tolerance=config.solver.newton_tolerance,
    )
    report.solver_stats = _solver_stats()

    write_csv(
        out / "sweep.csv",
        [
            "lambda",
            "verdict",
            "min_interior",
            "max_interior",
            "converged",
            "residual_norm",
            "iterations",
            "energy_balance",
        ],
        (
            [
                row.lam,
                row.verdict,
                row.min_interior,
                row.max_interior,
                row.solver_converged,
                row.residual_norm,
                row.iterations,
                row.energy_balance,
            ]
            for row in rows
        ),
    )
    write_gnuplot(
        out / "positivity.dat",
        ["lambda", "indicator"],
        ([row.lam, 1.0 if row.verdict == report.expected_verdict else 0.0] for row in rows),
        title=f"{report.expected_verdict} indicator, load sign {sign}",
    )
    write_json(out / "interval_report.json", report)
    _print_summary("sweep", status=report.status, rows=len(rows), regime=regime)
    return 0


# ---------------------------------------------------------------------------
# branch
# ---------------------------------------------------------------------------


async def _trace_both(config: ExperimentConfig, mesh, m, f, eigenpair) -> list[Branch]:
    semaphore = asyncio.Semaphore(config.sweep.max_concurrency)

    async def _trace(sigma: Sign) -> Branch:
        async with semaphore:
            return await asyncio.to_thread(
                continue_branch,
                mesh,
                m,
                config.p,
                f,
                sigma,
                config.continuation,
                eigenpair=eigenpair,
            )

    return list(await asyncio.gather(_trace(Sign.PLUS), _trace(Sign.MINUS)))


def _write_branch(out: Path, branch: Branch, every: int) -> None:
    label = branch.sigma.label
    write_csv(
        out / f"branch_{label}.csv",
        ["arclength", "lambda", "norm", "min_u", "max_u", "verdict"],
        (
            [
                pt.arclength,
                pt.lam,
                pt.norm,
                float(pt.u.values.min()),
                float(pt.u.values.max()),
                pt.verdict,
            ]
            for pt in branch.points
        ),
    )
    if every > 0:
        snapshots = [
            BranchSnapshot(
                index=k, arclength=pt.arclength, lam=pt.lam, norm=pt.norm, u=pt.u.values.tolist()
            )
            for k, pt in enumerate(branch.points)
            if k % every == 0
        ]
        write_json(
            out / f"branch_{label}_snapshots.json",
            BranchSnapshots(sigma=branch.sigma, every=every, snapshots=snapshots),
        )


def _autonomous_runs(config: ExperimentConfig, mesh, m, f, interval) -> list[AutonomousDocument]:
    lo, hi = interval
    count = config.autonomous_points
    documents: list[AutonomousDocument] = []
    for lam in np.linspace(lo, hi, count + 2)[1:-1]:
        for sigma in (Sign.PLUS, Sign.MINUS):
            try:
                report = solve_autonomous_problem(
                    mesh,
                    m,
                    config.p,
                    f,
                    float(lam),
                    sigma,
                    config.solver,
                    eigen_cfg=config.seeded_eigen(),
                    continuation_cfg=config.continuation,
                )
            except NoSolutionFoundError as exc:
                logger.info(
                    "autonomous_not_found", lam=float(lam), sigma=str(sigma), reason=exc.message
                )
                documents.append(AutonomousDocument(lam=float(lam), sigma=sigma, found=False))
                continue
            documents.append(
                AutonomousDocument(
                    lam=float(lam),
                    sigma=sigma,
                    found=report.converged,
                    verdict=report.verdict,
                    residual_norm=report.residual_norm,
                )
            )
    return documents


def cmd_branch(config: ExperimentConfig, out: Path) -> int:
    get_metrics().reset()
    mesh = config.mesh()
    m = config.weight_field(mesh)
    f = config.build_nonlinearity()
    check_boundedness(f)
    eigenpair = principal_eigenpair_positive(mesh, m, config.p, config.seeded_eigen())
    lambda1 = eigenpair.lam
    check_crossing(f, lambda1)

    branches = asyncio.run(_trace_both(config, mesh, m, f, eigenpair))

    bounds: list[BranchBoundDocument] = []
    crossings: list[CrossingDocument] = []
    shift = lambda_star(f)
    every = config.continuation.snapshot_every
    for branch in branches:
        label = branch.sigma.label
        _write_branch(out, branch, every)

        bound = branch_lambda_bound(branch, f, lambda1)
        bounds.append(
            BranchBoundDocument(
                sigma=branch.sigma,
                bound=bound.bound,
                satisfied=bound.satisfied,
                lambda_star=shift,
                max_abs_lambda=float(np.abs(branch.lambdas).max()),
            )
        )
        for k, u in enumerate(branch_crossings(branch, f.f0)):
            path = out / f"crossing_{label}_{k}.csv"
            write_nodal_csv(path, mesh, ("u", u))
            crossings.append(
                CrossingDocument(
                    sigma=branch.sigma,
                    index=k,
                    norm=p_dirichlet_energy(mesh, u, config.p) ** (1.0 / config.p),
                    verdict=positivity_verdict(mesh, u, POSITIVITY_RTOL * u.sup_norm),
                    residual_norm=branch_residual(branch, f.f0, u),
                    path=path.name,
                )
            )

    write_json(out / "lemma31.json", BranchBoundReport(lambda1=lambda1, bounds=bounds))

    interval = None
    autonomous: list[AutonomousDocument] = []
    if f.f0 > 0 and f.finf > 0 and f.f0 != f.finf:
        interval = autonomous_lambda_interval(lambda1, f)
        autonomous = _autonomous_runs(config, mesh, m, f, interval)

    expected = {Sign.PLUS: Verdict.POSITIVE, Sign.MINUS: Verdict.NEGATIVE}
    complete = (
        all(b.satisfied for b in bounds)
        and all(any(c.sigma is s for c in crossings) for s in (Sign.PLUS, Sign.MINUS))
        and all(c.verdict == expected[c.sigma] for c in crossings)
    )
    report = BranchReport(
        status="consistent" if complete else "incomplete",
        p=config.p,
        f0=f.f0,
        finf=f.finf,
        lambda1=lambda1,
        asymptote_target=asymptote_lambda(lambda1, f),
        detachment_lambda={b.sigma.label: detachment_lambda(b) for b in branches},
        lambda_at_max_norm={b.sigma.label: b.point_at_max_norm().lam for b in branches},
        terminated_reason={b.sigma.label: b.terminated_reason for b in branches},
        bounds=bounds,
        crossings=crossings,
        autonomous_interval=interval,
        autonomous=autonomous,
        solver_stats=_solver_stats(),
    )
    write_json(out / "branch_report.json", report)
    _print_summary(
        "branch", status=report.status, lambda1=f"{lambda1:.10g}", crossings=len(crossings)
    )
    return 0


# ---------------------------------------------------------------------------
# picone
# ---------------------------------------------------------------------------


def cmd_picone(config: ExperimentConfig, out: Path) -> int:
    get_metrics().reset()
    mesh = config.mesh()
    m = config.weight_field(mesh)
    p = config.p
    eps = config.picone.eps
    pair = principal_eigenpair_positive(mesh, m, p, config.seeded_eigen())
    v = mesh.field(np.maximum(pair.u.values, 0.0), dirichlet_zero=True)

    rng = np.random.default_rng(config.seed)
    rows = []
    for trial in range(config.picone.trials):
        u = mesh.extend(rng.uniform(0.0, 1.0, mesh.interior_count))
        gap = picone_gap(mesh, u, v, p, eps)
        error = picone_quadrature_error(mesh, u, v, p, eps, config.picone.reference_points)
        tolerance = error + _PICONE_ROUNDING * max(1.0, p_dirichlet_energy(mesh, u, p))
        rows.append((trial, gap, tolerance, gap >= -tolerance))

    equality = picone_gap(mesh, v, v, p, _EQUALITY_EPS)
    failures = sum(not passed for *_, passed in rows)
    write_csv(out / "picone.csv", ["trial", "gap", "tolerance", "passed"], rows)
    report = PiconeReport(
        p=p,
        trials=len(rows),
        eps=eps,
        min_gap=min(row[1] for row in rows),
        all_nonnegative=failures == 0,
        equality_gap=equality,
        max_tolerance=max(row[2] for row in rows),
        failures=failures,
        solver_stats=_solver_stats(),
    )
    write_json(out / "picone_report.json", report)
    _print_summary("picone", trials=len(rows), failures=failures, min_gap=f"{report.min_gap:.3e}")
    if failures:
        logger.warning("picone_gap_negative", failures=failures, min_gap=report.min_gap)
        return 1
    return 0


COMMANDS = {
    "eigen": cmd_eigen,
    "sweep": cmd_sweep,
    "branch": cmd_branch,
    "picone": cmd_picone,
}
