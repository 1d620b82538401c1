"""Boundary-value solves for the weighted and the autonomous problems.

``solve_weighted_problem`` treats  -Delta_p u - lam m phi_p(u) = h  by damped
Newton along a lambda-continuation path that starts at the coercive problem
lam = 0. Divergence is reported in the returned ``SolveReport``; it is data
for the maximum-principle sweep, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import structlog
from scipy import sparse

from plapmax.config import ContinuationConfig, EigenConfig, SolverConfig, get_settings
from plapmax.errors import NoSolutionFoundError, PreconditionError
from plapmax.fem.mesh import Mesh, NodalField
from plapmax.fem.pcore import (
    Regularization,
    WeightedForm,
    check_p,
    dphi_p,
    energy_density,
    jacobian_from_values,
    load_vector,
    p_laplacian_operator,
    phi_p,
    stiffness_matrix,
)
from plapmax.schemas import Sign, SolveDocument, Verdict
from plapmax.solvers.newton import damped_newton, solve_linear
from plapmax.verification.nonlinearity import Nonlinearity, check_boundedness

logger = structlog.get_logger(__name__)


@dataclass
class SolveReport:
    u: NodalField
    converged: bool
    iterations: int
    residual_norm: float
    lambda_used: float
    newton_path: list[tuple[int, float]] = field(default_factory=list)
    verdict: Verdict | None = None
    reason: str = "converged"

    def to_document(self) -> SolveDocument:
        return SolveDocument(
            converged=self.converged,
            iterations=self.iterations,
            residual_norm=self.residual_norm,
            lambda_used=self.lambda_used,
            newton_path=self.newton_path,
            verdict=self.verdict,
            u=self.u.values.tolist(),
        )


# ---------------------------------------------------------------------------
# Discrete operators over interior unknowns
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedOperator:
    """F(x) = A(x) - lam M m phi_p(x) - b on interior unknowns."""

    mesh: Mesh
    p: float
    form: WeightedForm  # weighted by m
    load: np.ndarray
    reg: Regularization

    def full(self, x: np.ndarray) -> np.ndarray:
        values = np.zeros(self.mesh.node_count)
        values[self.mesh.interior_nodes] = x
        return values

    def residual(self, x: np.ndarray, lam: float) -> np.ndarray:
        reaction = lam * self.form.tested(self.full(x), lambda s: phi_p(s, self.p))
        return p_laplacian_operator(self.mesh, self.full(x), self.p) - reaction - self.load

    def jacobian(self, x: np.ndarray, lam: float) -> sparse.csr_matrix:
        jac = jacobian_from_values(self.mesh, self.full(x), self.p, self.reg)
        if lam == 0.0:
            return jac
        eps = self.reg.epsilon
        reaction = self.form.linearized(self.full(x), lambda s: dphi_p(s, self.p, eps))
        return (jac - lam * reaction).tocsr()


def initial_guess(mesh: Mesh, p: float, load: np.ndarray) -> np.ndarray:
    """Linear (p = 2) solve rescaled so that <A(c v), v> = <b, v>."""
    v = solve_linear(stiffness_matrix(mesh), load)
    if p == 2.0:
        return v
    work = float(np.dot(load, v))
    full = np.zeros(mesh.node_count)
    full[mesh.interior_nodes] = v
    energy = float(np.dot(energy_density(mesh, full, p), mesh.element_measures))
    if work <= 0 or energy <= 0:
        return v
    return (work / energy) ** (1.0 / (p - 1.0)) * v


def solve_weighted_problem(
    mesh: Mesh,
    m: NodalField,
    p: float,
    lam: float,
    h: NodalField,
    cfg: SolverConfig,
) -> SolveReport:
    check_p(p)
    mesh.check(m, h)
    log = logger.bind(p=p, lam=lam)

    h_norm = h.sup_norm
    if not np.any(h.values[mesh.interior_nodes]):
        log.debug("weighted_solve_trivial")
        return SolveReport(
            u=mesh.zeros(), converged=True, iterations=0, residual_norm=0.0, lambda_used=lam
        )

    op = WeightedOperator(
        mesh=mesh,
        p=p,
        form=WeightedForm.of(mesh, m.values),
        load=load_vector(mesh, h.values),
        reg=Regularization.for_mesh(mesh, p, cfg.regularization_epsilon),
    )
    tolerance = cfg.newton_tolerance * (1.0 + h_norm)

    x = initial_guess(mesh, p, op.load)
    steps = cfg.continuation_steps
    stages = [0.0] if lam == 0.0 else [lam * k / steps for k in range(steps + 1)]

    path: list[tuple[int, float]] = []
    iterations = 0
    residual_norm = float("nan")
    converged = False
    reason = "converged"
    for stage in stages:
        result = damped_newton(
            lambda y, s=stage: op.residual(y, s),
            lambda y, s=stage: op.jacobian(y, s),
            x,
            tolerance=tolerance,
            max_steps=cfg.max_newton_steps,
            min_step=cfg.min_step,
            sufficient_decrease=cfg.sufficient_decrease,
            blowup_threshold=cfg.blowup_threshold,
        )
        for k, r in result.path:
            if k == 0 and path:
                continue
            path.append((iterations + k, r))
        iterations += result.iterations
        x, residual_norm, converged, reason = (
            result.x,
            result.residual_norm,
            result.converged,
            result.reason,
        )
        if not converged:
            log.info("weighted_solve_stopped", stage=stage, reason=reason, iterations=iterations)
            break

    report = SolveReport(
        u=mesh.extend(x),
        converged=converged,
        iterations=iterations,
        residual_norm=residual_norm,
        lambda_used=lam,
        newton_path=path,
        reason=reason,
    )
    log.debug("weighted_solve_done", converged=converged, iterations=iterations)
    return report


# ---------------------------------------------------------------------------
# Autonomous problem
# ---------------------------------------------------------------------------


def autonomous_residual(
    mesh: Mesh, m: NodalField, f: Nonlinearity, lam: float, u: NodalField
) -> np.ndarray:
    """A(u) - lam M m f(u) over interior nodes."""
    reaction = WeightedForm.of(mesh, m.values).tested(u.values, f.f)
    return p_laplacian_operator(mesh, u.values, f.p) - lam * reaction


def solve_autonomous_problem(
    mesh: Mesh,
    m: NodalField,
    p: float,
    f: Nonlinearity,
    lam: float,
    sign: Sign,
    cfg: SolverConfig,
    *,
    eigen_cfg: EigenConfig | None = None,
    continuation_cfg: ContinuationConfig | None = None,
) -> SolveReport:
    """One-sign solution of  -Delta_p u = lam m f(u)  seeded from a solution branch.

    With the scaled weight lam * m the equation is the branch problem at
    parameter f0, so the branch of sign ``sign`` is traced until it crosses
    f0 and the crossing is polished by Newton on the autonomous residual.
    """
    from plapmax.verification.bifurcate import branch_crossings, continue_branch
    from plapmax.verification.maxprin import positivity_verdict

    check_p(p)
    mesh.check(m)
    if f.p != p:
        raise PreconditionError(
            "Nonlinearity exponent does not match p", details={"p": p, "f_p": f.p}
        )
    check_boundedness(f)
    log = logger.bind(p=p, lam=lam, sigma=str(sign))

    scaled = m.scaled(lam)
    if not np.any(scaled.values[mesh.interior_nodes] > 0):
        raise NoSolutionFoundError(
            "No one-sign solution: lam * m has no positive part",
            details={"lambda": lam, "sign": str(sign)},
        )

    settings = get_settings()
    ccfg = (continuation_cfg or settings.continuation).model_copy(
        update={"enforce_hypotheses": False}
    )
    branch = continue_branch(
        mesh,
        scaled,
        p,
        f,
        sign,
        ccfg,
        eigen_cfg=eigen_cfg or settings.eigen,
        stop_at_lambda=f.f0,
    )
    crossings = branch_crossings(branch, f.f0)
    if not crossings:
        raise NoSolutionFoundError(
            "Solution branch does not reach the requested lambda",
            details={
                "lambda": lam,
                "sign": str(sign),
                "branch_lambda_range": [branch.lambda_min, branch.lambda_max],
            },
        )

    reg = Regularization.for_mesh(mesh, p, cfg.regularization_epsilon)
    form = WeightedForm.of(mesh, scaled.values)

    def full(x: np.ndarray) -> np.ndarray:
        values = np.zeros(mesh.node_count)
        values[mesh.interior_nodes] = x
        return values

    def residual(x: np.ndarray) -> np.ndarray:
        return p_laplacian_operator(mesh, full(x), p) - form.tested(full(x), f.f)

    def jacobian(x: np.ndarray) -> sparse.csr_matrix:
        jac = jacobian_from_values(mesh, full(x), p, reg)
        reaction = form.linearized(full(x), lambda s: f.derivative(s, reg.epsilon))
        return (jac - reaction).tocsr()

    seed = crossings[0].values[mesh.interior_nodes]
    result = damped_newton(
        residual,
        jacobian,
        seed,
        tolerance=cfg.newton_tolerance * (1.0 + float(np.abs(seed).max(initial=0.0))),
        max_steps=cfg.max_newton_steps,
        min_step=cfg.min_step,
        sufficient_decrease=cfg.sufficient_decrease,
    )
    u = mesh.extend(result.x)
    verdict = positivity_verdict(mesh, u, 1e-10 * u.sup_norm)
    log.info(
        "autonomous_solved",
        converged=result.converged,
        residual=result.residual_norm,
        verdict=str(verdict),
    )
    return SolveReport(
        u=u,
        converged=result.converged,
        iterations=result.iterations,
        residual_norm=result.residual_norm,
        lambda_used=lam,
        newton_path=result.path,
        verdict=verdict,
        reason=result.reason,
    )
