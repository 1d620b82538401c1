"""One-sign solution branches of  -Delta_p u = lam m phi_p(u) + m g(u).

Both branches leave the trivial solution at (lam1, 0) along the principal
eigenfunction. They are traced by pseudo-arclength continuation in the
weighted metric  |dz|^2 = sum_i M_i dx_i^2 + dlam^2  with a secant predictor
and a bordered Newton corrector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import structlog
from scipy import sparse

from plapmax.config import ContinuationConfig, EigenConfig, get_settings
from plapmax.errors import PreconditionError
from plapmax.fem.mesh import Mesh, NodalField
from plapmax.fem.pcore import (
    Regularization,
    WeightedForm,
    check_p,
    dphi_p,
    energy_density,
    jacobian_from_values,
    p_laplacian_operator,
    phi_p,
)
from plapmax.schemas import Sign, TerminationReason, Verdict, WeightRegime
from plapmax.solvers.eigen import EigenPair, principal_eigenpair_positive, weight_regime
from plapmax.solvers.newton import NewtonResult, damped_newton
from plapmax.verification.maxprin import POSITIVITY_RTOL, positivity_verdict
from plapmax.verification.nonlinearity import Nonlinearity, check_boundedness, check_crossing

logger = structlog.get_logger(__name__)

_DEDUP_RTOL = 1e-6
_VERTICAL_RTOL = 1e-6
_DETACHMENT_POINTS = 5


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    u: NodalField
    norm: float
    arclength: float
    verdict: Verdict


@dataclass
class Branch:
    sigma: Sign
    points: list[BranchPoint]
    bifurcation_lambda: float
    terminated_reason: TerminationReason
    mesh: Mesh = field(repr=False)
    m: NodalField = field(repr=False)
    p: float = 2.0
    f: Nonlinearity | None = field(default=None, repr=False)
    cfg: ContinuationConfig = field(default_factory=ContinuationConfig, repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.points])

    @property
    def norms(self) -> np.ndarray:
        return np.array([pt.norm for pt in self.points])

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas.min())

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas.max())

    @property
    def last(self) -> BranchPoint:
        return self.points[-1]

    def point_at_max_norm(self) -> BranchPoint:
        return max(self.points, key=lambda pt: pt.norm)


class LambdaBound(NamedTuple):
    bound: float
    satisfied: bool


# ---------------------------------------------------------------------------
# Extended system
# ---------------------------------------------------------------------------


class _BranchSystem:
    """G(x, lam) = A(x) - M m (lam phi_p(x) + g(x)) on interior unknowns."""

    __slots__ = ("mesh", "p", "f", "mass", "form", "reg")

    def __init__(self, mesh: Mesh, m: NodalField, p: float, f: Nonlinearity) -> None:
        self.mesh = mesh
        self.p = p
        self.f = f
        self.mass = mesh.lumped_mass[mesh.interior_nodes]
        self.form = WeightedForm.of(mesh, m.values)
        self.reg = Regularization.for_mesh(mesh, p, get_settings().solver.regularization_epsilon)

    def full(self, x: np.ndarray) -> np.ndarray:
        values = np.zeros(self.mesh.node_count)
        values[self.mesh.interior_nodes] = x
        return values

    def residual(self, x: np.ndarray, lam: float) -> np.ndarray:
        reaction = self.form.tested(self.full(x), lambda s: lam * phi_p(s, self.p) + self.f.g(s))
        return p_laplacian_operator(self.mesh, self.full(x), self.p) - reaction

    def jacobian_x(self, x: np.ndarray, lam: float) -> sparse.csr_matrix:
        eps = self.reg.epsilon
        reaction = self.form.linearized(
            self.full(x), lambda s: lam * dphi_p(s, self.p, eps) + self.f.g_derivative(s, eps)
        )
        jac = jacobian_from_values(self.mesh, self.full(x), self.p, self.reg)
        return (jac - reaction).tocsr()

    def jacobian_lam(self, x: np.ndarray) -> np.ndarray:
        return -self.form.tested(self.full(x), lambda s: phi_p(s, self.p))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Weighted inner product of (x, lam) vectors."""
        return float(np.dot(self.mass * a[:-1], b[:-1]) + a[-1] * b[-1])

    def norm(self, x: np.ndarray) -> float:
        density = energy_density(self.mesh, self.full(x), self.p)
        return float(np.dot(density, self.mesh.element_measures)) ** (1.0 / self.p)

    def tolerance(self, x: np.ndarray, base: float) -> float:
        """Absolute tolerance scaled by the size of the operator term A(x)."""
        operator = p_laplacian_operator(self.mesh, self.full(x), self.p)
        return base * max(1.0, float(np.linalg.norm(operator)))

    def correct(
        self,
        z_pred: np.ndarray,
        tangent: np.ndarray,
        cfg: ContinuationConfig,
    ) -> NewtonResult:
        """Bordered Newton on {G = 0, <t, z - z_pred> = 0}."""
        weighted_tangent = np.append(self.mass * tangent[:-1], tangent[-1])

        def residual(z: np.ndarray) -> np.ndarray:
            g = self.residual(z[:-1], z[-1])
            return np.append(g, np.dot(weighted_tangent, z - z_pred))

        def jacobian(z: np.ndarray) -> sparse.csr_matrix:
            x, lam = z[:-1], z[-1]
            column = sparse.csr_matrix(self.jacobian_lam(x).reshape(-1, 1))
            row = sparse.csr_matrix(weighted_tangent[:-1].reshape(1, -1))
            corner = sparse.csr_matrix([[weighted_tangent[-1]]])
            return sparse.bmat([[self.jacobian_x(x, lam), column], [row, corner]]).tocsr()

        return damped_newton(
            residual,
            jacobian,
            z_pred,
            tolerance=self.tolerance(z_pred[:-1], cfg.corrector_tolerance),
            max_steps=cfg.max_corrector_iterations,
            kind="corrector",
        )


def _expected_verdict(sigma: Sign) -> Verdict:
    return Verdict.POSITIVE if sigma is Sign.PLUS else Verdict.NEGATIVE


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------


def continue_branch(
    mesh: Mesh,
    m: NodalField,
    p: float,
    f: Nonlinearity,
    sigma: Sign,
    cfg: ContinuationConfig,
    *,
    eigen_cfg: EigenConfig | None = None,
    eigenpair: EigenPair | None = None,
    stop_at_lambda: float | None = None,
) -> Branch:
    """Trace the branch of sign ``sigma`` from (lam1, 0) until a stop criterion fires."""
    check_p(p)
    mesh.check(m)
    if f.p != p:
        raise PreconditionError(
            "Nonlinearity exponent does not match p", details={"p": p, "f_p": f.p}
        )
    regime = weight_regime(mesh, m)
    if regime == WeightRegime.SIGN_CHANGING and not cfg.allow_sign_changing_weight:
        raise PreconditionError(
            "Branch continuation requires a nonnegative weight",
            details={"regime": str(regime)},
        )
    if cfg.enforce_hypotheses:
        check_boundedness(f)

    if eigenpair is None:
        eigenpair = principal_eigenpair_positive(mesh, m, p, eigen_cfg or get_settings().eigen)
    lambda1 = eigenpair.lam
    if cfg.enforce_hypotheses:
        check_crossing(f, lambda1)

    log = logger.bind(p=p, sigma=str(sigma), lambda1=lambda1)
    system = _BranchSystem(mesh, m, p, f)
    expected = _expected_verdict(sigma)

    u1 = eigenpair.u.values[mesh.interior_nodes]
    u1 = u1 / system.norm(u1)
    tangent = np.append(sigma.factor * u1, 0.0)
    tangent /= np.sqrt(system.inner(tangent, tangent))
    z0 = np.append(sigma.factor * cfg.detachment_amplitude * u1, lambda1)

    start = system.correct(z0, tangent, cfg)
    if not start.converged:
        log.warning("branch_start_failed", residual=start.residual_norm)
        z = z0
    else:
        z = start.x

    def make_point(z_k: np.ndarray, arclength: float) -> BranchPoint:
        u = mesh.extend(z_k[:-1])
        return BranchPoint(
            lam=float(z_k[-1]),
            u=u,
            norm=system.norm(z_k[:-1]),
            arclength=arclength,
            verdict=positivity_verdict(mesh, u, POSITIVITY_RTOL * u.sup_norm),
        )

    points = [make_point(z, 0.0)]
    z_prev: np.ndarray | None = None
    ds = cfg.initial_step
    arclength = 0.0
    reason = TerminationReason.MAX_STEPS

    for _ in range(cfg.max_steps):
        if z_prev is not None:
            secant = z - z_prev
            tangent = secant / np.sqrt(system.inner(secant, secant))

        accepted = None
        while ds >= cfg.min_step:
            z_pred = z + ds * tangent
            result = system.correct(z_pred, tangent, cfg)
            if result.converged:
                candidate = make_point(result.x, 0.0)
                one_signed = (
                    candidate.norm <= cfg.detachment_threshold or candidate.verdict == expected
                )
                if one_signed:
                    accepted = result
                    break
            ds *= 0.5

        if accepted is None:
            reason = TerminationReason.STEP_FAILURE
            break

        step = accepted.x - z
        arclength += np.sqrt(system.inner(step, step))
        z_prev, z = z, accepted.x
        point = make_point(z, arclength)
        points.append(point)

        if accepted.iterations < cfg.target_corrector_iterations:
            ds = min(2.0 * ds, cfg.max_step)
        elif accepted.iterations > cfg.target_corrector_iterations:
            ds *= 0.5

        if point.norm >= cfg.max_norm:
            reason = TerminationReason.MAX_NORM
            break
        if arclength >= cfg.max_arclength:
            reason = TerminationReason.MAX_ARCLENGTH
            break
        if stop_at_lambda is not None:
            before, after = z_prev[-1] - stop_at_lambda, z[-1] - stop_at_lambda
            if before * after <= 0:
                reason = TerminationReason.TARGET_REACHED
                break

    branch = Branch(
        sigma=sigma,
        points=points,
        bifurcation_lambda=lambda1,
        terminated_reason=reason,
        mesh=mesh,
        m=m,
        p=p,
        f=f,
        cfg=cfg,
    )
    log.info(
        "branch_terminated",
        reason=str(reason),
        points=len(points),
        lam=branch.last.lam,
        norm=branch.last.norm,
    )
    return branch


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def lambda_star(f: Nonlinearity) -> float:
    """Smallest shift making lam* + g(s)/phi_p(s) nonnegative on the sample grid."""
    return max(0.0, -f.ratio_infimum)


def branch_lambda_bound(branch: Branch, f: Nonlinearity, lambda1: float) -> LambdaBound:
    """A priori bound C = max(|lam1 + lam*|, |lam*|) + |lam1| on |lam| along the branch."""
    shift = lambda_star(f)
    bound = max(abs(lambda1 + shift), abs(shift)) + abs(lambda1)
    satisfied = bool(np.all(np.abs(branch.lambdas) <= bound))
    return LambdaBound(bound=bound, satisfied=satisfied)


def branch_residual(branch: Branch, lam: float, u: NodalField) -> float:
    """Euclidean norm of the branch equation residual at (lam, u)."""
    system = _BranchSystem(branch.mesh, branch.m, branch.p, branch.f)
    return float(np.linalg.norm(system.residual(u.values[branch.mesh.interior_nodes], lam)))


def branch_crossings(branch: Branch, lambda_target: float) -> list[NodalField]:
    """Solutions of the branch equation at ``lambda_target`` seeded from straddling pairs."""
    points = branch.points
    if not points:
        return []
    mesh = branch.mesh
    lams = branch.lambdas
    vertical_tol = _VERTICAL_RTOL * max(1.0, abs(lambda_target))
    if np.all(np.abs(lams - lambda_target) <= vertical_tol):
        return [branch.point_at_max_norm().u]

    system = _BranchSystem(mesh, branch.m, branch.p, branch.f)
    solver = get_settings().solver
    found: list[np.ndarray] = []
    for a, b in zip(points[:-1], points[1:], strict=True):
        da, db = a.lam - lambda_target, b.lam - lambda_target
        if da * db > 0 or a.lam == b.lam:
            continue
        theta = (lambda_target - a.lam) / (b.lam - a.lam)
        xa = a.u.values[mesh.interior_nodes]
        xb = b.u.values[mesh.interior_nodes]
        guess = xa + theta * (xb - xa)

        result = damped_newton(
            lambda x: system.residual(x, lambda_target),
            lambda x: system.jacobian_x(x, lambda_target),
            guess,
            tolerance=system.tolerance(guess, branch.cfg.corrector_tolerance),
            max_steps=solver.max_newton_steps,
            min_step=solver.min_step,
            sufficient_decrease=solver.sufficient_decrease,
            kind="crossing",
        )
        if not result.converged:
            logger.warning(
                "crossing_polish_failed", lam=lambda_target, residual=result.residual_norm
            )
            continue
        x = result.x
        duplicate = any(
            np.linalg.norm(x - y) <= _DEDUP_RTOL * max(np.linalg.norm(y), 1.0) for y in found
        )
        if not duplicate:
            found.append(x)

    logger.debug("branch_crossings", lam=lambda_target, sigma=str(branch.sigma), count=len(found))
    return [mesh.extend(x) for x in found]


def detachment_lambda(branch: Branch, count: int = _DETACHMENT_POINTS) -> float:
    """Linear extrapolation of lam against norm over the first points, to norm 0."""
    head = branch.points[:count]
    if len(head) < 2:
        return branch.points[0].lam
    norms = np.array([pt.norm for pt in head])
    lams = np.array([pt.lam for pt in head])
    _, intercept = np.polyfit(norms, lams, 1)
    return float(intercept)


def asymptote_lambda(lambda1: float, f: Nonlinearity) -> float:
    """Limit of lam along the branch as the norm grows: lam1 + f0 - finf."""
    return lambda1 + f.f0 - f.finf
