"""Principal eigenpairs of  -Delta_p u = lam m phi_p(u)  with an indefinite weight.

The positive principal eigenvalue is the minimum of the Rayleigh quotient
energy / moment over fields with positive weighted moment. It is computed by
damped normalized inverse iteration:

    w_hat solves  -Delta_p w_hat = lam_k m phi_p(u_k)
    u_{k+1} = normalize((1 - tau) u_k + tau w_hat),  lam_{k+1} = RQ(u_{k+1})

With tau = 1 this is plain inverse iteration. For a sign-changing weight the
negative principal mode competes, so tau starts at 1 / (1 + r) where r is the
ratio of the two linear (p = 2) principal eigenvalues, and it is halved
whenever the lambda updates stop shrinking.

The negative principal eigenvalue is always obtained by reflection through
``principal_eigenpair_positive`` applied to -m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from scipy import linalg
from scipy.sparse.linalg import eigsh

from plapmax.config import EigenConfig
from plapmax.errors import ConvergenceError, InfeasibleConstraintError, UndefinedQuotientError
from plapmax.fem.mesh import Mesh, NodalField
from plapmax.fem.pcore import (
    Regularization,
    WeightedForm,
    check_p,
    energy_density,
    jacobian_from_values,
    p_dirichlet_energy,
    p_laplacian_operator,
    phi_p,
    stiffness_matrix,
    weighted_p_moment,
)
from plapmax.observability.metrics import SolveMetric, get_metrics
from plapmax.schemas import EigenDocument, Normalization, SignClass, WeightRegime
from plapmax.solvers.newton import NewtonResult, damped_newton

logger = structlog.get_logger(__name__)

SIGN_THRESHOLD = 1e-14
_DENSE_LIMIT = 2000
_INNER_MAX_STEPS = 50
_MIN_DAMPING = 2.0**-20


@dataclass
class EigenPair:
    lam: float
    u: NodalField
    normalization: Normalization = Normalization.WEIGHTED
    sign_class: SignClass = SignClass.POSITIVE_WEIGHT_SIDE
    iterations: int = 0
    residual_norm: float = 0.0
    inner_failures: int = 0

    def to_document(self) -> EigenDocument:
        return EigenDocument(
            lam=self.lam,
            normalization=self.normalization,
            sign_class=self.sign_class,
            iterations=self.iterations,
            residual_norm=self.residual_norm,
            u=self.u.values.tolist(),
        )


def weight_regime(mesh: Mesh, m: NodalField) -> WeightRegime:
    """Classify m from its interior nodal values with |m_i| > 1e-14."""
    mesh.check(m)
    interior = m.values[mesh.interior_nodes]
    positive = bool(np.any(interior > SIGN_THRESHOLD))
    negative = bool(np.any(interior < -SIGN_THRESHOLD))
    if positive and negative:
        return WeightRegime.SIGN_CHANGING
    if positive:
        return WeightRegime.NONNEGATIVE
    if negative:
        return WeightRegime.NONPOSITIVE
    return WeightRegime.ZERO


# ---------------------------------------------------------------------------
# Quotient and residual
# ---------------------------------------------------------------------------


class _Problem:
    """Interior-vector view of the eigenproblem for a fixed mesh, weight and p."""

    __slots__ = ("mesh", "p", "form", "positive", "reg")

    def __init__(self, mesh: Mesh, m: NodalField, p: float, epsilon: float | None) -> None:
        self.mesh = mesh
        self.p = p
        self.form = WeightedForm.of(mesh, m.values)
        self.positive = m.values[mesh.interior_nodes] > 0
        self.reg = Regularization.for_mesh(mesh, p, epsilon)

    def full(self, x: np.ndarray) -> np.ndarray:
        values = np.zeros(self.mesh.node_count)
        values[self.mesh.interior_nodes] = x
        return values

    def energy(self, x: np.ndarray) -> float:
        density = energy_density(self.mesh, self.full(x), self.p)
        return float(np.dot(density, self.mesh.element_measures))

    def moment(self, x: np.ndarray) -> float:
        return self.form.integral(self.full(x), lambda s: np.abs(s) ** self.p)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return x / self.moment(x) ** (1.0 / self.p)

    def operator(self, x: np.ndarray) -> np.ndarray:
        return p_laplacian_operator(self.mesh, self.full(x), self.p)

    def reaction(self, x: np.ndarray) -> np.ndarray:
        """m phi_p(x) tested with every interior basis function."""
        return self.form.tested(self.full(x), lambda s: phi_p(s, self.p))

    def residual(self, x: np.ndarray, lam: float) -> float:
        """Relative eigen-residual |A(x) - lam M m phi_p(x)| / |A(x)|."""
        ax = self.operator(x)
        scale = max(float(np.linalg.norm(ax)), np.finfo(float).tiny)
        return float(np.linalg.norm(ax - lam * self.reaction(x))) / scale

    def inverse_step(self, x: np.ndarray, lam: float, tolerance: float) -> NewtonResult:
        """Solve -Delta_p w = lam m phi_p(x), warm-started at x."""
        load = lam * self.reaction(x)
        result = damped_newton(
            lambda y: self.operator(y) - load,
            lambda y: jacobian_from_values(self.mesh, self.full(y), self.p, self.reg),
            x,
            tolerance=tolerance * max(float(np.linalg.norm(load)), np.finfo(float).tiny),
            max_steps=_INNER_MAX_STEPS,
            kind="eigen_inner",
        )
        return result


def rayleigh_quotient(mesh: Mesh, m: NodalField, u: NodalField, p: float) -> float:
    """Energy over weighted moment; invariant under u -> c u."""
    check_p(p)
    mesh.check(m, u)
    moment = weighted_p_moment(mesh, m, u, p)
    scale = weighted_p_moment(mesh, mesh.field(np.abs(m.values)), u, p)
    if scale == 0.0 or abs(moment) <= SIGN_THRESHOLD * scale:
        raise UndefinedQuotientError(
            "Weighted moment vanishes; the Rayleigh quotient is undefined",
            details={"moment": moment},
        )
    return p_dirichlet_energy(mesh, u, p) / moment


def eigen_residual(mesh: Mesh, m: NodalField, p: float, pair: EigenPair) -> float:
    """Relative residual of the discrete weak eigen-equation at ``pair``."""
    mesh.check(m, pair.u)
    problem = _Problem(mesh, m, p, None)
    return problem.residual(pair.u.values[mesh.interior_nodes], pair.lam)


# ---------------------------------------------------------------------------
# Linear (p = 2) principal eigenvectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearSpectrum:
    """p = 2 principal data of  K x = lam (M m) x  on interior nodes."""

    vector: np.ndarray
    lambda_plus: float
    lambda_minus: float | None


def linear_principal(mesh: Mesh, m: NodalField) -> LinearSpectrum:
    stiffness = stiffness_matrix(mesh)
    weight = WeightedForm.of(mesh, m.values).matrix()
    n = weight.shape[0]
    has_negative = bool(np.any(m.values[mesh.interior_nodes] < -SIGN_THRESHOLD))

    # nu = 1 / lam solves  (M m) x = nu K x  with K positive definite
    if n <= _DENSE_LIMIT:
        nu, vectors = linalg.eigh(weight.toarray(), stiffness.toarray())
        nu_max, vector, nu_min = nu[-1], vectors[:, -1], nu[0]
    else:
        w_op = weight.tocsc()
        k_op = stiffness.tocsc()
        top, top_vec = eigsh(w_op, k=1, M=k_op, which="LA")
        nu_max, vector = top[0], top_vec[:, 0]
        nu_min = eigsh(w_op, k=1, M=k_op, which="SA", return_eigenvectors=False)[0]

    if nu_max <= 0:
        raise InfeasibleConstraintError(
            "Weight has no positive part on interior nodes", details={"nu_max": float(nu_max)}
        )
    if vector.sum() < 0:
        vector = -vector
    lambda_minus = 1.0 / nu_min if has_negative and nu_min < 0 else None
    return LinearSpectrum(
        vector=np.asarray(vector), lambda_plus=1.0 / nu_max, lambda_minus=lambda_minus
    )


def _initial_guess(problem: _Problem, spectrum: LinearSpectrum, cfg: EigenConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    x = spectrum.vector * (1.0 + cfg.noise * rng.uniform(-1.0, 1.0, spectrum.vector.size))
    if problem.moment(x) <= 0:
        # concentrate on the positive part of the weight
        x = np.abs(x) * problem.positive
    return problem.normalize(x)


def _stalled(history: list[float], window: int) -> bool:
    if len(history) < window:
        return False
    recent = history[-window:]
    return min(recent[1:]) >= recent[0]


# ---------------------------------------------------------------------------
# Principal eigenpairs
# ---------------------------------------------------------------------------


def principal_eigenpair_positive(
    mesh: Mesh, m: NodalField, p: float, cfg: EigenConfig
) -> EigenPair:
    check_p(p)
    mesh.check(m)
    regime = weight_regime(mesh, m)
    if regime in (WeightRegime.NONPOSITIVE, WeightRegime.ZERO):
        raise InfeasibleConstraintError(
            "Constraint set is empty: m has no positive interior value",
            details={"regime": str(regime)},
        )
    log = logger.bind(p=p, regime=str(regime), nodes=mesh.node_count)

    problem = _Problem(mesh, m, p, cfg.regularization_epsilon)
    spectrum = linear_principal(mesh, m)
    tau = 1.0
    if spectrum.lambda_minus is not None:
        tau = 1.0 / (1.0 + spectrum.lambda_plus / abs(spectrum.lambda_minus))

    x = _initial_guess(problem, spectrum, cfg)
    lam = problem.energy(x)
    history: list[float] = []
    residual = problem.residual(x, lam)
    iterations = 0
    converged = False
    failure = "max_iterations"
    inner_failures = 0

    while iterations < cfg.max_iterations:
        iterations += 1
        step = problem.inverse_step(x, lam, cfg.inner_tolerance)
        if not step.converged:
            inner_failures += 1
            log.warning(
                "eigen_inner_failed",
                iterations=iterations,
                reason=step.reason,
                residual=step.residual_norm,
            )
        w_hat = step.x

        while True:
            candidate = (1.0 - tau) * x + tau * w_hat
            if problem.moment(candidate) > 0:
                break
            tau *= 0.5
            if tau < _MIN_DAMPING:
                break
        if tau < _MIN_DAMPING:
            failure = "damping"
            break

        x_next = problem.normalize(candidate)
        lam_next = problem.energy(x_next)
        delta = abs(lam_next - lam)
        x, lam = x_next, lam_next
        residual = problem.residual(x, lam)

        lambda_settled = delta <= cfg.tolerance * abs(lam)
        if lambda_settled and residual <= cfg.residual_tolerance:
            converged = True
            break
        if lambda_settled:
            history.clear()
            continue

        history.append(delta)
        if _stalled(history, cfg.stall_window):
            tau *= 0.5
            history.clear()
            log.debug("eigen_damping_halved", tau=tau, iterations=iterations, lam=lam)
            if tau < _MIN_DAMPING:
                failure = "damping"
                break

    if x.sum() < 0:
        x = -x
    pair = EigenPair(
        lam=lam,
        u=mesh.extend(x),
        normalization=Normalization.WEIGHTED,
        sign_class=SignClass.POSITIVE_WEIGHT_SIDE,
        iterations=iterations,
        residual_norm=residual,
        inner_failures=inner_failures,
    )
    get_metrics().record(
        SolveMetric(
            kind="eigen", iterations=iterations, residual_norm=residual, converged=converged
        )
    )
    if not converged:
        log.warning("eigen_not_converged", iterations=iterations, lam=lam, residual=residual)
        raise ConvergenceError(
            "Inverse iteration did not converge",
            details={
                "iterations": iterations,
                "lambda": lam,
                "residual": residual,
                "tau": tau,
                "reason": failure,
                "inner_failures": inner_failures,
            },
            last_iterate=pair,
        )
    if x.min(initial=np.inf) <= 0:
        log.warning("eigenfunction_not_positive", min_interior=float(x.min()))
    log.info(
        "eigen_converged",
        lam=lam,
        iterations=iterations,
        residual=residual,
        inner_failures=inner_failures,
    )
    return pair


def principal_eigenpair_negative(
    mesh: Mesh, m: NodalField, p: float, cfg: EigenConfig
) -> EigenPair:
    """(-mu, v) where (mu, v) is the positive principal pair of -m."""
    regime = weight_regime(mesh, m)
    if regime in (WeightRegime.NONNEGATIVE, WeightRegime.ZERO):
        raise InfeasibleConstraintError(
            "No negative principal eigenvalue: m has no negative interior value",
            details={"regime": str(regime)},
        )
    reflected = principal_eigenpair_positive(mesh, -m, p, cfg)
    return EigenPair(
        lam=-reflected.lam,
        u=reflected.u,
        normalization=reflected.normalization,
        sign_class=SignClass.NEGATIVE_WEIGHT_SIDE,
        iterations=reflected.iterations,
        residual_norm=reflected.residual_norm,
        inner_failures=reflected.inner_failures,
    )
