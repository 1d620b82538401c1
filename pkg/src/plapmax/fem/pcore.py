"""The p-Laplacian calculus on P1 elements.

Residuals use the exact flux |g|^{p-2} g with the convention that a zero
gradient carries zero flux. Only Jacobians see the regularized magnitude
(|g|^2 + eps^2)^{1/2}. Every assembled operator acts on interior nodes;
Dirichlet rows and columns are eliminated.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import structlog
from scipy import sparse

from plapmax.errors import PreconditionError, SingularJacobianError
from plapmax.fem.mesh import Mesh, NodalField
from plapmax.fem.quadrature import QuadratureRule, reaction_rule

logger = structlog.get_logger(__name__)

_DEFAULT_EPSILON_SCALE = 1e-8


def check_p(p: float) -> None:
    if not p > 1:
        raise PreconditionError("Exponent p must be greater than 1", details={"p": p})


@dataclass(frozen=True)
class Regularization:
    """Gradient-magnitude smoothing used inside Newton linearizations."""

    epsilon: float
    p: float

    def __post_init__(self) -> None:
        check_p(self.p)
        if not self.epsilon >= 0:
            raise PreconditionError(
                "Regularization epsilon must be nonnegative", details={"epsilon": self.epsilon}
            )

    @classmethod
    def for_mesh(cls, mesh: Mesh, p: float, epsilon: float | None = None) -> Regularization:
        """``epsilon=None`` selects 1e-8 divided by the domain diameter."""
        if epsilon is None:
            epsilon = _DEFAULT_EPSILON_SCALE / mesh.diameter
        return cls(epsilon=epsilon, p=p)


def phi_p(s, p: float):
    """|s|^{p-2} s, odd, with phi_p(0) = 0 for every p > 1."""
    check_p(p)
    s_arr = np.asarray(s, dtype=float)
    out = np.sign(s_arr) * np.abs(s_arr) ** (p - 1.0)
    return float(out) if out.ndim == 0 else out


def dphi_p(s, p: float, epsilon: float = 0.0):
    """Derivative (p-1)(s^2 + epsilon^2)^{(p-2)/2}.

    With ``epsilon = 0`` this is exact and blows up at s = 0 when p < 2.
    """
    s_arr = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        out = (p - 1.0) * (s_arr * s_arr + epsilon * epsilon) ** ((p - 2.0) / 2.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Integrals
# ---------------------------------------------------------------------------


def energy_density(mesh: Mesh, values: np.ndarray, p: float) -> np.ndarray:
    """Per-element |grad u|^p, shape (E,)."""
    grads = mesh.element_gradients(values)
    return np.linalg.norm(grads, axis=1) ** p


def p_dirichlet_energy(mesh: Mesh, u: NodalField, p: float) -> float:
    check_p(p)
    mesh.check(u)
    return float(np.dot(energy_density(mesh, u.values, p), mesh.element_measures))


PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class WeightedForm:
    """Integrals of a nodal weight w against functions of u.

    Both w and u are interpolated to the points of ``reaction_rule``: the
    element midpoint in 1D, the vertices in 2D. ``integral`` is the sum over
    elements of |T| sum_q c_q w_q fn(u_q); ``tested`` is its derivative along
    each interior basis function and ``linearized`` the matching Jacobian, so
    tested(u, phi_p) . u equals integral(u, |s|^p) exactly.
    """

    mesh: Mesh
    weight: np.ndarray  # w at the quadrature points, (E, q)
    rule: QuadratureRule

    @classmethod
    def of(cls, mesh: Mesh, weight: np.ndarray) -> WeightedForm:
        rule = reaction_rule(mesh.dimension)
        return cls(mesh=mesh, weight=_at_points(mesh, weight, rule), rule=rule)

    def _scaled(self, values: np.ndarray, fn: PointFunction) -> np.ndarray:
        """|T| c_q w_q fn(u_q), shape (E, q)."""
        samples = fn(_at_points(self.mesh, values, self.rule))
        return self.mesh.element_measures[:, None] * self.rule.weights * self.weight * samples

    def integral(self, values: np.ndarray, fn: PointFunction) -> float:
        return float(self._scaled(values, fn).sum())

    def tested(self, values: np.ndarray, fn: PointFunction) -> np.ndarray:
        local = self._scaled(values, fn) @ self.rule.barycentric
        return self.mesh.scatter(local)[self.mesh.interior_nodes]

    def linearized(self, values: np.ndarray, dfn: PointFunction) -> sparse.csr_matrix:
        bary = self.rule.barycentric
        local = np.einsum("eq,qk,ql->ekl", self._scaled(values, dfn), bary, bary)
        return _assemble_local(self.mesh, local)

    def matrix(self) -> sparse.csr_matrix:
        """The weighted mass matrix over interior nodes."""
        return self.linearized(np.zeros(self.mesh.node_count), np.ones_like)


def _at_points(mesh: Mesh, values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    return values[mesh.elements] @ rule.barycentric.T


def weighted_p_moment(mesh: Mesh, m: NodalField, u: NodalField, p: float) -> float:
    """Integral of m |u|^p by the midpoint (1D) or vertex-average (2D) rule."""
    check_p(p)
    mesh.check(m, u)
    return WeightedForm.of(mesh, m.values).integral(u.values, lambda s: np.abs(s) ** p)


def load_vector(mesh: Mesh, rhs: np.ndarray) -> np.ndarray:
    """Integral of rhs against each interior basis function, same rule as the moment."""
    return WeightedForm.of(mesh, rhs).tested(np.zeros(mesh.node_count), np.ones_like)


# ---------------------------------------------------------------------------
# Flux, residual, Jacobian
# ---------------------------------------------------------------------------


def p_laplacian_flux(mesh: Mesh, values: np.ndarray, p: float) -> np.ndarray:
    """Exact flux |g|^{p-2} g per element, zero where the gradient vanishes."""
    grads = mesh.element_gradients(values)
    magnitude = np.linalg.norm(grads, axis=1)
    scale = np.zeros_like(magnitude)
    nonzero = magnitude > 0
    scale[nonzero] = magnitude[nonzero] ** (p - 2.0)
    return scale[:, None] * grads


def p_laplacian_operator(mesh: Mesh, values: np.ndarray, p: float) -> np.ndarray:
    """Weak form of -Delta_p u tested with every interior basis function."""
    flux = p_laplacian_flux(mesh, values, p)
    local = mesh.element_measures[:, None] * np.einsum("ed,ekd->ek", flux, mesh.basis_gradients)
    return mesh.scatter(local)[mesh.interior_nodes]


def p_laplacian_residual(mesh: Mesh, u: NodalField, p: float, rhs: NodalField) -> np.ndarray:
    """A(u) - b over interior nodes, the discrete weak residual of -Delta_p u = rhs."""
    check_p(p)
    mesh.check(u, rhs)
    return p_laplacian_operator(mesh, u.values, p) - load_vector(mesh, rhs.values)


def _assemble(mesh: Mesh, tensors: np.ndarray) -> sparse.csr_matrix:
    """Assemble sum_T |T| grad(psi_j) . D_T grad(psi_k) over interior nodes."""
    grads = mesh.basis_gradients
    local = np.einsum("ekd,edf,elf->ekl", grads, tensors, grads)
    local = 0.5 * (local + np.swapaxes(local, 1, 2))
    local *= mesh.element_measures[:, None, None]
    return _assemble_local(mesh, local)


def _assemble_local(mesh: Mesh, local: np.ndarray) -> sparse.csr_matrix:
    """Sum per-element (E, k, k) blocks into a CSR matrix over interior nodes."""
    k = mesh.dimension + 1
    rows = np.repeat(mesh.elements, k, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, k)).ravel()
    full = sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.node_count, mesh.node_count)
    ).tocsr()
    idx = mesh.interior_nodes
    return full[idx][:, idx].tocsr()


def stiffness_matrix(mesh: Mesh) -> sparse.csr_matrix:
    """The p = 2 stiffness matrix over interior nodes."""
    d = mesh.dimension
    eye = np.broadcast_to(np.eye(d), (mesh.element_count, d, d))
    return _assemble(mesh, eye)


def jacobian_from_values(
    mesh: Mesh, values: np.ndarray, p: float, reg: Regularization
) -> sparse.csr_matrix:
    if p == 2.0:
        return stiffness_matrix(mesh)

    grads = mesh.element_gradients(values)
    sq = np.einsum("ed,ed->e", grads, grads) + reg.epsilon**2
    if np.any(sq == 0):
        if p < 2:
            raise SingularJacobianError(
                "Flat element with epsilon = 0 makes the p < 2 Jacobian singular",
                details={"p": p, "flat_elements": int(np.count_nonzero(sq == 0))},
            )
        # p > 2, epsilon = 0: the linearization vanishes on flat elements
        a = np.zeros_like(sq)
        b = np.zeros_like(sq)
        live = sq > 0
        a[live] = sq[live] ** ((p - 2.0) / 2.0)
        b[live] = (p - 2.0) * sq[live] ** ((p - 4.0) / 2.0)
    else:
        a = sq ** ((p - 2.0) / 2.0)
        b = (p - 2.0) * sq ** ((p - 4.0) / 2.0)

    eye = np.eye(mesh.dimension)
    tensors = a[:, None, None] * eye + b[:, None, None] * grads[:, :, None] * grads[:, None, :]
    return _assemble(mesh, tensors)


def regularized_jacobian(
    mesh: Mesh, u: NodalField, p: float, reg: Regularization
) -> sparse.csr_matrix:
    """Derivative of the interior residual with |grad u|^2 replaced by |grad u|^2 + eps^2."""
    check_p(p)
    mesh.check(u)
    if reg.p != p:
        raise PreconditionError(
            "Regularization exponent does not match p", details={"p": p, "reg_p": reg.p}
        )
    return jacobian_from_values(mesh, u.values, p, reg)
