"""Uniform simplicial meshes and nodal fields for P1 finite elements.

A ``Mesh`` is either a uniform partition of an interval or a tensor grid on a
rectangle with every cell split into two triangles. Meshes and fields are
immutable once built; derived quantities (basis gradients, lumped mass,
interior index) are computed lazily and cached on the instance.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import structlog

from plapmax.errors import InvalidMeshError, MeshMismatchError
from plapmax.schemas import MeshDocument

logger = structlog.get_logger(__name__)

_MEASURE_RTOL = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial discretization of a 1D interval or a 2D rectangle."""

    dimension: int
    nodes: np.ndarray  # (N, d)
    elements: np.ndarray  # (E, d + 1)
    boundary_nodes: np.ndarray
    element_measures: np.ndarray
    mesh_id: str = ""

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise InvalidMeshError(f"Unsupported mesh dimension {self.dimension}")
        n = self.node_count
        if self.nodes.shape != (n, self.dimension):
            raise InvalidMeshError("Node array must have shape (N, dimension)")
        if self.elements.ndim != 2 or self.elements.shape[1] != self.dimension + 1:
            raise InvalidMeshError("Each element must list dimension + 1 node indices")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= n):
            raise InvalidMeshError("Element references a node index out of range")
        if self.boundary_nodes.size and (
            self.boundary_nodes.min() < 0 or self.boundary_nodes.max() >= n
        ):
            raise InvalidMeshError("Boundary node index out of range")
        if not np.all(self.element_measures > 0):
            raise InvalidMeshError("Element measures must be strictly positive")
        for array in (self.nodes, self.elements, self.boundary_nodes, self.element_measures):
            _frozen(array)

    # -- sizes ---------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def element_count(self) -> int:
        return int(self.elements.shape[0])

    @property
    def measure(self) -> float:
        return float(self.element_measures.sum())

    @cached_property
    def diameter(self) -> float:
        extent = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.linalg.norm(extent))

    @cached_property
    def spacing(self) -> float:
        """Largest element edge length along the coordinate axes."""
        coords = self.nodes[self.elements]
        edges = np.abs(coords[:, 1:, :] - coords[:, :1, :])
        return float(edges.max())

    # -- index sets ----------------------------------------------------------

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.node_count, dtype=bool)
        mask[self.boundary_nodes] = True
        return _frozen(mask)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        return _frozen(np.flatnonzero(~self.boundary_mask))

    @property
    def interior_count(self) -> int:
        return int(self.interior_nodes.size)

    # -- P1 element data -----------------------------------------------------

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the barycentric basis, shape (E, d + 1, d)."""
        coords = self.nodes[self.elements]
        jac = np.swapaxes(coords[:, 1:, :] - coords[:, :1, :], 1, 2)
        inv = np.linalg.inv(jac)
        grads = np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)
        return _frozen(grads)

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """Vertex-average mass, M_i = sum over elements T containing i of |T|/(d+1)."""
        k = self.dimension + 1
        weights = np.repeat(self.element_measures / k, k)
        mass = np.bincount(self.elements.ravel(), weights=weights, minlength=self.node_count)
        return _frozen(mass)

    def element_gradients(self, values: np.ndarray) -> np.ndarray:
        """Gradient of the P1 interpolant of ``values`` on every element, shape (E, d)."""
        return np.einsum("ekd,ek->ed", self.basis_gradients, values[self.elements])

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Sum per-element vertex contributions (E, d + 1) into a nodal vector."""
        return np.bincount(self.elements.ravel(), weights=local.ravel(), minlength=self.node_count)

    # -- fields --------------------------------------------------------------

    def field(self, values: np.ndarray | float, *, dirichlet_zero: bool = False) -> NodalField:
        data = np.array(np.broadcast_to(np.asarray(values, dtype=float), (self.node_count,)))
        if dirichlet_zero:
            data[self.boundary_nodes] = 0.0
        return NodalField(values=_frozen(data), mesh_id=self.mesh_id, dirichlet_zero=dirichlet_zero)

    def zeros(self) -> NodalField:
        return self.field(0.0, dirichlet_zero=True)

    def extend(self, interior_values: np.ndarray) -> NodalField:
        """Lift a vector over interior nodes to a Dirichlet-zero field."""
        if interior_values.shape != (self.interior_count,):
            raise MeshMismatchError(
                "Interior vector length does not match mesh",
                details={"expected": self.interior_count, "got": int(interior_values.size)},
            )
        data = np.zeros(self.node_count)
        data[self.interior_nodes] = interior_values
        return NodalField(values=_frozen(data), mesh_id=self.mesh_id, dirichlet_zero=True)

    def check(self, *fields: NodalField) -> None:
        for f in fields:
            if f.mesh_id != self.mesh_id or f.values.shape != (self.node_count,):
                raise MeshMismatchError(
                    "Field does not belong to this mesh",
                    details={"mesh": self.mesh_id, "field_mesh": f.mesh_id},
                )

    def to_document(self) -> MeshDocument:
        return MeshDocument(
            dimension=self.dimension,
            nodes=self.nodes.tolist(),
            elements=self.elements.tolist(),
            boundary_nodes=self.boundary_nodes.tolist(),
        )


@dataclass(frozen=True, eq=False)
class NodalField:
    """Scalar field given by its values at the mesh nodes."""

    values: np.ndarray
    mesh_id: str
    dirichlet_zero: bool = False

    def __len__(self) -> int:
        return int(self.values.size)

    def scaled(self, factor: float) -> NodalField:
        return NodalField(
            values=_frozen(factor * self.values),
            mesh_id=self.mesh_id,
            dirichlet_zero=self.dirichlet_zero,
        )

    def __neg__(self) -> NodalField:
        return self.scaled(-1.0)

    def interior(self, mesh: Mesh) -> np.ndarray:
        mesh.check(self)
        return self.values[mesh.interior_nodes]

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise InvalidMeshError("Interval requires a < b", details={"a": a, "b": b})
    if int(n) != n or n < 2:
        raise InvalidMeshError("Interval requires at least 2 elements", details={"n": n})
    n = int(n)
    nodes = (a + (b - a) * np.arange(n + 1, dtype=float) / n).reshape(-1, 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    measures = np.full(n, (b - a) / n)
    mesh = Mesh(
        dimension=1,
        nodes=nodes,
        elements=elements,
        boundary_nodes=np.array([0, n]),
        element_measures=measures,
        mesh_id=f"interval:{a!r}:{b!r}:{n}",
    )
    logger.debug("mesh_built", mesh=mesh.mesh_id, nodes=mesh.node_count)
    return mesh


def build_rectangle_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh:
    """Triangulate (0, lx) x (0, ly) with ``nx`` by ``ny`` cells, two triangles each."""
    if not (np.isfinite(lx) and np.isfinite(ly)) or lx <= 0 or ly <= 0:
        raise InvalidMeshError("Rectangle sides must be positive", details={"lx": lx, "ly": ly})
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise InvalidMeshError(
            "Rectangle requires at least 2 cells per side", details={"nx": nx, "ny": ny}
        )
    nx, ny = int(nx), int(ny)

    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    i, j = i.ravel(), j.ravel()
    nodes = np.column_stack([lx * i / nx, ly * j / ny]).astype(float)

    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (cj * (nx + 1) + ci).ravel()
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    elements = np.vstack(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )

    coords = nodes[elements]
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    measures = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    area = lx * ly
    if abs(math.fsum(measures) - area) > _MEASURE_RTOL * area:
        raise InvalidMeshError(
            "Triangles do not tile the rectangle",
            details={"sum": float(measures.sum()), "area": area},
        )

    boundary = np.flatnonzero((i == 0) | (i == nx) | (j == 0) | (j == ny))
    mesh = Mesh(
        dimension=2,
        nodes=nodes,
        elements=elements,
        boundary_nodes=boundary,
        element_measures=measures,
        mesh_id=f"rectangle:{lx!r}:{ly!r}:{nx}:{ny}",
    )
    logger.debug("mesh_built", mesh=mesh.mesh_id, nodes=mesh.node_count)
    return mesh


def sample_field(
    mesh: Mesh,
    fn: Callable[..., np.ndarray | float],
    dirichlet: bool = False,
) -> NodalField:
    """Evaluate ``fn`` at every node.

    ``fn`` receives one coordinate array per axis (``x`` or ``x, y``) and must
    broadcast over them; constants are accepted.
    """
    values = fn(*mesh.nodes.T)
    return mesh.field(values, dirichlet_zero=dirichlet)

