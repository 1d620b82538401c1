from __future__ import annotations

import json

import numpy as np
import pytest

from plapmax.errors import InvalidMeshError, MeshMismatchError
from plapmax.fem.mesh import build_interval_mesh, build_rectangle_mesh, sample_field
from plapmax.fem.pcore import p_dirichlet_energy


class TestIntervalMesh:
    def test_uniform_partition(self):
        mesh = build_interval_mesh(0.0, 1.0, 4)
        np.testing.assert_allclose(mesh.nodes[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
        assert mesh.element_count == 4
        np.testing.assert_allclose(mesh.element_measures, 0.25)

    def test_boundary_nodes_are_endpoints(self):
        mesh = build_interval_mesh(0.0, 1.0, 2)
        assert mesh.boundary_nodes.tolist() == [0, 2]
        assert mesh.interior_nodes.tolist() == [1]

    def test_total_measure(self):
        mesh = build_interval_mesh(-1.0, 1.0, 8)
        assert mesh.measure == pytest.approx(2.0, rel=1e-15)

    @pytest.mark.parametrize(("a", "b", "n"), [(1.0, 1.0, 4), (2.0, 1.0, 4), (0.0, 1.0, 1)])
    def test_invalid_input_rejected(self, a, b, n):
        with pytest.raises(InvalidMeshError):
            build_interval_mesh(a, b, n)

    def test_lumped_mass_sums_to_measure(self):
        mesh = build_interval_mesh(0.0, 3.0, 7)
        assert mesh.lumped_mass.sum() == pytest.approx(3.0, rel=1e-14)
        assert mesh.lumped_mass[0] == pytest.approx(3.0 / 14.0)

    def test_arrays_are_read_only(self):
        mesh = build_interval_mesh(0.0, 1.0, 4)
        with pytest.raises(ValueError):
            mesh.nodes[0, 0] = 5.0


class TestRectangleMesh:
    def test_unit_square_counts(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 2, 2)
        assert mesh.node_count == 9
        assert mesh.element_count == 8
        assert mesh.measure == pytest.approx(1.0, rel=1e-12)

    def test_rectangle_area(self):
        mesh = build_rectangle_mesh(2.0, 1.0, 4, 2)
        assert mesh.measure == pytest.approx(2.0, rel=1e-12)

    def test_boundary_is_everything_but_centre(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 2, 2)
        assert mesh.boundary_nodes.size == 8
        np.testing.assert_allclose(mesh.nodes[mesh.interior_nodes], [[0.5, 0.5]])

    @pytest.mark.parametrize(
        ("lx", "ly", "nx", "ny"), [(0.0, 1.0, 2, 2), (1.0, -1.0, 2, 2), (1.0, 1.0, 1, 2)]
    )
    def test_invalid_input_rejected(self, lx, ly, nx, ny):
        with pytest.raises(InvalidMeshError):
            build_rectangle_mesh(lx, ly, nx, ny)

    def test_basis_gradients_sum_to_zero(self):
        mesh = build_rectangle_mesh(1.0, 2.0, 3, 5)
        np.testing.assert_allclose(mesh.basis_gradients.sum(axis=1), 0.0, atol=1e-12)

    def test_linear_function_has_exact_gradient(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 4, 4)
        values = 2.0 * mesh.nodes[:, 0] - 3.0 * mesh.nodes[:, 1]
        np.testing.assert_allclose(mesh.element_gradients(values), [[2.0, -3.0]] * 32)


class TestSampleField:
    def test_constant(self, unit_interval):
        mesh = unit_interval(8)
        field = sample_field(mesh, lambda x: 1.0)
        np.testing.assert_array_equal(field.values, 1.0)

    def test_coordinate(self):
        mesh = build_interval_mesh(0.0, 1.0, 4)
        field = sample_field(mesh, lambda x: x)
        np.testing.assert_allclose(field.values, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_dirichlet_forces_exact_zero(self, unit_interval):
        mesh = unit_interval(16)
        field = sample_field(mesh, lambda x: np.sin(np.pi * x), dirichlet=True)
        assert field.values[0] == 0.0
        assert field.values[-1] == 0.0
        assert field.dirichlet_zero

    def test_two_dimensional(self, unit_square):
        mesh = unit_square(4)
        field = sample_field(mesh, lambda x, y: x * y)
        np.testing.assert_allclose(field.values, mesh.nodes[:, 0] * mesh.nodes[:, 1])


class TestFields:
    def test_mismatch_detected(self, unit_interval):
        coarse, fine = unit_interval(4), unit_interval(8)
        with pytest.raises(MeshMismatchError):
            coarse.check(fine.zeros())

    def test_extend_rejects_wrong_length(self, unit_interval):
        with pytest.raises(MeshMismatchError):
            unit_interval(4).extend(np.ones(7))

    def test_negation_keeps_mesh(self, unit_interval):
        mesh = unit_interval(4)
        field = mesh.extend(np.array([1.0, 2.0, 3.0]))
        negated = -field
        assert negated.mesh_id == mesh.mesh_id
        np.testing.assert_array_equal(negated.values, [0.0, -1.0, -2.0, -3.0, 0.0])

    def test_refinement_keeps_linear_energy(self):
        coarse = build_interval_mesh(0.0, 1.0, 8)
        fine = build_interval_mesh(0.0, 1.0, 16)
        energies = [
            p_dirichlet_energy(mesh, sample_field(mesh, lambda x: 3.0 * x - 1.0), 3.0)
            for mesh in (coarse, fine)
        ]
        assert energies[0] == pytest.approx(energies[1], rel=1e-12)

    def test_document_is_json_ready(self):
        mesh = build_rectangle_mesh(1.0, 1.0, 2, 2)
        doc = json.loads(mesh.to_document().model_dump_json())
        assert doc["dimension"] == 2
        assert len(doc["elements"]) == 8
        assert doc["schema_version"] == 1
