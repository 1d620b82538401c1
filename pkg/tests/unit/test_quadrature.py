from __future__ import annotations

from math import factorial

import numpy as np
import pytest

from plapmax.errors import PreconditionError
from plapmax.fem.quadrature import (
    collapsed_triangle,
    dunavant_triangle,
    gauss_interval,
    production_rule,
    reference_rule,
)


def _triangle_moment(a: int, b: int, c: int) -> float:
    """Mean of l1^a l2^b l3^c over a triangle."""
    return 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)


class TestIntervalRules:
    @pytest.mark.parametrize("n", [1, 4, 10])
    def test_weights_sum_to_one(self, n):
        assert gauss_interval(n).weights.sum() == pytest.approx(1.0, rel=1e-14)

    def test_four_points_exact_to_degree_seven(self):
        rule = gauss_interval(4)
        t = rule.barycentric[:, 1]
        assert np.dot(rule.weights, t**7) == pytest.approx(1.0 / 8.0, rel=1e-13)

    def test_barycentric_rows_sum_to_one(self):
        np.testing.assert_allclose(gauss_interval(6).barycentric.sum(axis=1), 1.0)


class TestTriangleRules:
    def test_production_rule_has_six_points(self):
        assert production_rule(2).size == 6
        assert production_rule(1).size == 4

    @pytest.mark.parametrize(
        ("a", "b", "c"), [(0, 0, 0), (1, 0, 0), (2, 2, 0), (1, 1, 2), (4, 0, 0)]
    )
    def test_dunavant_exact_to_degree_four(self, a, b, c):
        rule = dunavant_triangle()
        lam = rule.barycentric
        value = np.dot(rule.weights, lam[:, 0] ** a * lam[:, 1] ** b * lam[:, 2] ** c)
        assert value == pytest.approx(_triangle_moment(a, b, c), rel=1e-10)

    @pytest.mark.parametrize(("a", "b", "c"), [(0, 0, 0), (3, 4, 2), (9, 0, 5)])
    def test_collapsed_rule_exact_for_high_degree(self, a, b, c):
        rule = collapsed_triangle(10)
        lam = rule.barycentric
        value = np.dot(rule.weights, lam[:, 0] ** a * lam[:, 1] ** b * lam[:, 2] ** c)
        assert value == pytest.approx(_triangle_moment(a, b, c), rel=1e-12)

    def test_reference_rule_dimension(self):
        assert reference_rule(2, 5).size == 25
        with pytest.raises(PreconditionError):
            reference_rule(3)
