from __future__ import annotations

import os

import numpy as np
import pytest

os.environ["PLAPMAX_ENV"] = "test"  # Prevents loading dev/ci profile overlays


@pytest.fixture(autouse=True)
def _clear_settings_cache():
    from plapmax.config import get_settings

    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def _reset_metrics():
    from plapmax.observability.metrics import get_metrics

    get_metrics().reset()
    yield
    get_metrics().reset()


@pytest.fixture
def settings():
    from plapmax.config import get_settings

    return get_settings()


@pytest.fixture
def unit_interval():
    from plapmax.fem.mesh import build_interval_mesh

    def _build(n: int = 64):
        return build_interval_mesh(0.0, 1.0, n)

    return _build


@pytest.fixture
def unit_square():
    from plapmax.fem.mesh import build_rectangle_mesh

    def _build(n: int = 8):
        return build_rectangle_mesh(1.0, 1.0, n, n)

    return _build


@pytest.fixture
def step_weight():
    """+1 left of x = 1/2, -1 right of it, 0 on the jump node."""
    from plapmax.fem.mesh import sample_field

    def _build(mesh, x0: float = 0.5, left: float = 1.0, right: float = -1.0):
        return sample_field(
            mesh, lambda x, *rest: left + (right - left) * np.heaviside(x - x0, 0.5)
        )

    return _build


@pytest.fixture
def eigen_cfg():
    from plapmax.config import EigenConfig

    return EigenConfig()


@pytest.fixture
def solver_cfg():
    from plapmax.config import SolverConfig

    return SolverConfig()


@pytest.fixture
def continuation_cfg():
    from plapmax.config import ContinuationConfig

    return ContinuationConfig()


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


@pytest.fixture
def tridiagonal_eigenvalue():
    """Smallest eigenvalue of the 1D Dirichlet pencil on (0, 1) with n cells.

    K = tridiag(-1, 2, -1) / h and the midpoint-rule mass M = h tridiag(1, 2, 1) / 4,
    whose exact value is (4 / h^2) tan^2(pi h / 2).
    """
    from scipy.linalg import eigh

    def _solve(n: int) -> float:
        h = 1.0 / n
        size = n - 1
        eye, off = np.eye(size), np.eye(size, k=1) + np.eye(size, k=-1)
        stiffness = (2.0 * eye - off) / h
        mass = h * (2.0 * eye + off) / 4.0
        return float(eigh(stiffness, mass, eigvals_only=True, subset_by_index=[0, 0])[0])

    return _solve


@pytest.fixture
def shooting_eigenvalue():
    """First Dirichlet eigenvalue of -(phi_p(u'))' = lam phi_p(u) on (0, 1) by shooting.

    The state is (u, w = phi_p(u')); u' = phi_q(w) with q = p / (p - 1).
    """
    from scipy.integrate import solve_ivp
    from scipy.optimize import brentq

    def _phi(s, p):
        return np.sign(s) * np.abs(s) ** (p - 1.0)

    def _solve(p: float) -> float:
        q = p / (p - 1.0)

        def endpoint(lam: float) -> float:
            sol = solve_ivp(
                lambda _, y: [_phi(y[1], q), -lam * _phi(y[0], p)],
                (0.0, 1.0),
                [0.0, 1.0],
                rtol=1e-11,
                atol=1e-13,
            )
            return float(sol.y[0, -1])

        lo, hi = 1.0, 2.0
        while endpoint(hi) > 0:
            lo, hi = hi, 2.0 * hi
        return float(brentq(endpoint, lo, hi, xtol=1e-12))

    return _solve


@pytest.fixture
def flux_maximum():
    """max u for -Delta_p u = 1 on (0, 1): the integral of phi_q(1/2 - x) over (0, 1/2)."""
    from scipy.integrate import quad

    def _solve(p: float) -> float:
        q = p / (p - 1.0)
        value, _ = quad(lambda x: (0.5 - x) ** (q - 1.0), 0.0, 0.5)
        return float(value)

    return _solve


@pytest.fixture
def dense_weighted_spectrum():
    """p = 2 principal eigenvalues of K x = lam (M m) x from a dense general eigensolve.

    M m is built element by element: the midpoint value of m times |T|/4 on the
    2x2 block in 1D, |T| m_i / 3 on the diagonal in 2D.
    """
    from scipy.linalg import eig

    from plapmax.fem.pcore import stiffness_matrix

    def _weight_matrix(mesh, m) -> np.ndarray:
        full = np.zeros((mesh.node_count, mesh.node_count))
        for element, measure in zip(mesh.elements, mesh.element_measures, strict=True):
            if mesh.dimension == 1:
                full[np.ix_(element, element)] += measure * m.values[element].mean() / 4.0
            else:
                full[element, element] += measure * m.values[element] / 3.0
        idx = mesh.interior_nodes
        return full[np.ix_(idx, idx)]

    def _solve(mesh, m) -> tuple[float | None, float | None]:
        stiffness = stiffness_matrix(mesh).toarray()
        values = eig(stiffness, _weight_matrix(mesh, m), right=False)
        finite = values[np.isfinite(values)].real
        positive = finite[finite > 0]
        negative = finite[finite < 0]
        return (
            float(positive.min()) if positive.size else None,
            float(negative.max()) if negative.size else None,
        )

    return _solve
