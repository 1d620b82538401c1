"""Nonlinearities f(s) = phi_p(s) q(s) with known limits at zero and infinity.

Each family is written through its ratio q = f / phi_p so that f0 = q(0) and
finf = lim q(s) are exact by construction and the derivatives are analytic.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import structlog

from plapmax.errors import ConfigError, HypothesisError
from plapmax.fem.pcore import dphi_p, phi_p

logger = structlog.get_logger(__name__)

# boundedness of f / phi_p is checked on s = +/- 10^k, k in [-8, 8]
_SAMPLE_DECADES = (-8.0, 8.0)
_SAMPLES_PER_DECADE = 10
_UNBOUNDED = 1e10

Ratio = Callable[[np.ndarray], np.ndarray]


def sample_points() -> np.ndarray:
    lo, hi = _SAMPLE_DECADES
    count = int((hi - lo) * _SAMPLES_PER_DECADE) + 1
    s = np.logspace(lo, hi, count)
    return np.concatenate([-s[::-1], s])


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    p: float
    f0: float
    finf: float
    ratio: Ratio = field(repr=False)
    ratio_derivative: Ratio = field(repr=False)
    params: tuple[tuple[str, float], ...] = ()

    def f(self, s):
        s = np.asarray(s, dtype=float)
        return phi_p(s, self.p) * self.ratio(s)

    __call__ = f

    def derivative(self, s, epsilon: float = 0.0):
        """f'(s), with phi_p' regularized by ``epsilon`` near s = 0."""
        s = np.asarray(s, dtype=float)
        q, dq = self.ratio(s), self.ratio_derivative(s)
        return dphi_p(s, self.p, epsilon) * q + phi_p(s, self.p) * dq

    def g(self, s):
        return g_part(self, s)

    def g_derivative(self, s, epsilon: float = 0.0):
        s = np.asarray(s, dtype=float)
        q, dq = self.ratio(s), self.ratio_derivative(s)
        return dphi_p(s, self.p, epsilon) * (q - self.f0) + phi_p(s, self.p) * dq

    @cached_property
    def bound(self) -> float:
        """Sampled sup of |f(s) / phi_p(s)|."""
        with np.errstate(over="ignore", invalid="ignore"):
            values = np.abs(self.ratio(sample_points()))
        if not np.all(np.isfinite(values)):
            return float("inf")
        return float(values.max())

    @cached_property
    def ratio_infimum(self) -> float:
        """Sampled inf of g(s) / phi_p(s) = q(s) - f0, including both limits."""
        values = self.ratio(sample_points()) - self.f0
        return float(min(values.min(), 0.0, self.finf - self.f0))

    def describe(self) -> dict[str, float | str]:
        return {
            "family": self.name,
            "p": self.p,
            "f0": self.f0,
            "finf": self.finf,
            **dict(self.params),
        }


def g_part(f: Nonlinearity, s):
    """g(s) = f(s) - f0 phi_p(s)."""
    return f.f(s) - f.f0 * phi_p(s, f.p)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def saturating(p: float, a: float, b: float) -> Nonlinearity:
    """f(s) = phi_p(s) (a + b s^2 / (1 + s^2)); f0 = a, finf = a + b."""

    def ratio(s: np.ndarray) -> np.ndarray:
        s2 = s * s
        return a + b * s2 / (1.0 + s2)

    def ratio_derivative(s: np.ndarray) -> np.ndarray:
        return 2.0 * b * s / (1.0 + s * s) ** 2

    return Nonlinearity(
        name="saturating",
        p=p,
        f0=a,
        finf=a + b,
        ratio=ratio,
        ratio_derivative=ratio_derivative,
        params=(("a", a), ("b", b)),
    )


def exponential(p: float, a: float, b: float) -> Nonlinearity:
    """f(s) = phi_p(s) (a + b (1 - exp(-s^2))); f0 = a, finf = a + b."""

    def ratio(s: np.ndarray) -> np.ndarray:
        return a + b * -np.expm1(-s * s)

    def ratio_derivative(s: np.ndarray) -> np.ndarray:
        return 2.0 * b * s * np.exp(-s * s)

    return Nonlinearity(
        name="exponential",
        p=p,
        f0=a,
        finf=a + b,
        ratio=ratio,
        ratio_derivative=ratio_derivative,
        params=(("a", a), ("b", b)),
    )


FAMILIES: dict[str, Callable[[float, float, float], Nonlinearity]] = {
    "saturating": saturating,
    "exponential": exponential,
}


def make_nonlinearity(family: str, p: float, a: float, b: float) -> Nonlinearity:
    try:
        factory = FAMILIES[family]
    except KeyError:
        raise ConfigError(
            f"Unknown nonlinearity family '{family}'",
            details={"available": sorted(FAMILIES)},
        ) from None
    return factory(p, a, b)


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------


def check_boundedness(f: Nonlinearity) -> float:
    """Boundedness of f / phi_p away from zero; returns the sampled bound."""
    bound = f.bound
    if not np.isfinite(bound) or bound > _UNBOUNDED:
        raise HypothesisError(
            "f(s)/phi_p(s) is not bounded on the sample grid",
            details={**f.describe(), "bound": bound},
        )
    return bound


def check_crossing(f: Nonlinearity, lambda1: float) -> None:
    """The principal eigenvalue must lie strictly between f0 and finf."""
    if f.f0 < lambda1 < f.finf or f.f0 > lambda1 > f.finf:
        return
    raise HypothesisError(
        "Principal eigenvalue does not separate f0 and finf",
        details={"f0": f.f0, "lambda1": lambda1, "finf": f.finf},
    )


def autonomous_lambda_interval(lambda1: float, f: Nonlinearity) -> tuple[float, float]:
    """Open interval of lambda between lambda1/f0 and lambda1/finf."""
    if f.f0 <= 0 or f.finf <= 0 or f.f0 == f.finf:
        raise HypothesisError(
            "Autonomous interval needs distinct positive f0 and finf",
            details={"f0": f.f0, "lambda1": lambda1, "finf": f.finf},
        )
    ends = sorted((lambda1 / f.f0, lambda1 / f.finf))
    return ends[0], ends[1]
