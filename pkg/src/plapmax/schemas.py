"""Pydantic v2 schemas for plapmax.

Shared enums and the versioned JSON documents written by the CLI.
"""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, Field

SCHEMA_VERSION = 1


class Sign(StrEnum):
    PLUS = "+"
    MINUS = "-"

    @property
    def factor(self) -> float:
        return 1.0 if self is Sign.PLUS else -1.0

    @property
    def label(self) -> str:
        return "plus" if self is Sign.PLUS else "minus"


class Verdict(StrEnum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    SIGN_CHANGING = "SignChanging"
    ZERO = "Zero"
    DIVERGED = "Diverged"


class WeightRegime(StrEnum):
    SIGN_CHANGING = "sign_changing"
    NONNEGATIVE = "nonnegative"
    NONPOSITIVE = "nonpositive"
    ZERO = "zero"


class Normalization(StrEnum):
    WEIGHTED = "weighted"
    UNIT_NORM = "unit_norm"


class SignClass(StrEnum):
    POSITIVE_WEIGHT_SIDE = "positive_weight_side"
    NEGATIVE_WEIGHT_SIDE = "negative_weight_side"


class TerminationReason(StrEnum):
    MAX_NORM = "max_norm"
    MAX_ARCLENGTH = "max_arclength"
    STEP_FAILURE = "step_failure"
    MAX_STEPS = "max_steps"
    TARGET_REACHED = "target_reached"


# ---------------------------------------------------------------------------
# Result documents
# ---------------------------------------------------------------------------


class MeshDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    dimension: int
    nodes: list[list[float]]
    elements: list[list[int]]
    boundary_nodes: list[int]


class SolverStats(BaseModel):
    total_solves: int = 0
    converged: int = 0
    failure_rate: float = 0.0
    avg_iterations: float = 0.0
    p95_iterations: int = 0
    by_kind: dict[str, int] = Field(default_factory=dict)


class EigenDocument(BaseModel):
    lam: float = Field(serialization_alias="lambda")
    normalization: Normalization
    sign_class: SignClass
    iterations: int
    residual_norm: float
    u: list[float]


class EigenReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    regime: WeightRegime
    p: float
    node_count: int
    lambda_plus: EigenDocument
    lambda_minus: EigenDocument | None = None
    solver_stats: SolverStats = Field(default_factory=SolverStats)


class SolveDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    converged: bool
    iterations: int
    residual_norm: float
    lambda_used: float
    newton_path: list[tuple[int, float]] = Field(default_factory=list)
    verdict: Verdict | None = None
    u: list[float]


class PositiveBlock(BaseModel):
    left: float
    right: float
    size: int


class IntervalReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    status: str  # consistent | inconsistent
    regime: WeightRegime
    load_sign: Sign
    expected_verdict: Verdict
    lambda_minus: float | None = None
    lambda_plus: float | None = None
    grid_spacing: float
    block: PositiveBlock | None = None
    contiguous: bool
    left_discrepancy: float | None = None
    right_discrepancy: float | None = None
    tolerance: float
    notes: list[str] = Field(default_factory=list)
    solver_stats: SolverStats = Field(default_factory=SolverStats)


class BranchBoundDocument(BaseModel):
    sigma: Sign
    bound: float
    satisfied: bool
    lambda_star: float
    max_abs_lambda: float


class BranchBoundReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lambda1: float
    bounds: list[BranchBoundDocument]


class BranchSnapshot(BaseModel):
    index: int
    arclength: float
    lam: float = Field(serialization_alias="lambda")
    norm: float
    u: list[float]


class BranchSnapshots(BaseModel):
    schema_version: int = SCHEMA_VERSION
    sigma: Sign
    every: int
    snapshots: list[BranchSnapshot]


class CrossingDocument(BaseModel):
    sigma: Sign
    index: int
    norm: float
    verdict: Verdict
    residual_norm: float
    path: str


class AutonomousDocument(BaseModel):
    lam: float = Field(serialization_alias="lambda")
    sigma: Sign
    found: bool
    verdict: Verdict | None = None
    residual_norm: float | None = None


class BranchReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    status: str
    p: float
    f0: float
    finf: float
    lambda1: float
    asymptote_target: float
    detachment_lambda: dict[str, float]
    lambda_at_max_norm: dict[str, float]
    terminated_reason: dict[str, TerminationReason]
    bounds: list[BranchBoundDocument]
    crossings: list[CrossingDocument]
    autonomous_interval: tuple[float, float] | None = None
    autonomous: list[AutonomousDocument] = Field(default_factory=list)
    solver_stats: SolverStats = Field(default_factory=SolverStats)


class PiconeReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    p: float
    trials: int
    eps: float
    min_gap: float
    all_nonnegative: bool
    equality_gap: float
    max_tolerance: float
    failures: int = 0
    solver_stats: SolverStats = Field(default_factory=SolverStats)
