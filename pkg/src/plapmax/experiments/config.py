"""Experiment files: one YAML document per CLI run.

Solver sections that are absent (or only partly given) fall back to the
process settings from ``plapmax.config``; every other field has a default so
that an empty file describes the reference setup on (0, 1).
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal, Self

import numpy as np
import structlog
import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from plapmax.config import (
    ContinuationConfig,
    EigenConfig,
    PiconeConfig,
    SolverConfig,
    SweepConfig,
    get_settings,
)
from plapmax.errors import ConfigError, ExpressionError
from plapmax.experiments.expressions import parse_expression
from plapmax.fem.mesh import Mesh, NodalField, build_interval_mesh, build_rectangle_mesh
from plapmax.verification.nonlinearity import FAMILIES, Nonlinearity, make_nonlinearity

logger = structlog.get_logger(__name__)

_SECTIONS = ("solver", "eigen", "continuation", "sweep", "picone")


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


class IntervalDomain(BaseModel):
    kind: Literal["interval"] = "interval"
    a: float = 0.0
    b: float = 1.0
    n: int = Field(default=128, ge=2)

    @property
    def dimension(self) -> int:
        return 1

    def build(self) -> Mesh:
        return build_interval_mesh(self.a, self.b, self.n)


class RectangleDomain(BaseModel):
    kind: Literal["rectangle"] = "rectangle"
    lx: float = Field(default=1.0, gt=0)
    ly: float = Field(default=1.0, gt=0)
    nx: int = Field(default=16, ge=2)
    ny: int = Field(default=16, ge=2)

    @property
    def dimension(self) -> int:
        return 2

    def build(self) -> Mesh:
        return build_rectangle_mesh(self.lx, self.ly, self.nx, self.ny)


Domain = Annotated[IntervalDomain | RectangleDomain, Field(discriminator="kind")]


# ---------------------------------------------------------------------------
# Nodal data (weights and loads)
# ---------------------------------------------------------------------------


class ConstantField(BaseModel):
    kind: Literal["constant"] = "constant"
    value: float = 1.0

    def evaluate(self, mesh: Mesh) -> np.ndarray:
        return np.full(mesh.node_count, self.value)


class StepField(BaseModel):
    """c1 left of x0, c2 right of it, their mean on x = x0."""

    kind: Literal["step"] = "step"
    x0: float = 0.5
    c1: float = 1.0
    c2: float = -1.0

    def evaluate(self, mesh: Mesh) -> np.ndarray:
        x = mesh.nodes[:, 0]
        return self.c1 + (self.c2 - self.c1) * np.heaviside(x - self.x0, 0.5)


class ExpressionField(BaseModel):
    kind: Literal["expression"] = "expression"
    expr: str

    @field_validator("expr")
    @classmethod
    def _validate_expr(cls, v: str) -> str:
        try:
            parse_expression(v)
        except ExpressionError as exc:
            raise ValueError(f"{exc.message} (position {exc.details.get('position')})") from exc
        return v

    @property
    def variables(self) -> frozenset[str]:
        return parse_expression(self.expr).variables

    def evaluate(self, mesh: Mesh) -> np.ndarray:
        return parse_expression(self.expr)(*mesh.nodes.T)


FieldSource = Annotated[ConstantField | StepField | ExpressionField, Field(discriminator="kind")]


def sample_source(mesh: Mesh, source: ConstantField | StepField | ExpressionField) -> NodalField:
    return mesh.field(source.evaluate(mesh))


class NonlinearitySpec(BaseModel):
    family: str = "saturating"
    a: float = 8.0
    b: float = 4.0

    @field_validator("family")
    @classmethod
    def _validate_family(cls, v: str) -> str:
        if v not in FAMILIES:
            raise ValueError(f"family must be one of {sorted(FAMILIES)}")
        return v

    def build(self, p: float) -> Nonlinearity:
        return make_nonlinearity(self.family, p, self.a, self.b)


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    model_config = {"extra": "forbid"}

    domain: Domain = Field(default_factory=IntervalDomain)
    p: float = Field(default=2.0, gt=1)
    weight: FieldSource = Field(default_factory=ConstantField)
    load: FieldSource = Field(default_factory=ConstantField)
    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    solver: SolverConfig
    eigen: EigenConfig
    continuation: ContinuationConfig
    sweep: SweepConfig
    picone: PiconeConfig
    autonomous_points: int = Field(default=3, ge=0)
    seed: int = 0
    output_dir: Path | None = None

    @model_validator(mode="before")
    @classmethod
    def _fill_sections(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        settings = get_settings()
        merged = dict(data)
        for name in _SECTIONS:
            base = getattr(settings, name).model_dump()
            override = merged.get(name) or {}
            if isinstance(override, BaseModel):
                override = override.model_dump()
            if isinstance(override, dict):
                merged[name] = {**base, **override}
        return merged

    @model_validator(mode="after")
    def _check_dimensions(self) -> Self:
        if self.domain.dimension == 1:
            for name in ("weight", "load"):
                source = getattr(self, name)
                if isinstance(source, ExpressionField) and "y" in source.variables:
                    raise ValueError(f"{name} uses 'y' on a one-dimensional domain")
        return self

    def mesh(self) -> Mesh:
        return self.domain.build()

    def weight_field(self, mesh: Mesh) -> NodalField:
        return sample_source(mesh, self.weight)

    def load_field(self, mesh: Mesh) -> NodalField:
        return sample_source(mesh, self.load)

    def build_nonlinearity(self) -> Nonlinearity:
        return self.nonlinearity.build(self.p)

    def seeded_eigen(self) -> EigenConfig:
        return self.eigen.model_copy(update={"seed": self.seed})


def _field_errors(exc: ValidationError) -> list[dict[str, str]]:
    return [
        {"field": ".".join(str(part) for part in err["loc"]) or "<root>", "message": err["msg"]}
        for err in exc.errors()
    ]


def parse_experiment(text: str, *, source: str = "<string>") -> ExperimentConfig:
    """Parse YAML text into a validated ``ExperimentConfig``."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        details: dict[str, Any] = {"source": source}
        if mark is not None:
            details.update(line=mark.line + 1, column=mark.column + 1)
        raise ConfigError(f"Experiment file is not valid YAML: {exc}", details=details) from exc

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(
            "Experiment file must contain a mapping at top level", details={"source": source}
        )
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(
            "Experiment configuration is invalid",
            details={"source": source, "errors": _field_errors(exc)},
        ) from exc
    logger.debug("experiment_parsed", source=source, domain=config.domain.kind, p=config.p)
    return config


def load_experiment(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(
            f"Cannot read experiment file: {exc.strerror}", details={"source": str(path)}
        ) from exc
    return parse_experiment(text, source=str(path))


def dump_experiment(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)
