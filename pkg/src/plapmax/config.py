from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Any

import structlog
import yaml
from pydantic import Field
from pydantic_settings import BaseSettings

logger = structlog.get_logger(__name__)

_PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
_CONFIG_DIR = _PROJECT_ROOT / "config"
_CONFIG_PATH = _CONFIG_DIR / "settings.yaml"


def _load_yaml() -> dict[str, Any]:
    if _CONFIG_PATH.exists():
        with open(_CONFIG_PATH) as f:
            return yaml.safe_load(f) or {}
    return {}


def _load_env_profile() -> dict[str, Any]:
    """Load the environment-specific YAML profile (dev / ci / ...).

    Set ``PLAPMAX_ENV`` to the profile name (defaults to ``dev``). The
    profile is deep-merged on top of the base settings YAML so that
    per-environment overrides take precedence.
    """
    env = os.getenv("PLAPMAX_ENV", "dev").lower()
    profile_path = _CONFIG_DIR / "environments" / f"{env}.yaml"
    if profile_path.exists():
        with open(profile_path) as f:
            data = yaml.safe_load(f) or {}
        logger.debug("env_profile_loaded", env=env, path=str(profile_path))
        return data
    logger.debug("env_profile_missing", env=env)
    return {}


def _deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge *override* into *base* (mutates *base*)."""
    for key, value in override.items():
        if key in base and isinstance(base[key], dict) and isinstance(value, dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


_yaml = _deep_merge(_load_yaml(), _load_env_profile())


class SolverConfig(BaseSettings):
    """Damped Newton with lambda-continuation for the boundary-value problems."""

    model_config = {"env_prefix": "PLAPMAX_SOLVER_"}

    newton_tolerance: float = Field(default=1e-10, gt=0)
    max_newton_steps: int = Field(default=50, ge=1)
    min_step: float = Field(default=2.0**-20, gt=0, le=1)
    sufficient_decrease: float = Field(default=1e-4, ge=0, lt=1)
    continuation_steps: int = Field(default=20, ge=1)
    blowup_threshold: float = Field(default=1e8, gt=0)
    regularization_epsilon: float | None = Field(default=None, ge=0)


class EigenConfig(BaseSettings):
    """Normalized inverse iteration for the principal eigenpairs."""

    model_config = {"env_prefix": "PLAPMAX_EIGEN_"}

    max_iterations: int = Field(default=2000, ge=1)
    tolerance: float = Field(default=1e-12, gt=0)
    residual_tolerance: float = Field(default=1e-8, gt=0)
    inner_tolerance: float = Field(default=1e-12, gt=0)
    seed: int = 0
    noise: float = Field(default=1e-3, ge=0, lt=1)
    stall_window: int = Field(default=10, ge=2)
    regularization_epsilon: float | None = Field(default=None, ge=0)


class ContinuationConfig(BaseSettings):
    """Pseudo-arclength continuation of the one-sign branches."""

    model_config = {"env_prefix": "PLAPMAX_CONTINUATION_"}

    detachment_amplitude: float = Field(default=1e-3, gt=0)
    detachment_threshold: float = Field(default=1e-2, gt=0)
    initial_step: float = Field(default=1e-3, gt=0)
    min_step: float = Field(default=1e-9, gt=0)
    max_step: float = Field(default=50.0, gt=0)
    max_norm: float = Field(default=1e3, gt=0)
    max_arclength: float = Field(default=1e7, gt=0)
    max_steps: int = Field(default=600, ge=1)
    target_corrector_iterations: int = Field(default=4, ge=1)
    max_corrector_iterations: int = Field(default=12, ge=1)
    corrector_tolerance: float = Field(default=1e-10, gt=0)
    enforce_hypotheses: bool = True
    allow_sign_changing_weight: bool = False
    snapshot_every: int = Field(default=0, ge=0)


class SweepConfig(BaseSettings):
    model_config = {"env_prefix": "PLAPMAX_SWEEP_"}

    points: int = Field(default=41, ge=3)
    max_concurrency: int = Field(default=4, ge=1)


class PiconeConfig(BaseSettings):
    model_config = {"env_prefix": "PLAPMAX_PICONE_"}

    trials: int = Field(default=100, ge=1)
    eps: float = Field(default=1e-6, gt=0)
    reference_points: int = Field(default=10, ge=2)


class LoggingConfig(BaseSettings):
    model_config = {"env_prefix": "PLAPMAX_LOG_"}

    level: str = "INFO"
    json_output: bool = False


class Settings(BaseSettings):
    model_config = {"env_prefix": "PLAPMAX_", "env_nested_delimiter": "__", "extra": "ignore"}

    output_dir: Path = Path("results")

    solver: SolverConfig = Field(default_factory=lambda: SolverConfig(**_yaml.get("solver", {})))
    eigen: EigenConfig = Field(default_factory=lambda: EigenConfig(**_yaml.get("eigen", {})))
    continuation: ContinuationConfig = Field(
        default_factory=lambda: ContinuationConfig(**_yaml.get("continuation", {}))
    )
    sweep: SweepConfig = Field(default_factory=lambda: SweepConfig(**_yaml.get("sweep", {})))
    picone: PiconeConfig = Field(default_factory=lambda: PiconeConfig(**_yaml.get("picone", {})))
    logging: LoggingConfig = Field(
        default_factory=lambda: LoggingConfig(**_yaml.get("logging", {}))
    )

    @property
    def plapmax_env(self) -> str:
        return os.getenv("PLAPMAX_ENV", "dev").lower()


@lru_cache
def get_settings() -> Settings:
    return Settings()
