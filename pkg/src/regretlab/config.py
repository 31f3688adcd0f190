"""
regretlab Configuration Module

This module provides centralized configuration management using pydantic-settings.
It handles environment variables, defaults, and configuration validation for the
numerical solvers and the experiment harness.

Usage:
    from regretlab.config import settings

    print(settings.THREADS)
    solve_dare(plant, cost, tol=settings.TOL)
"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator


class Settings(BaseSettings):
    """
    Library and experiment settings.

    Configuration is loaded from ``REGRETLAB_``-prefixed environment variables with
    fallback to defaults. The .env file is automatically loaded if present in the
    working directory.

    Attributes:
        THREADS: Upper bound on worker threads used by sweeps (REGRETLAB_THREADS).
        LOG_LEVEL: Logging level (default: "info").
        TOL: Relative tolerance of fixed-point iterations.
        MAX_ITER: Iteration cap of fixed-point iterations.
        FEASIBILITY_MARGIN: Strict margin on the smallest eigenvalue of gamma^2 I - M.
        GAMMA_CEILING: Largest attenuation level tried by the gamma searches.
        ENERGY_TOL: Tolerance on the unit-energy condition of the worst-case disturbance.
        TAIL_TOL: Truncation tolerance for infinite sums over future disturbances.
        BATCH_MAX_SIZE: Largest m*T accepted by the dense batch oracle.
        SEED: Default seed of the experiment random streams.
    """

    model_config = SettingsConfigDict(
        env_prefix="REGRETLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore"
    )

    # Execution
    THREADS: int = Field(
        default=4,
        ge=1,
        description="Maximum number of worker threads for sweeps"
    )

    LOG_LEVEL: str = Field(
        default="info",
        description="Logging level (debug, info, warning, error, critical)"
    )

    # Solver tolerances
    TOL: float = Field(
        default=1e-10,
        gt=0.0,
        description="Relative tolerance of fixed-point iterations"
    )
    MAX_ITER: int = Field(
        default=1_000_000,
        ge=1,
        description="Iteration cap of fixed-point iterations"
    )
    FEASIBILITY_MARGIN: float = Field(
        default=1e-9,
        ge=0.0,
        description="Strict margin required on lambda_min(gamma^2 I - M)"
    )
    GAMMA_CEILING: float = Field(
        default=1e6,
        gt=0.0,
        description="Search ceiling for attenuation levels"
    )
    ENERGY_TOL: float = Field(
        default=1e-6,
        gt=0.0,
        description="Tolerance on | ||w*|| - 1 |"
    )
    TAIL_TOL: float = Field(
        default=1e-12,
        gt=0.0,
        description="Truncation tolerance for sums over future disturbances"
    )
    BATCH_MAX_SIZE: int = Field(
        default=5000,
        ge=1,
        description="Largest stacked input dimension m*T for the batch oracle"
    )

    # Experiments
    SEED: int = Field(
        default=20231,
        ge=0,
        description="Default experiment seed"
    )

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def _normalize_log_level(cls, value):
        if isinstance(value, str):
            return value.strip().lower() or "info"
        return value


# Global settings instance
# Import this throughout the package
settings = Settings()
