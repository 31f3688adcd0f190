"""
Experiment configuration and result models.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from regretlab.config import settings

Controller = Literal["hinf", "ce", "lqr"]


def default_grid(points: int = 20, upper: float = 2.0) -> List[float]:
    """Evenly spaced gap norms on (0, upper]."""
    return [upper * (k + 1) / points for k in range(points)]


class ExperimentConfig(BaseModel):
    """
    Regret sweep configuration.

    ``plant`` points at a plant/cost JSON document; None selects the built-in
    scalar example (A = B = Q = R = Q_T = 1, x0 = 4).
    ``energy_tol`` overrides REGRETLAB_ENERGY_TOL for the worst-case search.
    """

    plant: Optional[Path] = None
    horizon: int = Field(100, ge=1)
    infinite: bool = False
    controllers: List[Controller] = Field(default_factory=lambda: ["hinf", "ce"])
    gap_norms: List[float] = Field(default_factory=default_grid)
    prediction_gap_norms: Optional[List[float]] = None
    samples_per_point: int = Field(200, ge=1)
    rng_seed: int = Field(default_factory=lambda: settings.SEED, ge=0, lt=2 ** 64)
    energy_tol: Optional[float] = Field(None, gt=0.0)
    output: Path = Path("results")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "plant": "scalar_example.json",
                "horizon": 100,
                "controllers": ["hinf", "ce"],
                "gap_norms": [0.5, 1.0],
                "samples_per_point": 10,
                "rng_seed": 20231,
                "output": "results",
            }
        }
    )

    @field_validator("gap_norms", "prediction_gap_norms")
    @classmethod
    def _positive(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(g <= 0 for g in value):
            raise ValueError("gap norms must be positive")
        return value

    @model_validator(mode="after")
    def _matching_grids(self) -> "ExperimentConfig":
        if self.prediction_gap_norms is not None and len(self.prediction_gap_norms) != len(self.gap_norms):
            raise ValueError("prediction_gap_norms must have one entry per gap norm")
        return self

    @property
    def prediction_grid(self) -> List[float]:
        return self.prediction_gap_norms or self.gap_norms

    @classmethod
    def read(cls, path: Path) -> "ExperimentConfig":
        config = cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
        if config.plant is not None and not config.plant.is_absolute():
            config = config.model_copy(update={"plant": Path(path).parent / config.plant})
        return config


class SampleRecord(BaseModel):
    controller: Controller
    grid_index: int
    sample_index: int
    gap_norm: float
    regret: float
    bound: Optional[float] = None


class SweepRow(BaseModel):
    """Aggregate over the samples of one (controller, gap norm) pair."""

    controller: Controller
    gap_norm: float
    samples: int
    max_regret: float
    bound: Optional[float] = None

    @property
    def slack(self) -> Optional[float]:
        return None if self.bound is None else self.bound - self.max_regret


class SweepResult(BaseModel):
    config: ExperimentConfig
    gamma_lower: Optional[float] = None
    gamma_bar: Optional[float] = None
    rows: List[SweepRow] = Field(default_factory=list)
    samples: List[SampleRecord] = Field(default_factory=list)

    def rows_for(self, controller: Controller) -> List[SweepRow]:
        return [row for row in self.rows if row.controller == controller]
