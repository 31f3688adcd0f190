"""
regretlab Data Model
--------------------
Validated containers for plants, cost specifications, signals and trajectories.

All models are frozen pydantic models whose array fields are read-only float64
numpy arrays, so instances can be shared freely between threads. Arrays are
serialized as row-major nested lists in JSON mode.

Usage:
    plant = Plant(A=[[1.0]], B=[[1.0]], x0=[4.0])
    cost = CostSpec(Q=[[1.0]], QT=[[1.0]], R=[[1.0]], X=4.0)
    w = Signal(steps=[[0.1], [0.0], [-0.2]])
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, List, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationInfo,
    field_validator,
    model_validator,
)

from regretlab.core.errors import DimensionError
from regretlab.core.linalg import asymmetry, symmetrize

# Eigenvalue tolerance for the PSD / PD checks on cost weights
EIG_TOL = 1e-10
# Largest relative asymmetry accepted before symmetrizing a weight matrix
ASYMMETRY_TOL = 1e-8


def _as_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


NDArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list, when_used="json"),
]


class FrozenModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class Horizon(FrozenModel):
    """
    Problem horizon: a finite number of steps, or the infinite-horizon problem.

    Use ``Horizon.finite(T)`` and ``Horizon.infinite()`` rather than the constructor.
    """

    steps: Optional[int] = Field(None, ge=1, description="Number of steps, None for infinite")

    @classmethod
    def finite(cls, steps: int) -> "Horizon":
        return cls(steps=steps)

    @classmethod
    def infinite(cls) -> "Horizon":
        return cls(steps=None)

    @property
    def is_infinite(self) -> bool:
        return self.steps is None

    @property
    def label(self) -> str:
        return "infinite" if self.is_infinite else f"finite({self.steps})"


class Plant(FrozenModel):
    """
    Discrete-time LTI plant x_{t+1} = A x_t + B u_t + w_t with initial state x0.

    Scalars are accepted and promoted (A -> 1x1, B -> n x 1, x0 -> length n).
    """

    A: NDArray
    B: NDArray
    x0: NDArray

    @field_validator("A")
    @classmethod
    def _promote_A(cls, value: np.ndarray) -> np.ndarray:
        return _freeze(np.atleast_2d(value))

    @field_validator("B")
    @classmethod
    def _promote_B(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim < 2:
            value = value.reshape(-1, 1)
        return _freeze(value)

    @field_validator("x0")
    @classmethod
    def _promote_x0(cls, value: np.ndarray) -> np.ndarray:
        return _freeze(np.atleast_1d(value).ravel())

    @model_validator(mode="after")
    def _check_shapes(self) -> "Plant":
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got shape {self.A.shape}")
        if self.B.shape[0] != n or self.B.shape[1] < 1:
            raise DimensionError(f"B must be {n} x m with m >= 1, got shape {self.B.shape}")
        if self.x0.shape != (n,):
            raise DimensionError(f"x0 must have length {n}, got {self.x0.shape[0]}")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))
                and np.all(np.isfinite(self.x0))):
            raise ValueError("plant data must be finite")
        return self

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_x0(self, x0: Any) -> "Plant":
        return Plant(A=self.A, B=self.B, x0=x0)


class CostSpec(FrozenModel):
    """
    Quadratic cost weights Q, Q_T (PSD), R (PD) and the initial-state norm bound X.
    """

    Q: NDArray
    QT: NDArray
    R: NDArray
    X: float = Field(0.0, ge=0.0, description="Bound on ||x0||")

    @field_validator("Q", "QT", "R")
    @classmethod
    def _symmetric(cls, value: np.ndarray, info: ValidationInfo) -> np.ndarray:
        value = np.atleast_2d(value)
        if value.ndim != 2 or value.shape[0] != value.shape[1]:
            raise DimensionError(f"{info.field_name} must be square, got shape {value.shape}")
        if asymmetry(value) > ASYMMETRY_TOL:
            raise ValueError(f"{info.field_name} is not symmetric")
        value = symmetrize(value)
        eigs = np.linalg.eigvalsh(value)
        scale = max(1.0, float(np.max(np.abs(eigs))))
        if info.field_name == "R":
            if eigs[0] <= EIG_TOL * scale:
                raise ValueError("R must be positive definite")
        elif eigs[0] < -EIG_TOL * scale:
            raise ValueError(f"{info.field_name} must be positive semidefinite")
        return _freeze(value)

    @model_validator(mode="after")
    def _check_shapes(self) -> "CostSpec":
        if self.Q.shape != self.QT.shape:
            raise DimensionError(f"Q {self.Q.shape} and QT {self.QT.shape} differ in shape")
        return self

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    def with_terminal(self, QT: Any) -> "CostSpec":
        return CostSpec(Q=self.Q, QT=QT, R=self.R, X=self.X)

    def check_plant(self, plant: Plant) -> None:
        if plant.n != self.n or plant.m != self.m:
            raise DimensionError(
                f"cost is sized for n={self.n}, m={self.m}, plant has n={plant.n}, m={plant.m}"
            )


class Signal(FrozenModel):
    """
    Finite sequence of vectors stored densely as a T x d array.

    A one-dimensional input is read as a scalar signal (d = 1).
    """

    steps: NDArray

    @field_validator("steps")
    @classmethod
    def _promote(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim == 1:
            value = value.reshape(-1, 1)
        if value.ndim != 2 or value.shape[0] < 1 or value.shape[1] < 1:
            raise DimensionError(f"signal must be a non-empty T x d array, got {value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("signal must be finite")
        return _freeze(value)

    @classmethod
    def zeros(cls, horizon: int, dim: int) -> "Signal":
        return cls(steps=np.zeros((horizon, dim)))

    @classmethod
    def from_flat(cls, flat: np.ndarray, dim: int) -> "Signal":
        return cls(steps=np.asarray(flat, dtype=float).reshape(-1, dim))

    @property
    def horizon(self) -> int:
        return self.steps.shape[0]

    @property
    def dim(self) -> int:
        return self.steps.shape[1]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.steps[t]

    def __len__(self) -> int:
        return self.horizon

    def energy(self) -> float:
        return float(np.linalg.norm(self.steps))

    def flat(self) -> np.ndarray:
        return self.steps.ravel()

    def fitted(self, horizon: int) -> "Signal":
        """Zero-pad or truncate to ``horizon`` steps."""
        if horizon == self.horizon:
            return self
        if horizon < self.horizon:
            return Signal(steps=self.steps[:horizon])
        padded = np.zeros((horizon, self.dim))
        padded[: self.horizon] = self.steps
        return Signal(steps=padded)

    def scaled(self, factor: float) -> "Signal":
        return Signal(steps=factor * self.steps)

    def __add__(self, other: "Signal") -> "Signal":
        _check_compatible(self, other)
        return Signal(steps=self.steps + other.steps)

    def __sub__(self, other: "Signal") -> "Signal":
        _check_compatible(self, other)
        return Signal(steps=self.steps - other.steps)


def _check_compatible(a: Signal, b: Signal) -> None:
    if a.steps.shape != b.steps.shape:
        raise DimensionError(
            f"signals differ in shape: {a.horizon}x{a.dim} vs {b.horizon}x{b.dim}"
        )


class Trajectory(FrozenModel):
    """States x_0..x_T, inputs u_0..u_{T-1} and disturbances w_0..w_{T-1}."""

    states: NDArray
    inputs: Signal
    disturbance: Signal

    @model_validator(mode="after")
    def _check_shapes(self) -> "Trajectory":
        T = self.inputs.horizon
        if self.disturbance.horizon != T:
            raise DimensionError("inputs and disturbance horizons differ")
        if self.states.ndim != 2 or self.states.shape != (T + 1, self.disturbance.dim):
            raise DimensionError(
                f"states must be {T + 1} x {self.disturbance.dim}, got {self.states.shape}"
            )
        return self

    @property
    def horizon(self) -> int:
        return self.inputs.horizon

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class PlantDocument(BaseModel):
    """
    JSON interchange document for a plant and its cost specification.

    Example:
        {"A": [[1]], "B": [[1]], "x0": [4], "Q": [[1]], "QT": [[1]], "R": [[1]], "X": 4}
    """

    A: List[List[float]]
    B: List[List[float]]
    x0: List[float]
    Q: List[List[float]]
    QT: List[List[float]]
    R: List[List[float]]
    X: float = Field(..., ge=0.0)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "A": [[1.0]],
                "B": [[1.0]],
                "x0": [4.0],
                "Q": [[1.0]],
                "QT": [[1.0]],
                "R": [[1.0]],
                "X": 4.0,
            }
        }
    )

    def to_models(self) -> Tuple[Plant, CostSpec]:
        plant = Plant(A=self.A, B=self.B, x0=self.x0)
        cost = CostSpec(Q=self.Q, QT=self.QT, R=self.R, X=self.X)
        cost.check_plant(plant)
        return plant, cost

    @classmethod
    def from_models(cls, plant: Plant, cost: CostSpec) -> "PlantDocument":
        return cls(
            A=plant.A.tolist(),
            B=plant.B.tolist(),
            x0=plant.x0.tolist(),
            Q=cost.Q.tolist(),
            QT=cost.QT.tolist(),
            R=cost.R.tolist(),
            X=cost.X,
        )

    @classmethod
    def read(cls, path: Union[str, Path]) -> "PlantDocument":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.model_dump(), indent=2) + "\n", encoding="utf-8")
        return path


def load_plant(path: Union[str, Path]) -> Tuple[Plant, CostSpec]:
    """Read a plant/cost JSON document and return validated models."""
    return PlantDocument.read(path).to_models()
