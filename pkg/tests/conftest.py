"""Shared fixtures: the scalar example and a factory for random instances."""

from typing import Tuple

import numpy as np
import pytest

from regretlab.core.schema import CostSpec, Horizon, Plant

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def scalar_problem(x0: float = 4.0, A: float = 1.0, QT: float = 1.0) -> Tuple[Plant, CostSpec]:
    plant = Plant(A=[[A]], B=[[1.0]], x0=[x0])
    cost = CostSpec(Q=[[1.0]], QT=[[QT]], R=[[1.0]], X=max(abs(x0), 4.0))
    return plant, cost


def random_problem(
    rng: np.random.Generator, n: int, m: int, radius: float = 1.2
) -> Tuple[Plant, CostSpec]:
    """Random stabilizable instance with Q > 0 and X = ||x0||."""
    A = rng.standard_normal((n, n))
    rho = max(abs(np.linalg.eigvals(A)))
    A = A * (rng.uniform(0.3, radius) / rho)
    B = rng.standard_normal((n, m))
    L = rng.standard_normal((n, n))
    Q = L @ L.T + 0.5 * np.eye(n)
    Rm = rng.standard_normal((m, m))
    R = Rm @ Rm.T + 0.5 * np.eye(m)
    x0 = rng.standard_normal(n)
    plant = Plant(A=A, B=B, x0=x0)
    cost = CostSpec(Q=Q, QT=Q, R=R, X=float(np.linalg.norm(x0)))
    return plant, cost


def random_stable(rng: np.random.Generator, n: int, radius: float = 0.95) -> np.ndarray:
    F = rng.standard_normal((n, n))
    rho = max(abs(np.linalg.eigvals(F)))
    return F * (rng.uniform(0.05, radius) / rho)


@pytest.fixture
def scalar():
    return scalar_problem()


@pytest.fixture
def finite100():
    return Horizon.finite(100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
