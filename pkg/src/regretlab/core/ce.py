"""
Certainty-equivalent control: the offline-optimal law applied to a prediction
of the disturbance instead of the disturbance itself.
"""

from __future__ import annotations

from typing import Literal, Optional, Sequence, Union
import logging

import numpy as np
from pydantic import Field

from regretlab.core.errors import DimensionError
from regretlab.core.offline import feedforward_terms
from regretlab.core.riccati import LqrSolution, solve_dare, solve_finite_lqr
from regretlab.core.schema import CostSpec, FrozenModel, Horizon, Plant, Signal
from regretlab.core.simulation import FeedforwardPolicy, LinearFeedbackPolicy

logger = logging.getLogger(__name__)

SeedLike = Union[int, Sequence[int]]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Counter-based generator keyed by an integer or a tuple of integers."""
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def random_unit_direction(horizon: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Direction drawn uniformly on the unit sphere of R^(horizon*dim), shaped (horizon, dim)."""
    while True:
        d = rng.standard_normal((horizon, dim))
        norm = np.linalg.norm(d)
        if norm > 0:
            return d / norm


class Prediction(FrozenModel):
    """Disturbance prediction w_bar with a tag describing where it came from."""

    w_bar: Signal
    source: Literal["exact", "noisy", "custom"] = "custom"
    sigma: Optional[float] = Field(None, ge=0.0)

    @classmethod
    def exact(cls, w: Signal) -> "Prediction":
        return cls(w_bar=w, source="exact")

    @classmethod
    def noisy(cls, w: Signal, sigma: float, seed: SeedLike) -> "Prediction":
        """w_bar = w + sigma * d with d uniform on the unit sphere, so ||w_bar - w|| = sigma."""
        direction = random_unit_direction(w.horizon, w.dim, make_rng(seed))
        return cls(w_bar=Signal(steps=w.steps + sigma * direction), source="noisy", sigma=sigma)

    @classmethod
    def custom(cls, w_bar: Signal) -> "Prediction":
        return cls(w_bar=w_bar, source="custom")

    def fitted(self, horizon: int) -> Signal:
        if self.w_bar.horizon > horizon:
            logger.warning(
                "prediction covers %d steps, truncating to the horizon of %d",
                self.w_bar.horizon, horizon,
            )
        return self.w_bar.fitted(horizon)


def ce_policy(
    plant: Plant,
    cost: CostSpec,
    prediction: Prediction,
    horizon: Horizon,
    T: Optional[int] = None,
    lqr: Optional[LqrSolution] = None,
) -> FeedforwardPolicy:
    """
    u_t = -K_t x_t - (R + B' P_{t+1} B)^{-1} B' g_t(w_bar).

    The finite-horizon law uses the time-varying offline gains on the
    prediction. ``T`` is the control horizon; it defaults to the finite horizon
    or, for the infinite horizon, to the prediction length.
    """
    if prediction.w_bar.dim != plant.n:
        raise DimensionError(
            f"prediction has dimension {prediction.w_bar.dim}, plant has n={plant.n}"
        )
    if horizon.is_infinite:
        T = prediction.w_bar.horizon if T is None else T
        lqr = solve_dare(plant, cost) if lqr is None else lqr
    else:
        T = horizon.steps if T is None else T
        if T != horizon.steps:
            raise DimensionError(f"control horizon {T} differs from {horizon.label}")
        lqr = solve_finite_lqr(plant, cost, T) if lqr is None else lqr
    w_bar = prediction.fitted(T)
    offsets, _ = feedforward_terms(plant, cost, lqr, w_bar)
    return FeedforwardPolicy(lqr.K, Signal(steps=offsets), name="ce")


def lqr_policy(plant: Plant, cost: CostSpec, horizon: Horizon) -> LinearFeedbackPolicy:
    """Plain LQR feedback, the certainty-equivalent law for a zero prediction."""
    if horizon.is_infinite:
        return LinearFeedbackPolicy(solve_dare(plant, cost).K, name="lqr")
    return LinearFeedbackPolicy(solve_finite_lqr(plant, cost, horizon.steps).K, name="lqr")
