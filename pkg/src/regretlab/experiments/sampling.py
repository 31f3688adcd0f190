"""
Seeded disturbance sampling at a prescribed distance from a reference signal.

Every sample draws from its own counter-based stream keyed by
(rng_seed, grid_index, sample_index, stream), so results do not depend on the
order in which samples are evaluated.
"""

from __future__ import annotations

from typing import Tuple

from regretlab.core.ce import SeedLike, make_rng, random_unit_direction
from regretlab.core.schema import Signal

# Stream ids within one sample
REALIZATION_STREAM = 0
PREDICTION_STREAM = 1


def sample_seed(rng_seed: int, grid_index: int, sample_index: int, stream: int = REALIZATION_STREAM) -> Tuple[int, ...]:
    return (rng_seed, grid_index, sample_index, stream)


def sample_disturbance(w_ref: Signal, gap_norm: float, seed: SeedLike) -> Signal:
    """w_ref + gap_norm * d, d uniform on the unit sphere of R^(nT)."""
    if gap_norm < 0:
        raise ValueError(f"gap norm must be nonnegative, got {gap_norm}")
    if gap_norm == 0:
        return w_ref
    direction = random_unit_direction(w_ref.horizon, w_ref.dim, make_rng(seed))
    return Signal(steps=w_ref.steps + gap_norm * direction)
