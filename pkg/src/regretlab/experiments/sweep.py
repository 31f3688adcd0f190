"""
Regret sweeps
-------------
For each gap norm on the grid, disturbances are sampled on the sphere of that
radius around the worst-case disturbance w*, every configured controller is run
against each sample, and the largest regret is set against the bound.

The certainty-equivalent controller reuses the realizations of the H-infinity
samples and receives a prediction at the configured prediction gap norm around
the realization. The LQR baseline is the certainty-equivalent law with a zero
prediction, so its bound is evaluated at the norm of the realization itself.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple
import logging

from regretlab.config import settings
from regretlab.core.ce import Prediction, ce_policy, lqr_policy
from regretlab.core.errors import (
    InadmissibleInitialStateError,
    InfeasibleError,
    SearchFailureError,
)
from regretlab.core.hinf import (
    WorstCase,
    build_controller,
    check_x0_admissible,
    find_gamma_bar,
    find_gamma_lower,
)
from regretlab.core.offline import offline_finite, offline_infinite
from regretlab.core.regret import ce_coefficient, dynamic_regret, hinf_bound
from regretlab.core.riccati import solve_dare, solve_finite_lqr
from regretlab.core.schema import CostSpec, Horizon, Plant, Signal, load_plant
from regretlab.experiments.sampling import (
    PREDICTION_STREAM,
    REALIZATION_STREAM,
    sample_disturbance,
    sample_seed,
)
from regretlab.experiments.schema import ExperimentConfig, SampleRecord, SweepResult, SweepRow

logger = logging.getLogger(__name__)

BUILTIN_PLANT = Path(__file__).resolve().parent.parent / "configs" / "scalar_example.json"


def load_experiment_plant(config: ExperimentConfig) -> Tuple[Plant, CostSpec]:
    return load_plant(config.plant or BUILTIN_PLANT)


class _SweepContext:
    """Everything shared by the samples of one sweep."""

    def __init__(self, config: ExperimentConfig, plant: Plant, cost: CostSpec):
        self.config = config
        self.plant = plant
        self.cost = cost
        self.horizon = Horizon.infinite() if config.infinite else Horizon.finite(config.horizon)
        self.controllers = list(dict.fromkeys(config.controllers))
        self.gamma_lower: Optional[float] = None
        self.worst: Optional[WorstCase] = None
        self.synthesis = None
        self.hinf_constants = None

        if self.horizon.is_infinite:
            self.lqr = solve_dare(plant, cost)
            self.stationary_lqr = self.lqr
        else:
            self.lqr = solve_finite_lqr(plant, cost, config.horizon)
            self.stationary_lqr = solve_dare(plant, cost)
        self.ce_tail = ce_coefficient(plant, cost, self.stationary_lqr).value
        self.lqr_policy = lqr_policy(plant, cost, self.horizon) if "lqr" in self.controllers else None
        self._prepare_reference()

    def _prepare_reference(self) -> None:
        plant, cost, horizon = self.plant, self.cost, self.horizon
        needs_hinf = "hinf" in self.controllers
        if needs_hinf:
            report = check_x0_admissible(plant, cost, horizon)
            if not report.admissible:
                raise InadmissibleInitialStateError(
                    "initial state admits no unit-energy worst-case disturbance",
                    diagnostic=report.diagnostic(),
                )
            self.gamma_lower = report.gamma_lower
        try:
            self.gamma_lower = self.gamma_lower or find_gamma_lower(plant, cost, horizon)
            worst = find_gamma_bar(
                plant, cost, horizon, tol=self.config.energy_tol, gamma_lower=self.gamma_lower
            )
        except (InfeasibleError, SearchFailureError):
            if needs_hinf:
                raise
            logger.info("no unit-energy worst case; sampling around the zero disturbance")
            self.reference = Signal.zeros(self.config.horizon, plant.n)
            return

        self.synthesis = build_controller(plant, cost, worst.gamma_bar, horizon)
        self.worst = worst
        self.reference = worst.w_star
        if needs_hinf:
            _, self.hinf_constants = hinf_bound(plant, cost, self.synthesis, 0.0, worst=self.worst)
        logger.info(
            "Reference worst case: gamma_bar=%.10g, energy=%.10g, %d steps",
            worst.gamma_bar, self.worst.energy, self.reference.horizon,
        )

    def run_sample(self, grid_index: int, sample_index: int) -> List[SampleRecord]:
        config = self.config
        gap = config.gap_norms[grid_index]
        w = sample_disturbance(
            self.reference,
            gap,
            sample_seed(config.rng_seed, grid_index, sample_index, REALIZATION_STREAM),
        )
        if self.horizon.is_infinite:
            offline = offline_infinite(self.plant, self.cost, w, lqr=self.lqr)
        else:
            offline = offline_finite(self.plant, self.cost, w, lqr=self.lqr)

        records = []
        for controller in self.controllers:
            if controller == "hinf":
                policy = self.synthesis.policy()
                bound = self.hinf_constants.bound(gap)
                norm = gap
            elif controller == "ce":
                norm = config.prediction_grid[grid_index]
                prediction = Prediction.noisy(
                    w, norm, sample_seed(config.rng_seed, grid_index, sample_index, PREDICTION_STREAM)
                )
                policy = ce_policy(
                    self.plant, self.cost, prediction, self.horizon, T=w.horizon, lqr=self.lqr
                )
                bound = self.ce_tail * norm ** 2
            else:
                policy = self.lqr_policy
                norm = gap
                bound = self.ce_tail * w.energy() ** 2
            report = dynamic_regret(self.plant, self.cost, policy, w, self.horizon, offline=offline)
            records.append(
                SampleRecord(
                    controller=controller,
                    grid_index=grid_index,
                    sample_index=sample_index,
                    gap_norm=norm,
                    regret=report.regret,
                    bound=bound,
                )
            )
        return records


def _aggregate(config: ExperimentConfig, controllers: List[str], records: List[SampleRecord]) -> List[SweepRow]:
    grouped: Dict[Tuple[str, int], List[SampleRecord]] = {}
    for record in records:
        grouped.setdefault((record.controller, record.grid_index), []).append(record)
    rows = []
    for controller in controllers:
        for grid_index in range(len(config.gap_norms)):
            group = grouped[(controller, grid_index)]
            rows.append(
                SweepRow(
                    controller=controller,
                    gap_norm=group[0].gap_norm,
                    samples=len(group),
                    max_regret=max(r.regret for r in group),
                    bound=max(r.bound for r in group),
                )
            )
    return rows


def run_sweep(
    config: ExperimentConfig,
    threads: Optional[int] = None,
    plant: Optional[Plant] = None,
    cost: Optional[CostSpec] = None,
) -> SweepResult:
    """
    Run the configured regret sweep.

    Results depend only on the configuration and its seed: each sample has its
    own random stream and aggregates are formed in grid order.

    Raises:
        InadmissibleInitialStateError: If the H-infinity controller is requested
            and the initial state admits no unit-energy worst case.
    """
    threads = settings.THREADS if threads is None else min(threads, settings.THREADS)
    if not config.controllers:
        logger.info("No controllers configured; nothing to sweep")
        return SweepResult(config=config)
    if plant is None or cost is None:
        plant, cost = load_experiment_plant(config)

    context = _SweepContext(config, plant, cost)
    tasks = [
        (g, s)
        for g in range(len(config.gap_norms))
        for s in range(config.samples_per_point)
    ]
    logger.info(
        "Sweeping %d gap norms x %d samples for %s (%s, %d threads)",
        len(config.gap_norms), config.samples_per_point, ", ".join(context.controllers),
        context.horizon.label, threads,
    )
    with ThreadPoolExecutor(max_workers=threads) as executor:
        batches = list(executor.map(lambda task: context.run_sample(*task), tasks))
    records = [record for batch in batches for record in batch]

    rows = _aggregate(config, context.controllers, records)
    for row in rows:
        logger.info(
            "%-4s gap=%.4g max_regret=%.6g bound=%.6g",
            row.controller, row.gap_norm, row.max_regret, row.bound,
        )
    return SweepResult(
        config=config,
        gamma_lower=context.gamma_lower,
        gamma_bar=context.worst.gamma_bar if context.worst else None,
        rows=rows,
        samples=records,
    )
