"""
H-infinity synthesis
--------------------
Attenuation-level searches, saddle-point controller construction and the
open-loop worst-case disturbance of the soft-constrained linear-quadratic game.

Usage:
    gamma_lower = find_gamma_lower(plant, cost, Horizon.finite(100))
    worst = find_gamma_bar(plant, cost, Horizon.finite(100))
    synthesis = build_controller(plant, cost, worst.gamma_bar, Horizon.finite(100))
    traj = simulate(plant, synthesis.policy(), worst.w_star)
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np
from pydantic import Field

from regretlab.config import settings
from regretlab.core.errors import (
    DimensionError,
    InadmissibleInitialStateError,
    InfeasibleGammaError,
    SearchFailureError,
    SynthesisInfeasibleError,
)
from regretlab.core.linalg import spectral_radius
from regretlab.core.riccati import HinfRiccati, hinf_riccati, is_feasible_gamma, lyapunov_fixed_point
from regretlab.core.schema import CostSpec, FrozenModel, Horizon, NDArray, Plant, Signal
from regretlab.core.simulation import LinearFeedbackPolicy

logger = logging.getLogger(__name__)

# Relative offset above the lower attenuation level where the gamma-bar search starts
GAMMA_BAR_OFFSET = 1e-6
# Infinite-horizon worst-case windows start here and double until the tail is negligible
WINDOW_START = 16
WINDOW_MAX = 100_000
# Points of the energy-map pre-scan
PRESCAN_POINTS = 50


class HinfSynthesis(FrozenModel):
    """
    Saddle-point controller u_t = -K_t x_t at attenuation level gamma.

    ``K_inf``, ``F_inf`` (= A - B K) and ``saddle_loop`` (= Lambda^{-1} A) are
    single matrices for the infinite horizon and (T, ., n) stacks otherwise.
    ``P_inf`` is the cost-to-go matrix of the stationary closed loop and is only
    set for the infinite horizon.
    """

    gamma: float = Field(..., gt=0.0)
    riccati: HinfRiccati
    K_inf: NDArray
    F_inf: NDArray
    saddle_loop: NDArray
    adversary_gain: NDArray
    horizon: Horizon
    P_inf: Optional[NDArray] = None

    @property
    def kind(self) -> str:
        return self.horizon.label

    def policy(self) -> LinearFeedbackPolicy:
        return LinearFeedbackPolicy(self.K_inf, name="hinf")

    def disturbance_policy(self) -> LinearFeedbackPolicy:
        """Feedback maximizer w_t = gamma^{-2} M_{t+1} Lambda_t^{-1} A x_t."""
        return LinearFeedbackPolicy(-self.adversary_gain, name="hinf_adversary")

    def game_value(self, x0: np.ndarray) -> float:
        """Soft-constrained game value x0' M_0 x0."""
        M = self.riccati.M
        M0 = M if self.horizon.is_infinite else M[0]
        x0 = np.asarray(x0, dtype=float)
        return float(x0 @ M0 @ x0)


class WorstCase(FrozenModel):
    """Open-loop worst-case disturbance and the saddle-point state sequence."""

    gamma_bar: float = Field(..., gt=0.0)
    w_star: Signal
    x_inf: NDArray
    energy: float
    horizon: Horizon
    window: Optional[int] = None
    tail_estimate: float = 0.0


class AdmissibilityReport(FrozenModel):
    admissible: bool
    energy_range: Tuple[float, float]
    gamma_lower: Optional[float] = None
    monotone: bool = True
    note: str = ""

    def diagnostic(self) -> Dict[str, object]:
        return self.model_dump(mode="json")


def build_controller(
    plant: Plant,
    cost: CostSpec,
    gamma: float,
    horizon: Horizon,
    tol: Optional[float] = None,
) -> HinfSynthesis:
    """
    Build the saddle-point controller at a feasible ``gamma``.

    Raises:
        InfeasibleGammaError: If ``gamma`` is infeasible, or the stationary
            controller does not stabilize the plant.
    """
    riccati = hinf_riccati(plant, cost, gamma, horizon, tol=tol)
    if not riccati.feasible:
        raise InfeasibleGammaError(
            f"gamma={gamma:.12g} is infeasible (lambda_min(Xi)={riccati.Xi_min_eig:.3g})",
            gamma=gamma,
        )
    A, B, R = plant.A, plant.B, cost.R

    def gains(M_next: np.ndarray, Lam: np.ndarray) -> Tuple[np.ndarray, ...]:
        saddle = np.linalg.solve(Lam, A)
        K = np.linalg.solve(R, B.T @ M_next @ saddle)
        W = M_next @ saddle / gamma ** 2
        return K, A - B @ K, saddle, W

    if horizon.is_infinite:
        K, F, saddle, W = gains(riccati.M, riccati.Lambda)
        rho = spectral_radius(F)
        if rho >= 1.0:
            raise InfeasibleGammaError(
                f"H-infinity gain at gamma={gamma:.12g} does not stabilize the plant "
                f"(rho={rho:.6g})",
                gamma=gamma,
            )
        P_inf = lyapunov_fixed_point(F, cost.Q + K.T @ R @ K, tol=tol)
        return HinfSynthesis(
            gamma=gamma,
            riccati=riccati,
            K_inf=K,
            F_inf=F,
            saddle_loop=saddle,
            adversary_gain=W,
            horizon=horizon,
            P_inf=P_inf,
        )

    T = horizon.steps
    stacks = [gains(riccati.M[t + 1], riccati.Lambda[t]) for t in range(T)]
    K, F, saddle, W = (np.stack(parts) for parts in zip(*stacks))
    return HinfSynthesis(
        gamma=gamma,
        riccati=riccati,
        K_inf=K,
        F_inf=F,
        saddle_loop=saddle,
        adversary_gain=W,
        horizon=horizon,
    )


def _saddle_rollout(synthesis: HinfSynthesis, x0: np.ndarray, T: int) -> Tuple[np.ndarray, np.ndarray]:
    n = x0.shape[0]
    x = np.empty((T + 1, n))
    w = np.empty((T, n))
    x[0] = x0
    stationary = synthesis.horizon.is_infinite
    for t in range(T):
        saddle = synthesis.saddle_loop if stationary else synthesis.saddle_loop[t]
        W = synthesis.adversary_gain if stationary else synthesis.adversary_gain[t]
        w[t] = W @ x[t]
        x[t + 1] = saddle @ x[t]
    return x, w


def worst_case_from_synthesis(
    plant: Plant,
    synthesis: HinfSynthesis,
    T: Optional[int] = None,
    tail_tol: Optional[float] = None,
) -> WorstCase:
    """
    Open-loop worst-case disturbance generated by the saddle-point recursion.

    Finite horizon: T defaults to (and must equal) the synthesis horizon.
    Infinite horizon: with T given the signal is truncated at T; otherwise the
    window doubles from 16 until the estimated tail energy
    rho^{2T} ||w||^2 / (1 - rho^2) is below ``tail_tol``.
    """
    tail_tol = settings.TAIL_TOL if tail_tol is None else tail_tol
    x0 = plant.x0
    if not synthesis.horizon.is_infinite:
        steps = synthesis.horizon.steps
        if T is not None and T != steps:
            raise DimensionError(f"worst case requested over {T} steps, synthesis covers {steps}")
        x, w = _saddle_rollout(synthesis, x0, steps)
        return WorstCase(
            gamma_bar=synthesis.gamma,
            w_star=Signal(steps=w),
            x_inf=x,
            energy=float(np.linalg.norm(w)),
            horizon=synthesis.horizon,
        )

    rho = spectral_radius(synthesis.saddle_loop)
    decay = 1.0 - rho ** 2

    def tail(T_: int, w_: np.ndarray) -> float:
        return float(rho ** (2 * T_) * np.sum(w_ ** 2) / decay)

    if T is not None:
        x, w = _saddle_rollout(synthesis, x0, T)
        estimate = tail(T, w)
    else:
        T = WINDOW_START
        while True:
            x, w = _saddle_rollout(synthesis, x0, T)
            estimate = tail(T, w)
            if estimate < tail_tol:
                break
            if T >= WINDOW_MAX:
                logger.warning(
                    "worst-case window capped at %d steps with tail energy estimate %.3g",
                    T, estimate,
                )
                break
            T = min(2 * T, WINDOW_MAX)
    if estimate >= tail_tol:
        logger.warning("worst-case disturbance truncated at %d steps, tail estimate %.3g", T, estimate)
    return WorstCase(
        gamma_bar=synthesis.gamma,
        w_star=Signal(steps=w),
        x_inf=x,
        energy=float(np.linalg.norm(w)),
        horizon=synthesis.horizon,
        window=T,
        tail_estimate=estimate,
    )


def worst_case_disturbance(
    plant: Plant,
    cost: CostSpec,
    gamma: float,
    horizon: Horizon,
    T: Optional[int] = None,
    tol: Optional[float] = None,
) -> WorstCase:
    """w*_t = gamma^{-2} M_{t+1} Lambda_t^{-1} A x_t with x_{t+1} = Lambda_t^{-1} A x_t."""
    synthesis = build_controller(plant, cost, gamma, horizon, tol=tol)
    return worst_case_from_synthesis(plant, synthesis, T=T)


def find_gamma_lower(
    plant: Plant,
    cost: CostSpec,
    horizon: Horizon,
    tol: float = 1e-8,
    ceiling: Optional[float] = None,
) -> float:
    """
    Smallest feasible attenuation level, by bisection on (0, ceiling].

    The returned level is feasible and lies within ``tol`` of an infeasible one.

    Raises:
        SynthesisInfeasibleError: If even ``ceiling`` is infeasible.
    """
    ceiling = settings.GAMMA_CEILING if ceiling is None else ceiling
    if not is_feasible_gamma(plant, cost, ceiling, horizon):
        raise SynthesisInfeasibleError(
            f"no feasible attenuation level up to {ceiling:g} ({horizon.label})"
        )
    hi = ceiling
    lo = hi / 2.0
    while lo > tol and is_feasible_gamma(plant, cost, lo, horizon):
        hi, lo = lo, lo / 2.0
    if lo <= tol:
        lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_feasible_gamma(plant, cost, mid, horizon):
            hi = mid
        else:
            lo = mid
        logger.debug("gamma_lower bracket [%.12g, %.12g]", lo, hi)
    logger.info("Lower attenuation level %.10g (%s)", hi, horizon.label)
    return hi


def _energy(plant: Plant, cost: CostSpec, gamma: float, horizon: Horizon) -> float:
    return worst_case_disturbance(plant, cost, gamma, horizon).energy


def _feasible_start(plant: Plant, cost: CostSpec, gamma_lower: float, horizon: Horizon) -> float:
    offset = GAMMA_BAR_OFFSET
    for _ in range(40):
        gamma = gamma_lower * (1.0 + offset)
        if is_feasible_gamma(plant, cost, gamma, horizon):
            return gamma
        offset *= 2.0
    raise SearchFailureError(
        f"no feasible attenuation level found just above {gamma_lower:.12g}"
    )


def _energy_profile(
    plant: Plant,
    cost: CostSpec,
    horizon: Horizon,
    gammas: np.ndarray,
    threads: Optional[int] = None,
) -> List[float]:
    threads = settings.THREADS if threads is None else threads
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(lambda g: _energy(plant, cost, float(g), horizon), gammas))


def _is_monotone(energies: List[float]) -> bool:
    diffs = np.diff(np.asarray(energies))
    scale = max(1.0, max(energies))
    return bool(np.all(diffs <= 1e-12 * scale))


def find_gamma_bar(
    plant: Plant,
    cost: CostSpec,
    horizon: Horizon,
    tol: Optional[float] = None,
    gamma_lower: Optional[float] = None,
    prescan: bool = True,
) -> WorstCase:
    """
    Attenuation level whose worst-case disturbance has unit energy.

    Bisection on gamma over [gamma_lower (1 + 1e-6), gamma_hi], where gamma_hi
    doubles until the energy drops below one. The energy map is assumed to be
    decreasing in gamma; a grid pre-scan logs a warning when it is not.

    Raises:
        InadmissibleInitialStateError: If no feasible gamma reaches unit energy.
        SearchFailureError: If the energy never drops below one under the
            ceiling, or the bracket collapses before the tolerance is met.
    """
    tol = settings.ENERGY_TOL if tol is None else tol
    ceiling = settings.GAMMA_CEILING
    if gamma_lower is None:
        gamma_lower = find_gamma_lower(plant, cost, horizon)

    lo = _feasible_start(plant, cost, gamma_lower, horizon)
    e_lo = _energy(plant, cost, lo, horizon)
    if e_lo < 1.0:
        raise InadmissibleInitialStateError(
            f"initial state admits worst-case energy of at most {e_lo:.6g} < 1",
            diagnostic={"energy_range": [0.0, e_lo], "gamma_lower": gamma_lower},
        )
    if abs(e_lo - 1.0) <= tol:
        return worst_case_disturbance(plant, cost, lo, horizon)

    hi = 2.0 * lo
    e_hi = _energy(plant, cost, hi, horizon)
    while e_hi >= 1.0:
        if hi > ceiling:
            raise SearchFailureError(
                f"worst-case energy stays above 1 up to gamma={hi:.6g}",
                energy_range=(e_hi, e_lo),
            )
        lo, e_lo = hi, e_hi
        hi *= 2.0
        e_hi = _energy(plant, cost, hi, horizon)

    if prescan:
        grid = np.linspace(lo, hi, PRESCAN_POINTS)
        if not _is_monotone(_energy_profile(plant, cost, horizon, grid)):
            logger.warning(
                "worst-case energy is not monotone on [%.6g, %.6g]; bisection may be unreliable",
                lo, hi,
            )

    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise SearchFailureError(
                f"gamma-bar bracket collapsed at {mid:.15g} before reaching tolerance",
                energy_range=(e_hi, e_lo),
            )
        worst = worst_case_disturbance(plant, cost, mid, horizon)
        logger.debug("gamma=%.12g energy=%.12g", mid, worst.energy)
        if abs(worst.energy - 1.0) <= tol:
            logger.info("Worst-case attenuation level %.10g (%s)", mid, horizon.label)
            return worst
        if worst.energy > 1.0:
            lo, e_lo = mid, worst.energy
        else:
            hi, e_hi = mid, worst.energy


def check_x0_admissible(
    plant: Plant,
    cost: CostSpec,
    horizon: Horizon,
    grid_points: int = PRESCAN_POINTS,
    threads: Optional[int] = None,
) -> AdmissibilityReport:
    """
    Check whether a unit-energy worst-case disturbance exists for plant.x0.

    Evaluates the worst-case energy on a geometric gamma grid between the lower
    attenuation level and the search ceiling, in parallel. The initial state is
    admissible when the energy starts at or above one and falls below one.
    """
    note = "bracket test on a gamma grid; not a proof of membership"
    try:
        gamma_lower = find_gamma_lower(plant, cost, horizon)
        start = _feasible_start(plant, cost, gamma_lower, horizon)
    except (SynthesisInfeasibleError, SearchFailureError) as exc:
        return AdmissibilityReport(admissible=False, energy_range=(0.0, 0.0), note=str(exc))

    ceiling = settings.GAMMA_CEILING
    gammas = np.geomspace(start, max(ceiling, 2.0 * start), grid_points)
    energies = _energy_profile(plant, cost, horizon, gammas, threads=threads)
    low, high = float(min(energies)), float(max(energies))
    admissible = energies[0] >= 1.0 and energies[-1] < 1.0
    monotone = _is_monotone(energies)
    if not monotone:
        logger.warning("worst-case energy is not monotone on the admissibility grid")
    return AdmissibilityReport(
        admissible=bool(admissible),
        energy_range=(low, high),
        gamma_lower=gamma_lower,
        monotone=monotone,
        note=note,
    )
