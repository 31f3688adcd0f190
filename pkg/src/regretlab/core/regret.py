"""
Dynamic regret and regret upper bounds
--------------------------------------
Dynamic regret compares the cost a causal controller incurs on a disturbance
realization with the cost of the clairvoyant offline optimum on the same
realization. The bound constants relate that regret to the distance between the
realization and the disturbance the controller was designed for:

- H-infinity controller, infinite horizon:  k1 ||dw|| + k2 ||dw||^2
- H-infinity controller, finite horizon T:  k1' ||dw|| + k2' ||dw||^2
- certainty-equivalent controller:          tail * ||dw_bar||^2

where ``tail`` = ||H|| ||P||^2 c^2 / (1 - lambda)^2 is shared between the
H-infinity and certainty-equivalent bounds.
"""

from __future__ import annotations

from typing import Optional, Tuple
import logging

import numpy as np
from pydantic import Field, model_validator

from regretlab.config import settings
from regretlab.core.errors import (
    BoundNotApplicableError,
    DimensionError,
    DivergenceError,
    NonConvergenceError,
    NumericalError,
)
from regretlab.core.hinf import HinfSynthesis, WorstCase
from regretlab.core.linalg import max_eig, min_eig, spectral_norm, spectral_radius, symmetrize
from regretlab.core.offline import (
    CostToGoCoeffs,
    OfflineSolution,
    batch_oracle,
    offline_cost_to_go,
    offline_finite,
    offline_infinite,
    policy_cost_to_go,
)
from regretlab.core.riccati import LqrSolution, lyapunov_fixed_point, solve_dare, solve_finite_lqr
from regretlab.core.schema import CostSpec, FrozenModel, Horizon, Plant, Signal
from regretlab.core.simulation import Policy, infinite_horizon_cost, simulate, total_cost

logger = logging.getLogger(__name__)

# Smallest envelope constant handed out, so the certificate is strict
GELFAND_FLOOR = 1.0 + 1e-12
GELFAND_MAX_WINDOW = 10_000
# Relative agreement required between the Riccati and batch offline costs
CROSS_CHECK_TOL = 1e-8


class GelfandCertificate(FrozenModel):
    """
    Envelope ||F^i|| <= c lambda^i, certified for i <= ``window`` by direct
    powers and beyond it by submultiplicativity since ||F^window|| <= lambda^window.
    """

    c: float
    lam: float
    rho: float
    window: int
    peak_index: int


class TailFactor(FrozenModel):
    """||H|| ||P||^2 c^2 / (1 - lambda)^2 together with its ingredients."""

    value: float
    H_norm: float
    P_norm: float
    c: float
    lam: float


class BoundConstants(FrozenModel):
    kind: str
    k1: float = Field(..., ge=0.0)
    k2: float = Field(..., ge=0.0)
    X: float
    P_bar_norm: float
    H_norm: float
    c: Optional[float] = None
    lam: Optional[float] = None
    lam_inf: Optional[float] = None
    lam_bar: Optional[float] = None
    tail: Optional[float] = None
    tau_bar: Optional[float] = None
    eta_bar: Optional[float] = None
    horizon_steps: Optional[int] = None
    H_dominates: Optional[bool] = None

    def bound(self, gap_norm: float) -> float:
        return self.k1 * gap_norm + self.k2 * gap_norm ** 2


class RegretReport(FrozenModel):
    """Regret of one controller on one realization, with its bound when available."""

    policy: str
    horizon: str
    regret: float
    policy_cost: float
    offline_cost: float
    x0_norm: float
    X: float
    gap_norm: Optional[float] = None
    bound_value: Optional[float] = None
    bound_constants: Optional[BoundConstants] = None
    w: Optional[Signal] = None

    @model_validator(mode="after")
    def _check_initial_state(self) -> "RegretReport":
        if self.x0_norm > self.X * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"||x0|| = {self.x0_norm:.6g} exceeds the bound X = {self.X:.6g}")
        return self

    @property
    def slack(self) -> Optional[float]:
        if self.bound_value is None:
            return None
        return self.bound_value - self.regret

    def with_bound(self, gap_norm: float, constants: BoundConstants) -> "RegretReport":
        return self.model_copy(
            update={
                "gap_norm": gap_norm,
                "bound_value": constants.bound(gap_norm),
                "bound_constants": constants,
            }
        )


def gelfand_constant(
    F: np.ndarray,
    lam: Optional[float] = None,
    window: int = 1,
    max_window: int = GELFAND_MAX_WINDOW,
) -> GelfandCertificate:
    """
    Smallest c >= 1 + 1e-12 with ||F^i|| <= c lambda^i for all i >= 1.

    Powers are scanned for at least ``window`` steps and until ||F^k|| <= lambda^k,
    after which the envelope extends to every i. ``lam`` defaults to (1 + rho(F))/2.

    Raises:
        DivergenceError: If rho(F) >= 1.
        NonConvergenceError: If the envelope has not crossed within ``max_window``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    rho = spectral_radius(F)
    if rho >= 1.0:
        raise DivergenceError(f"no decay envelope for rho(F) = {rho:.6g}", spectral_radius=rho)
    lam = 0.5 * (1.0 + rho) if lam is None else lam
    if not rho < lam < 1.0:
        raise ValueError(f"decay rate {lam} must lie in (rho(F), 1) = ({rho:.6g}, 1)")

    c, peak, crossed = GELFAND_FLOOR, 0, None
    power = np.eye(F.shape[0])
    for i in range(1, max_window + 1):
        power = power @ F
        norm = spectral_norm(power)
        ratio = norm / lam ** i
        if ratio > c:
            c, peak = ratio, i
        if crossed is None and norm <= lam ** i:
            crossed = i
        if crossed is not None and i >= window:
            return GelfandCertificate(c=c, lam=lam, rho=rho, window=i, peak_index=peak)
    raise NonConvergenceError(
        f"||F^i|| did not fall below lambda^i within {max_window} powers (rho={rho:.6g})",
        iterations=max_window,
    )


def tail_factor(H_norm: float, P_norm: float, c: float, lam: float) -> float:
    return H_norm * P_norm ** 2 * c ** 2 / (1.0 - lam) ** 2


def ce_coefficient(plant: Plant, cost: CostSpec, lqr: Optional[LqrSolution] = None) -> TailFactor:
    """Quadratic coefficient of the certainty-equivalent bound, from the DARE solution."""
    lqr = solve_dare(plant, cost) if lqr is None else lqr
    B = plant.B
    H = symmetrize(B @ np.linalg.solve(cost.R + B.T @ lqr.P @ B, B.T))
    certificate = gelfand_constant(lqr.F)
    H_norm, P_norm = spectral_norm(H), spectral_norm(lqr.P)
    return TailFactor(
        value=tail_factor(H_norm, P_norm, certificate.c, certificate.lam),
        H_norm=H_norm,
        P_norm=P_norm,
        c=certificate.c,
        lam=certificate.lam,
    )


def ce_bound(
    plant: Plant,
    cost: CostSpec,
    prediction_gap_norm: float,
    lqr: Optional[LqrSolution] = None,
) -> float:
    """Regret bound tail * ||w_bar - w||^2 of the certainty-equivalent controller."""
    return ce_coefficient(plant, cost, lqr).value * prediction_gap_norm ** 2


def assemble_infinite_constants(
    P_bar: float, tail: float, c_bar: float, lam_bar: float, X: float
) -> Tuple[float, float]:
    """(k1, k2) of the infinite-horizon H-infinity bound."""
    k2 = 2.0 * P_bar + tail
    k1 = 4.0 * P_bar + 4.0 * c_bar * P_bar * (2.0 + X) * lam_bar / (1.0 - lam_bar) + 2.0 * tail
    return k1, k2


def assemble_finite_constants(
    P_bar: float, H_bar: float, tau_bar: float, eta_bar: float, T: int, X: float
) -> Tuple[float, float]:
    """(k1', k2') of the finite-horizon H-infinity bound."""
    geometric = (1.0 - eta_bar ** T) / (1.0 - eta_bar)
    spread = tau_bar ** 2 * H_bar * P_bar * geometric ** 2
    k2 = P_bar * (2.0 + spread)
    k1 = 2.0 * P_bar * (2.0 + 2.0 * tau_bar * eta_bar * (2.0 + X) * geometric + spread)
    return k1, k2


def _check_bound_preconditions(plant: Plant, cost: CostSpec, worst: Optional[WorstCase]) -> None:
    x0_norm = float(np.linalg.norm(plant.x0))
    if x0_norm > cost.X * (1.0 + 1e-12) + 1e-12:
        raise BoundNotApplicableError(f"||x0|| = {x0_norm:.6g} exceeds X = {cost.X:.6g}")
    if worst is not None and abs(worst.energy - 1.0) > settings.ENERGY_TOL:
        raise BoundNotApplicableError(
            f"worst-case disturbance has energy {worst.energy:.9g}, the bound needs unit energy"
        )


def hinf_bound_infinite(
    plant: Plant,
    cost: CostSpec,
    synthesis: HinfSynthesis,
    gap_norm: float,
    lqr: Optional[LqrSolution] = None,
    worst: Optional[WorstCase] = None,
) -> Tuple[float, BoundConstants]:
    """
    Infinite-horizon regret bound k1 ||dw|| + k2 ||dw||^2 of the H-infinity controller.

    Raises:
        BoundNotApplicableError: If the synthesis is not stationary, ||x0|| > X, or
            the worst case (when given) does not have unit energy.
    """
    if not synthesis.horizon.is_infinite:
        raise BoundNotApplicableError("the infinite-horizon bound needs a stationary synthesis")
    _check_bound_preconditions(plant, cost, worst)
    lqr = solve_dare(plant, cost) if lqr is None else lqr

    shared = ce_coefficient(plant, cost, lqr)
    hinf_certificate = gelfand_constant(synthesis.F_inf)
    P_bar = max(spectral_norm(lqr.P), spectral_norm(synthesis.P_inf))
    c_bar = max(shared.c, hinf_certificate.c)
    lam_bar = max(shared.lam, hinf_certificate.lam)
    k1, k2 = assemble_infinite_constants(P_bar, shared.value, c_bar, lam_bar, cost.X)
    constants = BoundConstants(
        kind="infinite",
        k1=k1,
        k2=k2,
        X=cost.X,
        P_bar_norm=P_bar,
        H_norm=shared.H_norm,
        c=c_bar,
        lam=shared.lam,
        lam_inf=hinf_certificate.lam,
        lam_bar=lam_bar,
        tail=shared.value,
    )
    return constants.bound(gap_norm), constants


def hinf_bound_finite(
    plant: Plant,
    cost: CostSpec,
    synthesis: HinfSynthesis,
    gap_norm: float,
    lqr: Optional[LqrSolution] = None,
    worst: Optional[WorstCase] = None,
) -> Tuple[float, BoundConstants]:
    """
    Finite-horizon regret bound k1' ||dw|| + k2' ||dw||^2 of the H-infinity controller.

    P_bar' is the largest eigenvalue over the LQR matrices P_i and the H-infinity
    cost-to-go matrices P_i^inf; H_bar is the H_i of largest norm.

    Raises:
        BoundNotApplicableError: If Q is singular, the synthesis is stationary,
            ||x0|| > X, or the worst case does not have unit energy.
    """
    if synthesis.horizon.is_infinite:
        raise BoundNotApplicableError("the finite-horizon bound needs a finite-horizon synthesis")
    q_min = min_eig(cost.Q)
    if q_min <= 0.0:
        raise BoundNotApplicableError(f"lambda_min(Q) = {q_min:.3g}; the finite bound needs Q > 0")
    _check_bound_preconditions(plant, cost, worst)
    T = synthesis.horizon.steps
    lqr = solve_finite_lqr(plant, cost, T) if lqr is None else lqr

    hinf_P = policy_cost_to_go(
        plant, cost, synthesis.K_inf, Signal.zeros(T, plant.n), cost.QT, controller="hinf"
    ).P
    P_bar = max(max(max_eig(P) for P in lqr.P), max(max_eig(P) for P in hinf_P))
    tau_bar = float(np.sqrt(P_bar / q_min))
    eta_bar = float(np.sqrt(max(0.0, 1.0 - 1.0 / tau_bar ** 2)))

    B = plant.B
    H = [symmetrize(B @ np.linalg.solve(cost.R + B.T @ lqr.P[i + 1] @ B, B.T)) for i in range(T)]
    norms = [spectral_norm(h) for h in H]
    H_bar = H[int(np.argmax(norms))]
    scale = max(1.0, max(norms))
    dominates = all(min_eig(H_bar - h) >= -1e-10 * scale for h in H)
    if not dominates:
        logger.warning("largest-norm H_i does not dominate every H_i in the PSD order")

    k1, k2 = assemble_finite_constants(P_bar, max(norms), tau_bar, eta_bar, T, cost.X)
    constants = BoundConstants(
        kind=f"finite({T})",
        k1=k1,
        k2=k2,
        X=cost.X,
        P_bar_norm=P_bar,
        H_norm=max(norms),
        tau_bar=tau_bar,
        eta_bar=eta_bar,
        horizon_steps=T,
        H_dominates=dominates,
    )
    return constants.bound(gap_norm), constants


def hinf_bound(
    plant: Plant,
    cost: CostSpec,
    synthesis: HinfSynthesis,
    gap_norm: float,
    worst: Optional[WorstCase] = None,
) -> Tuple[float, BoundConstants]:
    if synthesis.horizon.is_infinite:
        return hinf_bound_infinite(plant, cost, synthesis, gap_norm, worst=worst)
    return hinf_bound_finite(plant, cost, synthesis, gap_norm, worst=worst)


def _policy_cost(plant: Plant, cost: CostSpec, policy: Policy, w: Signal, horizon: Horizon) -> float:
    traj = simulate(plant, policy, w)
    if not horizon.is_infinite:
        return total_cost(traj, cost)
    K = policy.terminal_gain()
    if K is None:
        raise ValueError(f"policy '{policy.name}' has no stationary tail; infinite cost undefined")
    F = plant.A - plant.B @ K
    tail = lyapunov_fixed_point(F, cost.Q + K.T @ cost.R @ K)
    return infinite_horizon_cost(traj, cost, tail)


def dynamic_regret(
    plant: Plant,
    cost: CostSpec,
    policy: Policy,
    w: Signal,
    horizon: Horizon,
    offline: Optional[OfflineSolution] = None,
    cross_check: bool = False,
) -> RegretReport:
    """
    Regret J(policy, w) - J(offline optimum, w) on one realization.

    For the infinite horizon, w is zero after its last step and both costs
    include the exact tail.

    Args:
        offline: Precomputed offline optimum for ``w`` (recomputed when None).
        cross_check: Also solve the batch problem and require agreement.

    Raises:
        NumericalError: If the cross-check fails.
    """
    if not horizon.is_infinite and horizon.steps != w.horizon:
        raise DimensionError(f"horizon {horizon.steps} differs from disturbance horizon {w.horizon}")
    if offline is None:
        offline = offline_infinite(plant, cost, w) if horizon.is_infinite else offline_finite(plant, cost, w)

    if cross_check:
        terminal = offline.lqr.P if horizon.is_infinite and offline.lqr is not None else None
        if horizon.is_infinite and terminal is None:
            terminal = solve_dare(plant, cost).P
        batch = batch_oracle(plant, cost, w, terminal=terminal)
        mismatch = abs(batch.cost - offline.cost) / max(1.0, abs(offline.cost))
        if mismatch > CROSS_CHECK_TOL:
            raise NumericalError(
                f"offline optimum disagrees with the batch oracle (relative mismatch {mismatch:.3g})"
            )

    J = _policy_cost(plant, cost, policy, w, horizon)
    return RegretReport(
        policy=policy.name,
        horizon=horizon.label,
        regret=J - offline.cost,
        policy_cost=J,
        offline_cost=offline.cost,
        x0_norm=float(np.linalg.norm(plant.x0)),
        X=cost.X,
        w=w,
    )


def regret_from_coefficients(
    policy_coeffs: CostToGoCoeffs, offline_coeffs: CostToGoCoeffs, x0: np.ndarray
) -> float:
    """x0'(P^A - P)x0 + x0'(v^A - v) + q^A - q at the initial step."""
    return policy_coeffs.value(0, x0) - offline_coeffs.value(0, x0)


def ce_regret_exact(
    plant: Plant, cost: CostSpec, lqr: LqrSolution, prediction_gap: Signal
) -> float:
    """
    Exact certainty-equivalent regret sum_i G_i' H_i G_i, with G_i built from
    the prediction error w_bar - w by the offline coefficient recursion.
    """
    coeffs = offline_cost_to_go(plant, cost, lqr, prediction_gap)
    return float(np.einsum("ti,tij,tj->", coeffs.G, coeffs.H, coeffs.G))
