"""
Riccati solvers
---------------
Lyapunov fixed points, LQR difference/algebraic Riccati equations and the coupled
generalized Riccati equations of the soft-constrained H-infinity game.

Stationary solutions are obtained by fixed-point iteration of the corresponding
backward recursion. For the game, an attenuation level gamma is feasible when
gamma^2 I - M stays positive definite along the recursion (with a strict numerical
margin) and, for the infinite horizon, the saddle-point closed loop Lambda^{-1} A
is stable.
"""

from __future__ import annotations

from typing import Optional, Tuple
import logging

import numpy as np
from pydantic import Field

from regretlab.config import settings
from regretlab.core.errors import (
    DivergenceError,
    InfeasibleGammaError,
    NonConvergenceError,
)
from regretlab.core.linalg import (
    min_eig,
    relative_change,
    spectral_norm,
    spectral_radius,
    symmetrize,
)
from regretlab.core.schema import CostSpec, Horizon, NDArray, Plant, FrozenModel

logger = logging.getLogger(__name__)

# Iterates whose norm exceeds this are treated as diverging
DIVERGENCE_NORM = 1e12
# Lambda is treated as singular above this condition number
LAMBDA_COND_MAX = 1e14
# Closed loops this close to the unit circle are rejected by the Lyapunov solver
STABILITY_MARGIN = 1e-12


class LqrSolution(FrozenModel):
    """
    LQR Riccati solution.

    Stationary (infinite horizon): P, K, F are n x n, m x n, n x n.
    Finite horizon T: P has shape (T+1, n, n) with P[T] = Q_T, K and F have
    shapes (T, m, n) and (T, n, n), K[t] being computed from P[t+1].
    """

    P: NDArray
    K: NDArray
    F: NDArray
    spectral_radius_F: float
    horizon: Horizon
    iterations: int = 0

    @property
    def stationary(self) -> bool:
        return self.horizon.is_infinite


class HinfRiccati(FrozenModel):
    """
    Solution of the coupled generalized Riccati equations at a given gamma.

    Stationary: M and Lambda are n x n. Finite horizon T: M has shape (T+1, n, n)
    with M[T] = Q_T, Lambda has shape (T, n, n) with Lambda[t] = I + S M[t+1].
    ``Xi_min_eig`` is the smallest eigenvalue of gamma^2 I - M over the iterates
    that enter a Lambda.
    """

    gamma: float = Field(..., gt=0.0)
    M: NDArray
    Lambda: NDArray
    feasible: bool
    Xi_min_eig: float
    horizon: Horizon
    converged: bool = True
    iterations: int = 0
    closed_loop_radius: Optional[float] = None


def lyapunov_fixed_point(
    F: np.ndarray,
    Q: np.ndarray,
    P0: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """
    Limit of the iteration P <- F' P F + Q started from P0.

    The sum is accumulated by doubling: after s rounds S holds the first 2^s terms
    of sum_k (F')^k Q F^k and G = F^(2^s), so P = S + G' P0 G equals 2^s plain
    iterations. Rounds stop once ||G||^2 is negligible against ``tol``.

    Raises:
        DivergenceError: If rho(F) >= 1 - 1e-12.
        NonConvergenceError: If more than ``max_iter`` equivalent iterations are needed.
    """
    tol = settings.TOL if tol is None else tol
    max_iter = settings.MAX_ITER if max_iter is None else max_iter
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Q = symmetrize(np.atleast_2d(np.asarray(Q, dtype=float)))
    P0 = np.zeros_like(Q) if P0 is None else symmetrize(np.atleast_2d(np.asarray(P0, dtype=float)))

    rho = spectral_radius(F)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise DivergenceError(
            f"Lyapunov iteration diverges: spectral radius of F is {rho:.12g}", spectral_radius=rho
        )

    S = Q.copy()
    G = F.copy()
    equivalent = 1
    while spectral_norm(G) ** 2 > 1e-3 * tol:
        if 2 * equivalent > max_iter:
            raise NonConvergenceError(
                f"Lyapunov iteration did not converge within {max_iter} iterations "
                f"(spectral radius {rho:.6g})",
                iterations=equivalent,
            )
        S = symmetrize(S + G.T @ S @ G)
        G = G @ G
        equivalent *= 2
    logger.debug("Lyapunov fixed point after %d equivalent iterations", equivalent)
    return symmetrize(S + G.T @ P0 @ G)


def _lqr_step(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, P_next: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    K = np.linalg.solve(R + B.T @ P_next @ B, B.T @ P_next @ A)
    F = A - B @ K
    P = symmetrize(F.T @ P_next @ F + Q + K.T @ R @ K)
    return P, K, F


def solve_dare(
    plant: Plant,
    cost: CostSpec,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> LqrSolution:
    """
    Stationary LQR solution by value iteration from P = Q_T.

    Raises:
        NonConvergenceError: If the iteration blows up or hits the cap, which
            indicates (A, B) is not stabilizable or (A, Q) not detectable.
        DivergenceError: If the converged gain does not stabilize A - BK.
    """
    cost.check_plant(plant)
    tol = settings.TOL if tol is None else tol
    max_iter = settings.MAX_ITER if max_iter is None else max_iter
    A, B, Q, R = plant.A, plant.B, cost.Q, cost.R

    P = np.array(cost.QT)
    for iteration in range(1, max_iter + 1):
        P_new, _, _ = _lqr_step(A, B, Q, R, P)
        if not np.all(np.isfinite(P_new)) or spectral_norm(P_new) > DIVERGENCE_NORM:
            raise NonConvergenceError(
                "DARE iteration diverged; (A, B) may be unstabilizable or (A, Q) undetectable",
                iterations=iteration,
            )
        step = relative_change(P_new, P)
        P = P_new
        if step <= tol:
            break
    else:
        raise NonConvergenceError(
            f"DARE iteration did not converge within {max_iter} iterations; "
            "(A, B) may be unstabilizable or (A, Q) undetectable",
            iterations=max_iter,
        )

    _, K, F = _lqr_step(A, B, Q, R, P)
    rho = spectral_radius(F)
    if rho >= 1.0:
        raise DivergenceError(
            f"DARE solution does not stabilize the plant: rho(A - BK) = {rho:.6g}",
            spectral_radius=rho,
        )
    logger.debug("DARE converged after %d iterations, rho(F)=%.6g", iteration, rho)
    return LqrSolution(
        P=P, K=K, F=F, spectral_radius_F=rho, horizon=Horizon.infinite(), iterations=iteration
    )


def solve_finite_lqr(plant: Plant, cost: CostSpec, T: int) -> LqrSolution:
    """Backward difference Riccati recursion from P_T = Q_T over T steps."""
    if T < 1:
        raise ValueError(f"horizon must be at least 1, got {T}")
    cost.check_plant(plant)
    A, B, Q, R = plant.A, plant.B, cost.Q, cost.R
    n, m = plant.n, plant.m

    P = np.empty((T + 1, n, n))
    K = np.empty((T, m, n))
    F = np.empty((T, n, n))
    P[T] = cost.QT
    for t in range(T - 1, -1, -1):
        P[t], K[t], F[t] = _lqr_step(A, B, Q, R, P[t + 1])
    return LqrSolution(
        P=P,
        K=K,
        F=F,
        spectral_radius_F=spectral_radius(F[0]),
        horizon=Horizon.finite(T),
        iterations=T,
    )


def game_coupling(plant: Plant, cost: CostSpec, gamma: float) -> np.ndarray:
    """S(gamma) = B R^{-1} B' - gamma^{-2} I."""
    if gamma <= 0:
        raise InfeasibleGammaError(f"gamma must be positive, got {gamma}", gamma=gamma)
    BRB = plant.B @ np.linalg.solve(cost.R, plant.B.T)
    return symmetrize(BRB) - np.eye(plant.n) / gamma ** 2


def _game_step(
    A: np.ndarray, Q: np.ndarray, S: np.ndarray, M_next: np.ndarray, gamma: float
) -> Tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    Lam = np.eye(n) + S @ M_next
    if not np.all(np.isfinite(Lam)) or np.linalg.cond(Lam) > LAMBDA_COND_MAX:
        raise InfeasibleGammaError(f"Lambda is singular at gamma={gamma:.12g}", gamma=gamma)
    try:
        LamInvA = np.linalg.solve(Lam, A)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleGammaError(
            f"Lambda is singular at gamma={gamma:.12g}", gamma=gamma
        ) from exc
    M = symmetrize(Q + A.T @ M_next @ LamInvA)
    return M, Lam


def _xi(M: np.ndarray, gamma: float) -> float:
    return min_eig(gamma ** 2 * np.eye(M.shape[0]) - M)


def hinf_riccati_finite(
    plant: Plant,
    cost: CostSpec,
    gamma: float,
    T: int,
    margin: Optional[float] = None,
) -> HinfRiccati:
    """
    Backward coupled recursion over T steps with M_T = Q_T.

    Lambda_t = I + (B R^{-1} B' - gamma^{-2} I) M_{t+1},
    M_t = Q + A' M_{t+1} Lambda_t^{-1} A.

    Raises:
        InfeasibleGammaError: If some Lambda_t is singular or the recursion overflows.
    """
    if T < 1:
        raise ValueError(f"horizon must be at least 1, got {T}")
    cost.check_plant(plant)
    margin = settings.FEASIBILITY_MARGIN if margin is None else margin
    S = game_coupling(plant, cost, gamma)
    n = plant.n

    M = np.empty((T + 1, n, n))
    Lam = np.empty((T, n, n))
    M[T] = cost.QT
    xi_min = np.inf
    for t in range(T - 1, -1, -1):
        xi_min = min(xi_min, _xi(M[t + 1], gamma))
        M[t], Lam[t] = _game_step(plant.A, cost.Q, S, M[t + 1], gamma)
        if not np.all(np.isfinite(M[t])):
            raise InfeasibleGammaError(
                f"game Riccati recursion overflowed at gamma={gamma:.12g}", gamma=gamma
            )
    return HinfRiccati(
        gamma=gamma,
        M=M,
        Lambda=Lam,
        feasible=bool(xi_min > margin),
        Xi_min_eig=float(xi_min),
        horizon=Horizon.finite(T),
        iterations=T,
    )


def hinf_riccati_infinite(
    plant: Plant,
    cost: CostSpec,
    gamma: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    margin: Optional[float] = None,
) -> HinfRiccati:
    """
    Stationary solution of the game Riccati equation, iterated from M = Q_T.

    The iterates are the finite-horizon value matrices of growing horizon, so a
    violation of gamma^2 I - M > 0 on any of them ends the iteration with
    ``feasible=False`` and ``converged=False``.

    Raises:
        InfeasibleGammaError: On a singular Lambda, on divergence of the iterates,
            or when the iteration cap is reached.
    """
    cost.check_plant(plant)
    tol = settings.TOL if tol is None else tol
    max_iter = settings.MAX_ITER if max_iter is None else max_iter
    margin = settings.FEASIBILITY_MARGIN if margin is None else margin
    S = game_coupling(plant, cost, gamma)
    n = plant.n

    M = np.array(cost.QT)
    xi_min = np.inf
    for iteration in range(1, max_iter + 1):
        M_new, _ = _game_step(plant.A, cost.Q, S, M, gamma)
        if not np.all(np.isfinite(M_new)) or spectral_norm(M_new) > DIVERGENCE_NORM:
            raise InfeasibleGammaError(
                f"game Riccati iteration diverged at gamma={gamma:.12g}", gamma=gamma
            )
        xi = _xi(M_new, gamma)
        xi_min = min(xi_min, xi)
        if xi <= margin:
            logger.debug(
                "gamma=%.12g infeasible after %d iterations (lambda_min(Xi)=%.3g)",
                gamma, iteration, xi,
            )
            return HinfRiccati(
                gamma=gamma,
                M=M_new,
                Lambda=np.eye(n) + S @ M_new,
                feasible=False,
                Xi_min_eig=float(xi_min),
                horizon=Horizon.infinite(),
                converged=False,
                iterations=iteration,
            )
        step = relative_change(M_new, M)
        M = M_new
        if step <= tol:
            break
    else:
        raise InfeasibleGammaError(
            f"game Riccati iteration did not converge within {max_iter} iterations "
            f"at gamma={gamma:.12g}",
            gamma=gamma,
        )

    Lam = np.eye(n) + S @ M
    radius = spectral_radius(np.linalg.solve(Lam, plant.A))
    xi = _xi(M, gamma)
    feasible = bool(xi > margin and radius < 1.0)
    logger.debug(
        "game Riccati at gamma=%.12g: %d iterations, lambda_min(Xi)=%.3g, rho=%.6g",
        gamma, iteration, xi, radius,
    )
    return HinfRiccati(
        gamma=gamma,
        M=M,
        Lambda=Lam,
        feasible=feasible,
        Xi_min_eig=float(min(xi_min, xi)),
        horizon=Horizon.infinite(),
        converged=True,
        iterations=iteration,
        closed_loop_radius=radius,
    )


def hinf_riccati(
    plant: Plant,
    cost: CostSpec,
    gamma: float,
    horizon: Horizon,
    tol: Optional[float] = None,
) -> HinfRiccati:
    if horizon.is_infinite:
        return hinf_riccati_infinite(plant, cost, gamma, tol=tol)
    return hinf_riccati_finite(plant, cost, gamma, horizon.steps)


def is_feasible_gamma(
    plant: Plant,
    cost: CostSpec,
    gamma: float,
    horizon: Horizon,
    tol: Optional[float] = None,
) -> bool:
    """True when ``gamma`` satisfies the game feasibility conditions on ``horizon``."""
    try:
        return hinf_riccati(plant, cost, gamma, horizon, tol=tol).feasible
    except InfeasibleGammaError:
        return False
