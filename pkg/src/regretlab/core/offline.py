"""
Clairvoyant offline control
---------------------------
The optimal noncausal controller that knows the whole disturbance sequence in
advance, the extended-quadratic cost-to-go coefficients of affine state-feedback
laws, and an independent dense batch oracle used to verify both.

The offline controller is LQR feedback plus a feedforward on future
disturbances,

    u*_t = -K_t x_t - (R + B' P_{t+1} B)^{-1} B' g_t,
    g_t  = P_{t+1} w_t + F_{t+1}' g_{t+1},   g_{T-1} = P_T w_{T-1},

which expands to the sum over K^w_{t,i} w_{t+i}. Disturbances are zero beyond
the end of the given signal, so the backward recursion is exact for the infinite
horizon as well.
"""

from __future__ import annotations

from typing import Literal, Optional, Tuple
import logging

import numpy as np
import scipy.linalg

from regretlab.config import settings
from regretlab.core.errors import DimensionError, DivergenceError, OracleSizeError
from regretlab.core.hinf import HinfSynthesis
from regretlab.core.linalg import spectral_radius, symmetrize
from regretlab.core.riccati import LqrSolution, lyapunov_fixed_point, solve_dare, solve_finite_lqr
from regretlab.core.schema import CostSpec, FrozenModel, Horizon, NDArray, Plant, Signal, Trajectory
from regretlab.core.simulation import (
    FeedforwardPolicy,
    infinite_horizon_cost,
    simulate,
    total_cost,
)

logger = logging.getLogger(__name__)

# Batch Hessians with a larger condition number trigger a warning
BATCH_COND_WARN = 1e12

ControllerKind = Literal["hinf", "offline", "feedback"]


class OfflineSolution(FrozenModel):
    """
    Optimal offline inputs for one disturbance realization.

    ``feedforward`` holds the open-loop part f_t of u*_t = -K_t x_t - f_t. For the
    batch oracle ``lqr`` is None and ``feedforward`` equals the negated inputs.
    """

    inputs: Signal
    cost: float
    trajectory: Trajectory
    feedforward: Signal
    horizon: Horizon
    method: str = "riccati"
    lqr: Optional[LqrSolution] = None

    def policy(self) -> FeedforwardPolicy:
        if self.lqr is None:
            raise ValueError("batch solutions carry no feedback law")
        gains = self.lqr.K
        return FeedforwardPolicy(gains, self.feedforward, name="offline")


class CostToGoCoeffs(FrozenModel):
    """
    Extended-quadratic cost-to-go x' P_i x + x' v_i + q_i for i = 0..T.

    ``P`` has shape (T+1, n, n), ``v`` (T+1, n), ``q`` (T+1,). The offline
    coefficients also carry ``G`` (T, n) and ``H`` (T, n, n) with
    G_i = P_{i+1} w_i + v_{i+1}/2 and H_i = B (R + B' P_{i+1} B)^{-1} B'.
    """

    controller: str
    P: NDArray
    v: NDArray
    q: NDArray
    horizon: Horizon
    G: Optional[NDArray] = None
    H: Optional[NDArray] = None

    @property
    def steps(self) -> int:
        return self.q.shape[0] - 1

    def value(self, i: int, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P[i] @ x + x @ self.v[i] + self.q[i])


def _check_disturbance(plant: Plant, w: Signal) -> None:
    if w.dim != plant.n:
        raise DimensionError(f"disturbance has dimension {w.dim}, plant has n={plant.n}")


def _per_step(stack: np.ndarray, stationary: bool, t: int) -> np.ndarray:
    return stack if stationary else stack[t]


def feedforward_terms(
    plant: Plant, cost: CostSpec, lqr: LqrSolution, w: Signal
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Backward feedforward recursion for a disturbance (or a prediction of it).

    Returns the offsets f (T, m) and the auxiliary vectors g (T, n).
    """
    _check_disturbance(plant, w)
    T = w.horizon
    stationary = lqr.stationary
    if not stationary and lqr.horizon.steps != T:
        raise DimensionError(f"LQR horizon {lqr.horizon.steps} differs from signal horizon {T}")
    B, R = plant.B, cost.R
    g = np.zeros((T, plant.n))
    f = np.zeros((T, plant.m))
    carry = np.zeros(plant.n)
    for t in range(T - 1, -1, -1):
        P_next = _per_step(lqr.P, stationary, t + 1)
        g[t] = P_next @ w[t] + carry
        f[t] = np.linalg.solve(R + B.T @ P_next @ B, B.T @ g[t])
        if t > 0:
            carry = _per_step(lqr.F, stationary, t).T @ g[t]
    return f, g


def feedforward_gain(plant: Plant, cost: CostSpec, lqr: LqrSolution, t: int, i: int) -> np.ndarray:
    """
    Feedforward gain K^w_{t,i} multiplying w_{t+i} in u*_t.

    Finite horizon: (R + B' P_{t+1} B)^{-1} B' Phi(t+i+1, t+1)' P_{t+i+1}, with
    Phi the closed-loop transition matrix. Stationary: (R + B' P B)^{-1} B' (F')^i P.
    """
    B, R = plant.B, cost.R
    if lqr.stationary:
        transition = np.linalg.matrix_power(lqr.F, i)
        return np.linalg.solve(R + B.T @ lqr.P @ B, B.T @ transition.T @ lqr.P)
    T = lqr.horizon.steps
    if not (0 <= t < T and 0 <= i < T - t):
        raise IndexError(f"feedforward gain ({t}, {i}) outside horizon {T}")
    transition = np.eye(plant.n)
    for s in range(t + 1, t + i + 1):
        transition = lqr.F[s] @ transition
    P_next = lqr.P[t + 1]
    return np.linalg.solve(R + B.T @ P_next @ B, B.T @ transition.T @ lqr.P[t + i + 1])


def _solve_offline(
    plant: Plant, cost: CostSpec, lqr: LqrSolution, w: Signal, horizon: Horizon
) -> OfflineSolution:
    f, _ = feedforward_terms(plant, cost, lqr, w)
    policy = FeedforwardPolicy(lqr.K, Signal(steps=f), name="offline")
    traj = simulate(plant, policy, w)
    if horizon.is_infinite:
        J = infinite_horizon_cost(traj, cost, lqr.P)
    else:
        J = total_cost(traj, cost)
    return OfflineSolution(
        inputs=traj.inputs,
        cost=J,
        trajectory=traj,
        feedforward=Signal(steps=f),
        horizon=horizon,
        lqr=lqr,
    )


def offline_infinite(
    plant: Plant,
    cost: CostSpec,
    w: Signal,
    lqr: Optional[LqrSolution] = None,
) -> OfflineSolution:
    """
    Infinite-horizon optimal offline controller for a disturbance that vanishes
    after ``w.horizon`` steps.

    The reported cost is the full infinite-horizon cost; after the last
    disturbance the controller is pure LQR, whose cost-to-go is x' P x.
    """
    lqr = solve_dare(plant, cost) if lqr is None else lqr
    return _solve_offline(plant, cost, lqr, w, Horizon.infinite())


def offline_finite(
    plant: Plant,
    cost: CostSpec,
    w: Signal,
    T: Optional[int] = None,
    lqr: Optional[LqrSolution] = None,
) -> OfflineSolution:
    """Finite-horizon optimal offline controller over T = w.horizon steps."""
    T = w.horizon if T is None else T
    if T != w.horizon:
        raise DimensionError(f"horizon {T} differs from disturbance horizon {w.horizon}")
    lqr = solve_finite_lqr(plant, cost, T) if lqr is None else lqr
    return _solve_offline(plant, cost, lqr, w, Horizon.finite(T))


class BatchProblem:
    """
    The offline problem written as one convex quadratic in the stacked inputs.

    States stack as X = Gx x0 + Hu U + Hw W with X = (x_0, ..., x_T), so
    J(U) = U' (Hu' Qb Hu + Rb) U + 2 U' Hu' Qb c + c' Qb c where c = Gx x0 + Hw W.
    """

    def __init__(
        self,
        plant: Plant,
        cost: CostSpec,
        w: Signal,
        terminal: Optional[np.ndarray] = None,
        max_size: Optional[int] = None,
    ):
        _check_disturbance(plant, w)
        max_size = settings.BATCH_MAX_SIZE if max_size is None else max_size
        T, n, m = w.horizon, plant.n, plant.m
        if m * T > max_size:
            raise OracleSizeError(f"batch problem has {m * T} inputs, cap is {max_size}")
        self.plant, self.cost, self.w = plant, cost, w
        self.T, self.n, self.m = T, n, m

        powers = [np.eye(n)]
        for _ in range(T):
            powers.append(plant.A @ powers[-1])
        Gx = np.vstack(powers)
        Hu = np.zeros(((T + 1) * n, T * m))
        Hw = np.zeros(((T + 1) * n, T * n))
        for t in range(1, T + 1):
            rows = slice(t * n, (t + 1) * n)
            for s in range(t):
                Hu[rows, s * m:(s + 1) * m] = powers[t - 1 - s] @ plant.B
                Hw[rows, s * n:(s + 1) * n] = powers[t - 1 - s]
        QT = cost.QT if terminal is None else np.asarray(terminal, dtype=float)
        self.Qb = scipy.linalg.block_diag(*([cost.Q] * T + [QT]))
        self.Rb = scipy.linalg.block_diag(*([cost.R] * T))
        self.Hu = Hu
        self.offset = Gx @ plant.x0 + Hw @ w.flat()
        self.hessian = symmetrize(Hu.T @ self.Qb @ Hu + self.Rb)
        self.linear = Hu.T @ self.Qb @ self.offset
        self.constant = float(self.offset @ self.Qb @ self.offset)

    def cost_of(self, U: np.ndarray) -> float:
        U = np.asarray(U, dtype=float).ravel()
        return float(U @ self.hessian @ U + 2.0 * U @ self.linear + self.constant)

    def gradient(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float).ravel()
        return 2.0 * (self.hessian @ U + self.linear)

    def minimize(self) -> np.ndarray:
        eigs = np.linalg.eigvalsh(self.hessian)
        if eigs[0] <= 0 or eigs[-1] / eigs[0] > BATCH_COND_WARN:
            logger.warning(
                "batch Hessian is ill-conditioned (condition number %.3g)",
                eigs[-1] / eigs[0] if eigs[0] > 0 else np.inf,
            )
        factor = scipy.linalg.cho_factor(self.hessian)
        return -scipy.linalg.cho_solve(factor, self.linear)

    def states(self, U: np.ndarray) -> np.ndarray:
        return (self.offset + self.Hu @ np.asarray(U, dtype=float).ravel()).reshape(self.T + 1, self.n)


def batch_oracle(
    plant: Plant,
    cost: CostSpec,
    w: Signal,
    T: Optional[int] = None,
    terminal: Optional[np.ndarray] = None,
) -> OfflineSolution:
    """
    Offline optimum by solving the normal equations of the stacked problem.

    ``terminal`` replaces Q_T, e.g. by the DARE solution to obtain the
    infinite-horizon optimum of a disturbance that vanishes after T steps.

    Raises:
        OracleSizeError: If m * T exceeds the configured cap.
    """
    T = w.horizon if T is None else T
    if T != w.horizon:
        raise DimensionError(f"horizon {T} differs from disturbance horizon {w.horizon}")
    problem = BatchProblem(plant, cost, w, terminal=terminal)
    U = problem.minimize()
    inputs = Signal.from_flat(U, plant.m)
    traj = Trajectory(states=problem.states(U), inputs=inputs, disturbance=w)
    horizon = Horizon.finite(T) if terminal is None else Horizon.infinite()
    return OfflineSolution(
        inputs=inputs,
        cost=problem.cost_of(U),
        trajectory=traj,
        feedforward=inputs.scaled(-1.0),
        horizon=horizon,
        method="batch",
    )


def policy_cost_to_go(
    plant: Plant,
    cost: CostSpec,
    gains: np.ndarray,
    w: Signal,
    terminal: np.ndarray,
    offsets: Optional[Signal] = None,
    controller: str = "feedback",
    horizon: Optional[Horizon] = None,
) -> CostToGoCoeffs:
    """
    Cost-to-go coefficients of the affine law u_i = -K_i x_i - f_i under w.

    With d_i = w_i - B f_i and F_i = A - B K_i:

        P_i = F_i' P_{i+1} F_i + Q + K_i' R K_i
        v_i = F_i' (2 P_{i+1} d_i + v_{i+1}) + 2 K_i' R f_i
        q_i = q_{i+1} + d_i' P_{i+1} d_i + d_i' v_{i+1} + f_i' R f_i

    starting from P_T = ``terminal``, v_T = 0, q_T = 0.
    """
    _check_disturbance(plant, w)
    T, n, m = w.horizon, plant.n, plant.m
    gains = np.asarray(gains, dtype=float)
    stationary = gains.ndim == 2
    f = np.zeros((T, m)) if offsets is None else offsets.fitted(T).steps
    A, B, Q, R = plant.A, plant.B, cost.Q, cost.R

    P = np.empty((T + 1, n, n))
    v = np.zeros((T + 1, n))
    q = np.zeros(T + 1)
    P[T] = terminal
    for i in range(T - 1, -1, -1):
        K = _per_step(gains, stationary, i)
        F = A - B @ K
        d = w[i] - B @ f[i]
        P[i] = symmetrize(F.T @ P[i + 1] @ F + Q + K.T @ R @ K)
        v[i] = F.T @ (2.0 * P[i + 1] @ d + v[i + 1]) + 2.0 * K.T @ R @ f[i]
        q[i] = q[i + 1] + d @ P[i + 1] @ d + d @ v[i + 1] + f[i] @ R @ f[i]
    return CostToGoCoeffs(
        controller=controller,
        P=P,
        v=v,
        q=q,
        horizon=horizon or Horizon.finite(T),
    )


def offline_cost_to_go(
    plant: Plant, cost: CostSpec, lqr: LqrSolution, w: Signal
) -> CostToGoCoeffs:
    """
    Coefficients of the optimal offline controller:

        v_i = F_i' (2 P_{i+1} w_i + v_{i+1})
        q_i = q_{i+1} + w_i' v_{i+1} + w_i' P_{i+1} w_i - G_i' H_i G_i
    """
    _check_disturbance(plant, w)
    T, n = w.horizon, plant.n
    stationary = lqr.stationary
    if not stationary and lqr.horizon.steps != T:
        raise DimensionError(f"LQR horizon {lqr.horizon.steps} differs from signal horizon {T}")
    B, R = plant.B, cost.R

    P = np.empty((T + 1, n, n))
    v = np.zeros((T + 1, n))
    q = np.zeros(T + 1)
    G = np.zeros((T, n))
    H = np.zeros((T, n, n))
    P[T] = _per_step(lqr.P, stationary, T)
    for i in range(T - 1, -1, -1):
        P_next = P[i + 1]
        P[i] = _per_step(lqr.P, stationary, i)
        F = _per_step(lqr.F, stationary, i)
        G[i] = P_next @ w[i] + 0.5 * v[i + 1]
        H[i] = symmetrize(B @ np.linalg.solve(R + B.T @ P_next @ B, B.T))
        v[i] = F.T @ (2.0 * P_next @ w[i] + v[i + 1])
        q[i] = q[i + 1] + w[i] @ v[i + 1] + w[i] @ P_next @ w[i] - G[i] @ H[i] @ G[i]
    return CostToGoCoeffs(
        controller="offline",
        P=P,
        v=v,
        q=q,
        G=G,
        H=H,
        horizon=lqr.horizon,
    )


def cost_to_go_coeffs(
    controller: ControllerKind,
    plant: Plant,
    cost: CostSpec,
    w: Signal,
    horizon: Horizon,
    synthesis: Optional[HinfSynthesis] = None,
    gain: Optional[np.ndarray] = None,
    lqr: Optional[LqrSolution] = None,
) -> CostToGoCoeffs:
    """
    Extended-quadratic cost-to-go coefficients for a controller under w.

    Args:
        controller: "hinf" (needs ``synthesis``), "offline" or "feedback" (needs
            a stationary ``gain``).
        horizon: Finite horizons must equal ``w.horizon``; for the infinite
            horizon the terminal weight is the cost-to-go matrix of the
            stationary closed loop that runs after the signal ends.

    Raises:
        DivergenceError: If an infinite-horizon closed loop is unstable.
    """
    if not horizon.is_infinite and horizon.steps != w.horizon:
        raise DimensionError(f"horizon {horizon.steps} differs from disturbance horizon {w.horizon}")

    if controller == "offline":
        if lqr is None:
            lqr = solve_dare(plant, cost) if horizon.is_infinite else solve_finite_lqr(plant, cost, w.horizon)
        return offline_cost_to_go(plant, cost, lqr, w)

    if controller == "hinf":
        if synthesis is None:
            raise ValueError("H-infinity coefficients need a synthesis")
        if synthesis.horizon != horizon:
            raise DimensionError(
                f"synthesis horizon {synthesis.kind} differs from requested {horizon.label}"
            )
        terminal = synthesis.P_inf if horizon.is_infinite else cost.QT
        return policy_cost_to_go(
            plant, cost, synthesis.K_inf, w, terminal, controller="hinf", horizon=horizon
        )

    if controller == "feedback":
        if gain is None:
            raise ValueError("feedback coefficients need a gain")
        K = np.atleast_2d(np.asarray(gain, dtype=float))
        if horizon.is_infinite:
            F = plant.A - plant.B @ K
            rho = spectral_radius(F)
            if rho >= 1.0:
                raise DivergenceError(
                    f"feedback gain does not stabilize the plant (rho={rho:.6g})",
                    spectral_radius=rho,
                )
            terminal = lyapunov_fixed_point(F, cost.Q + K.T @ cost.R @ K)
        else:
            terminal = cost.QT
        return policy_cost_to_go(plant, cost, K, w, terminal, horizon=horizon)

    raise ValueError(f"unknown controller '{controller}'")


def checkpoint_indices(T: int, full: bool = False) -> list[int]:
    if full:
        return list(range(T))
    return sorted({0, T // 4, T // 2, (3 * T) // 4, T - 1})


def reconstruction_error(
    coeffs: CostToGoCoeffs,
    traj: Trajectory,
    cost: CostSpec,
    full: bool = False,
) -> float:
    """
    Largest relative mismatch between the quadratic form and the simulated
    cost-to-go over the checkpoint indices (all indices when ``full``).

    The trajectory must come from the controller the coefficients belong to; for
    infinite-horizon coefficients the simulated tail uses the same terminal weight.
    """
    weighted = cost.with_terminal(coeffs.P[-1])
    stage = (
        np.einsum("ti,ij,tj->t", traj.states[:-1], cost.Q, traj.states[:-1])
        + np.einsum("ti,ij,tj->t", traj.inputs.steps, cost.R, traj.inputs.steps)
    )
    tail = float(traj.final_state @ weighted.QT @ traj.final_state)
    worst = 0.0
    for i in checkpoint_indices(traj.horizon, full=full):
        simulated = tail + float(np.sum(stage[i:]))
        predicted = coeffs.value(i, traj.states[i])
        worst = max(worst, abs(predicted - simulated) / max(1.0, abs(simulated)))
    return worst
