"""
Closed-loop simulation and cost evaluation for LTI plants.

Every controller in the package is expressed through the ``Policy`` interface,
a map (t, x_t) -> u_t. Open-loop input sequences, time-varying state feedback and
state feedback with a precomputed feedforward term are adapters over it, so a
single ``simulate`` serves the robust, LQR, clairvoyant and certainty-equivalent
controllers alike.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable, Optional
import logging

import numpy as np

from regretlab.core.errors import DimensionError
from regretlab.core.schema import CostSpec, Plant, Signal, Trajectory

logger = logging.getLogger(__name__)


class Policy(ABC):
    """A causal control law u_t = policy(t, x_t)."""

    name = "policy"

    @abstractmethod
    def action(self, t: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def terminal_gain(self) -> Optional[np.ndarray]:
        """
        Stationary gain K applied (as u = -Kx) once the known signals are exhausted.

        Returns None when the policy has no stationary tail, in which case its
        infinite-horizon cost is undefined.
        """
        return None


class ZeroPolicy(Policy):
    name = "zero"

    def __init__(self, m: int):
        self.m = m

    def action(self, t: int, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.m)


class LinearFeedbackPolicy(Policy):
    """
    State feedback u_t = -K_t x_t.

    ``gains`` is either a single m x n matrix or a T x m x n stack; beyond the
    stack the last gain is held.
    """

    name = "feedback"

    def __init__(self, gains: np.ndarray, name: Optional[str] = None):
        gains = np.asarray(gains, dtype=float)
        if gains.ndim == 2:
            gains = gains[np.newaxis]
        if gains.ndim != 3:
            raise DimensionError(f"gains must be m x n or T x m x n, got {gains.shape}")
        self.gains = gains
        self.stationary = gains.shape[0] == 1
        if name:
            self.name = name

    def gain(self, t: int) -> np.ndarray:
        return self.gains[min(t, self.gains.shape[0] - 1)]

    def action(self, t: int, x: np.ndarray) -> np.ndarray:
        return -self.gain(t) @ x

    def terminal_gain(self) -> Optional[np.ndarray]:
        return self.gains[0] if self.stationary else None


class FeedforwardPolicy(LinearFeedbackPolicy):
    """
    State feedback plus an open-loop offset: u_t = -K_t x_t - f_t.

    The offsets vanish after their horizon, leaving the feedback alone.
    """

    name = "feedforward"

    def __init__(self, gains: np.ndarray, offsets: Signal, name: Optional[str] = None):
        super().__init__(gains, name=name)
        if offsets.dim != self.gains.shape[1]:
            raise DimensionError(
                f"offsets have dimension {offsets.dim}, gains produce {self.gains.shape[1]}"
            )
        self.offsets = offsets

    def action(self, t: int, x: np.ndarray) -> np.ndarray:
        u = -self.gain(t) @ x
        if t < self.offsets.horizon:
            u = u - self.offsets[t]
        return u


class OpenLoopPolicy(Policy):
    """Replays a fixed input sequence, zero afterwards."""

    name = "open_loop"

    def __init__(self, inputs: Signal):
        self.inputs = inputs

    def action(self, t: int, x: np.ndarray) -> np.ndarray:
        if t < self.inputs.horizon:
            return self.inputs[t]
        return np.zeros(self.inputs.dim)


class CallablePolicy(Policy):
    name = "callable"

    def __init__(self, fn: Callable[[int, np.ndarray], np.ndarray], name: Optional[str] = None):
        self.fn = fn
        if name:
            self.name = name

    def action(self, t: int, x: np.ndarray) -> np.ndarray:
        return self.fn(t, x)


def _control(policy: Policy, t: int, x: np.ndarray, m: int) -> np.ndarray:
    u = np.atleast_1d(np.asarray(policy.action(t, x), dtype=float)).ravel()
    if u.shape != (m,):
        raise DimensionError(
            f"policy '{policy.name}' returned an input of size {u.size} at t={t}, expected {m}"
        )
    return u


def simulate(plant: Plant, policy: Policy, w: Signal, T: Optional[int] = None) -> Trajectory:
    """
    Simulate x_{t+1} = A x_t + B u_t + w_t from plant.x0 for T steps.

    Args:
        plant: The plant to simulate.
        policy: Control law producing u_t from (t, x_t).
        w: Disturbance signal of dimension n and horizon T.
        T: Horizon; defaults to the horizon of ``w``.

    Returns:
        Trajectory: states x_0..x_T, the applied inputs and the disturbance.

    Raises:
        DimensionError: If the disturbance or the policy output has the wrong size.
    """
    T = w.horizon if T is None else T
    if w.dim != plant.n or w.horizon != T:
        raise DimensionError(
            f"disturbance is {w.horizon}x{w.dim}, expected {T}x{plant.n}"
        )
    states = np.empty((T + 1, plant.n))
    inputs = np.empty((T, plant.m))
    states[0] = plant.x0
    for t in range(T):
        u = _control(policy, t, states[t], plant.m)
        inputs[t] = u
        states[t + 1] = plant.A @ states[t] + plant.B @ u + w.steps[t]
    return Trajectory(states=states, inputs=Signal(steps=inputs), disturbance=w)


def simulate_game(plant: Plant, policy: Policy, adversary: Policy, T: int) -> Trajectory:
    """Simulate with a disturbance that is itself state feedback w_t = adversary(t, x_t)."""
    states = np.empty((T + 1, plant.n))
    inputs = np.empty((T, plant.m))
    disturbance = np.empty((T, plant.n))
    states[0] = plant.x0
    for t in range(T):
        u = _control(policy, t, states[t], plant.m)
        w = _control(adversary, t, states[t], plant.n)
        inputs[t] = u
        disturbance[t] = w
        states[t + 1] = plant.A @ states[t] + plant.B @ u + w
    return Trajectory(
        states=states, inputs=Signal(steps=inputs), disturbance=Signal(steps=disturbance)
    )


def _check_cost(traj: Trajectory, cost: CostSpec) -> None:
    if traj.states.shape[1] != cost.n or traj.inputs.dim != cost.m:
        raise DimensionError(
            f"trajectory is sized n={traj.states.shape[1]}, m={traj.inputs.dim}; "
            f"cost expects n={cost.n}, m={cost.m}"
        )


def stage_costs(traj: Trajectory, cost: CostSpec) -> np.ndarray:
    """x_t' Q x_t + u_t' R u_t for t = 0..T-1."""
    _check_cost(traj, cost)
    x = traj.states[:-1]
    u = traj.inputs.steps
    return np.einsum("ti,ij,tj->t", x, cost.Q, x) + np.einsum("ti,ij,tj->t", u, cost.R, u)


def terminal_cost(traj: Trajectory, cost: CostSpec) -> float:
    x_T = traj.final_state
    return float(x_T @ cost.QT @ x_T)


def total_cost(traj: Trajectory, cost: CostSpec) -> float:
    """J = x_T' Q_T x_T + sum_t (x_t' Q x_t + u_t' R u_t)."""
    return float(terminal_cost(traj, cost) + np.sum(stage_costs(traj, cost)))


def cost_to_go(traj: Trajectory, cost: CostSpec, i: int) -> float:
    """Tail of the accumulated cost starting at step i (0 <= i < T)."""
    if not 0 <= i < traj.horizon:
        raise IndexError(f"index {i} outside [0, {traj.horizon})")
    return float(terminal_cost(traj, cost) + np.sum(stage_costs(traj, cost)[i:]))


def infinite_horizon_cost(traj: Trajectory, cost: CostSpec, tail: np.ndarray) -> float:
    """
    Cost of a trajectory continued forever with zero disturbance.

    ``tail`` is the cost-to-go matrix of the stationary closed loop that runs after
    the last step, so the infinite sum equals the finite one with Q_T := tail.
    """
    return total_cost(traj, cost.with_terminal(tail))


def soft_cost(traj: Trajectory, cost: CostSpec, gamma: float) -> float:
    """Game cost J - gamma^2 ||w||^2."""
    return total_cost(traj, cost) - gamma ** 2 * traj.disturbance.energy() ** 2


def gap(w: Signal, w_star: Signal) -> Signal:
    """Elementwise difference w - w_star."""
    if w.steps.shape != w_star.steps.shape:
        raise DimensionError(
            f"cannot compare a {w.horizon}x{w.dim} signal with a {w_star.horizon}x{w_star.dim} one"
        )
    return w - w_star
