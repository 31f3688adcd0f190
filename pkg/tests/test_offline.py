import numpy as np
import pytest

from conftest import GOLDEN, random_problem, scalar_problem
from regretlab.core.ce import random_unit_direction
from regretlab.core.errors import OracleSizeError
from regretlab.core.hinf import build_controller
from regretlab.core.offline import (
    BatchProblem,
    batch_oracle,
    cost_to_go_coeffs,
    feedforward_gain,
    feedforward_terms,
    offline_cost_to_go,
    offline_finite,
    offline_infinite,
    reconstruction_error,
)
from regretlab.core.riccati import solve_dare, solve_finite_lqr
from regretlab.core.schema import CostSpec, Horizon, Plant, Signal
from regretlab.core.simulation import LinearFeedbackPolicy, OpenLoopPolicy, simulate, total_cost


class TestOfflineFinite:
    def test_single_step_by_hand(self, scalar):
        plant, cost = scalar
        solution = offline_finite(plant, cost, Signal(steps=[1.0]))
        assert solution.inputs[0][0] == pytest.approx(-2.5)
        assert solution.cost == pytest.approx(28.5)

    def test_zero_disturbance_is_lqr(self, scalar):
        plant, cost = scalar
        solution = offline_finite(plant, cost, Signal.zeros(10, 1))
        lqr = solve_finite_lqr(plant, cost, 10)
        traj = simulate(plant, LinearFeedbackPolicy(lqr.K), Signal.zeros(10, 1))
        np.testing.assert_allclose(solution.inputs.steps, traj.inputs.steps, rtol=1e-12)
        np.testing.assert_allclose(solution.feedforward.steps, 0.0)

    def test_no_state_cost_means_no_input(self, rng):
        plant = Plant(A=[[1.0]], B=[[1.0]], x0=[4.0])
        cost = CostSpec(Q=[[0.0]], QT=[[0.0]], R=[[1.0]])
        solution = offline_finite(plant, cost, Signal(steps=rng.standard_normal(5)))
        np.testing.assert_allclose(solution.inputs.steps, 0.0, atol=1e-14)

    def test_policy_reproduces_inputs(self, rng):
        plant, cost = random_problem(rng, 2, 1)
        w = Signal(steps=rng.standard_normal((8, 2)))
        solution = offline_finite(plant, cost, w)
        traj = simulate(plant, solution.policy(), w)
        np.testing.assert_allclose(traj.inputs.steps, solution.inputs.steps)

    def test_feedforward_gain_expansion(self, rng):
        plant, cost = random_problem(rng, 2, 1)
        T = 6
        w = Signal(steps=rng.standard_normal((T, 2)))
        lqr = solve_finite_lqr(plant, cost, T)
        f, _ = feedforward_terms(plant, cost, lqr, w)
        for t in range(T):
            expanded = sum(feedforward_gain(plant, cost, lqr, t, i) @ w[t + i] for i in range(T - t))
            np.testing.assert_allclose(f[t], expanded, rtol=1e-10, atol=1e-12)

    def test_small_perturbations_cost_more(self, rng):
        plant, cost = random_problem(rng, 2, 2)
        w = Signal(steps=rng.standard_normal((12, 2)))
        optimum = offline_finite(plant, cost, w).inputs.steps

        def J(U):
            return total_cost(simulate(plant, OpenLoopPolicy(Signal(steps=U)), w), cost)

        base = J(optimum)
        for _ in range(100):
            delta = random_unit_direction(12, 2, rng)
            for eps in (1e-3, -1e-3):
                assert J(optimum + eps * delta) >= base - 1e-12 * base


class TestOfflineInfinite:
    def test_single_impulse(self):
        plant, cost = scalar_problem(x0=0.0)
        w = Signal(steps=[1.0] + [0.0] * 9)
        solution = offline_infinite(plant, cost, w)
        assert solution.inputs[0][0] == pytest.approx(-1.0 / GOLDEN, rel=1e-9)

    def test_matches_batch_with_dare_terminal(self, rng):
        plant, cost = random_problem(rng, 2, 1, radius=0.9)
        w = Signal(steps=rng.standard_normal((15, 2)))
        lqr = solve_dare(plant, cost)
        riccati = offline_infinite(plant, cost, w, lqr=lqr)
        batch = batch_oracle(plant, cost, w, terminal=lqr.P)
        assert riccati.cost == pytest.approx(batch.cost, rel=1e-8)
        assert batch.horizon.is_infinite

    def test_stationary_feedforward_gain(self):
        plant, cost = scalar_problem()
        lqr = solve_dare(plant, cost)
        gain = feedforward_gain(plant, cost, lqr, 0, 2)
        expected = (2.0 - GOLDEN) ** 2 * GOLDEN / (1.0 + GOLDEN)
        assert gain[0, 0] == pytest.approx(expected, rel=1e-9)

    def test_agrees_with_finite_horizon_under_dare_terminal(self, rng):
        plant, cost = random_problem(rng, 2, 1, radius=0.9)
        w = Signal(steps=rng.standard_normal((15, 2)))
        lqr = solve_dare(plant, cost)
        stationary = offline_infinite(plant, cost, w, lqr=lqr)
        truncated = offline_finite(plant, cost.with_terminal(lqr.P), w)
        scale = np.abs(stationary.inputs.steps).max()
        np.testing.assert_allclose(
            truncated.inputs.steps, stationary.inputs.steps, rtol=0.0, atol=1e-7 * max(1.0, scale)
        )
        assert truncated.cost == pytest.approx(stationary.cost, rel=1e-7)


class TestBatchOracle:
    def test_single_step_by_hand(self, scalar):
        solution = batch_oracle(*scalar, Signal(steps=[1.0]))
        assert solution.inputs[0][0] == pytest.approx(-2.5)
        assert solution.cost == pytest.approx(28.5)
        assert solution.method == "batch"

    def test_trivial(self):
        plant, cost = scalar_problem(x0=0.0)
        solution = batch_oracle(plant, cost, Signal.zeros(4, 1))
        np.testing.assert_allclose(solution.inputs.steps, 0.0)
        assert solution.cost == pytest.approx(0.0)

    @pytest.mark.parametrize("seed", range(50))
    def test_agrees_with_riccati(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        T = int(rng.integers(1, 21))
        plant, cost = random_problem(rng, n, m)
        w = Signal(steps=rng.standard_normal((T, n)))
        riccati = offline_finite(plant, cost, w)
        batch = batch_oracle(plant, cost, w)
        assert riccati.cost == pytest.approx(batch.cost, rel=1e-8)
        np.testing.assert_allclose(riccati.inputs.steps, batch.inputs.steps, rtol=1e-6, atol=1e-7)

    def test_gradient_vanishes_at_the_optimum(self, rng):
        plant, cost = random_problem(rng, 2, 2)
        problem = BatchProblem(plant, cost, Signal(steps=rng.standard_normal((5, 2))))
        U = problem.minimize()
        assert np.linalg.norm(problem.gradient(U)) <= 1e-8 * max(1.0, np.linalg.norm(problem.linear))

    def test_size_cap(self, scalar):
        with pytest.raises(OracleSizeError):
            BatchProblem(*scalar, Signal.zeros(20, 1), max_size=10)


class TestCostToGo:
    def test_homogeneous_case(self, scalar):
        plant, cost = scalar
        lqr = solve_finite_lqr(plant, cost, 10)
        coeffs = offline_cost_to_go(plant, cost, lqr, Signal.zeros(10, 1))
        np.testing.assert_allclose(coeffs.v, 0.0)
        np.testing.assert_allclose(coeffs.q, 0.0)
        assert coeffs.value(0, plant.x0) == pytest.approx(16.0 * lqr.P[0, 0, 0])

    def test_terminal_step(self, rng, scalar):
        plant, cost = scalar
        w = Signal(steps=rng.standard_normal(10))
        coeffs = offline_cost_to_go(plant, cost, solve_finite_lqr(plant, cost, 10), w)
        assert coeffs.P[10, 0, 0] == cost.QT[0, 0]
        assert coeffs.v[10, 0] == 0.0
        assert coeffs.q[10] == 0.0
        assert coeffs.steps == 10

    def test_offline_value_is_the_offline_cost(self, rng):
        plant, cost = random_problem(rng, 3, 2)
        w = Signal(steps=rng.standard_normal((12, 3)))
        solution = offline_finite(plant, cost, w)
        coeffs = cost_to_go_coeffs("offline", plant, cost, w, Horizon.finite(12))
        assert coeffs.value(0, plant.x0) == pytest.approx(solution.cost, rel=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("infinite", [False, True])
    def test_reconstruction(self, seed, infinite):
        rng = np.random.default_rng(seed)
        plant, cost = random_problem(rng, 2, 1, radius=0.9)
        T = 20
        w = Signal(steps=rng.standard_normal((T, 2)))
        horizon = Horizon.infinite() if infinite else Horizon.finite(T)

        synthesis = build_controller(plant, cost, 1e3, horizon)
        hinf = cost_to_go_coeffs("hinf", plant, cost, w, horizon, synthesis=synthesis)
        traj = simulate(plant, synthesis.policy(), w)
        assert reconstruction_error(hinf, traj, cost) <= 1e-8

        lqr = solve_dare(plant, cost) if infinite else solve_finite_lqr(plant, cost, T)
        offline = offline_infinite(plant, cost, w, lqr=lqr) if infinite else offline_finite(plant, cost, w, lqr=lqr)
        coeffs = cost_to_go_coeffs("offline", plant, cost, w, horizon, lqr=lqr)
        assert reconstruction_error(coeffs, offline.trajectory, cost) <= 1e-8

        gain = solve_dare(plant, cost).K
        feedback = cost_to_go_coeffs("feedback", plant, cost, w, horizon, gain=gain)
        traj = simulate(plant, LinearFeedbackPolicy(gain), w)
        assert reconstruction_error(feedback, traj, cost, full=True) <= 1e-8

    def test_scalar_hinf_reconstruction(self, rng, scalar):
        plant, cost = scalar
        w = Signal(steps=rng.standard_normal(20))
        horizon = Horizon.finite(20)
        synthesis = build_controller(plant, cost, 2.0, horizon)
        coeffs = cost_to_go_coeffs("hinf", plant, cost, w, horizon, synthesis=synthesis)
        traj = simulate(plant, synthesis.policy(), w)
        assert coeffs.value(0, plant.x0) == pytest.approx(total_cost(traj, cost), rel=1e-8)

    def test_unknown_controller(self, scalar):
        with pytest.raises(ValueError):
            cost_to_go_coeffs("mpc", *scalar, Signal.zeros(3, 1), Horizon.finite(3))
