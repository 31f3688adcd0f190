import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings as hsettings, strategies as st

from conftest import GOLDEN, random_problem, random_stable, scalar_problem
from regretlab.core.errors import DivergenceError, InfeasibleGammaError, NonConvergenceError
from regretlab.core.linalg import min_eig
from regretlab.core.schema import CostSpec, Horizon, Plant
from regretlab.core.riccati import (
    game_coupling,
    hinf_riccati,
    hinf_riccati_finite,
    hinf_riccati_infinite,
    is_feasible_gamma,
    lyapunov_fixed_point,
    solve_dare,
    solve_finite_lqr,
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def scalar_M(gamma):
    beta = 1.0 - gamma ** -2
    return (1.0 + np.sqrt(1.0 + 4.0 / beta)) / 2.0


class TestLyapunov:
    def test_zero_closed_loop(self):
        P = lyapunov_fixed_point(np.zeros((2, 2)), np.eye(2), P0=5.0 * np.eye(2))
        np.testing.assert_allclose(P, np.eye(2))

    def test_scalar_geometric_series(self):
        assert lyapunov_fixed_point([[0.5]], [[1.0]])[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-10)

    def test_slow_decay(self):
        P = lyapunov_fixed_point([[0.9999]], [[1.0]])
        assert P[0, 0] == pytest.approx(1.0 / (1.0 - 0.9999 ** 2), rel=1e-8)

    def test_unit_radius_diverges(self):
        with pytest.raises(DivergenceError) as excinfo:
            lyapunov_fixed_point([[1.0]], [[1.0]])
        assert excinfo.value.spectral_radius == pytest.approx(1.0)

    def test_iteration_cap(self):
        with pytest.raises(NonConvergenceError):
            lyapunov_fixed_point([[0.99]], [[1.0]], max_iter=4)

    @hsettings(max_examples=100, deadline=None)
    @given(seeds, st.integers(min_value=1, max_value=4))
    def test_independent_of_starting_point(self, seed, n):
        rng = np.random.default_rng(seed)
        F = random_stable(rng, n)
        Q = np.eye(n)
        tol = 1e-10
        P_zero = lyapunov_fixed_point(F, Q, P0=np.zeros((n, n)), tol=tol)
        P_ten = lyapunov_fixed_point(F, Q, P0=10.0 * np.eye(n), tol=tol)
        scale = max(1.0, np.linalg.norm(P_zero, 2))
        assert np.linalg.norm(P_zero - P_ten, 2) <= 2 * tol * scale

    def test_matches_scipy(self, rng):
        F = random_stable(rng, 3)
        P = lyapunov_fixed_point(F, np.eye(3))
        np.testing.assert_allclose(P, scipy.linalg.solve_discrete_lyapunov(F.T, np.eye(3)), rtol=1e-8)


class TestDare:
    def test_scalar_golden_ratio(self, scalar):
        plant, cost = scalar
        lqr = solve_dare(plant, cost)
        assert lqr.P[0, 0] == pytest.approx(GOLDEN, abs=1e-9)
        assert lqr.K[0, 0] == pytest.approx(1.0 / GOLDEN, abs=1e-9)
        assert lqr.F[0, 0] == pytest.approx(2.0 - GOLDEN, abs=1e-9)
        assert lqr.stationary

    def test_no_dynamics(self):
        plant = Plant(A=np.zeros((2, 2)), B=np.eye(2), x0=[1.0, 1.0])
        cost = CostSpec(Q=np.diag([1.0, 3.0]), QT=np.eye(2), R=np.eye(2))
        lqr = solve_dare(plant, cost)
        np.testing.assert_allclose(lqr.P, cost.Q, atol=1e-12)
        np.testing.assert_allclose(lqr.K, 0.0, atol=1e-12)

    def test_zero_input_reduces_to_lyapunov(self, rng):
        A = random_stable(rng, 3, radius=0.8)
        plant = Plant(A=A, B=np.zeros((3, 1)), x0=np.ones(3))
        cost = CostSpec(Q=np.eye(3), QT=np.eye(3), R=[[1.0]])
        lqr = solve_dare(plant, cost)
        np.testing.assert_allclose(lqr.P, lyapunov_fixed_point(A, np.eye(3)), rtol=1e-8)
        np.testing.assert_allclose(lqr.K, 0.0, atol=1e-12)

    def test_unstabilizable_plant(self):
        plant = Plant(A=[[2.0]], B=[[0.0]], x0=[1.0])
        cost = CostSpec(Q=[[1.0]], QT=[[1.0]], R=[[1.0]])
        with pytest.raises(NonConvergenceError):
            solve_dare(plant, cost)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_scipy(self, seed):
        plant, cost = random_problem(np.random.default_rng(seed), 3, 2)
        lqr = solve_dare(plant, cost)
        expected = scipy.linalg.solve_discrete_are(plant.A, plant.B, cost.Q, cost.R)
        np.testing.assert_allclose(lqr.P, expected, rtol=1e-7)
        assert lqr.spectral_radius_F < 1.0

    def test_small_weights_meet_relative_residual(self):
        plant = Plant(A=[[0.99]], B=[[1.0]], x0=[1.0])
        cost = CostSpec(Q=[[1e-4]], QT=[[0.0]], R=[[1.0]])
        lqr = solve_dare(plant, cost)
        P, K, F = lqr.P, lqr.K, lqr.F
        residual = P - (F.T @ P @ F + cost.Q + K.T @ cost.R @ K)
        assert np.linalg.norm(residual, 2) <= 1e-9 * np.linalg.norm(P, 2)
        expected = scipy.linalg.solve_discrete_are(plant.A, plant.B, cost.Q, cost.R)
        np.testing.assert_allclose(P, expected, rtol=1e-7)

    @pytest.mark.parametrize("seed", range(5))
    def test_value_iteration_is_monotone(self, seed):
        plant, cost = random_problem(np.random.default_rng(seed), 2, 1)
        lqr = solve_finite_lqr(plant, cost, 60)
        # Backwards in time the iterates P_{T-1}, P_{T-2}, ... are PSD-ordered
        steps = [lqr.P[t] - lqr.P[t + 1] for t in range(1, 59)]
        signs = [min_eig(d) >= -1e-10 for d in steps]
        reverse = [min_eig(-d) >= -1e-10 for d in steps]
        assert all(signs) or all(reverse)


class TestFiniteLqr:
    def test_single_step(self, scalar):
        plant, cost = scalar
        lqr = solve_finite_lqr(plant, cost, 1)
        assert lqr.K[0, 0, 0] == pytest.approx(0.5)
        assert lqr.P[0, 0, 0] == pytest.approx(1.5)
        assert lqr.P[1, 0, 0] == 1.0

    def test_zero_terminal_weight(self):
        plant, cost = scalar_problem(QT=0.0)
        lqr = solve_finite_lqr(plant, cost, 1)
        assert lqr.K[0, 0, 0] == 0.0
        assert lqr.P[0, 0, 0] == pytest.approx(1.0)

    def test_long_horizon_approaches_dare(self, scalar):
        plant, cost = scalar
        lqr = solve_finite_lqr(plant, cost, 200)
        assert lqr.P[0, 0, 0] == pytest.approx(GOLDEN, abs=1e-9)
        assert lqr.horizon == Horizon.finite(200)

    def test_rejects_empty_horizon(self, scalar):
        with pytest.raises(ValueError):
            solve_finite_lqr(*scalar, 0)


class TestGameRiccati:
    def test_single_step_by_hand(self, scalar):
        plant, cost = scalar
        solution = hinf_riccati_finite(plant, cost, 2.0, 1)
        assert solution.Lambda[0, 0, 0] == pytest.approx(1.75)
        assert solution.M[0, 0, 0] == pytest.approx(1.0 + 1.0 / 1.75)
        assert solution.Xi_min_eig == pytest.approx(3.0)
        assert solution.feasible

    def test_stationary_closed_form(self, scalar):
        plant, cost = scalar
        solution = hinf_riccati_infinite(plant, cost, 2.0)
        assert solution.M[0, 0] == pytest.approx(scalar_M(2.0), rel=1e-9)
        assert solution.M[0, 0] == pytest.approx(1.75831, abs=1e-5)
        assert solution.feasible and solution.converged
        assert solution.closed_loop_radius < 1.0

    def test_large_gamma_recovers_lqr(self, scalar):
        plant, cost = scalar
        solution = hinf_riccati_infinite(plant, cost, 1e6)
        assert solution.M[0, 0] == pytest.approx(GOLDEN, rel=1e-6)
        finite = hinf_riccati(plant, cost, 1e6, Horizon.finite(200))
        assert finite.M[0, 0, 0] == pytest.approx(GOLDEN, rel=1e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_large_gamma_matches_dare_on_random_plants(self, seed):
        rng = np.random.default_rng(seed)
        plant, cost = random_problem(rng, int(rng.integers(1, 4)), 1)
        solution = hinf_riccati_infinite(plant, cost, 1e6)
        P = solve_dare(plant, cost).P
        assert np.linalg.norm(solution.M - P, 2) <= 1e-6 * np.linalg.norm(P, 2)

    def test_small_weights_stop_on_relative_change(self):
        plant = Plant(A=[[0.99]], B=[[1.0]], x0=[1.0])
        cost = CostSpec(Q=[[1e-4]], QT=[[0.0]], R=[[1.0]])
        solution = hinf_riccati_infinite(plant, cost, 1e3)
        M, Lam = solution.M, solution.Lambda
        residual = M - (cost.Q + plant.A.T @ M @ np.linalg.solve(Lam, plant.A))
        assert solution.feasible and solution.converged
        assert np.linalg.norm(residual, 2) <= 1e-9 * np.linalg.norm(M, 2)

    def test_small_gamma_is_infeasible(self, scalar):
        plant, cost = scalar
        assert not hinf_riccati_finite(plant, cost, 1.0, 100).feasible
        assert not is_feasible_gamma(plant, cost, 1.0, Horizon.finite(100))

    def test_boundary_is_infeasible(self, scalar):
        plant, cost = scalar
        assert not is_feasible_gamma(plant, cost, np.sqrt(2.0), Horizon.infinite())
        assert is_feasible_gamma(plant, cost, np.sqrt(2.0) + 1e-3, Horizon.infinite())

    def test_infeasible_iterate_stops_the_iteration(self, scalar):
        plant, cost = scalar
        solution = hinf_riccati_infinite(plant, cost, 1.2)
        assert not solution.feasible
        assert not solution.converged
        assert solution.Xi_min_eig <= 0.0

    def test_attenuation_monotonicity(self, scalar):
        plant, cost = scalar
        M1 = hinf_riccati_infinite(plant, cost, 1.6).M
        M2 = hinf_riccati_infinite(plant, cost, 3.0).M
        assert min_eig(M1 - M2) >= -1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_attenuation_monotonicity_random(self, seed):
        plant, cost = random_problem(np.random.default_rng(seed), 2, 2)
        horizon = Horizon.finite(30)
        gammas = [g for g in (5.0, 10.0, 50.0, 200.0) if is_feasible_gamma(plant, cost, g, horizon)]
        for low, high in zip(gammas, gammas[1:]):
            M_low = hinf_riccati(plant, cost, low, horizon).M[0]
            M_high = hinf_riccati(plant, cost, high, horizon).M[0]
            assert min_eig(M_low - M_high) >= -1e-8 * max(1.0, np.linalg.norm(M_low, 2))

    def test_coupling(self, scalar):
        plant, cost = scalar
        assert game_coupling(plant, cost, 2.0)[0, 0] == pytest.approx(0.75)
        with pytest.raises(InfeasibleGammaError):
            game_coupling(plant, cost, 0.0)

    def test_singular_lambda_is_infeasible(self, scalar):
        plant, cost = scalar
        # S = 1 - gamma^-2 = -1 makes Lambda = 1 - M_T = 0
        assert not is_feasible_gamma(plant, cost, 1.0 / np.sqrt(2.0), Horizon.finite(1))
