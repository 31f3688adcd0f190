import numpy as np
import pytest

from conftest import random_problem, scalar_problem
from regretlab.core.ce import Prediction, ce_policy, lqr_policy, make_rng, random_unit_direction
from regretlab.core.errors import DimensionError
from regretlab.core.offline import (
    offline_cost_to_go,
    offline_finite,
    offline_infinite,
    policy_cost_to_go,
)
from regretlab.core.regret import ce_regret_exact, dynamic_regret
from regretlab.core.riccati import solve_dare, solve_finite_lqr
from regretlab.core.schema import Horizon, Signal
from regretlab.core.simulation import simulate, total_cost


def test_zero_prediction_is_lqr(rng):
    plant, cost = random_problem(rng, 2, 1)
    horizon = Horizon.finite(10)
    w = Signal(steps=rng.standard_normal((10, 2)))
    ce = simulate(plant, ce_policy(plant, cost, Prediction.exact(Signal.zeros(10, 2)), horizon), w)
    lqr = simulate(plant, lqr_policy(plant, cost, horizon), w)
    np.testing.assert_allclose(ce.inputs.steps, lqr.inputs.steps, atol=1e-14)


@pytest.mark.parametrize("infinite", [False, True])
def test_perfect_prediction_is_offline(rng, infinite):
    plant, cost = random_problem(rng, 2, 2, radius=0.9)
    w = Signal(steps=rng.standard_normal((12, 2)))
    horizon = Horizon.infinite() if infinite else Horizon.finite(12)
    offline = offline_infinite(plant, cost, w) if infinite else offline_finite(plant, cost, w)
    report = dynamic_regret(plant, cost, ce_policy(plant, cost, Prediction.exact(w), horizon), w, horizon)
    assert abs(report.regret) <= 1e-8 * max(1.0, offline.cost)


def test_single_step_by_hand():
    plant, cost = scalar_problem()
    prediction = Prediction.custom(Signal(steps=[2.0]))
    policy = ce_policy(plant, cost, prediction, Horizon.finite(1))
    w = Signal(steps=[1.0])
    traj = simulate(plant, policy, w)
    assert traj.inputs[0][0] == pytest.approx(-3.0)
    assert total_cost(traj, cost) == pytest.approx(29.0)
    report = dynamic_regret(plant, cost, policy, w, Horizon.finite(1))
    assert report.regret == pytest.approx(0.5)


def test_noisy_prediction_has_the_requested_distance():
    w = Signal(steps=np.ones((50, 2)))
    prediction = Prediction.noisy(w, 0.7, seed=(1, 2, 3))
    assert (prediction.w_bar - w).energy() == pytest.approx(0.7, rel=1e-12)
    again = Prediction.noisy(w, 0.7, seed=(1, 2, 3))
    np.testing.assert_array_equal(prediction.w_bar.steps, again.w_bar.steps)
    assert prediction.source == "noisy"


def test_prediction_is_padded_to_the_control_horizon(scalar):
    plant, cost = scalar
    policy = ce_policy(plant, cost, Prediction.custom(Signal(steps=[1.0])), Horizon.finite(5))
    assert policy.offsets.horizon == 5
    np.testing.assert_allclose(policy.offsets.steps[1:], 0.0)


def test_control_horizon_must_match(scalar):
    plant, cost = scalar
    with pytest.raises(DimensionError):
        ce_policy(plant, cost, Prediction.exact(Signal.zeros(5, 1)), Horizon.finite(5), T=4)
    with pytest.raises(DimensionError):
        ce_policy(plant, cost, Prediction.exact(Signal.zeros(5, 2)), Horizon.finite(5))


def test_regret_matches_exact_formula(rng):
    plant, cost = random_problem(rng, 2, 1)
    T = 15
    w = Signal(steps=rng.standard_normal((T, 2)))
    w_bar = Signal(steps=w.steps + 0.3 * rng.standard_normal((T, 2)))
    horizon = Horizon.finite(T)
    lqr = solve_finite_lqr(plant, cost, T)
    report = dynamic_regret(plant, cost, ce_policy(plant, cost, Prediction.custom(w_bar), horizon), w, horizon)
    assert report.regret == pytest.approx(ce_regret_exact(plant, cost, lqr, w_bar - w), rel=1e-8)


def test_regret_is_quadratic_in_the_prediction_error(scalar):
    plant, cost = scalar
    horizon = Horizon.infinite()
    w = Signal(steps=np.linspace(-0.5, 0.5, 30))
    direction = random_unit_direction(30, 1, make_rng(7))
    lqr = solve_dare(plant, cost)
    offline = offline_infinite(plant, cost, w, lqr=lqr)
    ratios = []
    for scale in (0.1, 0.5, 1.0, 2.0):
        w_bar = Signal(steps=w.steps + scale * direction)
        policy = ce_policy(plant, cost, Prediction.custom(w_bar), horizon, lqr=lqr)
        ratios.append(dynamic_regret(plant, cost, policy, w, horizon, offline=offline).regret / scale ** 2)
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-6)


@pytest.mark.parametrize("infinite", [False, True])
def test_linear_cost_to_go_term_matches_offline(rng, infinite):
    plant, cost = random_problem(rng, 2, 2, radius=0.9)
    T = 10
    w = Signal(steps=rng.standard_normal((T, 2)))
    w_bar = Signal(steps=w.steps + rng.standard_normal((T, 2)))
    if infinite:
        horizon, lqr = Horizon.infinite(), solve_dare(plant, cost)
        terminal = lqr.P
    else:
        horizon, lqr = Horizon.finite(T), solve_finite_lqr(plant, cost, T)
        terminal = cost.QT
    policy = ce_policy(plant, cost, Prediction.custom(w_bar), horizon, T=T, lqr=lqr)
    ce = policy_cost_to_go(plant, cost, lqr.K, w, terminal, offsets=policy.offsets)
    offline = offline_cost_to_go(plant, cost, lqr, w)
    scale = np.abs(offline.v).max()
    np.testing.assert_allclose(ce.v, offline.v, rtol=0.0, atol=1e-8 * scale)
    np.testing.assert_allclose(ce.P, offline.P, rtol=1e-8)
    # the prediction error only enters the constant term
    assert ce.q[0] > offline.q[0]


def test_unit_direction(rng):
    d = random_unit_direction(10, 3, rng)
    assert d.shape == (10, 3)
    assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)
