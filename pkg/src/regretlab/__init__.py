"""
regretlab - Regret analysis of H-infinity and certainty-equivalent control

This package synthesizes H-infinity, LQR, clairvoyant offline and
certainty-equivalent controllers for discrete-time LTI systems, builds the
worst-case disturbance of the H-infinity game, evaluates dynamic regret and
computes analytic regret upper bounds.

Quick Start:
    # Install
    pip install regretlab

    # Synthesize the H-infinity controller of the built-in scalar example
    regretlab synth

    # Reproduce the scalar regret experiment
    regretlab reproduce-fig1 --out results/

Usage:
    from regretlab import Horizon, load_plant, find_gamma_bar, build_controller

    plant, cost = load_plant("plant.json")
    horizon = Horizon.finite(100)
    worst = find_gamma_bar(plant, cost, horizon)
    synthesis = build_controller(plant, cost, worst.gamma_bar, horizon)
"""

__version__ = "1.0.0"
__author__ = "regretlab Team"

from .config import settings
from .core.ce import Prediction, ce_policy, lqr_policy
from .core.hinf import build_controller, find_gamma_bar, find_gamma_lower, worst_case_disturbance
from .core.offline import batch_oracle, offline_finite, offline_infinite
from .core.regret import ce_bound, dynamic_regret, hinf_bound_finite, hinf_bound_infinite
from .core.riccati import solve_dare, solve_finite_lqr
from .core.schema import CostSpec, Horizon, Plant, Signal, load_plant
from .core.simulation import simulate, total_cost

__all__ = [
    "settings",
    "Plant",
    "CostSpec",
    "Signal",
    "Horizon",
    "load_plant",
    "simulate",
    "total_cost",
    "solve_dare",
    "solve_finite_lqr",
    "find_gamma_lower",
    "find_gamma_bar",
    "build_controller",
    "worst_case_disturbance",
    "offline_finite",
    "offline_infinite",
    "batch_oracle",
    "Prediction",
    "ce_policy",
    "lqr_policy",
    "dynamic_regret",
    "hinf_bound_infinite",
    "hinf_bound_finite",
    "ce_bound",
    "__version__",
]
