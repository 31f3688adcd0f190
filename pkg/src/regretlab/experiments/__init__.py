"""Experiment harness: sweep configuration, sampling, execution and output files."""

from .figures import reproduce_fig1
from .schema import ExperimentConfig, SweepResult
from .sweep import run_sweep

__all__ = ["ExperimentConfig", "SweepResult", "run_sweep", "reproduce_fig1"]
