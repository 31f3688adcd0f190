"""
regretlab Command-Line Interface

This module provides a CLI for H-infinity synthesis, worst-case disturbance
construction, single-realization regret reports and regret sweeps.

Usage:
    # Synthesis (gamma_lower, gamma_bar, gains) as JSON
    regretlab synth --config plant.json --horizon 100

    # Worst-case disturbance as CSV
    regretlab worstcase --config plant.json --out results/

    # Regret of one controller on one realization
    regretlab regret --controller ce --gap 0.5 --prediction-gap 0.2 --seed 7

    # Sweeps
    regretlab sweep --config sweep.json --out results/
    regretlab reproduce-fig1 --out results/

    # System information
    regretlab info

Exit codes: 0 success, 2 infeasible or inadmissible problem, 3 numerical failure.
"""

import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Optional

import numpy as np
import typer
from pydantic import ValidationError

from . import __version__
from .config import settings
from .core.errors import RegretLabError

logger = logging.getLogger(__name__)

# Create Typer app
app = typer.Typer(
    name="regretlab",
    help="regretlab - Regret analysis of H-infinity and certainty-equivalent control",
    add_completion=False
)

EXIT_VALIDATION = 3
EXIT_OTHER = 1


# ============================================================================
# Helper Functions
# ============================================================================

def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def handle_errors(command):
    """Map library failures onto exit codes and a one-line message on stderr."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except RegretLabError as e:
            typer.echo(f"Error: {e}", err=True)
            diagnostic = getattr(e, "diagnostic", None)
            if diagnostic:
                typer.echo(json.dumps(diagnostic, sort_keys=True), err=True)
            sys.exit(e.exit_code)
        except ValidationError as e:
            typer.echo(f"Invalid input: {e}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (OSError, ValueError) as e:
            typer.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_OTHER)

    return wrapper


def resolve_horizon(horizon: int, infinite: bool):
    from .core.schema import Horizon

    return Horizon.infinite() if infinite else Horizon.finite(horizon)


def load_problem(config: Optional[Path]):
    from .core.schema import load_plant
    from .experiments.sweep import BUILTIN_PLANT

    return load_plant(config or BUILTIN_PLANT)


def emit_json(payload: dict, out: Optional[Path], filename: str) -> None:
    from .experiments.io import write_json

    if out is None:
        typer.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        path = write_json(out / filename, payload)
        typer.echo(f"Wrote {path}")


def worst_case_at(plant, cost, horizon, gamma: Optional[float], tol: Optional[float]):
    from .core.hinf import find_gamma_bar, find_gamma_lower, worst_case_disturbance

    gamma_lower = find_gamma_lower(plant, cost, horizon)
    if gamma is not None:
        return gamma_lower, worst_case_disturbance(plant, cost, gamma, horizon)
    return gamma_lower, find_gamma_bar(plant, cost, horizon, tol=tol, gamma_lower=gamma_lower)


# ============================================================================
# Shared Options
# ============================================================================

ConfigOption = typer.Option(None, "--config", "-c", help="Plant/cost JSON document (default: built-in scalar example)")
HorizonOption = typer.Option(100, "--horizon", "-T", min=1, help="Horizon length T")
InfiniteOption = typer.Option(False, "--infinite", help="Use the infinite-horizon problem")
OutOption = typer.Option(None, "--out", "-o", help="Output directory (default: print to stdout)")
TolOption = typer.Option(None, "--tol", help="Tolerance on the unit-energy condition of the worst case")
GammaOption = typer.Option(None, "--gamma", help="Use this attenuation level instead of searching gamma_bar")


@app.callback()
def main_callback(
    log_level: Optional[str] = typer.Option(
        None,
        "--log-level",
        help="Logging level (debug, info, warning, error, critical)"
    )
):
    configure_logging(log_level)


# ============================================================================
# Commands
# ============================================================================

@app.command()
@handle_errors
def synth(
    config: Optional[Path] = ConfigOption,
    horizon: int = HorizonOption,
    infinite: bool = InfiniteOption,
    out: Optional[Path] = OutOption,
    tol: Optional[float] = TolOption,
    gamma: Optional[float] = GammaOption,
):
    """
    Synthesize the H-infinity controller at gamma_bar.

    Prints gamma_lower, gamma_bar, the worst-case energy and the gains as JSON.

    Examples:
        regretlab synth
        regretlab synth --config plant.json --infinite --out results/
    """
    from .core.hinf import build_controller
    from .core.riccati import solve_dare

    plant, cost = load_problem(config)
    kind = resolve_horizon(horizon, infinite)
    gamma_lower, worst = worst_case_at(plant, cost, kind, gamma, tol)
    synthesis = build_controller(plant, cost, worst.gamma_bar, kind)
    lqr = solve_dare(plant, cost)
    payload = {
        "horizon": kind.label,
        "gamma_lower": gamma_lower,
        "gamma_bar": worst.gamma_bar,
        "worst_case_energy": worst.energy,
        "K_inf": np.asarray(synthesis.K_inf).tolist(),
        "game_value": synthesis.game_value(plant.x0),
        "lqr": {"P": lqr.P.tolist(), "K": lqr.K.tolist(), "spectral_radius_F": lqr.spectral_radius_F},
    }
    if synthesis.P_inf is not None:
        payload["P_inf"] = synthesis.P_inf.tolist()
    emit_json(payload, out, "synth.json")


@app.command()
@handle_errors
def worstcase(
    config: Optional[Path] = ConfigOption,
    horizon: int = HorizonOption,
    infinite: bool = InfiniteOption,
    out: Optional[Path] = OutOption,
    tol: Optional[float] = TolOption,
    gamma: Optional[float] = GammaOption,
):
    """
    Write the worst-case disturbance w* as CSV (columns t, w_1..w_n).

    Example:
        regretlab worstcase --horizon 100 --out results/
    """
    from .experiments.io import signal_header, write_signal_csv

    plant, cost = load_problem(config)
    kind = resolve_horizon(horizon, infinite)
    _, worst = worst_case_at(plant, cost, kind, gamma, tol)
    logger.info("gamma_bar=%.10g energy=%.10g", worst.gamma_bar, worst.energy)
    if out is None:
        typer.echo(",".join(signal_header(worst.w_star.dim)))
        for t in range(worst.w_star.horizon):
            typer.echo(",".join([str(t)] + [repr(float(x)) for x in worst.w_star[t]]))
    else:
        path = write_signal_csv(out / "w_star.csv", worst.w_star)
        typer.echo(f"Wrote {path}")


@app.command()
@handle_errors
def regret(
    config: Optional[Path] = ConfigOption,
    horizon: int = HorizonOption,
    infinite: bool = InfiniteOption,
    out: Optional[Path] = OutOption,
    tol: Optional[float] = TolOption,
    controller: str = typer.Option("hinf", "--controller", help="hinf, ce, lqr or offline"),
    disturbance: Optional[Path] = typer.Option(None, "--disturbance", help="Disturbance CSV (default: sampled around w*)"),
    prediction: Optional[Path] = typer.Option(None, "--prediction", help="Prediction CSV for the ce controller"),
    gap: float = typer.Option(0.0, "--gap", min=0.0, help="Distance of the sampled disturbance from w*"),
    prediction_gap: float = typer.Option(0.0, "--prediction-gap", min=0.0, help="Distance of the sampled prediction from the disturbance"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Sampling seed"),
):
    """
    Regret of one controller on one disturbance realization, with its bound.

    Examples:
        regretlab regret --controller hinf --gap 0.5 --seed 1
        regretlab regret --controller ce --disturbance w.csv --prediction w_bar.csv
    """
    from .core.ce import Prediction, ce_policy, lqr_policy
    from .core.errors import InfeasibleError, SearchFailureError
    from .core.hinf import build_controller
    from .core.offline import offline_finite, offline_infinite
    from .core.regret import ce_bound, dynamic_regret, hinf_bound
    from .core.schema import Signal
    from .core.simulation import gap as signal_gap
    from .experiments.io import read_signal_csv
    from .experiments.sampling import PREDICTION_STREAM, sample_disturbance, sample_seed

    if controller not in ("hinf", "ce", "lqr", "offline"):
        raise typer.BadParameter(f"unknown controller '{controller}'", param_hint="--controller")
    seed = settings.SEED if seed is None else seed
    plant, cost = load_problem(config)
    kind = resolve_horizon(horizon, infinite)

    # Only the H-infinity controller and sampled disturbances need w*
    worst = None
    if controller == "hinf" or disturbance is None:
        try:
            _, worst = worst_case_at(plant, cost, kind, None, tol)
        except (InfeasibleError, SearchFailureError):
            if controller == "hinf":
                raise
            logger.info("no unit-energy worst case; sampling around the zero disturbance")

    if disturbance is not None:
        w = read_signal_csv(disturbance)
    else:
        reference = worst.w_star if worst is not None else Signal.zeros(horizon, plant.n)
        w = sample_disturbance(reference, gap, sample_seed(seed, 0, 0))
    offline = offline_infinite(plant, cost, w) if kind.is_infinite else offline_finite(plant, cost, w)

    if controller == "hinf":
        synthesis = build_controller(plant, cost, worst.gamma_bar, kind)
        report = dynamic_regret(plant, cost, synthesis.policy(), w, kind, offline=offline)
        gap_norm = signal_gap(w, worst.w_star).energy()
        _, constants = hinf_bound(plant, cost, synthesis, gap_norm, worst=worst)
        report = report.with_bound(gap_norm, constants)
    elif controller == "ce":
        if prediction is not None:
            forecast = Prediction.custom(read_signal_csv(prediction))
        else:
            forecast = Prediction.noisy(w, prediction_gap, sample_seed(seed, 0, 0, PREDICTION_STREAM))
        policy = ce_policy(plant, cost, forecast, kind, T=w.horizon)
        report = dynamic_regret(plant, cost, policy, w, kind, offline=offline)
        gap_norm = signal_gap(forecast.fitted(w.horizon), w).energy()
        report = report.model_copy(
            update={"gap_norm": gap_norm, "bound_value": ce_bound(plant, cost, gap_norm)}
        )
    elif controller == "lqr":
        report = dynamic_regret(plant, cost, lqr_policy(plant, cost, kind), w, kind, offline=offline)
        report = report.model_copy(
            update={"gap_norm": w.energy(), "bound_value": ce_bound(plant, cost, w.energy())}
        )
    else:
        report = dynamic_regret(plant, cost, offline.policy(), w, kind, offline=offline, cross_check=True)

    payload = report.model_dump(mode="json", exclude={"w"})
    payload["slack"] = report.slack
    payload["gamma_bar"] = worst.gamma_bar if worst is not None else None
    emit_json(payload, out, "regret.json")


@app.command()
@handle_errors
def sweep(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Experiment JSON (default: built-in scalar sweep)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the configured seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Override the configured output directory"),
    horizon: Optional[int] = typer.Option(None, "--horizon", "-T", min=1, help="Override the configured horizon"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads, capped by REGRETLAB_THREADS"),
    tol: Optional[float] = TolOption,
):
    """
    Run a regret sweep and write sweep.csv (aggregates) and samples.csv.

    Example:
        regretlab sweep --config sweep.json --seed 7 --out results/
    """
    from .experiments.io import write_samples_csv, write_sweep_csv
    from .experiments.schema import ExperimentConfig
    from .experiments.sweep import run_sweep

    experiment = ExperimentConfig.read(config) if config else ExperimentConfig()
    overrides = {
        key: value
        for key, value in {
            "rng_seed": seed, "output": out, "horizon": horizon, "energy_tol": tol
        }.items()
        if value is not None
    }
    experiment = ExperimentConfig.model_validate({**experiment.model_dump(), **overrides})
    result = run_sweep(experiment, threads=threads)
    if not result.rows:
        typer.echo("No controllers configured; nothing written")
        return
    for path in (
        write_sweep_csv(experiment.output / "sweep.csv", result),
        write_samples_csv(experiment.output / "samples.csv", result),
    ):
        typer.echo(f"Wrote {path}")


@app.command("reproduce-fig1")
@handle_errors
def reproduce_fig1_command(
    out: Path = typer.Option(Path("results"), "--out", "-o", help="Output directory"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Sampling seed"),
    points: int = typer.Option(20, "--points", min=1, help="Gap norms on (0, 2]"),
    samples: int = typer.Option(200, "--samples", min=1, help="Samples per gap norm"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads, capped by REGRETLAB_THREADS"),
):
    """
    Reproduce the scalar experiment: fig1_data.csv plus a gnuplot script.

    Example:
        regretlab reproduce-fig1 --out results/ --seed 20231
    """
    from .experiments.figures import reproduce_fig1

    for path in reproduce_fig1(out, seed=seed, points=points, samples=samples, threads=threads):
        typer.echo(f"Wrote {path}")


@app.command()
def info():
    """
    Display current configuration and system information.

    Example:
        regretlab info
    """
    import platform

    typer.echo("=" * 70)
    typer.echo("regretlab - System Information")
    typer.echo("=" * 70)
    typer.echo("")

    typer.echo("[Configuration]")
    typer.echo(f"  Threads:            {settings.THREADS}")
    typer.echo(f"  Log Level:          {settings.LOG_LEVEL}")
    typer.echo(f"  Tolerance:          {settings.TOL:g}")
    typer.echo(f"  Iteration Cap:      {settings.MAX_ITER}")
    typer.echo(f"  Feasibility Margin: {settings.FEASIBILITY_MARGIN:g}")
    typer.echo(f"  Gamma Ceiling:      {settings.GAMMA_CEILING:g}")
    typer.echo(f"  Energy Tolerance:   {settings.ENERGY_TOL:g}")
    typer.echo(f"  Batch Size Cap:     {settings.BATCH_MAX_SIZE}")
    typer.echo(f"  Seed:               {settings.SEED}")
    typer.echo("")

    typer.echo("[System]")
    typer.echo(f"  Python Version:     {platform.python_version()}")
    typer.echo(f"  NumPy Version:      {np.__version__}")
    typer.echo(f"  Platform:           {platform.platform()}")
    typer.echo("")


@app.command()
def version():
    """
    Display the regretlab version.

    Example:
        regretlab version
    """
    typer.echo(f"regretlab v{__version__}")


def main():
    """
    Main entry point for the CLI.

    Registered as the ``regretlab`` console script in pyproject.toml.
    """
    app()


if __name__ == "__main__":
    main()
