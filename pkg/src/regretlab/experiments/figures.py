"""
Reproduction of the scalar regret experiment: worst-case simulated regret and
the analytic bounds of the H-infinity and certainty-equivalent controllers over
a grid of gap norms, written as CSV data plus a gnuplot script.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional
import logging

from regretlab.config import settings
from regretlab.experiments.io import write_csv
from regretlab.experiments.schema import ExperimentConfig, SweepResult, default_grid
from regretlab.experiments.sweep import run_sweep

logger = logging.getLogger(__name__)

FIG1_DATA = "fig1_data.csv"
FIG1_SCRIPT = "fig1.gp"
FIG1_HEADER = ["gap_norm", "hinf_max_regret", "hinf_bound", "ce_max_regret", "ce_bound"]

GNUPLOT_SCRIPT = """\
# Worst-case simulated regret and regret upper bounds.
# Usage: gnuplot fig1.gp  (writes fig1.png)
set datafile separator ","
set key top left
set xlabel "||w - w_ref||"
set ylabel "dynamic regret"
set terminal pngcairo size 800,500
set output "fig1.png"
plot "{data}" using 1:3 skip 1 with lines lw 2 title "H-inf bound", \\
     "{data}" using 1:2 skip 1 with linespoints title "H-inf max regret", \\
     "{data}" using 1:5 skip 1 with lines lw 2 dt 2 title "CE bound", \\
     "{data}" using 1:4 skip 1 with linespoints title "CE max regret"
"""


def fig1_config(
    output_dir: Path,
    seed: Optional[int] = None,
    points: int = 20,
    samples: int = 200,
    horizon: int = 100,
) -> ExperimentConfig:
    """Built-in scalar experiment: T = 100, x0 = 4, gap norms on (0, 2]."""
    return ExperimentConfig(
        plant=None,
        horizon=horizon,
        controllers=["hinf", "ce"],
        gap_norms=default_grid(points),
        samples_per_point=samples,
        rng_seed=settings.SEED if seed is None else seed,
        output=output_dir,
    )


def fig1_rows(result: SweepResult) -> List[list]:
    hinf, ce = result.rows_for("hinf"), result.rows_for("ce")
    return [
        [h.gap_norm, h.max_regret, h.bound, c.max_regret, c.bound]
        for h, c in zip(hinf, ce)
    ]


def reproduce_fig1(
    output_dir: Path,
    seed: Optional[int] = None,
    points: int = 20,
    samples: int = 200,
    threads: Optional[int] = None,
) -> List[Path]:
    """Run the built-in sweep and write fig1_data.csv and fig1.gp into ``output_dir``."""
    output_dir = Path(output_dir)
    config = fig1_config(output_dir, seed=seed, points=points, samples=samples)
    result = run_sweep(config, threads=threads)
    data = write_csv(output_dir / FIG1_DATA, FIG1_HEADER, fig1_rows(result))
    script = output_dir / FIG1_SCRIPT
    script.write_text(GNUPLOT_SCRIPT.format(data=FIG1_DATA), encoding="utf-8")
    logger.info("Wrote %s and %s", data, script)
    return [data, script]
