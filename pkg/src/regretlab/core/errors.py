"""Exception hierarchy shared by the solvers, the experiment harness and the CLI."""

from __future__ import annotations

from typing import Any, Dict, Optional, Tuple


class RegretLabError(RuntimeError):
    """Base class for all regretlab failures. ``exit_code`` is used by the CLI."""

    exit_code = 3


class DimensionError(RegretLabError, ValueError):
    """Shapes or horizons of the operands do not agree."""


class NumericalError(RegretLabError):
    """A numerical procedure failed to produce a certified result."""

    exit_code = 3


class DivergenceError(NumericalError):
    def __init__(self, message: str, spectral_radius: Optional[float] = None):
        super().__init__(message)
        self.spectral_radius = spectral_radius


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class SearchFailureError(NumericalError):
    def __init__(self, message: str, energy_range: Tuple[float, float] = (0.0, 0.0)):
        super().__init__(message)
        self.energy_range = energy_range


class OracleSizeError(NumericalError):
    pass


class InfeasibleError(RegretLabError):
    """The requested synthesis or bound has no solution for the given data."""

    exit_code = 2


class InfeasibleGammaError(InfeasibleError):
    def __init__(self, message: str, gamma: Optional[float] = None):
        super().__init__(message)
        self.gamma = gamma


class SynthesisInfeasibleError(InfeasibleError):
    pass


class InadmissibleInitialStateError(InfeasibleError):
    def __init__(self, message: str, diagnostic: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class BoundNotApplicableError(InfeasibleError):
    pass
