"""
Exception hierarchy for ehrenfest-lab.

Every error carries a message, a details dict and the CLI exit code it maps to.
"""

from typing import Any, Dict, Optional


class EhrenfestLabError(Exception):
    """Base exception for simulation errors."""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for logging/serialization."""
        return {
            "error_type": self.__class__.__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class SimulationValidationError(EhrenfestLabError):
    """Invalid input: parameters, grids or configuration."""

    exit_code = 2


class NumericalGuardError(EhrenfestLabError):
    """A numerical guard aborted the computation."""

    exit_code = 3


class InvalidGridError(SimulationValidationError):
    """Exception for grids that are not powers of two or have a non-positive length."""


class GridTooCoarseError(SimulationValidationError):
    """Exception for grids whose spacing cannot resolve the packet width."""


class GridTooSmallError(SimulationValidationError):
    """Exception for grids too short to hold the packet."""


class NotNormalizedError(SimulationValidationError):
    """Exception for wavefunctions whose norm differs from one."""


class GridMismatchError(SimulationValidationError):
    """Exception for states or axes that do not share a uniform grid."""


class InvalidHbarError(SimulationValidationError):
    """Exception for hbar values outside (0, 1] or without a usable Ehrenfest time."""


class InvalidWindowError(SimulationValidationError):
    """Exception for collapse windows narrower than the grid resolves."""


class InvalidParameterError(SimulationValidationError, ValueError):
    """Exception for out-of-range scalar arguments such as step sizes and counts."""


class NotHyperbolicError(SimulationValidationError):
    """Exception for manifold requests at non-hyperbolic points."""


class UnsupportedModelError(SimulationValidationError):
    """Exception for operations the chosen model does not provide."""


class EmptyCurveError(SimulationValidationError):
    """Exception for empty curve lists or curves without points."""


class InsufficientSpanError(SimulationValidationError):
    """Exception for hbar sweeps too narrow for a scaling fit."""


class ConfigError(SimulationValidationError):
    """Exception for malformed config files or conflicting options."""


class GridOverflowError(NumericalGuardError):
    """Exception for evolved states that no longer fit on the grid."""


class InterpolationLossError(NumericalGuardError):
    """Exception for grid resampling that loses too much accuracy."""


class UnstableParametersError(NumericalGuardError):
    """Exception for momentum density reaching the edge of the spectral grid (aliasing)."""


class ZeroMassError(NumericalGuardError):
    """Exception for collapse windows that capture no probability."""


class FlowBlowupError(NumericalGuardError):
    """Exception for classical flows that leave the finite range."""
