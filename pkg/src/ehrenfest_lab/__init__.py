"""
ehrenfest-lab - semiclassical wavepacket experiments: dilation flow, split-step
propagation, classical invariant manifolds and position measurement.
"""

__version__ = "0.1.0"
__description__ = "Semiclassical wavepacket and Ehrenfest-time experiments"

from .errors import EhrenfestLabError, NumericalGuardError, SimulationValidationError
from .models import *
from .wavepacket import coherent_state, make_grid, moments, overlap, position_entropy
from .dilation import dilation_flow, ehrenfest_time, gaussian_dilation_evolve
from .propagator import split_step_evolve
from .classical import classical_flow, fixed_points, unstable_manifold
from .measurement import born_sample, collapse, husimi, tube_mass

__all__ = [
    # Errors
    "EhrenfestLabError",
    "SimulationValidationError",
    "NumericalGuardError",
    # Enums
    "EhrenfestKind",
    "PotentialKind",
    "ModelId",
    "WindowShape",
    "ScheduleKind",
    # Domain types
    "Grid",
    "WaveFunction",
    "GaussianState",
    "Moments",
    "PotentialSpec",
    "PhasePoint",
    "ClassicalModel",
    "Trajectory",
    "ManifoldCurve",
    "HusimiGrid",
    "SampleBatch",
    "ExperimentConfig",
    # Operations
    "make_grid",
    "coherent_state",
    "moments",
    "position_entropy",
    "overlap",
    "ehrenfest_time",
    "dilation_flow",
    "gaussian_dilation_evolve",
    "split_step_evolve",
    "classical_flow",
    "fixed_points",
    "unstable_manifold",
    "born_sample",
    "collapse",
    "husimi",
    "tube_mass",
]
