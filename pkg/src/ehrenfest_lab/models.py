"""
Pydantic models for the simulator's domain types, results and configuration.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator


def _frozen_array(value, dtype) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


# Enums
class EhrenfestKind(str, Enum):
    """Ehrenfest time flavour: ½·ln(1/ℏ) or ln(1/ℏ)."""
    HALF = "half"
    FULL = "full"


class PotentialKind(str, Enum):
    """Potential family for Ĥ = p̂² + V(q̂)."""
    ZERO = "zero"
    HARMONIC = "harmonic"
    DOUBLE_WELL = "doublewell"
    POLYNOMIAL = "polynomial"


class ModelKind(str, Enum):
    """Classical model family."""
    DILATION = "dilation"
    POTENTIAL = "potential"


class Branch(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


class ManifoldKind(str, Enum):
    UNSTABLE = "unstable"
    STABLE = "stable"


class FixedPointKind(str, Enum):
    HYPERBOLIC = "hyperbolic"
    ELLIPTIC = "elliptic"


class WindowShape(str, Enum):
    """Measurement window used by collapse."""
    GAUSSIAN = "gaussian"
    BOX = "box"


class ModelId(str, Enum):
    """Model selector exposed on the command line."""
    DILATION = "dilation"
    HARMONIC = "harmonic"
    DOUBLE_WELL = "doublewell"


class ScheduleKind(str, Enum):
    """How schedule values are interpreted."""
    ABSOLUTE = "absolute"
    EHRENFEST = "ehrenfest"


# Grid and quantum states
class Grid(BaseModel):
    """Uniform periodic position grid centered at 0."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=8, description="Number of grid points (power of two)")
    length: float = Field(..., gt=0, description="Domain length L")

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError("n must be a power of two")
        return value

    @property
    def x_min(self) -> float:
        return -self.length / 2

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order, covering [−π/dx, π/dx)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


class WaveFunction(BaseModel):
    """Complex amplitudes ψ(xᵢ) on a grid, carrying ℏ."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    amps: np.ndarray
    hbar: float = Field(..., gt=0)

    @field_validator("amps", mode="before")
    @classmethod
    def _coerce_amps(cls, value) -> np.ndarray:
        return _frozen_array(value, np.complex128)

    @model_validator(mode="after")
    def _check_shape(self) -> "WaveFunction":
        if self.amps.shape != (self.grid.n,):
            raise ValueError(f"amps must have shape ({self.grid.n},), got {self.amps.shape}")
        return self

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.density) * self.grid.dx))


class GaussianState(BaseModel):
    """Closed-form squeezed Gaussian.

    ψ(x) = (Re a/(πℏ))^{1/4} e^{i·phase} e^{i p0 (x−q0)/ℏ} e^{−a (x−q0)²/(2ℏ)}
    """
    model_config = ConfigDict(frozen=True)

    q0: float = 0.0
    p0: float = 0.0
    a: complex = 1.0 + 0.0j
    phase: float = 0.0
    hbar: float = Field(..., gt=0)

    @field_validator("a")
    @classmethod
    def _positive_real_part(cls, value: complex) -> complex:
        if not value.real > 0:
            raise ValueError("Re a must be positive")
        return complex(value)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        prefactor = (self.a.real / (math.pi * self.hbar)) ** 0.25
        shifted = x - self.q0
        exponent = 1j * self.phase + 1j * self.p0 * shifted / self.hbar - self.a * shifted ** 2 / (2 * self.hbar)
        return prefactor * np.exp(exponent)

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sqrt(self.a.real / (math.pi * self.hbar)) * np.exp(-self.a.real * (x - self.q0) ** 2 / self.hbar)

    @property
    def position_width(self) -> float:
        return math.sqrt(self.hbar / (2 * self.a.real))

    @property
    def momentum_width(self) -> float:
        return math.sqrt(self.hbar * abs(self.a) ** 2 / (2 * self.a.real))

    def moments(self) -> "Moments":
        return Moments(mean_q=self.q0, mean_p=self.p0, d_q=self.position_width, d_p=self.momentum_width)

    def entropy(self) -> float:
        """Differential entropy of |ψ|², ½·ln(2πeσ²)."""
        return 0.5 * math.log(2 * math.pi * math.e * self.position_width ** 2)


class Moments(BaseModel):
    """First and second moments of a state: ⟨Q⟩, ⟨P⟩, ΔQ, ΔP."""
    model_config = ConfigDict(frozen=True)

    mean_q: float
    mean_p: float
    d_q: float = Field(..., ge=0)
    d_p: float = Field(..., ge=0)

    @computed_field
    @property
    def product(self) -> float:
        return self.d_q * self.d_p


# Potentials and classical models
_HARMONIC = (0.0, 0.0, 1.0, 0.0, 0.0)
_DOUBLE_WELL = (0.0, 0.0, -1.0, 0.0, 1.0)
_ZERO = (0.0, 0.0, 0.0, 0.0, 0.0)


class PotentialSpec(BaseModel):
    """Polynomial potential V(q) = c₀ + c₁q + c₂q² + c₃q³ + c₄q⁴."""
    model_config = ConfigDict(frozen=True)

    kind: PotentialKind
    coefficients: Tuple[float, float, float, float, float]

    @model_validator(mode="after")
    def _check_named_coefficients(self) -> "PotentialSpec":
        expected = {
            PotentialKind.ZERO: _ZERO,
            PotentialKind.HARMONIC: _HARMONIC,
            PotentialKind.DOUBLE_WELL: _DOUBLE_WELL,
        }.get(self.kind)
        if expected is not None and tuple(self.coefficients) != expected:
            raise ValueError(f"{self.kind.value} potential requires coefficients {expected}")
        return self

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(kind=PotentialKind.ZERO, coefficients=_ZERO)

    @classmethod
    def harmonic(cls) -> "PotentialSpec":
        return cls(kind=PotentialKind.HARMONIC, coefficients=_HARMONIC)

    @classmethod
    def double_well(cls) -> "PotentialSpec":
        return cls(kind=PotentialKind.DOUBLE_WELL, coefficients=_DOUBLE_WELL)

    @classmethod
    def polynomial(cls, coefficients) -> "PotentialSpec":
        padded = tuple(float(c) for c in coefficients) + (0.0,) * (5 - len(coefficients))
        return cls(kind=PotentialKind.POLYNOMIAL, coefficients=padded)

    def value(self, q):
        return P.polyval(q, self.coefficients)

    def derivative(self, q):
        return P.polyval(q, P.polyder(self.coefficients))

    def second_derivative(self, q):
        return P.polyval(q, P.polyder(self.coefficients, 2))


class PhasePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float
    p: float

    @model_validator(mode="after")
    def _finite(self) -> "PhasePoint":
        if not (math.isfinite(self.q) and math.isfinite(self.p)):
            raise ValueError("phase point components must be finite")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p])


class ClassicalModel(BaseModel):
    """Either the dilation symbol h = q·p or h = p² + V(q)."""
    model_config = ConfigDict(frozen=True)

    kind: ModelKind
    potential: Optional[PotentialSpec] = None

    @model_validator(mode="after")
    def _potential_matches_kind(self) -> "ClassicalModel":
        if self.kind == ModelKind.POTENTIAL and self.potential is None:
            raise ValueError("potential model requires a PotentialSpec")
        if self.kind == ModelKind.DILATION and self.potential is not None:
            raise ValueError("dilation model takes no potential")
        return self

    @classmethod
    def dilation(cls) -> "ClassicalModel":
        return cls(kind=ModelKind.DILATION)

    @classmethod
    def from_potential(cls, spec: PotentialSpec) -> "ClassicalModel":
        return cls(kind=ModelKind.POTENTIAL, potential=spec)


class _ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Trajectory(_ArrayModel):
    """Time series of phase points under the classical flow."""

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray

    @field_validator("times", "q", "p", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return _frozen_array(value, float)

    @property
    def points(self) -> List[PhasePoint]:
        return [PhasePoint(q=float(q), p=float(p)) for q, p in zip(self.q, self.p)]

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(q=float(self.q[-1]), p=float(self.p[-1]))


class ManifoldCurve(_ArrayModel):
    """Polyline approximating one branch of an invariant manifold of `base`."""

    branch: Branch
    kind: ManifoldKind = ManifoldKind.UNSTABLE
    base: PhasePoint
    q: np.ndarray
    p: np.ndarray

    @field_validator("q", "p", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return _frozen_array(value, float)

    def __len__(self) -> int:
        return len(self.q)

    @property
    def points(self) -> List[PhasePoint]:
        return [PhasePoint(q=float(q), p=float(p)) for q, p in zip(self.q, self.p)]

    @property
    def arclength(self) -> np.ndarray:
        steps = np.hypot(np.diff(self.q), np.diff(self.p))
        return np.concatenate(([0.0], np.cumsum(steps)))


class FixedPoint(BaseModel):
    """Equilibrium with its linear classification."""
    model_config = ConfigDict(frozen=True)

    point: PhasePoint
    kind: FixedPointKind
    exponent: float = Field(..., description="Largest real part of the Jacobian eigenvalues")
    frequency: float = Field(0.0, description="Largest imaginary part magnitude")


class SensitivityResult(_ArrayModel):
    """Outcome of a separation experiment between two nearby trajectories."""

    reached: bool
    time: Optional[float] = None
    t_max: float
    eps: float
    target: float
    times: np.ndarray
    separations: np.ndarray


class Snapshot(_ArrayModel):
    """Diagnostics of an evolved state at one scheduled time."""

    t: float
    moments: Moments
    entropy: float
    energy: Optional[float] = None
    state: Optional[WaveFunction] = None


# Measurement
class MeasurementRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    bin: int = Field(..., ge=0)
    seed: int
    algorithm: str = "PCG64"


class SampleBatch(_ArrayModel):
    """Born-rule samples stored column-wise."""

    grid: Grid
    x: np.ndarray
    bins: np.ndarray
    seed: int
    algorithm: str = "PCG64"

    @field_validator("x", mode="before")
    @classmethod
    def _coerce_x(cls, value) -> np.ndarray:
        return _frozen_array(value, float)

    @field_validator("bins", mode="before")
    @classmethod
    def _coerce_bins(cls, value) -> np.ndarray:
        return _frozen_array(value, np.int64)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def records(self) -> Iterator[MeasurementRecord]:
        for x, b in zip(self.x, self.bins):
            yield MeasurementRecord(x=float(x), bin=int(b), seed=self.seed, algorithm=self.algorithm)


class HusimiGrid(_ArrayModel):
    """Husimi density |⟨q,p|ψ⟩|² on a uniform phase-space mesh (rows: q, columns: p)."""

    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    hbar: float = Field(..., gt=0)

    @field_validator("q_axis", "p_axis", "values", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return _frozen_array(value, float)

    @model_validator(mode="after")
    def _check_shape(self) -> "HusimiGrid":
        if self.values.shape != (self.q_axis.size, self.p_axis.size):
            raise ValueError("values must have shape (len(q_axis), len(p_axis))")
        return self

    @property
    def dq(self) -> float:
        return float(self.q_axis[1] - self.q_axis[0]) if len(self.q_axis) > 1 else 1.0

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0]) if len(self.p_axis) > 1 else 1.0

    @property
    def cell_weight(self) -> float:
        return self.dq * self.dp / (2 * math.pi * self.hbar)

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.cell_weight)

    def argmax(self) -> PhasePoint:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return PhasePoint(q=float(self.q_axis[i]), p=float(self.p_axis[j]))


# Experiment configuration and results
class Schedule(BaseModel):
    """Time schedule, absolute or in multiples of ln(1/ℏ)."""
    model_config = ConfigDict(frozen=True)

    kind: ScheduleKind = ScheduleKind.ABSOLUTE
    values: List[float] = Field(..., min_length=1)

    @field_validator("values")
    @classmethod
    def _ascending(cls, values: List[float]) -> List[float]:
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("schedule must be ascending")
        return values

    def resolve(self, hbar: float) -> List[float]:
        """Absolute times for a given ℏ."""
        if self.kind == ScheduleKind.ABSOLUTE:
            return list(self.values)
        t_full = math.log(1.0 / hbar)
        return [k * t_full for k in self.values]


class ExperimentConfig(BaseModel):
    """Validated settings shared by all experiment commands."""
    model_config = ConfigDict(frozen=True)

    model: ModelId = ModelId.DILATION
    hbars: Optional[List[float]] = Field(None, min_length=1)
    schedule: Optional[Schedule] = None
    grid_n: Optional[int] = Field(None, ge=8)
    grid_l: Optional[float] = Field(None, gt=0)
    dt: Optional[float] = Field(None, gt=0)
    seed: int = Field(0, ge=0)
    samples: int = Field(100_000, ge=1)
    collapse_width: Optional[float] = Field(None, gt=0)
    workers: int = Field(1, ge=1)
    out_dir: Path = Path("runs")

    @field_validator("hbars")
    @classmethod
    def _hbar_range(cls, values: Optional[List[float]]) -> Optional[List[float]]:
        for value in values or []:
            if not 0 < value <= 1:
                raise ValueError(f"hbar values must lie in (0, 1], got {value}")
        return values

    @field_validator("grid_n")
    @classmethod
    def _grid_power_of_two(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value & (value - 1):
            raise ValueError("grid_n must be a power of two")
        return value


class ScalingFit(BaseModel):
    """Least-squares fit t*(ℏ) = slope·ln(1/ℏ) + intercept."""
    model_config = ConfigDict(frozen=True)

    slope: float
    intercept: float
    residual: float
    hbars: List[float]
    t_star: List[float]


class MeasurementDemoSummary(BaseModel):
    """Summary of the measure → evolve → measure → collapse → measure story."""
    model_config = ConfigDict(frozen=True)

    hbar: float
    samples: int
    dq_initial: float
    dq_ehrenfest: float
    t_ehrenfest: float
    x_star: float
    collapse_width: float
    capture_fraction: float


class DoubleWellRow(BaseModel):
    """Husimi masses around the separatrix at t = k·ln(1/ℏ)."""
    model_config = ConfigDict(frozen=True)

    k: float
    t: float
    mass_lobe_plus: float
    mass_lobe_minus: float
    mass_fixedpoint: float
    tube_mass_total: float
    tube_mass_with_disc: float


class DoubleWellResult(_ArrayModel):
    hbar: float
    delta: float
    rows: List[DoubleWellRow]
    husimi: List[HusimiGrid]
    snapshots: List[Snapshot]
    branches: Tuple[ManifoldCurve, ManifoldCurve]


class MeasurementDemoResult(_ArrayModel):
    summary: MeasurementDemoSummary
    initial: SampleBatch
    ehrenfest: SampleBatch
    resampled: SampleBatch


class EvolveResult(_ArrayModel):
    """Snapshot series of one evolution and its final state."""

    hbar: float
    model: ModelId
    snapshots: List[Snapshot]
    final: WaveFunction


class ManifoldReport(_ArrayModel):
    """Classical-structure summary for one model."""

    model: ModelId
    fixed_points: List[FixedPoint]
    unstable: Optional[Tuple[ManifoldCurve, ManifoldCurve]] = None
    stable: Optional[Tuple[ManifoldCurve, ManifoldCurve]] = None
    covariance_deviation: Optional[float] = None
    sensitivity: Optional[SensitivityResult] = None
    growth_rate: Optional[float] = None
    trajectory: Trajectory
    trajectory_energy: np.ndarray
