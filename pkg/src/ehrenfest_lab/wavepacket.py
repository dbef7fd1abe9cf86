"""
Position-grid wavefunctions: construction, coherent states, moments and
localization diagnostics.
"""

import logging
import math

import numpy as np
from scipy import fft
from scipy.special import entr

from .errors import (
    GridMismatchError,
    GridTooCoarseError,
    GridTooSmallError,
    InvalidGridError,
    NotNormalizedError,
)
from .models import GaussianState, Grid, Moments, WaveFunction

logger = logging.getLogger(__name__)

DEFAULT_GRID_N = 16384
DEFAULT_GRID_L = 128.0

# Resolution rule: points per initial width and widths of padding.
POINTS_PER_WIDTH = 4
PADDING_WIDTHS = 8

NORM_TOLERANCE = 1e-6


def make_grid(n: int, length: float) -> Grid:
    """Uniform grid of `n` points on [−L/2, L/2)."""
    if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
        raise InvalidGridError(f"Grid size must be a power of two >= 8, got {n}", {"n": n})
    if not length > 0:
        raise InvalidGridError(f"Grid length must be positive, got {length}", {"length": length})
    return Grid(n=int(n), length=float(length))


def default_grid(hbar: float, length: float = DEFAULT_GRID_L) -> Grid:
    """Default grid, with n grown until a coherent width is resolved at this ℏ."""
    width = math.sqrt(hbar / 2)
    n = DEFAULT_GRID_N
    while length / n > width / POINTS_PER_WIDTH:
        n *= 2
    if n != DEFAULT_GRID_N:
        logger.info(f"Default grid refined to n={n} for hbar={hbar}")
    return make_grid(n, length)


def _normalized(grid: Grid, amps: np.ndarray, hbar: float) -> WaveFunction:
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)) * grid.dx)
    return WaveFunction(grid=grid, amps=amps / norm, hbar=hbar)


def _require_normalized(psi: WaveFunction) -> None:
    norm = psi.norm
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise NotNormalizedError(f"State norm is {norm:.12g}, expected 1", {"norm": norm})


def sample_gaussian(grid: Grid, g: GaussianState) -> WaveFunction:
    """Sample an analytic Gaussian on the grid and renormalize."""
    return _normalized(grid, g.evaluate(grid.x), g.hbar)


def coherent_state(grid: Grid, q0: float, p0: float, hbar: float) -> WaveFunction:
    """Coherent state centered at (q0, p0), the a = 1 Gaussian."""
    width = math.sqrt(hbar / 2)
    if grid.length / 2 < abs(q0) + PADDING_WIDTHS * width:
        raise GridTooSmallError(
            f"Coherent state at q0={q0} does not fit in L={grid.length} at hbar={hbar}",
            {"q0": q0, "length": grid.length, "hbar": hbar},
        )
    if grid.dx > width / POINTS_PER_WIDTH:
        raise GridTooCoarseError(
            f"dx={grid.dx:.6g} exceeds width/{POINTS_PER_WIDTH}={width / POINTS_PER_WIDTH:.6g}",
            {"dx": grid.dx, "hbar": hbar},
        )
    return sample_gaussian(grid, GaussianState(q0=q0, p0=p0, a=1.0, hbar=hbar))


def momentum_density(psi: WaveFunction) -> np.ndarray:
    """Normalized probabilities over the FFT wavenumbers `psi.grid.k`."""
    weights = np.abs(fft.fft(psi.amps)) ** 2
    return weights / np.sum(weights)


def moments(psi: WaveFunction) -> Moments:
    _require_normalized(psi)
    dx = psi.grid.dx
    x = psi.grid.x
    rho = psi.density * dx
    rho = rho / np.sum(rho)
    mean_q = float(np.sum(x * rho))
    var_q = float(np.sum((x - mean_q) ** 2 * rho))

    p = psi.hbar * psi.grid.k
    rho_p = momentum_density(psi)
    mean_p = float(np.sum(p * rho_p))
    var_p = float(np.sum((p - mean_p) ** 2 * rho_p))
    return Moments(mean_q=mean_q, mean_p=mean_p, d_q=math.sqrt(max(var_q, 0.0)), d_p=math.sqrt(max(var_p, 0.0)))


def position_entropy(psi: WaveFunction) -> float:
    """Differential entropy −∫|ψ|² ln|ψ|² dx (may be negative)."""
    _require_normalized(psi)
    return float(np.sum(entr(psi.density)) * psi.grid.dx)


def overlap(psi1: WaveFunction, psi2: WaveFunction) -> complex:
    """⟨ψ₁|ψ₂⟩ by grid quadrature."""
    if psi1.grid != psi2.grid or psi1.hbar != psi2.hbar:
        raise GridMismatchError(
            "Overlap requires states on the same grid and hbar",
            {"grids": [psi1.grid.model_dump(), psi2.grid.model_dump()], "hbars": [psi1.hbar, psi2.hbar]},
        )
    return complex(np.vdot(psi1.amps, psi2.amps) * psi1.grid.dx)


def l2_distance(psi1: WaveFunction, psi2: WaveFunction) -> float:
    if psi1.grid != psi2.grid:
        raise GridMismatchError("L2 distance requires states on the same grid")
    return float(np.sqrt(np.sum(np.abs(psi1.amps - psi2.amps) ** 2) * psi1.grid.dx))


def translate(psi: WaveFunction, c: float) -> WaveFunction:
    """Shift ψ(x) ↦ ψ(x − c) spectrally (periodic grid)."""
    shifted = fft.ifft(fft.fft(psi.amps) * np.exp(-1j * psi.grid.k * c))
    return WaveFunction(grid=psi.grid, amps=shifted, hbar=psi.hbar)
