"""
Quantum flow of the dilation Hamiltonian H = −(iℏ/2)(x d/dx + d/dx x).

The flow is ψᵗ(x) = e^{−t/2} ψ⁰(e^{−t}x). Gaussians are evolved in closed
form; arbitrary grid states are resampled on the dilated coordinates.
"""

import logging
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import resample

from .errors import GridOverflowError, InterpolationLossError, InvalidHbarError
from .models import EhrenfestKind, GaussianState, Grid, WaveFunction
from .wavepacket import l2_distance, moments, sample_gaussian

logger = logging.getLogger(__name__)

# Band-limited upsampling factor applied before cubic interpolation.
REFINEMENT = 4
INTERPOLATION_TOLERANCE = 1e-6


def ehrenfest_time(hbar: float, kind: EhrenfestKind = EhrenfestKind.FULL) -> float:
    if not 0 < hbar <= 1:
        raise InvalidHbarError(f"hbar must lie in (0, 1], got {hbar}", {"hbar": hbar})
    t_full = math.log(1.0 / hbar)
    return 0.5 * t_full if kind == EhrenfestKind.HALF else t_full


def gaussian_dilation_evolve(g: GaussianState, t: float) -> GaussianState:
    """Exact dilation of a Gaussian: a ↦ a·e^{−2t}, q0 ↦ eᵗq0, p0 ↦ e^{−t}p0."""
    return GaussianState(
        q0=math.exp(t) * g.q0,
        p0=math.exp(-t) * g.p0,
        a=g.a * math.exp(-2 * t),
        phase=g.phase,
        hbar=g.hbar,
    )


def delocalization_time(g: GaussianState, threshold: float = 1.0) -> float:
    """First t ≥ 0 with ΔQ(t) = ΔQ(0)·eᵗ ≥ threshold."""
    return max(0.0, math.log(threshold / g.position_width))


def sup_flatness(g: GaussianState, window: float = 1.0, points: int = 2001) -> float:
    """sup over |x − q0| ≤ window of |ρ(x) − ρ(q0)| / ρ(q0), ρ = |ψ|²."""
    x = g.q0 + np.linspace(-window, window, points)
    rho = g.density(x)
    peak = float(g.density(np.array([g.q0]))[0])
    return float(np.max(np.abs(rho - peak)) / peak)


def _check_fits(psi0: WaveFunction, t: float) -> None:
    stats = moments(psi0)
    extent = (abs(stats.mean_q) + stats.d_q) * math.exp(t)
    if extent > psi0.grid.length / 16:
        raise GridOverflowError(
            f"Dilated width {extent:.6g} exceeds L/16={psi0.grid.length / 16:.6g} at t={t}",
            {"t": t, "extent": extent, "length": psi0.grid.length},
        )


def _resample(grid: Grid, amps: np.ndarray, targets: np.ndarray, factor: int) -> np.ndarray:
    """Cubic interpolation of amps at targets after band-limited upsampling by factor."""
    if factor > 1:
        fine = resample(amps, grid.n * factor)
    else:
        fine = amps
    nodes = grid.x_min + (grid.dx / factor) * np.arange(len(fine))
    inside = (targets >= nodes[0]) & (targets <= nodes[-1])
    values = np.zeros(len(targets), dtype=np.complex128)
    real = CubicSpline(nodes, fine.real)
    imag = CubicSpline(nodes, fine.imag)
    values[inside] = real(targets[inside]) + 1j * imag(targets[inside])
    return values


def dilation_flow(psi0: WaveFunction, t: float) -> WaveFunction:
    """ψᵗ(x) = e^{−t/2} ψ⁰(e^{−t}x) on the same grid, renormalized."""
    if t == 0:
        return psi0
    _check_fits(psi0, t)

    grid = psi0.grid
    targets = math.exp(-t) * grid.x
    refined = _resample(grid, psi0.amps, targets, REFINEMENT)
    coarse = _resample(grid, psi0.amps, targets, 1)

    # Cubic error scales as h⁴, so the refined error is about 1/(REFINEMENT⁴ − 1) of the difference.
    scale = math.exp(-t / 2)
    difference = np.sqrt(np.sum(np.abs(refined - coarse) ** 2) * grid.dx) * scale
    loss = difference / (REFINEMENT ** 4 - 1)
    logger.debug(f"dilation_flow t={t}: estimated interpolation loss {loss:.3e}")
    if loss > INTERPOLATION_TOLERANCE:
        raise InterpolationLossError(
            f"Estimated resampling error {loss:.3e} exceeds {INTERPOLATION_TOLERANCE}",
            {"t": t, "loss": loss},
        )

    amps = scale * refined
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)) * grid.dx)
    if abs(norm - 1.0) > INTERPOLATION_TOLERANCE:
        logger.warning(f"dilation_flow t={t}: norm {norm:.9f} before renormalization")
    return WaveFunction(grid=grid, amps=amps / norm, hbar=psi0.hbar)


def compare_grid_vs_analytic(grid: Grid, g: GaussianState, t: float) -> float:
    """L² distance between the grid-evolved and the sampled analytic Gaussian at time t."""
    psi0 = sample_gaussian(grid, g)
    evolved = dilation_flow(psi0, t)
    analytic = sample_gaussian(grid, gaussian_dilation_evolve(g, t))
    error = l2_distance(evolved, analytic)
    logger.debug(f"grid vs analytic at hbar={g.hbar}, t={t}: {error:.3e}")
    return error
