"""
Position measurement: Born-rule sampling, collapse onto a finite-resolution
window, Husimi phase-space densities and mass near invariant curves.
"""

import logging
import math
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import chisquare, kstest

from .errors import (
    EmptyCurveError,
    GridMismatchError,
    InvalidParameterError,
    InvalidWindowError,
    ZeroMassError,
)
from .models import HusimiGrid, ManifoldCurve, PhasePoint, SampleBatch, WaveFunction, WindowShape
from .wavepacket import _require_normalized

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"
BOX_HALF_WIDTHS = 3.0
MIN_WINDOW_POINTS = 2
ZERO_MASS = 1e-12
# Coherent overlaps are truncated where the Gaussian envelope is below e^{-50}.
HUSIMI_CUTOFF = 10.0


def _bin_probabilities(psi: WaveFunction) -> np.ndarray:
    weights = psi.density * psi.grid.dx
    return weights / np.sum(weights)


def born_sample(psi: WaveFunction, count: int, seed: int) -> SampleBatch:
    """Draw `count` positions from |ψ|² by inverse CDF on the grid bins.

    Within a bin the density is constant, so the position is placed linearly
    between the bin edges.
    """
    _require_normalized(psi)
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}", {"count": count})

    grid = psi.grid
    probabilities = _bin_probabilities(psi)
    cdf = np.cumsum(probabilities)
    cdf[-1] = 1.0

    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(count)
    chosen = np.minimum(np.searchsorted(cdf, u, side="right"), grid.n - 1)
    lower = np.where(chosen > 0, cdf[chosen - 1], 0.0)
    fraction = np.clip((u - lower) / probabilities[chosen], 0.0, np.nextafter(1.0, 0.0))
    x = grid.x_min + grid.dx * (chosen + fraction)
    bins = np.clip(np.floor((x - grid.x_min) / grid.dx).astype(np.int64), 0, grid.n - 1)

    logger.debug(f"born_sample: {count} draws with seed {seed}")
    return SampleBatch(grid=grid, x=x, bins=bins, seed=seed, algorithm=RNG_ALGORITHM)


def exact_cdf(psi: WaveFunction) -> Callable[[np.ndarray], np.ndarray]:
    """Piecewise-linear CDF of the grid density |ψᵢ|²·dx."""
    grid = psi.grid
    edges = grid.x_min + grid.dx * np.arange(grid.n + 1)
    values = np.concatenate(([0.0], np.cumsum(_bin_probabilities(psi))))
    values[-1] = 1.0
    return partial(np.interp, xp=edges, fp=values)


def ks_distance(batch: SampleBatch, psi: WaveFunction) -> float:
    return float(kstest(batch.x, exact_cdf(psi)).statistic)


def chi_square_pvalue(batch: SampleBatch, psi: WaveFunction, min_expected: float = 20.0) -> float:
    """Chi-square p-value of bin counts, pooling bins expected to hold fewer than `min_expected`."""
    observed = np.bincount(batch.bins, minlength=psi.grid.n).astype(float)
    expected = _bin_probabilities(psi) * len(batch)

    tested = expected >= min_expected
    observed_groups = list(observed[tested])
    expected_groups = list(expected[tested])
    pooled = float(np.sum(expected[~tested]))
    if pooled > 0:
        observed_groups.append(float(np.sum(observed[~tested])))
        expected_groups.append(pooled)
    if len(expected_groups) < 2:
        raise InvalidParameterError("Too few bins with enough expected counts for a chi-square test")

    result = chisquare(observed_groups, expected_groups)
    logger.debug(f"chi-square over {len(expected_groups)} groups: p={result.pvalue:.4g}")
    return float(result.pvalue)


def collapse(
    psi: WaveFunction,
    x_star: float,
    width: float,
    window: WindowShape = WindowShape.GAUSSIAN,
) -> WaveFunction:
    """Post-measurement state for an outcome x_star observed at resolution `width`."""
    if width < MIN_WINDOW_POINTS * psi.grid.dx:
        raise InvalidWindowError(
            f"Window width {width:.6g} is below {MIN_WINDOW_POINTS}·dx={MIN_WINDOW_POINTS * psi.grid.dx:.6g}",
            {"width": width, "dx": psi.grid.dx},
        )
    x = psi.grid.x
    if window == WindowShape.BOX:
        mask = (np.abs(x - x_star) <= BOX_HALF_WIDTHS * width).astype(float)
    else:
        mask = np.exp(-((x - x_star) ** 2) / (2 * width ** 2))

    amps = psi.amps * mask
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)) * psi.grid.dx)
    if norm < ZERO_MASS:
        raise ZeroMassError(
            f"No probability left after collapsing at x*={x_star:.6g}",
            {"x_star": x_star, "width": width, "norm": norm},
        )
    logger.debug(f"collapse at x*={x_star:.6g} ({window.value}, w={width:.3g}) kept norm {norm:.6g}")
    return WaveFunction(grid=psi.grid, amps=amps / norm, hbar=psi.hbar)


def _check_uniform(axis: np.ndarray, name: str) -> None:
    if axis.ndim != 1 or axis.size == 0:
        raise GridMismatchError(f"{name} must be a non-empty 1-D axis")
    if axis.size > 2:
        steps = np.diff(axis)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0) or steps[0] <= 0:
            raise GridMismatchError(f"{name} must be uniform and ascending")


def husimi(psi: WaveFunction, q_axis: Sequence[float], p_axis: Sequence[float]) -> HusimiGrid:
    """|⟨q,p|ψ⟩|² on the mesh q_axis × p_axis, with ⟨x|q,p⟩ the a = 1 coherent state."""
    q_axis = np.asarray(q_axis, dtype=float)
    p_axis = np.asarray(p_axis, dtype=float)
    _check_uniform(q_axis, "q_axis")
    _check_uniform(p_axis, "p_axis")

    hbar = psi.hbar
    x = psi.grid.x
    dx = psi.grid.dx
    reach = HUSIMI_CUTOFF * math.sqrt(hbar)
    prefactor = (math.pi * hbar) ** -0.25

    values = np.empty((q_axis.size, p_axis.size))
    for i, q in enumerate(q_axis):
        window = np.abs(x - q) <= reach
        shifted = x[window] - q
        weighted = psi.amps[window] * np.exp(-shifted ** 2 / (2 * hbar))
        phases = np.exp(-1j * np.outer(p_axis, shifted) / hbar)
        values[i] = np.abs(prefactor * (phases @ weighted) * dx) ** 2

    grid = HusimiGrid(q_axis=q_axis, p_axis=p_axis, values=values, hbar=hbar)
    logger.debug(f"husimi: {q_axis.size}x{p_axis.size} cells, mass {grid.mass:.6f}")
    return grid


def disc_mask(H: HusimiGrid, center: PhasePoint, radius: float) -> np.ndarray:
    q, p = np.meshgrid(H.q_axis, H.p_axis, indexing="ij")
    return np.hypot(q - center.q, p - center.p) <= radius


def _densify(curve: ManifoldCurve, spacing: float) -> np.ndarray:
    arclength = curve.arclength
    if arclength[-1] == 0:
        return np.column_stack([curve.q, curve.p])
    samples = np.linspace(0.0, arclength[-1], int(math.ceil(arclength[-1] / spacing)) + 1)
    return np.column_stack([np.interp(samples, arclength, curve.q), np.interp(samples, arclength, curve.p)])


def tube_mask(H: HusimiGrid, curves: Sequence[ManifoldCurve], delta: float) -> np.ndarray:
    """Cells within Euclidean phase-space distance delta of the union of curves."""
    if not delta > 0:
        raise InvalidParameterError(f"delta must be positive, got {delta}", {"delta": delta})
    if not curves or any(len(curve) == 0 for curve in curves):
        raise EmptyCurveError("tube_mask needs at least one non-empty curve")

    spacing = min(delta, H.dq, H.dp) / 4
    points = np.vstack([_densify(curve, spacing) for curve in curves])
    q, p = np.meshgrid(H.q_axis, H.p_axis, indexing="ij")
    distance, _ = cKDTree(points).query(np.column_stack([q.ravel(), p.ravel()]))
    return (distance <= delta).reshape(q.shape)


def region_mass(H: HusimiGrid, mask: np.ndarray) -> float:
    """Fraction of the Husimi mass held by the cells selected by `mask`."""
    total = H.mass
    if total <= 0:
        return 0.0
    return float(np.sum(H.values[mask]) * H.cell_weight / total)


def tube_mass(H: HusimiGrid, curves: Sequence[ManifoldCurve], delta: float) -> float:
    return region_mass(H, tube_mask(H, curves, delta))
