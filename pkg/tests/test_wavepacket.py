"""
Unit tests for grid wavefunctions, coherent states and their diagnostics.
"""

import math

import numpy as np
import pytest

from ehrenfest_lab.errors import (
    GridMismatchError,
    GridTooCoarseError,
    GridTooSmallError,
    InvalidGridError,
    NotNormalizedError,
)
from ehrenfest_lab.models import GaussianState, WaveFunction
from ehrenfest_lab.wavepacket import (
    coherent_state,
    default_grid,
    l2_distance,
    make_grid,
    momentum_density,
    moments,
    overlap,
    position_entropy,
    sample_gaussian,
    translate,
)


class TestMakeGrid:
    """Test grid construction."""

    def test_valid(self):
        grid = make_grid(1024, 16.0)
        assert grid.n == 1024
        assert grid.dx == pytest.approx(16.0 / 1024)

    @pytest.mark.parametrize("n", [0, 4, 1000])
    def test_invalid_size(self, n):
        with pytest.raises(InvalidGridError):
            make_grid(n, 16.0)

    def test_invalid_length(self):
        with pytest.raises(InvalidGridError):
            make_grid(1024, -1.0)

    def test_default_grid_kept_for_moderate_hbar(self):
        grid = default_grid(0.01)
        assert (grid.n, grid.length) == (16384, 128.0)

    def test_default_grid_grows_for_small_hbar(self):
        grid = default_grid(1e-4)
        assert grid.n > 16384
        assert grid.dx <= math.sqrt(1e-4 / 2) / 4


class TestCoherentState:
    """Test coherent-state construction."""

    def test_unit_hbar_peak(self, coherent_unit):
        center = coherent_unit.grid.n // 2
        assert coherent_unit.grid.x[center] == 0.0
        assert abs(coherent_unit.amps[center]) == pytest.approx(0.7511255, abs=1e-6)

    def test_moments(self, coherent_unit):
        stats = moments(coherent_unit)
        assert stats.mean_q == pytest.approx(0.0, abs=1e-12)
        assert stats.mean_p == pytest.approx(0.0, abs=1e-12)
        assert stats.d_q == pytest.approx(1 / math.sqrt(2), abs=1e-9)
        assert stats.d_p == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_small_hbar_width(self):
        psi = coherent_state(make_grid(16384, 128.0), 0.0, 0.0, 0.01)
        assert moments(psi).d_q == pytest.approx(math.sqrt(0.005), abs=1e-9)

    def test_boosted_state(self, unit_grid):
        psi = coherent_state(unit_grid, 1.5, -0.5, 1.0)
        stats = moments(psi)
        assert stats.mean_q == pytest.approx(1.5, abs=1e-9)
        assert stats.mean_p == pytest.approx(-0.5, abs=1e-9)

    def test_too_coarse(self):
        with pytest.raises(GridTooCoarseError):
            coherent_state(make_grid(64, 16.0), 0.0, 0.0, 0.01)

    def test_too_small(self, unit_grid):
        with pytest.raises(GridTooSmallError):
            coherent_state(unit_grid, 12.0, 0.0, 1.0)

    def test_normalized(self, small_grid):
        assert coherent_state(small_grid, 0.3, 0.2, 0.05).norm == pytest.approx(1.0, abs=1e-12)


class TestMomentsAndEntropy:
    """Test moment and entropy diagnostics."""

    def test_rejects_unnormalized(self, unit_grid):
        psi = WaveFunction(grid=unit_grid, amps=np.ones(unit_grid.n) * 2.0, hbar=1.0)
        with pytest.raises(NotNormalizedError):
            moments(psi)
        with pytest.raises(NotNormalizedError):
            position_entropy(psi)

    def test_heisenberg_bound_squeezed(self, unit_grid):
        psi = sample_gaussian(unit_grid, GaussianState(hbar=1.0, a=0.5 + 0.8j))
        assert moments(psi).product >= 0.5 * (1 - 1e-9)

    def test_momentum_density_peak(self, unit_grid):
        rho_p = momentum_density(coherent_state(unit_grid, 0.0, 0.7, 1.0))
        assert np.sum(rho_p) == pytest.approx(1.0, abs=1e-12)
        assert np.all(rho_p >= 0)
        assert unit_grid.k[np.argmax(rho_p)] == pytest.approx(0.7, abs=2 * math.pi / unit_grid.length)

    def test_moments_grid_independent(self):
        coarse = moments(coherent_state(make_grid(1024, 32.0), 0.4, -0.3, 1.0))
        fine = moments(coherent_state(make_grid(2048, 32.0), 0.4, -0.3, 1.0))
        for name in ("mean_q", "mean_p", "d_q", "d_p"):
            assert getattr(fine, name) == pytest.approx(getattr(coarse, name), abs=1e-8)

    def test_gaussian_entropy(self, unit_grid):
        assert position_entropy(coherent_state(unit_grid, 0.0, 0.0, 1.0)) == pytest.approx(
            0.5 * math.log(math.pi * math.e), abs=1e-8
        )

    def test_entropy_translation_invariant(self, unit_grid):
        psi = coherent_state(unit_grid, 0.0, 0.7, 1.0)
        shifted = translate(psi, 2.5)
        assert moments(shifted).mean_q == pytest.approx(2.5, abs=1e-9)
        assert position_entropy(shifted) == pytest.approx(position_entropy(psi), abs=1e-9)


class TestOverlap:
    """Test overlaps and distances."""

    def test_self_overlap(self, coherent_unit):
        assert overlap(coherent_unit, coherent_unit) == pytest.approx(1.0, abs=1e-12)

    def test_displaced_coherent_overlap(self, unit_grid):
        # |⟨α|β⟩|² = exp(−|Δz|²/(2ℏ)) with Δz = Δq + iΔp
        psi1 = coherent_state(unit_grid, 0.0, 0.0, 1.0)
        psi2 = coherent_state(unit_grid, 1.0, 1.0, 1.0)
        assert abs(overlap(psi1, psi2)) ** 2 == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_grid_mismatch(self, coherent_unit, small_grid):
        other = coherent_state(small_grid, 0.0, 0.0, 1.0)
        with pytest.raises(GridMismatchError):
            overlap(coherent_unit, other)
        with pytest.raises(GridMismatchError):
            l2_distance(coherent_unit, other)

    def test_hbar_mismatch(self, unit_grid):
        with pytest.raises(GridMismatchError):
            overlap(coherent_state(unit_grid, 0, 0, 1.0), coherent_state(unit_grid, 0, 0, 0.5))
