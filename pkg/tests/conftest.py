"""
Pytest configuration and fixtures for ehrenfest-lab tests.
"""

import pytest

from ehrenfest_lab.models import ClassicalModel, ExperimentConfig, GaussianState, PotentialSpec
from ehrenfest_lab.wavepacket import coherent_state, make_grid


@pytest.fixture
def small_grid():
    """n = 1024 on [−8, 8): resolves coherent states down to hbar ≈ 0.02."""
    return make_grid(1024, 16.0)


@pytest.fixture
def unit_grid():
    """Grid for hbar = 1 coherent states."""
    return make_grid(2048, 32.0)


@pytest.fixture
def coherent_unit(unit_grid):
    return coherent_state(unit_grid, 0.0, 0.0, 1.0)


@pytest.fixture
def dilation_grid():
    """Grid fine enough for hbar = 0.01 dilation runs up to t = 2."""
    return make_grid(4096, 32.0)


@pytest.fixture
def gaussian_001():
    return GaussianState(hbar=0.01)


@pytest.fixture
def double_well():
    return PotentialSpec.double_well()


@pytest.fixture
def harmonic():
    return PotentialSpec.harmonic()


@pytest.fixture
def double_well_model(double_well):
    return ClassicalModel.from_potential(double_well)


@pytest.fixture
def harmonic_model(harmonic):
    return ClassicalModel.from_potential(harmonic)


@pytest.fixture
def dilation_model():
    return ClassicalModel.dilation()


@pytest.fixture
def run_config(tmp_path):
    """Factory for configs writing into a temporary run directory."""
    def _create(**overrides):
        overrides.setdefault("out_dir", tmp_path / "run")
        return ExperimentConfig(**overrides)

    return _create

