"""
Tests for experiment orchestration and the sweep fan-out.
"""

import math

import numpy as np
import pytest

from ehrenfest_lab.errors import InsufficientSpanError, InvalidHbarError
from ehrenfest_lab.experiments import (
    gather_sweep,
    husimi_axes,
    map_sweep,
    run_dilation,
    run_doublewell,
    run_evolve,
    run_manifold,
    run_measurement_demo,
    run_scaling_sweep,
)
from ehrenfest_lab.models import ExperimentConfig, ModelId, Schedule, ScheduleKind


def _square(x):
    return x * x


def _fail_on_two(x):
    if x == 2:
        raise ValueError("two")
    return x


class TestSweep:
    """Test ordered fan-out over worker threads."""

    def test_serial(self):
        assert map_sweep(_square, [3, 1, 2]) == [9, 1, 4]

    def test_threaded_preserves_order(self):
        assert map_sweep(_square, range(8), workers=3) == [x * x for x in range(8)]

    def test_failure_propagates(self):
        with pytest.raises(ValueError, match="two"):
            map_sweep(_fail_on_two, [1, 2, 3], workers=2)

    @pytest.mark.asyncio
    async def test_gather(self):
        assert await gather_sweep(_square, [4, 5, 6], 2) == [16, 25, 36]


class TestRunDilation:
    """Test the dilation delocalization table."""

    def test_rows(self, run_config):
        frame = run_dilation(run_config(hbars=[0.01], grid_n=4096, grid_l=32.0))
        assert list(frame.columns) == [
            "hbar", "t", "dQ", "dP", "product", "entropy", "sup_flatness", "grid_error"
        ]
        assert frame["t"].tolist() == pytest.approx([0.0, math.log(10), math.log(100)])
        assert frame["dQ"].tolist() == pytest.approx([0.0707107, 0.707107, 7.07107], abs=1e-6)
        assert np.all(np.abs(frame["product"] - 0.005) <= 1e-9)
        assert frame["grid_error"].iloc[0] <= 1e-6
        # the full Ehrenfest state no longer fits on a 32-wide domain
        assert math.isnan(frame["grid_error"].iloc[2])

    def test_several_hbars(self, run_config):
        schedule = Schedule(kind=ScheduleKind.ABSOLUTE, values=[0.0, 1.0])
        frame = run_dilation(run_config(hbars=[0.01, 0.04], schedule=schedule, grid_n=4096, grid_l=32.0, workers=2))
        assert frame["hbar"].tolist() == [0.01, 0.01, 0.04, 0.04]
        assert frame["entropy"].iloc[1] - frame["entropy"].iloc[0] == pytest.approx(1.0, abs=1e-12)


class TestScalingSweep:
    """Test the Ehrenfest-time scaling fit."""

    def test_default_fit(self, run_config):
        fit = run_scaling_sweep(run_config())
        assert fit.slope == pytest.approx(0.5, abs=1e-6)
        assert fit.intercept == pytest.approx(0.5 * math.log(2), abs=1e-6)
        assert fit.residual <= 1e-10
        assert fit.hbars == [1e-2, 1e-3, 1e-4, 1e-5]

    def test_insufficient_span(self, run_config):
        with pytest.raises(InsufficientSpanError):
            run_scaling_sweep(run_config(hbars=[1e-2, 1e-3]))
        with pytest.raises(InsufficientSpanError):
            run_scaling_sweep(run_config(hbars=[0.5, 0.4, 0.3, 0.2]))


class TestMeasurementDemo:
    """Test the measurement story at hbar = 0.01."""

    @pytest.fixture(scope="class")
    def demo(self):
        (result,) = run_measurement_demo(ExperimentConfig(hbars=[0.01]))
        return result

    def test_widths(self, demo):
        assert demo.summary.dq_initial == pytest.approx(0.0707, abs=1e-3)
        assert demo.summary.dq_ehrenfest == pytest.approx(7.071, abs=0.07)
        assert demo.summary.t_ehrenfest == pytest.approx(math.log(100))

    def test_capture(self, demo):
        assert demo.summary.capture_fraction >= 0.99
        assert demo.summary.x_star == demo.ehrenfest.x[0]

    def test_seeds(self, demo):
        assert (demo.initial.seed, demo.ehrenfest.seed, demo.resampled.seed) == (0, 1, 2)
        assert len(demo.initial) == 100_000
        assert len(demo.resampled) == 10_000

    def test_reproducible(self, run_config):
        config = run_config(hbars=[0.01], samples=2000)
        (first,) = run_measurement_demo(config)
        (second,) = run_measurement_demo(config)
        np.testing.assert_array_equal(first.resampled.x, second.resampled.x)
        assert first.summary == second.summary


class TestRunEvolve:
    """Test plain evolution runs."""

    def test_harmonic(self, run_config):
        schedule = Schedule(values=[0.0, 0.25])
        config = run_config(model=ModelId.HARMONIC, hbars=[0.1], schedule=schedule, grid_n=1024, grid_l=16.0, dt=1e-3)
        (result,) = run_evolve(config)
        assert [s.t for s in result.snapshots] == [0.0, 0.25]
        assert all(s.state is None for s in result.snapshots)
        assert result.final.norm == pytest.approx(1.0, abs=1e-10)

    def test_dilation(self, run_config):
        schedule = Schedule(kind=ScheduleKind.EHRENFEST, values=[0.0, 0.5])
        (result,) = run_evolve(run_config(hbars=[0.01], schedule=schedule, grid_n=4096, grid_l=32.0))
        assert result.snapshots[-1].moments.d_q == pytest.approx(0.707107, rel=1e-5)


class TestRunManifold:
    """Test classical-structure reports."""

    def test_harmonic_has_no_manifolds(self, run_config):
        report = run_manifold(run_config(model=ModelId.HARMONIC))
        assert report.unstable is None and report.sensitivity is None
        assert len(report.fixed_points) == 1
        assert np.max(np.abs(report.trajectory_energy - 0.01)) <= 1e-6

    @pytest.mark.slow
    def test_double_well(self, run_config):
        report = run_manifold(run_config(model=ModelId.DOUBLE_WELL))
        assert report.covariance_deviation <= 1e-4
        assert report.growth_rate == pytest.approx(2.0, rel=0.05)
        assert report.sensitivity.reached
        assert len(report.stable) == 2


class TestRunDoubleWell:
    """Test transport of Husimi mass onto the separatrix."""

    def test_husimi_axes_symmetric(self):
        q_axis, p_axis = husimi_axes()
        np.testing.assert_array_equal(q_axis, -q_axis[::-1])
        np.testing.assert_array_equal(p_axis, -p_axis[::-1])

    def test_absolute_schedule_needs_ehrenfest_time(self, run_config):
        schedule = Schedule(kind=ScheduleKind.ABSOLUTE, values=[0.0, 0.5])
        config = run_config(
            model=ModelId.DOUBLE_WELL, hbars=[1.0], schedule=schedule, grid_n=1024, grid_l=32.0, dt=1e-2
        )
        with pytest.raises(InvalidHbarError) as excinfo:
            run_doublewell(config)
        assert excinfo.value.exit_code == 2
        assert excinfo.value.details["hbar"] == 1.0

    @pytest.mark.slow
    def test_transport(self, run_config):
        schedule = Schedule(kind=ScheduleKind.EHRENFEST, values=[0.0, 1.0])
        config = run_config(
            model=ModelId.DOUBLE_WELL, hbars=[0.01], schedule=schedule, grid_n=2048, grid_l=16.0, dt=1e-3
        )
        (result,) = run_doublewell(config)
        start, end = result.rows
        assert result.delta == pytest.approx(0.3)
        assert start.mass_lobe_plus < start.mass_fixedpoint
        assert start.mass_lobe_minus < start.mass_fixedpoint
        assert end.tube_mass_total >= 5 * start.tube_mass_total
        assert abs(end.mass_lobe_plus - end.mass_lobe_minus) <= 0.02 * max(end.mass_lobe_plus, end.mass_lobe_minus)
        assert all(s.state is None for s in result.snapshots)
