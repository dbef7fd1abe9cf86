"""
Experiment orchestration: dilation delocalization, Ehrenfest-time scaling,
double-well transport onto the separatrix, the measurement story, plain
evolution and classical-structure reports.

Sweep points are independent; `map_sweep` fans them out over anyio worker
threads and returns results in input order.
"""

import logging
import math
from functools import partial
from typing import Any, Callable, List, Optional, Sequence, TypeVar

import anyio
import numpy as np
import pandas as pd
from scipy.stats import linregress

from . import classical, dilation, measurement, propagator, wavepacket
from .errors import (
    GridOverflowError,
    InsufficientSpanError,
    InterpolationLossError,
    InvalidHbarError,
    UnsupportedModelError,
)
from .models import (
    ClassicalModel,
    DoubleWellResult,
    DoubleWellRow,
    EhrenfestKind,
    EvolveResult,
    ExperimentConfig,
    FixedPointKind,
    GaussianState,
    Grid,
    ManifoldReport,
    MeasurementDemoResult,
    MeasurementDemoSummary,
    ModelId,
    PhasePoint,
    PotentialSpec,
    ScalingFit,
    Schedule,
    ScheduleKind,
    Snapshot,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_SWEEP_HBARS = [1e-2, 1e-3, 1e-4, 1e-5]
DEFAULT_HBAR = 0.01
DELOCALIZATION_THRESHOLD = 1.0
MIN_SWEEP_POINTS = 4
MIN_SWEEP_DECADES = 2.0

HUSIMI_Q = (-1.6, 1.6)
HUSIMI_P = (-0.8, 0.8)
HUSIMI_STEP = 0.02
TUBE_WIDTHS = 3.0
MANIFOLD_EPS = 1e-6
COLLAPSE_GRID_WIDTHS = 4
CAPTURE_WINDOWS = 3.0
RESAMPLE_COUNT = 10_000
COVARIANCE_TIME = 0.5
SENSITIVITY_EPS = 1e-8
SENSITIVITY_TARGET = 0.5
SENSITIVITY_T_MAX = 50.0
SAMPLE_ORBIT_START = PhasePoint(q=0.1, p=0.0)
SAMPLE_ORBIT_TIME = 10.0
CLASSICAL_DT = 1e-3


# Sweep fan-out
async def gather_sweep(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    """Run fn over items on worker threads, at most `workers` at a time, preserving order."""
    limiter = anyio.CapacityLimiter(max(1, workers))
    results: List[Any] = [None] * len(items)
    failures: List[Optional[BaseException]] = [None] * len(items)

    async def run_one(index: int, item: T) -> None:
        try:
            results[index] = await anyio.to_thread.run_sync(fn, item, limiter=limiter)
        except Exception as e:
            failures[index] = e

    async with anyio.create_task_group() as tg:
        for index, item in enumerate(items):
            tg.start_soon(run_one, index, item)

    for failure in failures:
        if failure is not None:
            raise failure
    return results


def map_sweep(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.info(f"Sweeping {len(items)} points on {workers} worker threads")
    return anyio.run(gather_sweep, fn, items, workers)


# Shared configuration helpers
def potential_for(model: ModelId) -> PotentialSpec:
    if model == ModelId.HARMONIC:
        return PotentialSpec.harmonic()
    if model == ModelId.DOUBLE_WELL:
        return PotentialSpec.double_well()
    raise UnsupportedModelError(f"model {model.value} has no potential", {"model": model.value})


def classical_model_for(model: ModelId) -> ClassicalModel:
    if model == ModelId.DILATION:
        return ClassicalModel.dilation()
    return ClassicalModel.from_potential(potential_for(model))


def grid_for(config: ExperimentConfig, hbar: float) -> Grid:
    length = config.grid_l or wavepacket.DEFAULT_GRID_L
    if config.grid_n is None:
        return wavepacket.default_grid(hbar, length)
    return wavepacket.make_grid(config.grid_n, length)


def dt_for(config: ExperimentConfig, hbar: float) -> float:
    return config.dt or propagator.default_dt(hbar)


def times_for(config: ExperimentConfig, hbar: float, default: Schedule) -> List[float]:
    return (config.schedule or default).resolve(hbar)


def _schedule_multiples(config: ExperimentConfig, hbar: float, default: Schedule) -> List[float]:
    schedule = config.schedule or default
    if schedule.kind == ScheduleKind.EHRENFEST:
        return list(schedule.values)
    t_full = dilation.ehrenfest_time(hbar)
    if t_full == 0:
        raise InvalidHbarError(
            f"Absolute times have no Ehrenfest multiple at hbar={hbar:g}; use an Ehrenfest schedule",
            {"hbar": hbar, "times": list(schedule.values)},
        )
    return [t / t_full for t in schedule.values]


def _hbars(config: ExperimentConfig, default: Sequence[float]) -> List[float]:
    return list(config.hbars or default)


# Dilation delocalization
DILATION_SCHEDULE = Schedule(kind=ScheduleKind.EHRENFEST, values=[0.0, 0.5, 1.0])


def _grid_error(grid: Grid, g0: GaussianState, t: float) -> float:
    try:
        return dilation.compare_grid_vs_analytic(grid, g0, t)
    except (GridOverflowError, InterpolationLossError) as e:
        logger.warning(f"Grid cross-check skipped at hbar={g0.hbar}, t={t:.6g}: {e.message}")
        return float("nan")


def _dilation_rows(config: ExperimentConfig, hbar: float) -> List[dict]:
    g0 = GaussianState(hbar=hbar)
    grid = grid_for(config, hbar)
    rows = []
    for t in times_for(config, hbar, DILATION_SCHEDULE):
        g = dilation.gaussian_dilation_evolve(g0, t)
        stats = g.moments()
        rows.append(
            {
                "hbar": hbar,
                "t": t,
                "dQ": stats.d_q,
                "dP": stats.d_p,
                "product": stats.product,
                "entropy": g.entropy(),
                "sup_flatness": dilation.sup_flatness(g),
                "grid_error": _grid_error(grid, g0, t),
            }
        )
    return rows


def run_dilation(config: ExperimentConfig) -> pd.DataFrame:
    """Analytic dilation track with a grid cross-check column, one row per (ℏ, t)."""
    hbars = _hbars(config, [DEFAULT_HBAR])
    logger.info(f"run_dilation: hbars={hbars}")
    per_hbar = map_sweep(partial(_dilation_rows, config), hbars, config.workers)
    return pd.DataFrame(
        [row for rows in per_hbar for row in rows],
        columns=["hbar", "t", "dQ", "dP", "product", "entropy", "sup_flatness", "grid_error"],
    )


# Ehrenfest-time scaling
def run_scaling_sweep(config: ExperimentConfig) -> ScalingFit:
    """Fit t*(ℏ) against ln(1/ℏ), t* being when ΔQ first reaches 1 on the analytic track."""
    hbars = sorted(_hbars(config, DEFAULT_SWEEP_HBARS), reverse=True)
    span = math.log10(max(hbars) / min(hbars))
    if len(set(hbars)) < MIN_SWEEP_POINTS or span < MIN_SWEEP_DECADES:
        raise InsufficientSpanError(
            f"Scaling sweep needs >= {MIN_SWEEP_POINTS} hbar values over >= {MIN_SWEEP_DECADES:g} decades",
            {"hbars": hbars, "decades": span},
        )

    t_star = [dilation.delocalization_time(GaussianState(hbar=h), DELOCALIZATION_THRESHOLD) for h in hbars]
    log_inverse = np.log(1.0 / np.asarray(hbars))
    fit = linregress(log_inverse, t_star)
    residual = float(np.max(np.abs(np.asarray(t_star) - (fit.slope * log_inverse + fit.intercept))))
    logger.info(f"scaling fit: slope={fit.slope:.12g} intercept={fit.intercept:.12g} residual={residual:.3e}")
    return ScalingFit(
        slope=float(fit.slope), intercept=float(fit.intercept), residual=residual, hbars=hbars, t_star=t_star
    )


# Double-well transport
DOUBLE_WELL_SCHEDULE = Schedule(kind=ScheduleKind.EHRENFEST, values=[0.0, 1.0, 2.0])


def husimi_axes() -> tuple:
    q_axis = np.round(np.arange(HUSIMI_Q[0], HUSIMI_Q[1] + HUSIMI_STEP / 2, HUSIMI_STEP), 12)
    p_axis = np.round(np.arange(HUSIMI_P[0], HUSIMI_P[1] + HUSIMI_STEP / 2, HUSIMI_STEP), 12)
    return q_axis, p_axis


def _doublewell_one(config: ExperimentConfig, hbar: float) -> DoubleWellResult:
    spec = PotentialSpec.double_well()
    model = ClassicalModel.from_potential(spec)
    origin = PhasePoint(q=0.0, p=0.0)
    delta = TUBE_WIDTHS * math.sqrt(hbar)

    branches = classical.unstable_manifold(model, origin, eps=MANIFOLD_EPS)
    grid = grid_for(config, hbar)
    psi0 = wavepacket.coherent_state(grid, 0.0, 0.0, hbar)
    multiples = _schedule_multiples(config, hbar, DOUBLE_WELL_SCHEDULE)
    times = times_for(config, hbar, DOUBLE_WELL_SCHEDULE)
    logger.info(f"run_doublewell: hbar={hbar}, n={grid.n}, L={grid.length}, times={times}")
    snapshots = propagator.evolve_observed(psi0, spec, times, dt_for(config, hbar), keep_states=True)

    q_axis, p_axis = husimi_axes()
    rows = []
    grids = []
    for k, snapshot in zip(multiples, snapshots):
        H = measurement.husimi(snapshot.state, q_axis, p_axis)
        disc = measurement.disc_mask(H, origin, delta)
        tube = measurement.tube_mask(H, list(branches), delta)
        lobes = tube & ~disc
        q_mesh = q_axis[:, None] * np.ones((1, p_axis.size))
        rows.append(
            DoubleWellRow(
                k=k,
                t=snapshot.t,
                mass_lobe_plus=measurement.region_mass(H, lobes & (q_mesh > 0)),
                mass_lobe_minus=measurement.region_mass(H, lobes & (q_mesh < 0)),
                mass_fixedpoint=measurement.region_mass(H, disc),
                tube_mass_total=measurement.region_mass(H, lobes),
                tube_mass_with_disc=measurement.region_mass(H, tube | disc),
            )
        )
        grids.append(H)
        logger.info(f"k={k:g}: lobes {rows[-1].mass_lobe_plus:.4f}/{rows[-1].mass_lobe_minus:.4f}, "
                    f"fixed point {rows[-1].mass_fixedpoint:.4f}")

    # drop the states once the Husimi densities exist
    snapshots = [s.model_copy(update={"state": None}) for s in snapshots]
    return DoubleWellResult(
        hbar=hbar, delta=delta, rows=rows, husimi=grids, snapshots=snapshots, branches=branches
    )


def run_doublewell(config: ExperimentConfig) -> List[DoubleWellResult]:
    """Coherent state at the hyperbolic point, evolved and binned onto the separatrix lobes."""
    hbars = _hbars(config, [DEFAULT_HBAR])
    return map_sweep(partial(_doublewell_one, config), hbars, config.workers)


# Measurement story
def _measurement_one(config: ExperimentConfig, hbar: float) -> MeasurementDemoResult:
    g0 = GaussianState(hbar=hbar)
    t_ehrenfest = dilation.ehrenfest_time(hbar, EhrenfestKind.FULL)
    g_t = dilation.gaussian_dilation_evolve(g0, t_ehrenfest)

    grid0 = grid_for(config, hbar)
    # the spread state gets a domain wide enough for its width at the same n
    spread_length = max(grid0.length, 16 * g_t.position_width)
    grid_t = wavepacket.make_grid(grid0.n, spread_length)
    psi0 = wavepacket.sample_gaussian(grid0, g0)
    psi_t = wavepacket.sample_gaussian(grid_t, g_t)

    initial = measurement.born_sample(psi0, config.samples, config.seed)
    spread = measurement.born_sample(psi_t, config.samples, config.seed + 1)
    x_star = float(spread.x[0])
    width = config.collapse_width or COLLAPSE_GRID_WIDTHS * grid_t.dx
    collapsed = measurement.collapse(psi_t, x_star, width)
    resampled = measurement.born_sample(collapsed, RESAMPLE_COUNT, config.seed + 2)
    capture = float(np.mean(np.abs(resampled.x - x_star) <= CAPTURE_WINDOWS * width))

    summary = MeasurementDemoSummary(
        hbar=hbar,
        samples=config.samples,
        dq_initial=float(np.std(initial.x)),
        dq_ehrenfest=float(np.std(spread.x)),
        t_ehrenfest=t_ehrenfest,
        x_star=x_star,
        collapse_width=width,
        capture_fraction=capture,
    )
    logger.info(
        f"measure: hbar={hbar} dQ(0)={summary.dq_initial:.6g} dQ(T)={summary.dq_ehrenfest:.6g} "
        f"capture={capture:.4f}"
    )
    return MeasurementDemoResult(summary=summary, initial=initial, ehrenfest=spread, resampled=resampled)


def run_measurement_demo(config: ExperimentConfig) -> List[MeasurementDemoResult]:
    """Measure at t = 0, evolve to ln(1/ℏ), measure again, collapse and re-measure."""
    hbars = _hbars(config, [DEFAULT_HBAR])
    return map_sweep(partial(_measurement_one, config), hbars, config.workers)


# Plain evolution
EVOLVE_SCHEDULE = Schedule(kind=ScheduleKind.EHRENFEST, values=[0.0, 0.5, 1.0])


def _evolve_dilation(psi0, times: List[float]) -> List[Snapshot]:
    snapshots = []
    for t in times:
        psi = dilation.dilation_flow(psi0, t)
        snapshots.append(
            Snapshot(t=t, moments=wavepacket.moments(psi), entropy=wavepacket.position_entropy(psi), state=psi)
        )
    return snapshots


def _evolve_one(config: ExperimentConfig, hbar: float) -> EvolveResult:
    grid = grid_for(config, hbar)
    psi0 = wavepacket.coherent_state(grid, 0.0, 0.0, hbar)
    times = times_for(config, hbar, EVOLVE_SCHEDULE)
    logger.info(f"run_evolve: model={config.model.value} hbar={hbar} times={times}")
    if config.model == ModelId.DILATION:
        snapshots = _evolve_dilation(psi0, times)
    else:
        snapshots = propagator.evolve_observed(
            psi0, potential_for(config.model), times, dt_for(config, hbar), keep_states=True
        )
    final = snapshots[-1].state
    snapshots = [s.model_copy(update={"state": None}) for s in snapshots]
    return EvolveResult(hbar=hbar, model=config.model, snapshots=snapshots, final=final)


def run_evolve(config: ExperimentConfig) -> List[EvolveResult]:
    hbars = _hbars(config, [DEFAULT_HBAR])
    return map_sweep(partial(_evolve_one, config), hbars, config.workers)


# Classical structure
def run_manifold(config: ExperimentConfig) -> ManifoldReport:
    """Fixed points, invariant manifolds of the first hyperbolic point, sensitivity and a sample orbit."""
    model = classical_model_for(config.model)
    dt = config.dt or CLASSICAL_DT
    points = classical.fixed_points(model)
    report = {"model": config.model, "fixed_points": points}

    hyperbolic = [fp for fp in points if fp.kind == FixedPointKind.HYPERBOLIC]
    if hyperbolic:
        base = hyperbolic[0].point
        unstable = classical.unstable_manifold(model, base, eps=MANIFOLD_EPS)
        stable = classical.stable_manifold(model, base, eps=MANIFOLD_EPS)
        deviation = max(
            classical.manifold_covariance_check(model, curve, COVARIANCE_TIME, min(dt, 1e-4)) for curve in unstable
        )
        sensitivity = classical.sensitivity_time(
            model, base, SENSITIVITY_EPS, SENSITIVITY_TARGET, dt, SENSITIVITY_T_MAX
        )
        report.update(
            unstable=unstable,
            stable=stable,
            covariance_deviation=deviation,
            sensitivity=sensitivity,
            growth_rate=classical.growth_rate(sensitivity, 10 * SENSITIVITY_EPS, 1e-2),
        )
        logger.info(f"manifold: covariance deviation {deviation:.3e}, sensitivity time {sensitivity.time}")
    else:
        logger.info(f"manifold: {config.model.value} has no hyperbolic fixed point, skipping manifolds")

    trajectory = classical.classical_flow(model, SAMPLE_ORBIT_START, SAMPLE_ORBIT_TIME, dt)
    energy = np.array([classical.hamiltonian_value(model, x) for x in trajectory.points])
    return ManifoldReport(**report, trajectory=trajectory, trajectory_energy=energy)
