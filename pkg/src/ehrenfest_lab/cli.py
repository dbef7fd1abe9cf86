"""
CLI entry point for ehrenfest-lab.

Subcommands:
- evolve: snapshot series and final wavefunction for any model
- dilation: dilation delocalization table
- sweep: Ehrenfest-time scaling fit
- doublewell: Husimi mass transport onto the separatrix
- measure: measure, evolve, measure, collapse, re-measure
- manifold: fixed points, invariant manifolds and sensitivity
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from . import experiments, output
from .config import ENV_LOG_LEVEL, ENV_OUT_DIR, ENV_WORKERS, build_config, load_config_file
from .errors import ConfigError, EhrenfestLabError
from .models import ExperimentConfig, ModelId

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(funcName)s:%(lineno)d] - %(message)s"
EXIT_VALIDATION = 2


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
        force=True,
    )
    # Reduce third-party noise
    logging.getLogger("numexpr").setLevel(logging.WARNING)
    logging.getLogger("asyncio").setLevel(logging.WARNING)


def _tag(hbar: float) -> str:
    return f"hbar{hbar:g}"


# Command handlers: run the experiment, then write its files into the run directory.
def _cmd_evolve(config: ExperimentConfig, run: output.RunDirectory) -> Dict[str, object]:
    summary: Dict[str, object] = {"command": "evolve", "model": config.model.value}
    for result in experiments.run_evolve(config):
        tag = _tag(result.hbar)
        run.write_frame(f"snapshots_{tag}.csv", output.snapshots_frame(result.snapshots))
        output.write_wavefunction(
            result.final, run.path(f"wavefunction_{tag}.csv"), result.snapshots[-1].t, result.model.value
        )
        last = result.snapshots[-1].moments
        summary[f"{tag}.final_dQ"] = last.d_q
        summary[f"{tag}.final_dP"] = last.d_p
    return summary


def _cmd_dilation(config: ExperimentConfig, run: output.RunDirectory) -> Dict[str, object]:
    table = experiments.run_dilation(config)
    run.write_frame("dilation.csv", table)
    return {"command": "dilation", "rows": len(table), "max_grid_error": float(table["grid_error"].max())}


def _cmd_sweep(config: ExperimentConfig, run: output.RunDirectory) -> Dict[str, object]:
    fit = experiments.run_scaling_sweep(config)
    output.write_rows(
        [{"hbar": h, "t_star": t} for h, t in zip(fit.hbars, fit.t_star)], run.path("sweep.csv")
    )
    return {"command": "sweep", "slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}


def _cmd_doublewell(config: ExperimentConfig, run: output.RunDirectory) -> Dict[str, object]:
    summary: Dict[str, object] = {"command": "doublewell"}
    results = experiments.run_doublewell(config)
    # the separatrix is classical, shared by every hbar
    for curve in results[0].branches:
        run.write_frame(f"separatrix_{curve.branch.value}.csv", output.manifold_frame(curve))
    for result in results:
        tag = _tag(result.hbar)
        rows = [row.model_dump() for row in result.rows]
        output.write_rows(rows, run.path(f"doublewell_{tag}.csv"))
        run.write_frame(f"snapshots_{tag}.csv", output.snapshots_frame(result.snapshots))
        for row, H in zip(result.rows, result.husimi):
            run.write_frame(f"husimi_{tag}_k{row.k:g}.csv", output.husimi_frame(H))
        summary[f"{tag}.delta"] = result.delta
        for row in result.rows:
            summary[f"{tag}.k{row.k:g}.tube_mass_total"] = row.tube_mass_total
    return summary


def _cmd_measure(config: ExperimentConfig, run: output.RunDirectory) -> Dict[str, object]:
    summary: Dict[str, object] = {"command": "measure"}
    for result in experiments.run_measurement_demo(config):
        tag = _tag(result.summary.hbar)
        run.write_frame(f"samples_{tag}_t0.csv", output.samples_frame(result.initial))
        run.write_frame(f"samples_{tag}_tE.csv", output.samples_frame(result.ehrenfest))
        run.write_frame(f"samples_{tag}_collapsed.csv", output.samples_frame(result.resampled))
        for key, value in result.summary.model_dump().items():
            summary[f"{tag}.{key}"] = value
    return summary


def _cmd_manifold(config: ExperimentConfig, run: output.RunDirectory) -> Dict[str, object]:
    report = experiments.run_manifold(config)
    run.write_text("fixed_points.txt", output.fixed_point_report(report.fixed_points))
    run.write_frame("trajectory.csv", output.trajectory_frame(report.trajectory, report.trajectory_energy))
    summary: Dict[str, object] = {"command": "manifold", "model": config.model.value}
    for name, curves in (("unstable", report.unstable), ("stable", report.stable)):
        for curve in curves or ():
            run.write_frame(f"{name}_{curve.branch.value}.csv", output.manifold_frame(curve))
            summary[f"{name}_{curve.branch.value}.points"] = len(curve)
    if report.sensitivity is not None:
        summary["covariance_deviation"] = report.covariance_deviation
        summary["sensitivity_reached"] = report.sensitivity.reached
        summary["sensitivity_time"] = report.sensitivity.time
        summary["growth_rate"] = report.growth_rate
    summary["energy_drift"] = float(abs(report.trajectory_energy - report.trajectory_energy[0]).max())
    return summary


COMMANDS: Dict[str, Callable[[ExperimentConfig, output.RunDirectory], Dict[str, object]]] = {
    "evolve": _cmd_evolve,
    "dilation": _cmd_dilation,
    "sweep": _cmd_sweep,
    "doublewell": _cmd_doublewell,
    "measure": _cmd_measure,
    "manifold": _cmd_manifold,
}

COMMAND_MODELS = {
    "dilation": ModelId.DILATION,
    "sweep": ModelId.DILATION,
    "measure": ModelId.DILATION,
    "doublewell": ModelId.DOUBLE_WELL,
}


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    default_level = os.getenv(ENV_LOG_LEVEL, "INFO")
    parser.add_argument("--hbar", type=float, action="append", help="Planck constant value (repeatable)")
    parser.add_argument("--model", choices=[m.value for m in ModelId], help="Model: dilation, harmonic or doublewell")
    parser.add_argument("--t", type=float, action="append", help="Absolute snapshot time (repeatable)")
    parser.add_argument(
        "--t-ehrenfest", type=float, action="append", dest="t_ehrenfest",
        help="Snapshot time as a multiple k of ln(1/hbar) (repeatable)",
    )
    parser.add_argument("--grid-n", type=int, help="Grid points (power of two)")
    parser.add_argument("--grid-l", type=float, help="Grid length L")
    parser.add_argument("--dt", type=float, help="Time step")
    parser.add_argument("--seed", type=int, help="Random seed for sampling")
    parser.add_argument("--samples", type=int, help="Number of Born-rule samples")
    parser.add_argument("--collapse-width", type=float, help="Collapse window width (default 4*dx)")
    parser.add_argument(
        "--workers", type=int,
        help=f"Worker threads for sweeps (env: {ENV_WORKERS}, default 1)",
    )
    parser.add_argument("--out", help=f"Run directory (env: {ENV_OUT_DIR}, default runs/<command>)")
    parser.add_argument("--config", type=Path, help="Config file of 'key = value' lines")
    parser.add_argument(
        "--log-level", default=default_level,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help=f"Log level (default: {default_level}, env: {ENV_LOG_LEVEL})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehrenfest-lab",
        description="ehrenfest-lab - semiclassical wavepacket experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Dilation delocalization at hbar = 0.01, up to ln(1/hbar)
  ehrenfest-lab dilation --hbar 0.01 --t-ehrenfest 0 --t-ehrenfest 0.5 --t-ehrenfest 1

  # Ehrenfest-time scaling over four decades
  ehrenfest-lab sweep --hbar 1e-2 --hbar 1e-3 --hbar 1e-4 --hbar 1e-5

  # Double-well transport with settings from a file
  ehrenfest-lab doublewell --config doublewell.conf --out runs/dw
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=handler.__name__.replace("_cmd_", "") + " experiment")
        _add_common_arguments(sub)
    return parser


def _flags(args: argparse.Namespace) -> Dict[str, object]:
    return {
        "hbar": args.hbar,
        "model": args.model,
        "t": args.t,
        "t-ehrenfest": args.t_ehrenfest,
        "grid-n": args.grid_n,
        "grid-l": args.grid_l,
        "dt": args.dt,
        "seed": args.seed,
        "samples": args.samples,
        "collapse-width": args.collapse_width,
        "workers": args.workers,
        "out": args.out,
    }


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    file_values = load_config_file(args.config) if args.config else None
    flags = _flags(args)
    if flags["model"] is None and args.command in COMMAND_MODELS and not (file_values or {}).get("model"):
        flags["model"] = COMMAND_MODELS[args.command].value
    config = build_config(flags, file_values)
    if args.out is None and not (file_values or {}).get("out") and not os.getenv(ENV_OUT_DIR):
        config = config.model_copy(update={"out_dir": Path("runs") / args.command})
    return config


def _report_failure(error: Dict[str, object]) -> None:
    print(json.dumps(error, sort_keys=True, default=str), file=sys.stderr)


def cli(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one experiment and return the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        config = _resolve_config(args)
        expected = COMMAND_MODELS.get(args.command)
        if expected is not None and config.model != expected:
            raise ConfigError(
                f"'{args.command}' requires model {expected.value}",
                {"command": args.command, "model": config.model.value},
            )
        logger.info(f"Starting '{args.command}' with model={config.model.value}, hbars={config.hbars}")
        run = output.RunDirectory.create(config.out_dir, config)
        summary = COMMANDS[args.command](config, run)
        run.write_summary(summary)
        logger.info(f"'{args.command}' finished, results in {run.root}")
        return 0
    except EhrenfestLabError as e:
        logger.error(f"{args.command} failed: {e.message}", extra={"error": e.to_dict()})
        _report_failure(e.to_dict())
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        _report_failure(
            {"error_type": "ValidationError", "message": str(e), "exit_code": EXIT_VALIDATION,
             "details": {"errors": json.loads(e.json())}}
        )
        return EXIT_VALIDATION
    except Exception as e:
        logger.exception(f"Unexpected error in '{args.command}': {e}")
        _report_failure({"error_type": type(e).__name__, "message": str(e), "exit_code": 1, "details": {}})
        return 1


def main() -> None:
    try:
        sys.exit(cli())
    except KeyboardInterrupt:
        print("\nInterrupted")
        sys.exit(130)


if __name__ == "__main__":
    main()
