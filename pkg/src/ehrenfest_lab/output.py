"""
Run directory layout and result writers.

Every table is written through pandas with full-precision floats and "\n"
line endings so identical runs produce identical bytes.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .models import (
    ExperimentConfig,
    FixedPoint,
    HusimiGrid,
    ManifoldCurve,
    SampleBatch,
    Snapshot,
    Trajectory,
    WaveFunction,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
CONFIG_ECHO = "config.echo"
SUMMARY = "summary.txt"


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"wrote {len(frame)} rows to {path}")
    return path


def write_rows(rows: Sequence[Mapping[str, object]], path: Path, columns: Optional[List[str]] = None) -> Path:
    return write_frame(pd.DataFrame(list(rows), columns=columns), path)


def snapshots_frame(snapshots: Iterable[Snapshot]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "t": s.t,
                "meanQ": s.moments.mean_q,
                "meanP": s.moments.mean_p,
                "dQ": s.moments.d_q,
                "dP": s.moments.d_p,
                "product": s.moments.product,
                "entropy": s.entropy,
            }
            for s in snapshots
        ],
        columns=["t", "meanQ", "meanP", "dQ", "dP", "product", "entropy"],
    )


def trajectory_frame(trajectory: Trajectory, energies: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"t": trajectory.times, "q": trajectory.q, "p": trajectory.p, "h": energies})


def manifold_frame(curve: ManifoldCurve) -> pd.DataFrame:
    return pd.DataFrame({"s": curve.arclength, "q": curve.q, "p": curve.p})


def samples_frame(batch: SampleBatch) -> pd.DataFrame:
    return pd.DataFrame({"idx": np.arange(len(batch)), "x": batch.x, "bin": batch.bins})


def husimi_frame(H: HusimiGrid) -> pd.DataFrame:
    q, p = np.meshgrid(H.q_axis, H.p_axis, indexing="ij")
    return pd.DataFrame({"q": q.ravel(), "p": p.ravel(), "value": H.values.ravel()})


def write_wavefunction(psi: WaveFunction, path: Path, t: float, model: str) -> Path:
    """Write `x,re,im` plus a `.meta.json` companion holding grid and run metadata."""
    path = Path(path)
    write_frame(pd.DataFrame({"x": psi.grid.x, "re": psi.amps.real, "im": psi.amps.imag}), path)
    meta = {"n": psi.grid.n, "L": psi.grid.length, "hbar": psi.hbar, "t": t, "model": model}
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def fixed_point_report(points: Sequence[FixedPoint]) -> str:
    lines = [f"{'q':>22} {'p':>22} {'kind':>10} {'exponent':>22} {'frequency':>22}"]
    for fp in points:
        lines.append(
            f"{fp.point.q:>22.17g} {fp.point.p:>22.17g} {fp.kind.value:>10} "
            f"{fp.exponent:>22.17g} {fp.frequency:>22.17g}"
        )
    return "\n".join(lines) + "\n"


class RunDirectory:
    """One directory per run holding config.echo, the CSV outputs and summary.txt."""

    def __init__(self, root: Path):
        self.root = Path(root)

    @classmethod
    def create(cls, root: Path, config: ExperimentConfig) -> "RunDirectory":
        run = cls(root)
        run.root.mkdir(parents=True, exist_ok=True)
        echo = config.model_dump(mode="json")
        (run.root / CONFIG_ECHO).write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Run directory: {run.root}")
        return run

    def path(self, name: str) -> Path:
        return self.root / name

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        return write_frame(frame, self.path(name))

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        return target

    def write_summary(self, entries: Mapping[str, object]) -> Path:
        lines = []
        for key, value in entries.items():
            if isinstance(value, float):
                value = format(value, ".17g")
            lines.append(f"{key} = {value}")
        return self.write_text(SUMMARY, "\n".join(lines) + "\n")
