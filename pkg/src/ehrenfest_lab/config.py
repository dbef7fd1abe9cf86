"""
Experiment configuration: `key = value` files, environment defaults and
command-line overrides merged into a validated ExperimentConfig.

Precedence: flags > config file > environment > built-in defaults.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .errors import ConfigError
from .models import ExperimentConfig, Schedule, ScheduleKind

logger = logging.getLogger(__name__)

ENV_OUT_DIR = "EHRENFEST_OUT_DIR"
ENV_WORKERS = "EHRENFEST_WORKERS"
ENV_LOG_LEVEL = "EHRENFEST_LOG_LEVEL"

LIST_KEYS = {"hbar", "t", "t-ehrenfest"}
SCALAR_KEYS = {
    "model": ("model", str),
    "grid-n": ("grid_n", int),
    "grid-l": ("grid_l", float),
    "dt": ("dt", float),
    "seed": ("seed", int),
    "samples": ("samples", int),
    "collapse-width": ("collapse_width", float),
    "workers": ("workers", int),
    "out": ("out_dir", Path),
}
KNOWN_KEYS = LIST_KEYS | set(SCALAR_KEYS)


def load_config_file(path: Path) -> Dict[str, List[str]]:
    """Parse `key = value` lines; repeated keys and comma lists accumulate."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}", {"path": str(path)})

    values: Dict[str, List[str]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value'", {"line": number})
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{number}: unknown key '{key}'", {"line": number, "key": key})
        items = [item.strip() for item in value.split(",") if item.strip()]
        if not items:
            raise ConfigError(f"{path}:{number}: missing value for '{key}'", {"line": number, "key": key})
        values.setdefault(key, []).extend(items)

    logger.debug(f"Loaded config file {path}: {sorted(values)}")
    return values


def environment_defaults(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    defaults: Dict[str, Any] = {}
    if environ.get(ENV_OUT_DIR):
        defaults["out_dir"] = Path(environ[ENV_OUT_DIR])
    if environ.get(ENV_WORKERS):
        try:
            defaults["workers"] = int(environ[ENV_WORKERS])
        except ValueError:
            raise ConfigError(f"{ENV_WORKERS} must be an integer", {"value": environ[ENV_WORKERS]})
    return defaults


def _convert(key: str, raw: str, kind) -> Any:
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"Invalid value for '{key}': {raw!r}", {"key": key, "value": raw})


def _file_settings(values: Mapping[str, List[str]]) -> Dict[str, Any]:
    settings: Dict[str, Any] = {}
    for key, (field, kind) in SCALAR_KEYS.items():
        if key in values:
            if len(values[key]) > 1:
                raise ConfigError(f"Key '{key}' takes a single value", {"key": key})
            settings[field] = _convert(key, values[key][0], kind)
    for key in LIST_KEYS:
        if key in values:
            settings[key] = [_convert(key, raw, float) for raw in values[key]]
    return settings


def _schedule(times: Optional[List[float]], multiples: Optional[List[float]]) -> Optional[Schedule]:
    if times and multiples:
        raise ConfigError("Use either 't' or 't-ehrenfest', not both")
    if times:
        return Schedule(kind=ScheduleKind.ABSOLUTE, values=times)
    if multiples:
        return Schedule(kind=ScheduleKind.EHRENFEST, values=multiples)
    return None


def build_config(
    flags: Mapping[str, Any],
    file_values: Optional[Mapping[str, List[str]]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Merge settings into an ExperimentConfig.

    `flags` uses the config-file key names; a None value means the flag was not given.
    """
    merged: Dict[str, Any] = environment_defaults(environ)
    merged.update(_file_settings(file_values or {}))

    for key, (field, kind) in SCALAR_KEYS.items():
        if flags.get(key) is not None:
            merged[field] = kind(flags[key]) if kind is Path else flags[key]
    if flags.get("t") and flags.get("t-ehrenfest"):
        raise ConfigError("Use either '--t' or '--t-ehrenfest', not both")
    if flags.get("hbar"):
        merged["hbar"] = list(flags["hbar"])
    for key, other in (("t", "t-ehrenfest"), ("t-ehrenfest", "t")):
        if flags.get(key):
            # a schedule on the command line replaces the file's schedule entirely
            merged[key] = list(flags[key])
            merged.pop(other, None)

    hbars = merged.pop("hbar", None)
    if hbars:
        merged["hbars"] = hbars
    schedule = _schedule(merged.pop("t", None), merged.pop("t-ehrenfest", None))
    if schedule is not None:
        merged["schedule"] = schedule

    config = ExperimentConfig(**merged)
    logger.debug(f"Effective config: {config.model_dump(mode='json')}")
    return config
