"""
Tests for config files, environment defaults and flag precedence.
"""

from pathlib import Path
from unittest.mock import patch

import pytest
from pydantic import ValidationError

from ehrenfest_lab.config import build_config, environment_defaults, load_config_file
from ehrenfest_lab.errors import ConfigError
from ehrenfest_lab.models import ModelId, ScheduleKind


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str) -> Path:
        path = tmp_path / "run.conf"
        path.write_text(text, encoding="utf-8")
        return path

    return _write


class TestLoadConfigFile:
    """Test parsing of key = value files."""

    def test_values_and_comments(self, write_config):
        path = write_config(
            "# double-well run\n"
            "model = doublewell\n"
            "hbar = 0.01, 0.005  # two points\n"
            "hbar = 0.001\n"
            "\n"
            "grid_n = 2048\n"
        )
        values = load_config_file(path)
        assert values == {"model": ["doublewell"], "hbar": ["0.01", "0.005", "0.001"], "grid-n": ["2048"]}

    def test_unknown_key(self, write_config):
        with pytest.raises(ConfigError, match="unknown key"):
            load_config_file(write_config("colour = blue\n"))

    def test_missing_value(self, write_config):
        with pytest.raises(ConfigError, match="missing value"):
            load_config_file(write_config("seed =\n"))

    def test_not_key_value(self, write_config):
        with pytest.raises(ConfigError) as excinfo:
            load_config_file(write_config("model doublewell\n"))
        assert excinfo.value.details == {"line": 1}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.conf")


class TestEnvironmentDefaults:
    """Test environment-variable defaults."""

    def test_values(self):
        defaults = environment_defaults({"EHRENFEST_OUT_DIR": "/tmp/runs", "EHRENFEST_WORKERS": "4"})
        assert defaults == {"out_dir": Path("/tmp/runs"), "workers": 4}

    def test_bad_workers(self):
        with pytest.raises(ConfigError):
            environment_defaults({"EHRENFEST_WORKERS": "many"})

    @patch.dict("os.environ", {"EHRENFEST_WORKERS": "3"}, clear=True)
    def test_reads_process_environment(self):
        assert environment_defaults() == {"workers": 3}


class TestBuildConfig:
    """Test merging and precedence."""

    def test_empty(self):
        config = build_config({}, environ={})
        assert config.model == ModelId.DILATION
        assert config.schedule is None
        assert config.hbars is None

    def test_flags_override_file_override_env(self, write_config):
        file_values = load_config_file(write_config("seed = 5\nworkers = 2\nout = from-file\nsamples = 10\n"))
        config = build_config(
            {"seed": 9, "samples": None},
            file_values,
            environ={"EHRENFEST_WORKERS": "8", "EHRENFEST_OUT_DIR": "from-env"},
        )
        assert config.seed == 9
        assert config.samples == 10
        assert config.workers == 2
        assert config.out_dir == Path("from-file")

    def test_env_used_when_nothing_else(self):
        config = build_config({}, environ={"EHRENFEST_WORKERS": "8"})
        assert config.workers == 8

    def test_schedules(self):
        config = build_config({"t-ehrenfest": [0.0, 1.0, 2.0]}, environ={})
        assert config.schedule.kind == ScheduleKind.EHRENFEST
        assert config.schedule.values == [0.0, 1.0, 2.0]
        config = build_config({"t": [0.5]}, environ={})
        assert config.schedule.kind == ScheduleKind.ABSOLUTE

    def test_flag_schedule_replaces_file_schedule(self, write_config):
        file_values = load_config_file(write_config("t-ehrenfest = 0, 1\n"))
        config = build_config({"t": [0.25, 0.5]}, file_values, environ={})
        assert config.schedule.kind == ScheduleKind.ABSOLUTE
        assert config.schedule.values == [0.25, 0.5]

    def test_both_schedules_rejected(self, write_config):
        with pytest.raises(ConfigError):
            build_config({"t": [1.0], "t-ehrenfest": [1.0]}, environ={})
        file_values = load_config_file(write_config("t = 1\nt-ehrenfest = 1\n"))
        with pytest.raises(ConfigError):
            build_config({}, file_values, environ={})

    def test_hbar_flags_replace_file(self, write_config):
        file_values = load_config_file(write_config("hbar = 0.1, 0.2\n"))
        assert build_config({"hbar": [0.05]}, file_values, environ={}).hbars == [0.05]
        assert build_config({}, file_values, environ={}).hbars == [0.1, 0.2]

    def test_bad_number_in_file(self, write_config):
        with pytest.raises(ConfigError, match="Invalid value"):
            build_config({}, load_config_file(write_config("dt = fast\n")), environ={})

    def test_scalar_key_repeated(self, write_config):
        with pytest.raises(ConfigError, match="single value"):
            build_config({}, load_config_file(write_config("seed = 1, 2\n")), environ={})

    def test_out_of_range_values(self):
        with pytest.raises(ValidationError):
            build_config({"hbar": [2.0]}, environ={})
        with pytest.raises(ValidationError):
            build_config({"grid-n": 1000}, environ={})
