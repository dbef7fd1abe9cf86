"""
Tests for the exception hierarchy.
"""

import pytest

from ehrenfest_lab import errors
from ehrenfest_lab.errors import (
    EhrenfestLabError,
    InvalidParameterError,
    NumericalGuardError,
    SimulationValidationError,
)


def _leaf_errors():
    return [
        cls
        for cls in vars(errors).values()
        if isinstance(cls, type) and issubclass(cls, EhrenfestLabError)
        and cls not in (EhrenfestLabError, SimulationValidationError, NumericalGuardError)
    ]


class TestHierarchy:
    """Test exit codes and serialization."""

    @pytest.mark.parametrize("cls", _leaf_errors(), ids=lambda cls: cls.__name__)
    def test_leaf_belongs_to_a_family(self, cls):
        assert issubclass(cls, (SimulationValidationError, NumericalGuardError))
        assert cls.exit_code in (2, 3)
        assert cls.__doc__ and cls.__doc__.strip()

    def test_invalid_parameter_is_value_error(self):
        error = InvalidParameterError("dt must be positive, got 0", {"dt": 0.0})
        assert isinstance(error, ValueError)
        assert error.to_dict() == {
            "error_type": "InvalidParameterError",
            "message": "dt must be positive, got 0",
            "exit_code": 2,
            "details": {"dt": 0.0},
        }

    def test_details_default_to_empty(self):
        assert NumericalGuardError("guard").details == {}
