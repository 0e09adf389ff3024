"""Test statistics, bootstrap critical values and test inversion."""

from . import bootstrap, restricted, statistic, testing
from .testing import invert_ci, run_test

__all__ = ["bootstrap", "invert_ci", "restricted", "run_test", "statistic", "testing"]
