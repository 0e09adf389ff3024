"""Core models, configuration, linear algebra and the LP engine."""

from . import config, errors, hypothesis, lp, matlin, models, parallel
from .config import RuntimeConfig
from .errors import (
    EmptyCellError,
    EmptyConfidenceSetError,
    InfeasibleError,
    InputError,
    LsysinferError,
    NumericalError,
)
from .models import HypothesisProblem, RawSample

__all__ = [
    "EmptyCellError",
    "EmptyConfidenceSetError",
    "HypothesisProblem",
    "InfeasibleError",
    "InputError",
    "LsysinferError",
    "NumericalError",
    "RawSample",
    "RuntimeConfig",
    "config",
    "errors",
    "hypothesis",
    "lp",
    "matlin",
    "models",
    "parallel",
]
