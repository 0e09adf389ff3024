"""Random-coefficient binary logit laboratory: designs, bounds and Monte Carlo."""

from . import design, model, montecarlo
from .design import ElasticityBounds, GammaRule, MixedLogitDesign, StudyConfig, build_design
from .model import build_problem, identified_bounds, simulate_sample
from .montecarlo import monte_carlo

__all__ = [
    "ElasticityBounds",
    "GammaRule",
    "MixedLogitDesign",
    "StudyConfig",
    "build_design",
    "build_problem",
    "design",
    "identified_bounds",
    "model",
    "monte_carlo",
    "montecarlo",
    "simulate_sample",
]
