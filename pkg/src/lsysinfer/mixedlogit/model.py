"""Binary logit with random coefficients: choice probabilities, sampling and bounds."""

import logging
from typing import Optional

import numpy as np
from scipy.special import expit

from lsysinfer.core.errors import InfeasibleError, InputError, NumericalError
from lsysinfer.core.hypothesis import estimate_beta_u
from lsysinfer.core.lp import StandardFormLP, solve
from lsysinfer.core.models import HypothesisProblem, RawSample
from lsysinfer.mixedlogit.design import ElasticityBounds, MixedLogitDesign

logger = logging.getLogger(__name__)


def logit_choice_prob(w: float, v: tuple[float, float]) -> float:
    """Probability of buying at price w for a type with coefficients v = (c0, c1)."""
    c0, c1 = v
    return float(expit(c0 + c1 * w))


def elasticity(v: tuple[float, float], w_bar: float) -> float:
    """Price elasticity c1 * w_bar * (1 - l(w_bar, v)) of a type at price w_bar."""
    c0, c1 = v
    return c1 * w_bar * (1.0 - logit_choice_prob(w_bar, (c0, c1)))


def choice_matrix(w_support: np.ndarray, v_support: np.ndarray) -> np.ndarray:
    """Matrix of l(w_i, v_j): one row per price, one column per type."""
    w = np.asarray(w_support, dtype=float)[:, None]
    return expit(v_support[:, 0][None, :] + v_support[:, 1][None, :] * w)


def elasticity_indicator(design: MixedLogitDesign, t: Optional[float] = None) -> np.ndarray:
    """a_j = 1 when the elasticity of type j at w_bar is at most t."""
    threshold = design.t if t is None else t
    v = design.v_support
    eps = v[:, 1] * design.w_bar * (1.0 - expit(v[:, 0] + v[:, 1] * design.w_bar))
    return (eps <= threshold).astype(float)


def population_cond_probs(design: MixedLogitDesign) -> np.ndarray:
    """P(Y = 1 | W = w) for every w in the support."""
    return choice_matrix(design.w_support, design.v_support) @ design.x_true


def simulate_sample(design: MixedLogitDesign, seed: int, stream: int = 0) -> RawSample:
    """Draw n i.i.d. (Y, W) records.

    W is uniform on its support and the type is drawn from x_true. Given
    (W, V) the choice is Bernoulli(l(W, V)), which integrates out the
    logistic taste shock exactly.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    w_index = rng.integers(0, design.w_support.size, size=design.n)
    types = rng.choice(design.d, size=design.n, p=design.x_true)
    w = design.w_support[w_index]
    v = design.v_support[types]
    y = (rng.random(design.n) < expit(v[:, 0] + v[:, 1] * w)).astype(float)
    return RawSample(records=np.column_stack([y, w]), layout="choice", w_support=design.w_support)


def identified_bounds(
    design: MixedLogitDesign, cond_probs: np.ndarray, t: Optional[float] = None
) -> ElasticityBounds:
    """Sharp bounds on F(t | w_bar) given the conditional choice probabilities.

    Minimizes and maximizes a'x over the type distributions x on the simplex
    that reproduce ``cond_probs``.

    Raises:
        InputError: If cond_probs has the wrong length.
        InfeasibleError: If no type distribution reproduces cond_probs.
    """
    cond_probs = np.asarray(cond_probs, dtype=float).reshape(-1)
    if cond_probs.size != design.w_support.size:
        raise InputError(
            f"cond_probs has {cond_probs.size} entries but w_support has {design.w_support.size}"
        )
    a = elasticity_indicator(design, t)
    eq_matrix = np.vstack([choice_matrix(design.w_support, design.v_support), np.ones(design.d)])
    eq_rhs = np.append(cond_probs, 1.0)

    values = []
    for sense in ("minimize", "maximize"):
        solution = solve(
            StandardFormLP(objective=a, eq_matrix=eq_matrix, eq_rhs=eq_rhs, sense=sense)
        )
        if solution.status == "infeasible":
            raise InfeasibleError(
                "conditional choice probabilities are inconsistent with the type grid",
                stage="identified_bounds",
            )
        if not solution.is_optimal or solution.value is None:
            raise NumericalError("bounds program has no optimum", stage="identified_bounds")
        values.append(solution.value)

    lower, upper = (min(max(value, 0.0), 1.0) for value in values)
    return ElasticityBounds(
        lower=lower,
        upper=max(upper, lower),
        t=design.t if t is None else t,
        w_bar=design.w_bar,
    )


def identified_band(design: MixedLogitDesign, t_grid: np.ndarray) -> list[ElasticityBounds]:
    """Population identified set of F(t | w_bar) at every t in ``t_grid``."""
    cond_probs = population_cond_probs(design)
    return [identified_bounds(design, cond_probs, float(t)) for t in t_grid]


def build_problem(
    design: MixedLogitDesign,
    sample: RawSample,
    gamma: float,
    known_q: bool = False,
) -> HypothesisProblem:
    """Cone hypothesis that the sample is consistent with F(t | w_bar) = gamma.

    Rows are the choice probabilities at each price (estimated), then the
    simplex row and the elasticity indicator row (both known). xi_hat is
    diag(p (1 - p) / q) with q the empirical cell mass, or the design mass
    1 / |w_support| when ``known_q`` is set.

    Raises:
        InputError: If gamma lies outside [0, 1].
        EmptyCellError: If some price has no observations in the sample.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InputError(f"gamma must lie in [0, 1], got {gamma}")
    probs, xi_hat = estimate_beta_u(sample)
    if known_q:
        xi_hat = np.diag(probs * (1.0 - probs) * design.w_support.size)

    A = np.vstack(
        [
            choice_matrix(design.w_support, design.v_support),
            np.ones(design.d),
            elasticity_indicator(design),
        ]
    )
    known = np.zeros(design.p, dtype=bool)
    known[-2:] = True
    return HypothesisProblem(
        A=A,
        beta_hat=np.concatenate([probs, [1.0, gamma]]),
        known_mask=known,
        n=sample.n,
        xi_hat=xi_hat,
    )
