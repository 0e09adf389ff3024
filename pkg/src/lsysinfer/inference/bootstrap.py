"""Bootstrap draws, critical values and the choice of lambda.

Every replicate b owns the random substream SeedSequence(seed, spawn_key=(b,
attempt)), so the draws do not depend on how replicates are scheduled.
"""

import logging
import math
from typing import Optional

import numpy as np

from lsysinfer.core.errors import EmptyCellError, InputError, NumericalError
from lsysinfer.core.hypothesis import estimate_beta_u, with_beta_u
from lsysinfer.core.matlin import psd_sqrt
from lsysinfer.core.models import (
    BootstrapDraw,
    CriticalValueReport,
    HypothesisProblem,
    RawSample,
    RestrictedEstimate,
    StarEstimate,
)
from lsysinfer.core.parallel import ordered_map
from lsysinfer.inference.restricted import upper_bound_term
from lsysinfer.inference.statistic import (
    InequalityProgram,
    equality_sup,
    estimate_x_star,
    pinned_fitted,
)

logger = logging.getLogger(__name__)

DEFAULT_DRAWS = 250
MAX_REDRAWS = 100
QUANTILE_SLACK = 1e-9


def replicate_rng(seed: int, index: int, attempt: int = 0) -> np.random.Generator:
    """Independent generator for replicate ``index``, redraw ``attempt``."""
    if seed < 0:
        raise InputError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index, attempt)))


def order_statistic(stats: np.ndarray, level: float) -> float:
    """The ceil(B * level)-th smallest value, the empirical level-quantile."""
    stats = np.asarray(stats, dtype=float).reshape(-1)
    if stats.size == 0:
        raise InputError("cannot take a quantile of zero bootstrap statistics")
    # the slack keeps B * level on its integer when level carries rounding noise
    level = float(np.clip(level - QUANTILE_SLACK, 0.0, 1.0))
    return float(np.quantile(stats, level, method="inverted_cdf"))


def draw_bootstrap(
    problem: HypothesisProblem,
    raw: Optional[RawSample],
    star: StarEstimate,
    B: int,
    seed: int,
    workers: int = 1,
) -> list[BootstrapDraw]:
    """Draw B bootstrap replicates of the centered processes G_e and G_i.

    Each replicate resamples the raw records with replacement, re-estimates
    beta_u and x_star with the original xi_hat, and returns

        g_e = sqrt(n) ((beta_b - A x_b) - (beta_hat - A x_star))
        g_i = sqrt(n) A (x_b - x_star)

    Known coordinates stay at beta_k, so the known entries of g_i are zero;
    they are set to exactly zero. Without raw data, beta_u is drawn
    from its Gaussian approximation N(beta_u, xi_hat / n).

    Args:
        problem: The problem under test.
        raw: The sample behind beta_u, or None for the Gaussian fallback.
        star: x_star estimated on the full sample.
        B: Number of replicates.
        seed: Master seed.
        workers: Thread count for evaluating replicates.

    Returns:
        Draws ordered by replicate index 1..B.

    Raises:
        NumericalError: If a replicate hits an empty cell 100 times in a row.
    """
    if B < 0:
        raise InputError(f"bootstrap count must be non-negative, got {B}")
    if B == 0:
        return []

    root_n = float(np.sqrt(problem.n))
    base_gap = problem.beta_hat - star.fitted
    known = ~problem.unknown
    root_xi = psd_sqrt(problem.xi) if raw is None and problem.p_u else None
    if raw is None:
        logger.info("No raw sample: drawing beta_u from its Gaussian approximation")

    def replicate(index: int) -> BootstrapDraw:
        for attempt in range(MAX_REDRAWS):
            rng = replicate_rng(seed, index, attempt)
            if raw is None:
                z = rng.standard_normal(problem.p_u)
                beta_u = problem.beta_u + (root_xi @ z if root_xi is not None else z) / root_n
            else:
                try:
                    beta_u, _ = estimate_beta_u(raw.resample(rng))
                except EmptyCellError:
                    continue
            replicate_problem = with_beta_u(problem, beta_u)
            replicate_star = estimate_x_star(replicate_problem)
            gap = replicate_problem.beta_hat - replicate_star.fitted
            g_i = root_n * (replicate_star.fitted - star.fitted)
            g_i[known] = 0.0
            return BootstrapDraw(
                g_e=root_n * (gap - base_gap),
                g_i=g_i,
                replicate_index=index,
                redraws=attempt,
            )
        raise NumericalError(
            f"replicate {index}: {MAX_REDRAWS} consecutive resamples had an empty cell",
            stage="draw_bootstrap",
        )

    draws = ordered_map(replicate, range(1, B + 1), workers=workers)
    redraws = sum(draw.redraws for draw in draws)
    if redraws:
        logger.warning("Redrew %d bootstrap resamples because of empty cells", redraws)
    logger.info("Drew %d bootstrap replicates with seed %d", B, seed)
    return draws


def omega_i_from_bootstrap(draws: list[BootstrapDraw]) -> np.ndarray:
    """Standard deviation matrix of the g_i draws (covariance with ddof = 0).

    Coordinates that are zero in every draw get exactly zero rows and columns.
    """
    if len(draws) < 2:
        raise InputError("at least two bootstrap draws are needed to estimate omega_i")
    G = np.vstack([draw.g_i for draw in draws])
    live = np.flatnonzero(np.any(G != 0.0, axis=0))
    root = np.zeros((G.shape[1], G.shape[1]))
    if live.size:
        cov = np.atleast_2d(np.cov(G[:, live], rowvar=False, bias=True))
        root[np.ix_(live, live)] = psd_sqrt(0.5 * (cov + cov.T))
    return root


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 0.5:
        raise InputError(f"alpha must lie in (0, 0.5), got {alpha}")


def _sup_per_draw(
    program: InequalityProgram,
    directions: list[np.ndarray],
    stage: str,
    workers: int,
    cap: Optional[tuple[np.ndarray, float]] = None,
) -> np.ndarray:
    def evaluate(item: tuple[int, np.ndarray]) -> float:
        index, direction = item
        try:
            return max(program.sup(direction, cap=cap), 0.0)
        except NumericalError as e:
            raise NumericalError(f"replicate {index}: {e}", stage=stage) from e

    return np.asarray(ordered_map(evaluate, list(enumerate(directions, start=1)), workers=workers))


def _equality_parts(problem: HypothesisProblem, draws: list[BootstrapDraw]) -> np.ndarray:
    unknown = problem.unknown
    return np.asarray([equality_sup(problem, draw.g_e[unknown]) for draw in draws])


def critical_value(
    problem: HypothesisProblem,
    star: StarEstimate,
    restricted: RestrictedEstimate,
    draws: list[BootstrapDraw],
    lambda_n: float,
    alpha: float,
    program: Optional[InequalityProgram] = None,
    workers: int = 1,
) -> CriticalValueReport:
    """The (1 - alpha) bootstrap quantile of the recentred statistic.

    Each replicate contributes max of the equality part of g_e and the
    inequality supremum of <s, g_i + lambda sqrt(n) beta_r>.
    """
    _check_alpha(alpha)
    if not draws:
        raise InputError("critical value needs at least one bootstrap draw")
    program = program or InequalityProgram.from_problem(problem)
    bound = upper_bound_term(lambda_n, restricted, problem.n)

    equality = _equality_parts(problem, draws)
    inequality = _sup_per_draw(
        program, [draw.g_i + bound for draw in draws], "critical_value", workers
    )
    stats = np.maximum(equality, inequality)
    c_value = max(order_statistic(stats, 1.0 - alpha), 0.0)
    logger.info("Critical value %.6g at alpha=%g, lambda=%.6g", c_value, alpha, lambda_n)
    return CriticalValueReport(
        c_value=c_value,
        alpha=alpha,
        lambda_used=lambda_n,
        draws=len(draws),
        bootstrap_stats=stats,
    )


def lambda_rule_of_thumb(p: int, n: int) -> float:
    """1 / sqrt(log(e v p) log(e v log(e v n))), clipped to [0, 1]."""
    if p < 1 or n < 1:
        raise InputError("p and n must be at least 1")
    log_p = math.log(max(math.e, p))
    log_log_n = math.log(max(math.e, math.log(max(math.e, n))))
    value = 1.0 / math.sqrt(log_p * log_log_n)
    return min(max(value, 0.0), 1.0)


def lambda_delta(n: int) -> float:
    """Level offset for the bootstrap lambda rule: 1 / sqrt(log(e v log(e v n)))."""
    if n < 1:
        raise InputError("n must be at least 1")
    return 1.0 / math.sqrt(math.log(max(math.e, math.log(max(math.e, n)))))


def lambda_bootstrap(
    problem: HypothesisProblem,
    draws: list[BootstrapDraw],
    n: Optional[int] = None,
    program: Optional[InequalityProgram] = None,
    workers: int = 1,
) -> float:
    """min(1, tau) with tau the (1 - delta_n) quantile of sup <s, g_i>."""
    if not draws:
        raise InputError("the bootstrap lambda rule needs at least one draw")
    program = program or InequalityProgram.from_problem(problem)
    delta = lambda_delta(n or problem.n)
    sups = _sup_per_draw(program, [draw.g_i for draw in draws], "lambda_bootstrap", workers)
    tau = order_statistic(sups, 1.0 - delta)
    value = min(1.0, max(tau, 0.0))
    logger.info("Bootstrap lambda %.6g (tau=%.6g, delta=%.6g)", value, tau, delta)
    return value


def two_stage_critical_value(
    problem: HypothesisProblem,
    star: StarEstimate,
    draws: list[BootstrapDraw],
    alpha: float,
    gamma: Optional[float] = None,
    program: Optional[InequalityProgram] = None,
    workers: int = 1,
) -> CriticalValueReport:
    """Critical value that bounds the drift by a first-stage quantile.

    Stage one takes c1, the (1 - gamma) quantile of sup <s, -g_i>. Stage two
    maximizes <s, g_i> + min{sqrt(n) <s, A x_star> + c1, 0} per draw and
    returns its (1 - alpha + gamma) quantile. gamma defaults to alpha / 10.
    """
    _check_alpha(alpha)
    gamma = alpha / 10.0 if gamma is None else gamma
    if not 0.0 < gamma < alpha:
        raise InputError(f"gamma must lie in (0, alpha), got {gamma}")
    if not draws:
        raise InputError("critical value needs at least one bootstrap draw")
    program = program or InequalityProgram.from_problem(problem)

    stage = "two_stage_critical_value"
    first = _sup_per_draw(program, [-draw.g_i for draw in draws], stage, workers)
    c1 = order_statistic(first, 1.0 - gamma)
    cap = (float(np.sqrt(problem.n)) * pinned_fitted(problem, star), c1)
    inequality = _sup_per_draw(
        program, [draw.g_i for draw in draws], stage, workers, cap=cap
    )
    stats = np.maximum(_equality_parts(problem, draws), inequality)
    c_value = max(order_statistic(stats, 1.0 - alpha + gamma), 0.0)
    logger.info("Two-stage critical value %.6g (c1=%.6g, gamma=%g)", c_value, c1, gamma)
    return CriticalValueReport(
        c_value=c_value,
        alpha=alpha,
        lambda_used=None,
        draws=len(draws),
        bootstrap_stats=stats,
        method="two-stage",
        gamma=gamma,
        first_stage=c1,
    )
