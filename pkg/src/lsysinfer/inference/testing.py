"""The cone test: statistic, critical value, decision, and its inversion."""

import logging
import time
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from typing import Optional

import numpy as np

from lsysinfer import __version__
from lsysinfer.core.errors import (
    EmptyConfidenceSetError,
    InputError,
    LsysinferError,
    NumericalError,
)
from lsysinfer.core.hypothesis import validate
from lsysinfer.core.models import (
    ConfidenceInterval,
    CriticalValueReport,
    GridPoint,
    HypothesisProblem,
    LambdaMode,
    RawSample,
    StatisticValue,
    TestReport,
)
from lsysinfer.core.parallel import ordered_map
from lsysinfer.inference.bootstrap import (
    DEFAULT_DRAWS,
    critical_value,
    draw_bootstrap,
    lambda_bootstrap,
    lambda_rule_of_thumb,
    omega_i_from_bootstrap,
    two_stage_critical_value,
)
from lsysinfer.inference.restricted import restricted_estimator
from lsysinfer.inference.statistic import (
    InequalityProgram,
    estimate_x_star,
    t_stat_equality,
    t_stat_inequality,
)

logger = logging.getLogger(__name__)

BISECTION_STEPS = 8


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Label any error escaping the block with the pipeline stage ``name``."""
    try:
        yield
    except LsysinferError as e:
        if e.stage is None:
            e.stage = name
        raise
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"linear algebra failure: {e}", stage=name) from e


def _choose_lambda(
    mode: LambdaMode,
    problem: HypothesisProblem,
    draws: list,
    program: InequalityProgram,
    workers: int,
) -> float:
    if mode.kind == "rot":
        return lambda_rule_of_thumb(problem.p, problem.n)
    if mode.kind == "boot":
        return lambda_bootstrap(problem, draws, program=program, workers=workers)
    assert mode.value is not None
    return mode.value


def run_test(
    problem: HypothesisProblem,
    raw: Optional[RawSample] = None,
    alpha: float = 0.05,
    lambda_mode: Optional[LambdaMode] = None,
    B: int = DEFAULT_DRAWS,
    seed: int = 0,
    workers: int = 1,
) -> TestReport:
    """Test whether beta = Ax for some x >= 0.

    Args:
        problem: The hypothesis. When ``omega_i`` is unset it is estimated
            from the same bootstrap draws used for the critical value.
        raw: Sample behind the unknown block; None uses Gaussian draws.
        alpha: Nominal level in (0, 0.5).
        lambda_mode: Drift-bound rule; defaults to the bootstrap rule.
        B: Bootstrap replicates.
        seed: Master seed.
        workers: Threads for replicate evaluation.

    Returns:
        The report. Rejection is a result, not an error.

    Raises:
        InputError: On invalid parameters.
        NumericalError: When a stage fails; ``stage`` names it.
    """
    if not 0.0 < alpha < 0.5:
        raise InputError(f"alpha must lie in (0, 0.5), got {alpha}")
    if B < 1:
        raise InputError(f"bootstrap count must be at least 1, got {B}")
    mode = lambda_mode or LambdaMode(kind="boot")
    started = time.perf_counter()
    logger.info(
        "Running test with seed %d, B=%d, alpha=%g, lambda=%s", seed, B, alpha, mode.label()
    )

    with stage("validate"):
        diagnostics = validate(problem).messages
    with stage("estimate_x_star"):
        star = estimate_x_star(problem)
    with stage("draw_bootstrap"):
        draws = draw_bootstrap(problem, raw, star, B, seed, workers=workers)

    if problem.omega_i is None and B >= 2:
        with stage("omega_i"):
            problem = problem.model_copy(update={"omega_i": omega_i_from_bootstrap(draws)})
    program = InequalityProgram.from_problem(problem)

    with stage("t_stat_equality"):
        t_e = t_stat_equality(problem, star)
    with stage("t_stat_inequality"):
        t_i = t_stat_inequality(problem, star, program)
    statistic = StatisticValue(t_e=t_e, t_i=t_i)

    critical: CriticalValueReport
    if mode.kind == "two-stage":
        with stage("critical_value"):
            critical = two_stage_critical_value(
                problem, star, draws, alpha, mode.value, program=program, workers=workers
            )
    else:
        with stage("restricted_estimator"):
            restricted = restricted_estimator(problem, star)
        with stage("lambda"):
            lambda_n = _choose_lambda(mode, problem, draws, program, workers)
        with stage("critical_value"):
            critical = critical_value(
                problem, star, restricted, draws, lambda_n, alpha, program=program, workers=workers
            )

    t_n = statistic.t_n
    exceed = int(np.sum(critical.bootstrap_stats >= t_n))
    report = TestReport(
        statistic=statistic,
        critical=critical,
        reject=bool(t_n > critical.c_value),
        p_value=(1 + exceed) / (B + 1),
        seed=seed,
        bootstrap=B,
        alpha=alpha,
        lambda_used=critical.lambda_used,
        lambda_mode=mode.label(),
        timing_ms=1000.0 * (time.perf_counter() - started),
        diagnostics=diagnostics,
        tool_version=__version__,
    )
    logger.info(
        "T_n=%.6g, c=%.6g, reject=%s, p=%.4f", t_n, critical.c_value, report.reject, report.p_value
    )
    return report


def invert_ci(
    family: Callable[[float], HypothesisProblem],
    raw: Optional[RawSample],
    alpha: float,
    grid: Sequence[float],
    B: int = DEFAULT_DRAWS,
    seed: int = 0,
    lambda_mode: Optional[LambdaMode] = None,
    workers: int = 1,
    bisection_steps: int = BISECTION_STEPS,
) -> ConfidenceInterval:
    """Confidence interval for gamma as the hull of non-rejected values.

    Every hypothesis uses the same master seed. The grid is evaluated
    first; each boundary between an accepted and a rejected grid point is
    then refined by bisection to grid_step / 2**bisection_steps. When the
    outermost grid point is accepted the bound is the grid edge. Values
    for which no x >= 0 reproduces the known rows count as rejected.

    Raises:
        EmptyConfidenceSetError: If every grid point is rejected.
    """
    points = np.asarray(sorted(float(g) for g in grid))
    if points.size < 2:
        raise InputError("the inversion grid needs at least two points")
    mode = lambda_mode or LambdaMode(kind="boot")

    def evaluate(gamma: float) -> GridPoint:
        problem = family(gamma)
        if not validate(problem).known_block_feasible:
            logger.info("gamma=%g: no x >= 0 reproduces the known rows, rejected", gamma)
            return GridPoint(gamma=gamma, reject=True)
        report = run_test(problem, raw, alpha, mode, B, seed)
        return GridPoint(
            gamma=gamma,
            reject=report.reject,
            t_n=report.statistic.t_n,
            c_value=report.critical.c_value,
            lambda_used=report.lambda_used,
        )

    evaluated = ordered_map(evaluate, points.tolist(), workers=workers)
    accepted = [i for i, point in enumerate(evaluated) if not point.reject]
    if not accepted:
        raise EmptyConfidenceSetError(
            f"empty confidence set at alpha={alpha} and this grid", stage="invert_ci"
        )
    first, last = accepted[0], accepted[-1]
    contiguous = accepted == list(range(first, last + 1))
    if not contiguous:
        logger.warning("Non-rejected grid points are not contiguous; reporting their hull")

    extra: list[GridPoint] = []

    def refine(inside: float, outside: float) -> float:
        for _ in range(bisection_steps):
            mid = 0.5 * (inside + outside)
            point = evaluate(mid)
            extra.append(point)
            if point.reject:
                outside = mid
            else:
                inside = mid
        return inside

    lower = points[0] if first == 0 else refine(points[first], points[first - 1])
    upper = points[-1] if last == points.size - 1 else refine(points[last], points[last + 1])
    logger.info("Confidence interval [%.6g, %.6g] at alpha=%g", lower, upper, alpha)
    return ConfidenceInterval(
        lower=float(lower),
        upper=float(upper),
        alpha=alpha,
        grid=sorted(evaluated + extra, key=lambda point: point.gamma),
        contiguous=contiguous,
        seed=seed,
        bootstrap=B,
        lambda_mode=mode.label(),
        tool_version=__version__,
    )
