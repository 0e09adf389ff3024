"""Monte Carlo size and power studies for the mixed-logit design."""

import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from lsysinfer import __version__
from lsysinfer.core.errors import EmptyCellError, InputError, NumericalError
from lsysinfer.core.hypothesis import validate
from lsysinfer.core.models import HypothesisProblem, LambdaMode, RawSample
from lsysinfer.core.parallel import ordered_map
from lsysinfer.inference.testing import run_test
from lsysinfer.mixedlogit.design import ElasticityBounds, GammaRule, MixedLogitDesign
from lsysinfer.mixedlogit.model import (
    build_problem,
    identified_bounds,
    population_cond_probs,
    simulate_sample,
)

logger = logging.getLogger(__name__)

MAX_SAMPLE_ATTEMPTS = 100


class RejectionRow(BaseModel):
    """Rejection count at one gamma; ``mean_lambda_used`` averages the replicates that ran."""

    gamma: float
    reject_rate: float
    mc_se: float
    rejections: int
    replications: int
    mean_lambda_used: Optional[float] = None


class RejectionTable(BaseModel):
    """Rejection frequencies per hypothesized gamma, plus what produced them."""

    rows: list[RejectionRow]
    bounds: ElasticityBounds
    gamma_rule: GammaRule
    d: int
    p: int
    n: int
    seed: int
    bootstrap: int
    alpha: float
    lambda_mode: str
    tool_version: str = Field(default=__version__)


def resolve_gamma(rule: GammaRule, bounds: ElasticityBounds) -> list[float]:
    """Hypothesized values of F(t | w_bar) implied by ``rule``.

    Fixed and swept values outside [0, 1] are clipped with a warning.

    Raises:
        InputError: If the offset of a lower, upper or midpoint rule moves
            gamma outside [0, 1].
    """
    if rule.kind in ("lower", "upper", "midpoint"):
        anchor = {
            "lower": bounds.lower - rule.offset,
            "upper": bounds.upper + rule.offset,
            "midpoint": 0.5 * (bounds.lower + bounds.upper) + rule.offset,
        }[rule.kind]
        if not 0.0 <= anchor <= 1.0:
            raise InputError(
                f"offset {rule.offset:g} moves the {rule.kind} gamma to {anchor:.6g}, "
                f"outside [0, 1] (identified set [{bounds.lower:.6g}, {bounds.upper:.6g}])"
            )
        return [anchor]

    if rule.kind == "sweep":
        assert rule.grid is not None
        values = list(rule.grid)
    else:
        assert rule.value is not None
        values = [rule.value + rule.offset]
    clipped = [min(max(value, 0.0), 1.0) for value in values]
    moved = [value for value, kept in zip(values, clipped) if value != kept]
    if moved:
        logger.warning(
            "Clipped gamma value(s) %s to [0, 1]", ", ".join(f"{value:g}" for value in moved)
        )
    return clipped


def replication_seeds(seed: int, replication: int) -> tuple[int, int]:
    """(sample seed, bootstrap seed) for one replication, shared across gamma."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=(replication,)).generate_state(2)
    return int(state[0]), int(state[1])


def _decide(
    problem: HypothesisProblem,
    sample: RawSample,
    alpha: float,
    lambda_mode: LambdaMode,
    B: int,
    boot_seed: int,
) -> tuple[bool, Optional[float]]:
    """Decision and lambda for one hypothesis; unattainable known rows reject outright."""
    if not validate(problem).known_block_feasible:
        return True, None
    report = run_test(problem, sample, alpha, lambda_mode, B, boot_seed)
    return report.reject, report.lambda_used


def _replicate(task: tuple) -> list[tuple[bool, Optional[float]]]:
    """(decision, lambda used) of one replication at every gamma.

    A gamma that no x >= 0 can reproduce together with the simplex row is
    rejected without running the test.
    """
    design, gammas, replication, seed, B, alpha, lambda_mode = task
    sample_seed, boot_seed = replication_seeds(seed, replication)
    for attempt in range(MAX_SAMPLE_ATTEMPTS):
        sample = simulate_sample(design, sample_seed, stream=attempt)
        try:
            problems = [build_problem(design, sample, gamma) for gamma in gammas]
        except EmptyCellError:
            continue
        return [
            _decide(problem, sample, alpha, lambda_mode, B, boot_seed) for problem in problems
        ]
    raise NumericalError(
        f"replication {replication}: every simulated sample had an empty price cell",
        stage="monte_carlo",
    )


def monte_carlo(
    design: MixedLogitDesign,
    gamma_rule: GammaRule,
    R: int,
    B: int,
    alpha: float,
    lambda_mode: LambdaMode,
    seed: int,
    workers: int = 1,
) -> RejectionTable:
    """Rejection rates of the test over R simulated samples.

    Each replication draws one sample and tests every hypothesized gamma on
    it with the same bootstrap seed. Replications run in worker processes.
    """
    if R < 1:
        raise ValueError("replications must be at least 1")
    bounds = identified_bounds(design, population_cond_probs(design))
    gammas = resolve_gamma(gamma_rule, bounds)
    logger.info(
        "Monte Carlo: R=%d, B=%d, seed=%d, identified set [%.6g, %.6g], gamma=%s",
        R,
        B,
        seed,
        bounds.lower,
        bounds.upper,
        ", ".join(f"{g:.4g}" for g in gammas),
    )

    tasks = [(design, gammas, r, seed, B, alpha, lambda_mode) for r in range(R)]
    outcomes = ordered_map(_replicate, tasks, workers=workers, processes=True)
    rejections = np.asarray([[reject for reject, _ in row] for row in outcomes]).sum(axis=0)

    rows = []
    for j, (gamma, count) in enumerate(zip(gammas, rejections)):
        rate = float(count) / R
        used = [row[j][1] for row in outcomes if row[j][1] is not None]
        rows.append(
            RejectionRow(
                gamma=gamma,
                reject_rate=rate,
                mc_se=math.sqrt(rate * (1.0 - rate) / R),
                rejections=int(count),
                replications=R,
                mean_lambda_used=float(np.mean(used)) if used else None,
            )
        )
    return RejectionTable(
        rows=rows,
        bounds=bounds,
        gamma_rule=gamma_rule,
        d=design.d,
        p=design.p,
        n=design.n,
        seed=seed,
        bootstrap=B,
        alpha=alpha,
        lambda_mode=lambda_mode.label(),
    )


def write_power_csv(table: RejectionTable, path: Optional[Path]) -> str:
    """Write the gamma,reject_rate,mc_se columns; returns the CSV text."""
    frame = pd.DataFrame(
        [(row.gamma, row.reject_rate, row.mc_se) for row in table.rows],
        columns=["gamma", "reject_rate", "mc_se"],
    )
    text = frame.to_csv(index=False)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
