"""Restricted estimator of beta under the null and the drift upper bound."""

import logging
from typing import Optional

import numpy as np

from lsysinfer.core.errors import InfeasibleError, InputError, NumericalError
from lsysinfer.core.lp import SolverOptions, StandardFormLP, solve
from lsysinfer.core.matlin import free_kernel
from lsysinfer.core.models import HypothesisProblem, RestrictedEstimate, StarEstimate
from lsysinfer.inference.statistic import pinned_fitted

logger = logging.getLogger(__name__)

WITNESS_TOL = 1e-9


def restricted_estimator(
    problem: HypothesisProblem,
    star: StarEstimate,
    options: Optional[SolverOptions] = None,
) -> RestrictedEstimate:
    """Find b = Ax, x >= 0, b_k = beta_k, minimizing the worst-case drift.

    The inner supremum of sqrt(n) <s, A x_star - b> over the inequality set
    is replaced by its dual, so the min-max collapses into one LP in
    (phi_1, phi_p, phi_d, psi, x). N spans the kernel of omega on the unknown
    rows, embedded with zeros on the known ones:

        min phi_1  s.t.  |phi_p|_inf <= phi_1,
                         -A' omega phi_p + A'A phi_d + A'N psi + sqrt(n) A'A x
                             = sqrt(n) A' A x_star,
                         A_k x = beta_k,  phi_d >= 0,  x >= 0.

    Raises:
        InfeasibleError: If no x >= 0 reproduces the known rows.
    """
    A = problem.A
    p, d = A.shape
    root_n = float(np.sqrt(problem.n))
    AtA = A.T @ A
    k = p - problem.p_u
    kernel = free_kernel(problem.omega, ~problem.unknown)
    q = kernel.shape[1]

    # column layout: phi_1 | phi_p | phi_d | psi | x | slack_lo | slack_hi
    width = 1 + p + d + q + d + 2 * p
    phi_1 = 0
    phi_p = slice(1, 1 + p)
    phi_d = slice(1 + p, 1 + p + d)
    psi = slice(1 + p + d, 1 + p + d + q)
    x_cols = slice(1 + p + d + q, 1 + p + 2 * d + q)
    slack_lo = slice(1 + p + 2 * d + q, 1 + 2 * p + 2 * d + q)
    slack_hi = slice(1 + 2 * p + 2 * d + q, width)

    lower_rows = np.zeros((p, width))
    lower_rows[:, phi_1] = 1.0
    lower_rows[:, phi_p] = -np.eye(p)
    lower_rows[:, slack_lo] = -np.eye(p)
    upper_rows = np.zeros((p, width))
    upper_rows[:, phi_1] = 1.0
    upper_rows[:, phi_p] = np.eye(p)
    upper_rows[:, slack_hi] = -np.eye(p)
    dual_rows = np.zeros((d, width))
    dual_rows[:, phi_p] = -A.T @ problem.omega
    dual_rows[:, phi_d] = AtA
    dual_rows[:, psi] = A.T @ kernel
    dual_rows[:, x_cols] = root_n * AtA
    known_rows = np.zeros((k, width))
    known_rows[:, x_cols] = problem.A_k

    objective = np.zeros(width)
    objective[phi_1] = 1.0
    lower = np.zeros(width)
    lower[phi_p] = -np.inf
    lower[psi] = -np.inf
    lp = StandardFormLP(
        objective=objective,
        eq_matrix=np.vstack([lower_rows, upper_rows, dual_rows, known_rows]),
        eq_rhs=np.concatenate(
            [np.zeros(2 * p), root_n * A.T @ pinned_fitted(problem, star), problem.beta_k]
        ),
        lower=lower,
        upper=np.full(width, np.inf),
        sense="minimize",
    )
    solution = solve(lp, options)
    if solution.status == "infeasible":
        raise InfeasibleError(
            "no x >= 0 reproduces the known rows; the null is vacuous for this known block",
            stage="restricted_estimator",
        )
    if not solution.is_optimal or solution.point is None or solution.value is None:
        raise NumericalError("restricted program has no optimum", stage="restricted_estimator")

    witness_x = np.maximum(solution.point[x_cols], 0.0)
    beta_r = A @ witness_x
    beta_r[~problem.unknown] = problem.beta_k
    logger.debug("Restricted estimator outer value %.6g", solution.value)
    return RestrictedEstimate(
        beta_r=beta_r, witness_x=witness_x, outer_value=max(float(solution.value), 0.0)
    )


def upper_bound_term(lambda_n: float, restricted: RestrictedEstimate, n: int) -> np.ndarray:
    """Coefficients of the drift bound U(s) = <s, lambda sqrt(n) A witness_x>.

    Raises:
        InputError: If lambda_n lies outside [0, 1].
    """
    if not 0.0 <= lambda_n <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lambda_n}")
    return lambda_n * float(np.sqrt(n)) * restricted.beta_r
