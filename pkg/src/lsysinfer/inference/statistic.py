"""The projection estimator and the equality / inequality test statistics.

Both statistics are suprema of linear functions over polyhedral sets. The
equality part has a closed form through the dual-norm identity; the
inequality part is a linear program assembled once per (A, omega) by
``InequalityProgram`` and re-solved with different objectives.
"""

import logging
from typing import Literal, Optional

import numpy as np

from lsysinfer.core.errors import InfeasibleError, InputError, NumericalError
from lsysinfer.core.lp import (
    SolverOptions,
    StandardFormLP,
    farkas_certificate,
    feasible_cone_point,
    solve,
)
from lsysinfer.core.matlin import (
    free_kernel,
    full_row_rank,
    kkt_solve,
    matrix_rank,
    pseudoinverse,
    pseudoinverse_apply,
    psd_pinv_sqrt,
    psd_sqrt,
    range_project,
)
from lsysinfer.core.models import HypothesisProblem, StarEstimate, StatisticValue
from lsysinfer.core.types import as_matrix, as_vector

logger = logging.getLogger(__name__)

__all__ = [
    "InequalityProgram",
    "closed_form_applies",
    "compute_statistic",
    "equality_sup",
    "estimate_x_star",
    "farkas_certificate",
    "geometric_feasibility",
    "pinned_fitted",
    "population_feasible",
    "t_stat_equality",
    "t_stat_inequality",
]

GEOMETRY_TOL = 1e-8


def estimate_x_star(problem: HypothesisProblem) -> StarEstimate:
    """Project beta_hat onto range(A).

    With full row rank and d >= p this is the minimum-norm least squares
    solution A^+ beta_hat. Otherwise x_star minimizes the xi-weighted
    distance between beta_u and A_u x subject to reproducing the known rows.

    Raises:
        InfeasibleError: If no x reproduces the known rows.
    """
    if full_row_rank(problem.A):
        x_star = pseudoinverse_apply(problem.A, problem.beta_hat)
        return StarEstimate(x_star=x_star, fitted=problem.A @ x_star, method="PinvLeastNorm")

    A_u = problem.A_u
    xi_pinv = pseudoinverse(problem.xi) if problem.p_u else np.zeros((0, 0))
    Q = A_u.T @ xi_pinv @ A_u
    Q = 0.5 * (Q + Q.T)
    c = A_u.T @ xi_pinv @ problem.beta_u
    try:
        x_star = kkt_solve(Q, c, problem.A_k, problem.beta_k)
    except InfeasibleError as e:
        raise InfeasibleError(
            f"the known rows A_k x = beta_k are inconsistent: {e}", stage="estimate_x_star"
        ) from e
    return StarEstimate(x_star=x_star, fitted=problem.A @ x_star, method="ConstrainedGLS")


def _equality_lp(residual: np.ndarray, root: np.ndarray, n: int) -> float:
    """sup sqrt(n) <s, residual> over |root s|_1 <= 1, as an explicit LP."""
    q = residual.size
    # variables: s (free), phi_plus, phi_minus, slack
    objective = np.concatenate([np.sqrt(n) * residual, np.zeros(2 * q + 1)])
    link = np.hstack([-root, np.eye(q), -np.eye(q), np.zeros((q, 1))])
    ball = np.concatenate([np.zeros(q), np.ones(2 * q), [1.0]])
    lp = StandardFormLP(
        objective=objective,
        eq_matrix=np.vstack([link, ball]),
        eq_rhs=np.concatenate([np.zeros(q), [1.0]]),
        lower=np.concatenate([np.full(q, -np.inf), np.zeros(2 * q + 1)]),
        upper=np.full(3 * q + 1, np.inf),
        sense="maximize",
    )
    solution = solve(lp)
    if solution.status == "unbounded":
        raise NumericalError("equality program is unbounded", stage="t_stat_equality")
    if not solution.is_optimal or solution.value is None:
        raise NumericalError("equality program has no optimum", stage="t_stat_equality")
    return max(solution.value, 0.0)


def closed_form_applies(xi: np.ndarray) -> bool:
    """Whether max |xi^(+1/2) v| is the dual norm of |xi^(1/2) s|_1 on range(xi).

    True for nonsingular or diagonal xi, where every vertex of the l1 ball
    that meets range(xi) is a coordinate vector inside it.
    """
    xi = as_matrix(xi)
    if not np.any(xi - np.diag(np.diag(xi))):
        return True
    return matrix_rank(xi) == xi.shape[0]


def equality_sup(problem: HypothesisProblem, v: np.ndarray, method: str = "closed") -> float:
    """sup <s, v> over {s : |xi^(1/2) s|_1 <= 1}, restricted to range(xi).

    ``v`` is already scaled by sqrt(n) when it comes from the bootstrap. The
    closed form is only used where it is exact; a singular non-diagonal xi
    falls back to the explicit program.
    """
    if full_row_rank(problem.A) or problem.p_u == 0:
        return 0.0
    xi = problem.xi
    projected = range_project(xi, v)
    if method == "lp" or not closed_form_applies(xi):
        return _equality_lp(projected, psd_sqrt(xi), 1)
    return float(np.max(np.abs(psd_pinv_sqrt(xi) @ projected)))


def t_stat_equality(
    problem: HypothesisProblem,
    star: StarEstimate,
    method: Literal["closed", "lp"] = "closed",
) -> float:
    """Studentized distance of beta_u from the fitted values A_u x_star.

    Identically zero in the full row rank regime and when every row is known.
    """
    if full_row_rank(problem.A) or problem.p_u == 0:
        return 0.0
    residual = problem.beta_u - problem.A_u @ star.x_star
    return float(np.sqrt(problem.n)) * equality_sup(problem, residual, method=method)


class InequalityProgram:
    """sup <s, direction> over {s = Ax, A's <= 0, |omega s|_1 <= 1}.

    The constraint block is assembled once; each call to ``sup`` only swaps
    the objective. With full row rank and d >= p the ``Ax = s`` block and x
    are dropped since every s is in range(A).

    Coordinates flagged in ``pinned`` belong to known rows. Their entries of
    s stay free and act as multipliers for those rows, so a bootstrap omega
    that vanishes on them is expected. On the remaining coordinates a
    singular omega is handled by rows N's = 0, with N a basis of the kernel
    of omega's free block, which keep s in range(omega) there; objectives
    are projected onto that range before solving.

    An optional cap adds a scalar u <= 0 with u <= <w, s> + c to the
    objective, which linearizes the concave term min{<w, s> + c, 0}.
    """

    def __init__(
        self,
        A: np.ndarray,
        omega: np.ndarray,
        pinned: Optional[np.ndarray] = None,
        drop_x: Optional[bool] = None,
        options: Optional[SolverOptions] = None,
    ) -> None:
        A = as_matrix(A)
        omega = as_matrix(omega)
        p, d = A.shape
        if omega.shape != (p, p):
            raise InputError(f"omega must be {p}x{p}, got {omega.shape}")
        self.A = A
        self.omega = omega
        self.p, self.d = p, d
        self.drop_x = full_row_rank(A) if drop_x is None else drop_x
        self.options = options
        self.kernel = free_kernel(omega, pinned)
        self.range_projector = np.eye(p) - self.kernel @ self.kernel.T

        nx = 0 if self.drop_x else d
        # column layout: s | x | phi_plus | phi_minus | slack_a | slack_ball
        self.width = p + nx + 2 * p + d + 1
        s_cols = slice(0, p)
        x_cols = slice(p, p + nx)
        plus = slice(p + nx, 2 * p + nx)
        minus = slice(2 * p + nx, 3 * p + nx)
        slack_a = slice(3 * p + nx, 3 * p + nx + d)
        slack_ball = self.width - 1

        rows = []
        if not self.drop_x:
            block = np.zeros((p, self.width))
            block[:, x_cols] = A
            block[:, s_cols] = -np.eye(p)
            rows.append(block)
        cone = np.zeros((d, self.width))
        cone[:, s_cols] = A.T
        cone[:, slack_a] = np.eye(d)
        rows.append(cone)
        link = np.zeros((p, self.width))
        link[:, plus] = np.eye(p)
        link[:, minus] = -np.eye(p)
        link[:, s_cols] = -omega
        rows.append(link)
        ball = np.zeros((1, self.width))
        ball[0, plus] = 1.0
        ball[0, minus] = 1.0
        ball[0, slack_ball] = 1.0
        rows.append(ball)
        if self.kernel.shape[1]:
            confine = np.zeros((self.kernel.shape[1], self.width))
            confine[:, s_cols] = self.kernel.T
            rows.insert(0, confine)

        self.eq_matrix = np.vstack(rows)
        self.eq_rhs = np.zeros(self.eq_matrix.shape[0])
        self.eq_rhs[-1] = 1.0
        self.lower = np.concatenate([np.full(p + nx, -np.inf), np.zeros(2 * p + d + 1)])
        self.upper = np.full(self.width, np.inf)

    @classmethod
    def from_problem(
        cls, problem: HypothesisProblem, options: Optional[SolverOptions] = None
    ) -> "InequalityProgram":
        """Program for ``problem`` with its known rows pinned."""
        return cls(problem.A, problem.omega, pinned=~problem.unknown, options=options)

    def _program(
        self, direction: np.ndarray, cap: Optional[tuple[np.ndarray, float]]
    ) -> StandardFormLP:
        objective = np.zeros(self.width)
        objective[: self.p] = direction
        if cap is None:
            return StandardFormLP(
                objective=objective,
                eq_matrix=self.eq_matrix,
                eq_rhs=self.eq_rhs,
                lower=self.lower,
                upper=self.upper,
                sense="maximize",
            )
        weights, constant = cap
        weights = self.range_projector @ as_vector(weights)
        # extra columns: u (<= 0) and its slack; extra row: u - <w, s> + slack = c
        m = self.eq_matrix.shape[0]
        eq_matrix = np.zeros((m + 1, self.width + 2))
        eq_matrix[:m, : self.width] = self.eq_matrix
        eq_matrix[m, : self.p] = -weights
        eq_matrix[m, self.width] = 1.0
        eq_matrix[m, self.width + 1] = 1.0
        return StandardFormLP(
            objective=np.concatenate([objective, [1.0, 0.0]]),
            eq_matrix=eq_matrix,
            eq_rhs=np.append(self.eq_rhs, float(constant)),
            lower=np.concatenate([self.lower, [-np.inf, 0.0]]),
            upper=np.concatenate([self.upper, [0.0, np.inf]]),
            sense="maximize",
        )

    def sup(
        self,
        direction: np.ndarray,
        cap: Optional[tuple[np.ndarray, float]] = None,
    ) -> float:
        """Optimal value for the given objective on s (plus u when capped).

        Raises:
            NumericalError: If the program is unbounded or has no optimum.
        """
        direction = as_vector(direction)
        if direction.size != self.p:
            raise InputError(f"direction has {direction.size} entries, expected {self.p}")
        direction = self.range_projector @ direction
        solution = solve(self._program(direction, cap), self.options)
        if solution.status == "unbounded":
            raise NumericalError(
                "inequality program is unbounded: omega_i does not bound the cone directions"
            )
        if not solution.is_optimal or solution.value is None:
            raise NumericalError("inequality program has no optimum")
        return float(solution.value)


def pinned_fitted(problem: HypothesisProblem, star: StarEstimate) -> np.ndarray:
    """Fitted values A x_star with the known rows set to beta_k.

    x_star reproduces the known rows, so this only removes rounding noise
    that the free known-row multipliers of ``InequalityProgram`` would
    otherwise amplify.
    """
    fitted = np.array(star.fitted, dtype=float)
    fitted[~problem.unknown] = problem.beta_k
    return fitted


def t_stat_inequality(
    problem: HypothesisProblem,
    star: StarEstimate,
    program: Optional[InequalityProgram] = None,
) -> float:
    """How far the fitted values point outside the cone, in omega units."""
    if program is None:
        program = InequalityProgram.from_problem(problem)
    value = program.sup(np.sqrt(problem.n) * pinned_fitted(problem, star))
    return max(value, 0.0)


def compute_statistic(
    problem: HypothesisProblem,
    star: StarEstimate,
    program: Optional[InequalityProgram] = None,
) -> StatisticValue:
    return StatisticValue(
        t_e=t_stat_equality(problem, star),
        t_i=t_stat_inequality(problem, star, program),
    )


def population_feasible(A: np.ndarray, beta: np.ndarray) -> bool:
    """True iff beta = Ax for some x >= 0 (phase-1 simplex)."""
    return feasible_cone_point(A, beta) is not None


def geometric_feasibility(A: np.ndarray, beta: np.ndarray) -> bool:
    """Cone membership through range membership and a sign condition.

    beta is in {Ax : x >= 0} iff beta is in range(A) and the minimum-norm
    solution x = A^+ beta has <s, x> <= 0 for every s in range(A') with
    s <= 0.
    """
    A = as_matrix(A)
    beta = as_vector(beta)
    p, d = A.shape
    if p != beta.size:
        raise InputError(f"A has {p} rows but beta has {beta.size} entries")
    residual = float(np.max(np.abs(beta - range_project(A, beta)), initial=0.0))
    if residual > GEOMETRY_TOL:
        return False
    x_min_norm = pseudoinverse_apply(A, beta)

    # variables: y (p, free), s (d, <= 0), slack; A'y - s = 0 and -1's + slack = 1
    eq_matrix = np.zeros((d + 1, p + d + 1))
    eq_matrix[:d, :p] = A.T
    eq_matrix[:d, p : p + d] = -np.eye(d)
    eq_matrix[d, p : p + d] = -1.0
    eq_matrix[d, -1] = 1.0
    lp = StandardFormLP(
        objective=np.concatenate([np.zeros(p), x_min_norm, [0.0]]),
        eq_matrix=eq_matrix,
        eq_rhs=np.append(np.zeros(d), 1.0),
        lower=np.concatenate([np.full(p + d, -np.inf), [0.0]]),
        upper=np.concatenate([np.full(p, np.inf), np.zeros(d), [np.inf]]),
        sense="maximize",
    )
    solution = solve(lp)
    if not solution.is_optimal or solution.value is None:
        raise NumericalError("cone sign program has no optimum")
    return solution.value <= GEOMETRY_TOL
