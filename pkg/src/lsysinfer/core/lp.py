"""Standard-form linear programming with a deterministic dense simplex.

Problems are stated as

    optimize  c'x   subject to   Gx = h,   lower <= x <= upper

with possibly infinite bounds. Internally every variable is shifted, mirrored
or split so that the solver only sees ``min c'y, Gy = h, y >= 0``, which is
then handled by a two-phase tableau simplex with Bland's rule. Identical
inputs always produce identical pivot sequences.
"""

import logging
from typing import Annotated, Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, model_validator
from scipy.optimize import linprog

from lsysinfer.core.config import default_lp_backend
from lsysinfer.core.errors import InputError, NumericalError
from lsysinfer.core.types import Matrix, Vector, as_matrix, as_vector

logger = logging.getLogger(__name__)

LPStatus = Literal["optimal", "infeasible", "unbounded"]


def _as_bounds(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if np.any(np.isnan(arr)):
        raise ValueError("bounds must not be NaN")
    return arr


BoundVector = Annotated[np.ndarray, BeforeValidator(_as_bounds)]


class StandardFormLP(BaseModel):
    """A linear program with equality rows and per-variable bounds."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    objective: Vector
    eq_matrix: Matrix
    eq_rhs: Vector
    lower: BoundVector
    upper: BoundVector
    sense: Literal["maximize", "minimize"] = "minimize"

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: Any) -> Any:
        """Default to x >= 0 and give an empty constraint block the right width."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        n = np.asarray(data.get("objective", []), dtype=float).size
        if np.asarray(data.get("eq_matrix", [])).size == 0:
            data["eq_matrix"] = np.zeros((0, n))
        if np.asarray(data.get("eq_rhs", [])).size == 0:
            data["eq_rhs"] = np.zeros(0)
        if data.get("lower") is None:
            data["lower"] = np.zeros(n)
        if data.get("upper") is None:
            data["upper"] = np.full(n, np.inf)
        return data

    @model_validator(mode="after")
    def _check_shapes(self) -> "StandardFormLP":
        n = self.objective.size
        if self.eq_matrix.shape[1] != n:
            raise ValueError(
                f"eq_matrix has {self.eq_matrix.shape[1]} columns but objective has {n} entries"
            )
        if self.eq_matrix.shape[0] != self.eq_rhs.size:
            raise ValueError(
                f"eq_matrix has {self.eq_matrix.shape[0]} rows but eq_rhs has {self.eq_rhs.size}"
            )
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("lower and upper must have one entry per variable")
        if np.any(self.lower > self.upper) or np.any(self.lower == np.inf):
            raise ValueError("every variable needs lower <= upper and a finite-or--inf lower bound")
        if np.any(self.upper == -np.inf):
            raise ValueError("upper bounds must not be -inf")
        return self

    @property
    def num_rows(self) -> int:
        return int(self.eq_matrix.shape[0])

    @property
    def num_vars(self) -> int:
        return int(self.objective.size)


class SolverOptions(BaseModel):
    """Tolerances and limits. ``max_iterations`` defaults to 50 * (rows + cols)."""

    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-10
    max_iterations: Optional[int] = None
    backend: Literal["simplex", "highs"] = "simplex"


class LPSolution(BaseModel):
    """Solver outcome; ``value`` and ``point`` are set only when optimal."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: LPStatus
    value: Optional[float] = None
    point: Optional[Vector] = None
    duals: Optional[Vector] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class _Standardized:
    """Map x = offset + T y between the user problem and min c'y, Gy = h, y >= 0."""

    def __init__(self, lp: StandardFormLP) -> None:
        n = lp.num_vars
        self.offset = np.zeros(n)
        columns: list[tuple[int, float]] = []
        boxes: list[tuple[int, float]] = []

        for j in range(n):
            lo, up = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                self.offset[j] = lo
                columns.append((j, 1.0))
                if np.isfinite(up):
                    boxes.append((len(columns) - 1, up - lo))
            elif np.isfinite(up):
                self.offset[j] = up
                columns.append((j, -1.0))
            else:
                columns.append((j, 1.0))
                columns.append((j, -1.0))

        n_struct = len(columns)
        n_total = n_struct + len(boxes)
        self.T = np.zeros((n, n_total))
        for col, (j, sign) in enumerate(columns):
            self.T[j, col] = sign

        sign = 1.0 if lp.sense == "minimize" else -1.0
        self.sense_sign = sign
        self.num_eq = lp.num_rows

        G_struct = lp.eq_matrix @ self.T
        G_box = np.zeros((len(boxes), n_total))
        h_box = np.zeros(len(boxes))
        for r, (col, width) in enumerate(boxes):
            G_box[r, col] = 1.0
            G_box[r, n_struct + r] = 1.0
            h_box[r] = width

        self.G = np.vstack([G_struct, G_box]) if boxes else G_struct
        self.h = np.concatenate([lp.eq_rhs - lp.eq_matrix @ self.offset, h_box])
        self.c = self.T.T @ (sign * lp.objective)

    def recover(self, y: np.ndarray) -> np.ndarray:
        return self.offset + self.T @ y


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0


class _Simplex:
    """Tableau simplex on min c'y, Gy = h, y >= 0 with Bland's rule."""

    def __init__(self, G: np.ndarray, h: np.ndarray, c: np.ndarray, opts: SolverOptions) -> None:
        self.opts = opts
        self.m, self.n = G.shape
        self.flip = np.where(h < 0, -1.0, 1.0)
        self.G = G * self.flip[:, None]
        self.h = h * self.flip
        self.c = c
        self.iterations = 0
        self.limit = opts.max_iterations or 50 * (self.m + self.n)

    def _run(self, tableau: np.ndarray, basis: list[int], allowed: int) -> str:
        m = len(basis)
        opts = self.opts
        while True:
            candidates = np.flatnonzero(tableau[m, :allowed] < -opts.opt_tol)
            if candidates.size == 0:
                return "optimal"
            col = int(candidates[0])
            column = tableau[:m, col]
            rows = np.flatnonzero(column > opts.pivot_tol)
            if rows.size == 0:
                return "unbounded"
            ratios = tableau[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios - best <= 1e-12 * max(1.0, abs(best))]
            row = int(ties[np.argmin(np.asarray(basis)[ties])])

            _pivot(tableau, row, col)
            basis[row] = col
            rhs = tableau[:m, -1]
            rhs[(rhs < 0) & (rhs > -opts.feas_tol)] = 0.0

            self.iterations += 1
            if self.iterations > self.limit:
                raise NumericalError(
                    f"simplex exceeded {self.limit} pivots; the problem is numerically unstable"
                )

    def solve(self) -> tuple[str, Optional[np.ndarray], Optional[np.ndarray]]:
        m, n = self.m, self.n
        opts = self.opts

        # Phase 1: minimize the sum of artificials.
        tableau = np.zeros((m + 1, n + m + 1))
        tableau[:m, :n] = self.G
        tableau[:m, n : n + m] = np.eye(m)
        tableau[:m, -1] = self.h
        tableau[m, :n] = -self.G.sum(axis=0)
        tableau[m, -1] = -self.h.sum()
        basis = list(range(n, n + m))

        self._run(tableau, basis, n)
        infeasibility = -tableau[m, -1]
        scale = 1.0 + (float(np.max(np.abs(self.h))) if m else 0.0)
        if infeasibility > 100.0 * opts.feas_tol * scale:
            logger.debug("Phase 1 ended with infeasibility %.3e", infeasibility)
            return "infeasible", None, None

        # Drive remaining artificials out of the basis; rows where that fails are redundant.
        redundant = []
        for i in range(m):
            if basis[i] >= n:
                magnitudes = np.abs(tableau[i, :n])
                col = int(np.argmax(magnitudes)) if n else 0
                if n and magnitudes[col] > 10.0 * opts.pivot_tol:
                    _pivot(tableau, i, col)
                    basis[i] = col
                else:
                    redundant.append(i)
        rhs = tableau[:m, -1]
        rhs[(rhs < 0) & (rhs > -100.0 * opts.feas_tol * scale)] = 0.0
        keep = [i for i in range(m) if i not in redundant]
        if redundant:
            logger.debug("Dropping %d redundant equality rows", len(redundant))

        # Phase 2 on the original objective.
        phase2 = np.zeros((len(keep) + 1, n + 1))
        phase2[:-1, :n] = tableau[keep, :n]
        phase2[:-1, -1] = tableau[keep, -1]
        basis = [basis[i] for i in keep]
        c_basis = self.c[basis]
        phase2[-1, :n] = self.c - c_basis @ phase2[:-1, :n]
        phase2[-1, -1] = -c_basis @ phase2[:-1, -1]

        status = self._run(phase2, basis, n)
        if status == "unbounded":
            return "unbounded", None, None

        y = np.zeros(n)
        y[basis] = phase2[:-1, -1]
        duals_kept: Optional[np.ndarray] = None
        if basis:
            B = self.G[keep][:, basis]
            try:
                refined = np.linalg.solve(B, self.h[keep])
                if np.all(refined > -opts.feas_tol * scale):
                    y[basis] = refined
                duals_kept = np.linalg.solve(B.T, self.c[basis])
            except np.linalg.LinAlgError:
                logger.debug("Final basis is singular; keeping tableau values")
        y = np.maximum(y, 0.0)

        duals = np.zeros(m)
        if duals_kept is not None:
            duals[keep] = duals_kept
        return "optimal", y, duals * self.flip


def _solve_highs(lp: StandardFormLP) -> LPSolution:
    sign = 1.0 if lp.sense == "minimize" else -1.0
    bounds = [
        (None if np.isinf(lo) else lo, None if np.isinf(up) else up)
        for lo, up in zip(lp.lower, lp.upper)
    ]
    res = linprog(
        sign * lp.objective,
        A_eq=lp.eq_matrix if lp.num_rows else None,
        b_eq=lp.eq_rhs if lp.num_rows else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        return LPSolution(status="infeasible", iterations=int(res.nit))
    if res.status == 3:
        return LPSolution(status="unbounded", iterations=int(res.nit))
    if res.status != 0:
        raise NumericalError(f"HiGHS failed: {res.message}")
    duals = None
    if lp.num_rows and getattr(res, "eqlin", None) is not None:
        duals = sign * np.asarray(res.eqlin.marginals)
    return LPSolution(
        status="optimal",
        value=float(lp.objective @ res.x),
        point=res.x,
        duals=duals,
        iterations=int(res.nit),
    )


def solve(lp: StandardFormLP, options: Optional[SolverOptions] = None) -> LPSolution:
    """Solve ``lp`` and report its status, optimal value and a primal vertex.

    Raises:
        NumericalError: If the pivot limit is exceeded or the optimal point
            violates the constraints by more than round-off.
    """
    opts = options or SolverOptions(backend=default_lp_backend())
    if opts.backend == "highs":
        return _solve_highs(lp)

    std = _Standardized(lp)
    simplex = _Simplex(std.G, std.h, std.c, opts)
    status, y, duals = simplex.solve()
    if status != "optimal" or y is None:
        return LPSolution(status=status, iterations=simplex.iterations)

    x = std.recover(y)
    residual = float(np.max(np.abs(lp.eq_matrix @ x - lp.eq_rhs))) if lp.num_rows else 0.0
    scale = 1.0 + float(np.max(np.abs(lp.eq_rhs), initial=0.0))
    g_max = float(np.max(np.abs(lp.eq_matrix), initial=0.0))
    scale += g_max * float(np.max(np.abs(x), initial=0.0))
    if residual > 1e-6 * scale:
        raise NumericalError(f"simplex solution violates the equality rows by {residual:.3e}")
    if residual > opts.feas_tol * scale:
        logger.debug("Simplex residual %.3e above feas_tol", residual)

    eq_duals = None
    if duals is not None:
        eq_duals = std.sense_sign * duals[: std.num_eq]
    return LPSolution(
        status="optimal",
        value=float(lp.objective @ x),
        point=x,
        duals=eq_duals,
        iterations=simplex.iterations,
    )


def feasible_cone_point(A: np.ndarray, beta: np.ndarray) -> Optional[np.ndarray]:
    """Return some x >= 0 with Ax = beta, or None when no such x exists."""
    A = as_matrix(A)
    beta = as_vector(beta)
    if A.shape[0] != beta.size:
        raise InputError(f"A has {A.shape[0]} rows but beta has {beta.size} entries")
    lp = StandardFormLP(objective=np.zeros(A.shape[1]), eq_matrix=A, eq_rhs=beta)
    solution = solve(lp)
    if not solution.is_optimal:
        return None
    return solution.point


def farkas_certificate(A: np.ndarray, beta: np.ndarray, tol: float = 1e-8) -> Optional[np.ndarray]:
    """Find s with A's <= 0, |s|_inf <= 1 and <s, beta> > tol.

    Such an s certifies that no x >= 0 solves Ax = beta. Returns None when
    the best attainable <s, beta> is at most ``tol``.
    """
    A = as_matrix(A)
    beta = as_vector(beta)
    p, d = A.shape
    if p != beta.size:
        raise InputError(f"A has {p} rows but beta has {beta.size} entries")
    # variables: s (p, in [-1, 1]) and slacks (d, >= 0) with A's + slack = 0
    lp = StandardFormLP(
        objective=np.concatenate([beta, np.zeros(d)]),
        eq_matrix=np.hstack([A.T, np.eye(d)]),
        eq_rhs=np.zeros(d),
        lower=np.concatenate([-np.ones(p), np.zeros(d)]),
        upper=np.concatenate([np.ones(p), np.full(d, np.inf)]),
        sense="maximize",
    )
    solution = solve(lp)
    if not solution.is_optimal or solution.value is None or solution.point is None:
        raise NumericalError("Farkas program did not reach an optimum")
    if solution.value <= tol:
        return None
    return solution.point[:p]
