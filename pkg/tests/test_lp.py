"""Tests for the standard-form LP solver."""

import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from lsysinfer.core.errors import NumericalError
from lsysinfer.core.lp import (
    SolverOptions,
    StandardFormLP,
    farkas_certificate,
    feasible_cone_point,
    solve,
)

HIGHS = SolverOptions(backend="highs")


def _random_bounded_lp(seed: int, rows: int = 3, cols: int = 6) -> StandardFormLP:
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(rows, cols))
    x0 = rng.uniform(0.0, 2.0, size=cols)
    return StandardFormLP(
        objective=rng.normal(size=cols),
        eq_matrix=G,
        eq_rhs=G @ x0,
        upper=np.full(cols, 5.0),
        sense="maximize" if seed % 2 else "minimize",
    )


def test_segment_maximum() -> None:
    """Test max x1 + x2 on the unit simplex edge."""
    solution = solve(
        StandardFormLP(
            objective=[1.0, 1.0], eq_matrix=[[1.0, 1.0]], eq_rhs=[1.0], sense="maximize"
        )
    )
    assert solution.is_optimal
    assert solution.value == pytest.approx(1.0, abs=1e-10)
    assert solution.point is not None
    assert solution.point.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(solution.point >= 0)


def test_contradictory_constraint_is_infeasible() -> None:
    """Test x1 = -1 with x1 >= 0 is infeasible."""
    solution = solve(
        StandardFormLP(objective=[1.0], eq_matrix=[[1.0]], eq_rhs=[-1.0], sense="maximize")
    )
    assert solution.status == "infeasible"
    assert solution.value is None
    assert solution.point is None


def test_vertex_optimum() -> None:
    """Test max x1 + 2 x2 on x1 + x2 = 1 picks the vertex (0, 1)."""
    solution = solve(
        StandardFormLP(
            objective=[1.0, 2.0], eq_matrix=[[1.0, 1.0]], eq_rhs=[1.0], sense="maximize"
        )
    )
    assert solution.value == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(solution.point, [0.0, 1.0], atol=1e-10)


def test_unbounded() -> None:
    """Test max x1 on x1 - x2 = 0 is unbounded."""
    solution = solve(
        StandardFormLP(
            objective=[1.0, 0.0], eq_matrix=[[1.0, -1.0]], eq_rhs=[0.0], sense="maximize"
        )
    )
    assert solution.status == "unbounded"


def test_finite_lower_and_upper_bounds() -> None:
    """Test shifted and boxed variables."""
    solution = solve(
        StandardFormLP(
            objective=[1.0, 0.0],
            eq_matrix=[[1.0, 1.0]],
            eq_rhs=[3.0],
            lower=[-2.0, 0.0],
            upper=[5.0, np.inf],
        )
    )
    assert solution.value == pytest.approx(-2.0, abs=1e-10)
    np.testing.assert_allclose(solution.point, [-2.0, 5.0], atol=1e-10)


def test_free_variable() -> None:
    """Test a free variable tied to a boxed one."""
    solution = solve(
        StandardFormLP(
            objective=[1.0, 0.0],
            eq_matrix=[[1.0, -1.0]],
            eq_rhs=[0.0],
            lower=[-np.inf, 1.0],
            upper=[np.inf, 4.0],
        )
    )
    assert solution.value == pytest.approx(1.0, abs=1e-10)


def test_redundant_rows() -> None:
    """Test a duplicated equality row is tolerated."""
    solution = solve(
        StandardFormLP(
            objective=[1.0, 2.0],
            eq_matrix=[[1.0, 1.0], [2.0, 2.0]],
            eq_rhs=[1.0, 2.0],
            sense="maximize",
        )
    )
    assert solution.value == pytest.approx(2.0, abs=1e-10)


def test_shape_validation() -> None:
    """Test mismatched eq_matrix and objective are rejected."""
    with pytest.raises(ValidationError, match="columns"):
        StandardFormLP(objective=[1.0, 2.0], eq_matrix=[[1.0, 1.0, 1.0]], eq_rhs=[1.0])


def test_bound_validation() -> None:
    """Test lower above upper is rejected."""
    with pytest.raises(ValidationError):
        StandardFormLP(
            objective=[1.0], eq_matrix=[[1.0]], eq_rhs=[1.0], lower=[2.0], upper=[1.0]
        )


@pytest.mark.parametrize("seed", range(20))
def test_simplex_matches_highs(seed: int) -> None:
    """Test the embedded simplex against HiGHS on random bounded problems."""
    lp = _random_bounded_lp(seed)
    ours = solve(lp)
    reference = solve(lp, HIGHS)
    assert ours.is_optimal and reference.is_optimal
    assert ours.value == pytest.approx(reference.value, abs=1e-7)
    np.testing.assert_allclose(lp.eq_matrix @ ours.point, lp.eq_rhs, atol=1e-7)
    assert np.all(ours.point >= -1e-9)
    assert np.all(ours.point <= 5.0 + 1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_strong_duality(seed: int) -> None:
    """Test the optimal value equals h'y for the returned equality duals."""
    rng = np.random.default_rng(100 + seed)
    G = rng.uniform(0.5, 2.0, size=(2, 5))
    h = G @ rng.uniform(0.0, 1.0, size=5)
    lp = StandardFormLP(objective=rng.uniform(0.1, 1.0, size=5), eq_matrix=G, eq_rhs=h)
    solution = solve(lp)
    assert solution.is_optimal
    assert solution.duals is not None
    assert solution.value == pytest.approx(float(solution.duals @ h), abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_vertex_enumeration(seed: int) -> None:
    """Test the optimum against brute-force enumeration of basic feasible solutions."""
    rng = np.random.default_rng(200 + seed)
    G = rng.normal(size=(2, 4))
    h = G @ rng.uniform(0.0, 1.0, size=4)
    c = rng.normal(size=4)
    upper = np.full(4, 3.0)

    # boxed variables in standard form: x + slack = 3
    G_full = np.block([[G, np.zeros((2, 4))], [np.eye(4), np.eye(4)]])
    h_full = np.concatenate([h, upper])
    best = np.inf
    for basis in itertools.combinations(range(8), 6):
        B = G_full[:, basis]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        y_basis = np.linalg.solve(B, h_full)
        if np.all(y_basis >= -1e-10):
            y = np.zeros(8)
            y[list(basis)] = y_basis
            best = min(best, float(c @ y[:4]))

    solution = solve(StandardFormLP(objective=c, eq_matrix=G, eq_rhs=h, upper=upper))
    assert solution.value == pytest.approx(best, abs=1e-8)


def test_deterministic_pivots() -> None:
    """Test identical inputs give identical outputs."""
    lp = _random_bounded_lp(7)
    first, second = solve(lp), solve(lp)
    assert first.iterations == second.iterations
    assert np.array_equal(first.point, second.point)


def test_iteration_limit() -> None:
    """Test exhausting a one-pivot budget surfaces as NumericalError."""
    lp = _random_bounded_lp(3)
    with pytest.raises(NumericalError, match="pivots"):
        solve(lp, SolverOptions(max_iterations=1))


def test_backend_from_environment(monkeypatch) -> None:
    """Test LSYSINFER_LP_BACKEND selects HiGHS when no options are passed."""
    lp = _random_bounded_lp(5)
    expected = solve(lp).value
    monkeypatch.setenv("LSYSINFER_LP_BACKEND", "highs")
    assert solve(lp).value == pytest.approx(expected, abs=1e-7)


def test_invalid_backend_in_environment(monkeypatch) -> None:
    """Test an unknown backend name is reported."""
    monkeypatch.setenv("LSYSINFER_LP_BACKEND", "glpk")
    with pytest.raises(ValueError, match="LP backend"):
        solve(_random_bounded_lp(1))


def test_feasible_cone_point_identity() -> None:
    """Test the identity cone returns beta itself."""
    x = feasible_cone_point(np.eye(2), np.array([0.3, 0.7]))
    np.testing.assert_allclose(x, [0.3, 0.7], atol=1e-10)


def test_feasible_cone_point_negative_coordinate() -> None:
    """Test a negative coordinate is outside the orthant."""
    assert feasible_cone_point(np.eye(2), np.array([-0.1, 1.1])) is None


def test_feasible_cone_point_one_equation() -> None:
    """Test x2 - x1 = 3 has a non-negative solution."""
    x = feasible_cone_point(np.array([[1.0, -1.0]]), np.array([-3.0]))
    assert x is not None
    assert np.all(x >= 0)
    assert x[0] - x[1] == pytest.approx(-3.0, abs=1e-10)


def test_farkas_certificate_separates() -> None:
    """Test the certificate satisfies A's <= 0 and <s, beta> > 0."""
    A = np.eye(2)
    beta = np.array([-0.1, 1.1])
    s = farkas_certificate(A, beta)
    assert s is not None
    assert np.all(A.T @ s <= 1e-9)
    assert float(s @ beta) > 0
    assert np.max(np.abs(s)) <= 1.0 + 1e-12


def test_farkas_certificate_absent_for_cone_member() -> None:
    """Test no certificate exists when beta lies in the cone."""
    assert farkas_certificate(np.eye(2), np.array([0.3, 0.7])) is None
