"""Tests for bootstrap draws, critical values and lambda selection."""

import math

import numpy as np
import pytest

from lsysinfer.core.errors import InputError, NumericalError
from lsysinfer.core.matlin import range_project
from lsysinfer.core.models import BootstrapDraw, HypothesisProblem, RawSample
from lsysinfer.inference.bootstrap import (
    critical_value,
    draw_bootstrap,
    lambda_bootstrap,
    lambda_delta,
    lambda_rule_of_thumb,
    omega_i_from_bootstrap,
    order_statistic,
    replicate_rng,
    two_stage_critical_value,
)
from lsysinfer.inference.restricted import restricted_estimator
from lsysinfer.inference.statistic import estimate_x_star
from lsysinfer.mixedlogit.design import build_design
from lsysinfer.mixedlogit.model import build_problem, simulate_sample


@pytest.fixture
def tall_problem() -> HypothesisProblem:
    """Two noisy measurements of one non-negative parameter."""
    return HypothesisProblem(A=[[1.0], [1.0]], beta_hat=[1.0, 1.2], n=100)


@pytest.fixture
def identity_problem() -> HypothesisProblem:
    return HypothesisProblem(A=np.eye(2), beta_hat=[0.5, 0.2], n=400)


def _zero_draws(p: int, count: int) -> list[BootstrapDraw]:
    return [
        BootstrapDraw(g_e=np.zeros(p), g_i=np.zeros(p), replicate_index=b)
        for b in range(1, count + 1)
    ]


def test_order_statistic_convention() -> None:
    """Test the ceil(B * level)-th smallest value is returned."""
    assert order_statistic(np.array([4.0, 2.0, 1.0, 3.0]), 0.75) == 3.0
    assert order_statistic(np.array([4.0, 2.0, 1.0, 3.0]), 1.0) == 4.0
    assert order_statistic(np.array([5.0]), 0.01) == 5.0
    assert order_statistic(np.arange(1.0, 101.0), 0.95) == 95.0


@pytest.mark.parametrize("level", [0.5, 0.9, 0.95, 0.99])
def test_order_statistic_matches_sorted_rank(level: float) -> None:
    """Test the quantile equals sorting and indexing at ceil(B * level)."""
    stats = np.random.default_rng(17).normal(size=200)
    rank = math.ceil(round(stats.size * level, 9))
    assert order_statistic(stats, level) == np.sort(stats)[rank - 1]


def test_order_statistic_empty() -> None:
    """Test an empty sample is refused."""
    with pytest.raises(InputError):
        order_statistic(np.array([]), 0.95)


def test_replicate_rng_streams() -> None:
    """Test replicate streams are reproducible and distinct."""
    first = replicate_rng(5, 1).random(3)
    np.testing.assert_array_equal(first, replicate_rng(5, 1).random(3))
    assert not np.array_equal(first, replicate_rng(5, 2).random(3))
    assert not np.array_equal(first, replicate_rng(5, 1, attempt=1).random(3))


def test_zero_draws(tall_problem) -> None:
    """Test B = 0 gives no draws."""
    star = estimate_x_star(tall_problem)
    assert draw_bootstrap(tall_problem, None, star, 0, seed=1) == []


def test_constant_data_gives_zero_draws() -> None:
    """Test identical records leave nothing to resample."""
    problem = HypothesisProblem(A=[[1.0], [1.0]], beta_hat=[1.0, 1.0], n=10)
    raw = RawSample(records=np.ones((10, 2)), layout="moment")
    draws = draw_bootstrap(problem, raw, estimate_x_star(problem), 5, seed=3)
    assert [draw.replicate_index for draw in draws] == [1, 2, 3, 4, 5]
    for draw in draws:
        np.testing.assert_allclose(draw.g_e, 0.0, atol=1e-12)
        np.testing.assert_allclose(draw.g_i, 0.0, atol=1e-12)


def test_draws_do_not_depend_on_workers(tall_problem) -> None:
    """Test serial and threaded draws are identical."""
    star = estimate_x_star(tall_problem)
    serial = draw_bootstrap(tall_problem, None, star, 20, seed=9)
    threaded = draw_bootstrap(tall_problem, None, star, 20, seed=9, workers=3)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.g_e, b.g_e)
        np.testing.assert_array_equal(a.g_i, b.g_i)


def test_draws_depend_on_seed(tall_problem) -> None:
    """Test different seeds give different draws."""
    star = estimate_x_star(tall_problem)
    first = draw_bootstrap(tall_problem, None, star, 3, seed=1)
    second = draw_bootstrap(tall_problem, None, star, 3, seed=2)
    assert not np.array_equal(first[0].g_i, second[0].g_i)


def test_gaussian_draws_are_centered(tall_problem) -> None:
    """Test g_i is centred on zero and lies in range(A)."""
    star = estimate_x_star(tall_problem)
    draws = draw_bootstrap(tall_problem, None, star, 400, seed=4)
    G = np.vstack([draw.g_i for draw in draws])
    # g_i = sqrt(n) (mean of the two draws - mean of beta) on both coordinates
    np.testing.assert_allclose(G[:, 0], G[:, 1], atol=1e-12)
    se = G[:, 0].std() / math.sqrt(len(draws))
    assert abs(G[:, 0].mean()) < 4 * se


def test_empty_cells_exhaust_redraws() -> None:
    """Test a cell that can never be filled is reported with its stage."""
    problem = HypothesisProblem(A=np.eye(2), beta_hat=[0.5, 0.5], n=4)
    raw = RawSample(records=[[1, 0], [0, 0], [1, 0], [0, 0]], layout="choice", w_support=[0, 1])
    star = estimate_x_star(problem)
    with pytest.raises(NumericalError) as excinfo:
        draw_bootstrap(problem, raw, star, 1, seed=0)
    assert excinfo.value.stage == "draw_bootstrap"


def test_omega_from_zero_draws() -> None:
    """Test all-zero draws give a zero weighting matrix."""
    np.testing.assert_allclose(omega_i_from_bootstrap(_zero_draws(2, 4)), np.zeros((2, 2)))


def test_omega_from_symmetric_two_point_draws() -> None:
    """Test +-(1, 0) draws give diag(1, 0)."""
    draws = [
        BootstrapDraw(g_e=np.zeros(2), g_i=np.array([sign, 0.0]), replicate_index=b)
        for b, sign in enumerate([1.0, -1.0, 1.0, -1.0], start=1)
    ]
    np.testing.assert_allclose(omega_i_from_bootstrap(draws), np.diag([1.0, 0.0]), atol=1e-12)


def test_omega_needs_two_draws() -> None:
    """Test a single draw cannot give a covariance."""
    with pytest.raises(InputError, match="at least two"):
        omega_i_from_bootstrap(_zero_draws(2, 1))


def test_omega_from_mixed_logit_draws() -> None:
    """Test the weighting matrix is symmetric PSD with range inside range(A)."""
    design = build_design(4, 4, -1.0, 1.0, 1000)
    sample = simulate_sample(design, seed=2)
    problem = build_problem(design, sample, 1.0)
    draws = draw_bootstrap(problem, sample, estimate_x_star(problem), 60, seed=5)
    omega = omega_i_from_bootstrap(draws)
    np.testing.assert_allclose(omega, omega.T, atol=1e-10)
    assert np.linalg.eigvalsh(omega).min() > -1e-8
    for column in omega.T:
        np.testing.assert_allclose(range_project(problem.A, column), column, atol=1e-6)


def test_mixed_logit_draws_are_centered() -> None:
    """Test resampled g_i average to zero on the unknown rows and vanish on the known ones."""
    design = build_design(16, 4, -1.0, 1.0, 1000)
    sample = simulate_sample(design, seed=3)
    problem = build_problem(design, sample, 0.5)
    draws = draw_bootstrap(problem, sample, estimate_x_star(problem), 200, seed=8)
    G = np.vstack([draw.g_i for draw in draws])
    np.testing.assert_array_equal(G[:, -2:], 0.0)
    unknown = G[:, :-2]
    se = unknown.std(axis=0) / math.sqrt(len(draws))
    assert np.all(se > 0.0)
    assert np.all(np.abs(unknown.mean(axis=0)) < 5 * se)

    omega = omega_i_from_bootstrap(draws)
    np.testing.assert_array_equal(omega[-2:], 0.0)
    np.testing.assert_array_equal(omega[:, -2:], 0.0)


def test_critical_value_zero_draws(identity_problem) -> None:
    """Test all-zero draws give a zero critical value."""
    star = estimate_x_star(identity_problem)
    restricted = restricted_estimator(identity_problem, star)
    report = critical_value(identity_problem, star, restricted, _zero_draws(2, 10), 0.0, 0.05)
    assert report.c_value == 0.0
    assert report.lambda_used == 0.0
    assert report.method == "one-step"


def test_critical_value_is_order_statistic(identity_problem) -> None:
    """Test c_value is the (1 - alpha) order statistic of the reported draws."""
    star = estimate_x_star(identity_problem)
    draws = draw_bootstrap(identity_problem, None, star, 40, seed=6)
    restricted = restricted_estimator(identity_problem, star)
    report = critical_value(identity_problem, star, restricted, draws, 0.5, 0.1)
    assert report.draws == 40
    assert report.c_value == order_statistic(report.bootstrap_stats, 0.9)
    assert np.all(report.bootstrap_stats >= 0)


def test_critical_value_non_increasing_in_lambda() -> None:
    """Test a larger drift weight never raises the critical value."""
    problem = HypothesisProblem(A=np.eye(2), beta_hat=[0.5, 0.05], n=100)
    star = estimate_x_star(problem)
    draws = draw_bootstrap(problem, None, star, 40, seed=8)
    restricted = restricted_estimator(problem, star)
    values = [
        critical_value(problem, star, restricted, draws, lam, 0.05).c_value
        for lam in (0.0, 0.5, 1.0)
    ]
    assert values[0] >= values[1] - 1e-9
    assert values[1] >= values[2] - 1e-9


def test_critical_value_rejects_bad_alpha(identity_problem) -> None:
    """Test alpha outside (0, 0.5)."""
    star = estimate_x_star(identity_problem)
    restricted = restricted_estimator(identity_problem, star)
    with pytest.raises(InputError, match="alpha"):
        critical_value(identity_problem, star, restricted, _zero_draws(2, 3), 0.0, 0.7)


def test_lambda_rule_of_thumb_floor() -> None:
    """Test p = n = 1 clamps every logarithm at one."""
    assert lambda_rule_of_thumb(1, 1) == 1.0


def test_lambda_rule_of_thumb_value() -> None:
    """Test the p = 6, n = 1000 value."""
    expected = 1.0 / math.sqrt(math.log(6) * math.log(math.log(1000)))
    assert lambda_rule_of_thumb(6, 1000) == pytest.approx(expected, rel=1e-12)
    assert lambda_rule_of_thumb(6, 1000) == pytest.approx(0.537383, abs=1e-5)


def test_lambda_rule_of_thumb_monotone() -> None:
    """Test the rule is non-increasing in p and in n."""
    assert lambda_rule_of_thumb(18, 1000) <= lambda_rule_of_thumb(6, 1000)
    assert lambda_rule_of_thumb(6, 4000) <= lambda_rule_of_thumb(6, 1000)


def test_lambda_delta_value() -> None:
    """Test delta_n at n = 1000."""
    assert lambda_delta(1000) == pytest.approx(0.719323, abs=1e-5)


def test_lambda_bootstrap_zero_draws(identity_problem) -> None:
    """Test zero draws give lambda = 0."""
    assert lambda_bootstrap(identity_problem, _zero_draws(2, 10)) == 0.0


def test_lambda_bootstrap_clamped(identity_problem) -> None:
    """Test a large tau is clamped at one."""
    draws = [
        BootstrapDraw(g_e=np.zeros(2), g_i=np.array([-50.0, 0.0]), replicate_index=b)
        for b in range(1, 6)
    ]
    assert lambda_bootstrap(identity_problem, draws) == 1.0


def test_two_stage_zero_draws(identity_problem) -> None:
    """Test all-zero draws give zero first- and second-stage values."""
    star = estimate_x_star(identity_problem)
    report = two_stage_critical_value(identity_problem, star, _zero_draws(2, 10), 0.05)
    assert report.c_value == 0.0
    assert report.first_stage == 0.0
    assert report.gamma == pytest.approx(0.005)
    assert report.lambda_used is None
    assert report.method == "two-stage"


def test_two_stage_gamma_range(identity_problem) -> None:
    """Test gamma must lie strictly below alpha."""
    star = estimate_x_star(identity_problem)
    with pytest.raises(InputError, match="gamma"):
        two_stage_critical_value(identity_problem, star, _zero_draws(2, 3), 0.05, gamma=0.05)


def test_two_stage_not_above_zero_lambda(identity_problem) -> None:
    """Test the capped drift never exceeds the lambda = 0 statistic draw by draw."""
    star = estimate_x_star(identity_problem)
    draws = draw_bootstrap(identity_problem, None, star, 30, seed=12)
    restricted = restricted_estimator(identity_problem, star)
    one_step = critical_value(identity_problem, star, restricted, draws, 0.0, 0.05)
    two_stage = two_stage_critical_value(identity_problem, star, draws, 0.05)
    assert np.all(two_stage.bootstrap_stats <= one_step.bootstrap_stats + 1e-9)
