"""Builders and checks for HypothesisProblem instances."""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from lsysinfer.core.errors import EmptyCellError, InputError
from lsysinfer.core.lp import farkas_certificate
from lsysinfer.core.matlin import full_row_rank, matrix_rank, spectral
from lsysinfer.core.models import HypothesisProblem, ProblemDiagnostics, RawSample
from lsysinfer.core.types import as_matrix, as_vector

logger = logging.getLogger(__name__)


def augment_with_counterfactual(
    base: HypothesisProblem, a_row: np.ndarray, gamma: float
) -> HypothesisProblem:
    """Append the known row a_row'x = gamma to the problem.

    Args:
        base: Problem to extend.
        a_row: Coefficients of the linear functional, one per column of A.
        gamma: Hypothesized value of the functional.

    Returns:
        A new problem with one more (known) row. ``xi_hat`` is unchanged;
        ``omega_i`` is dropped because its dimension no longer matches.

    Raises:
        InputError: If a_row does not have one entry per column of A.
    """
    a_row = as_vector(a_row)
    if a_row.size != base.d:
        raise InputError(f"a_row has {a_row.size} entries but A has {base.d} columns")
    if base.omega_i is not None:
        logger.info("Dropping omega_i after appending a counterfactual row")
    assert base.known_mask is not None
    return HypothesisProblem(
        A=np.vstack([base.A, a_row]),
        beta_hat=np.append(base.beta_hat, float(gamma)),
        known_mask=np.append(base.known_mask, True),
        n=base.n,
        xi_hat=base.xi_hat,
    )


def build_conditional_moment_problem(
    G_bar: np.ndarray,
    M_bar: np.ndarray,
    n: int,
    xi_hat: Optional[np.ndarray] = None,
) -> HypothesisProblem:
    """Encode E[G - M delta | W] <= 0 as a cone hypothesis.

    With delta = delta_plus - delta_minus and a slack Delta >= 0 the moment
    inequalities become G_bar = [M, -M, -I] (delta_plus, delta_minus, Delta).
    """
    G_bar = as_vector(G_bar)
    M_bar = as_matrix(M_bar)
    if M_bar.shape[0] != G_bar.size:
        raise InputError(f"M_bar has {M_bar.shape[0]} rows but G_bar has {G_bar.size} entries")
    p = G_bar.size
    A = np.hstack([M_bar, -M_bar, -np.eye(p)])
    return HypothesisProblem(A=A, beta_hat=G_bar, n=n, xi_hat=xi_hat)


def validate(problem: HypothesisProblem) -> ProblemDiagnostics:
    """Report the rank of A, the statistic regime and PSD checks of xi_hat.

    When no x >= 0 reproduces the known rows, the Farkas vector s with
    A_k's <= 0 and <s, beta_k> > 0 is reported as the witness.
    """
    rank = matrix_rank(problem.A)
    frr = full_row_rank(problem.A)
    messages = [f"rank(A) = {rank} with p = {problem.p}, d = {problem.d}"]
    if frr:
        messages.append("A has full row rank and d >= p: the equality statistic is identically 0")
    else:
        messages.append("range test active: the equality statistic is computed")

    xi_min = None
    xi_psd = True
    if problem.p_u:
        eigenvalues = spectral(problem.xi).eigenvalues
        xi_min = float(eigenvalues[-1])
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        xi_psd = xi_min >= -1e-8 * scale
        if not xi_psd:
            messages.append(f"xi_hat is not positive semidefinite (eigenvalue {xi_min:.3e})")

    certificate = None
    if problem.p_u < problem.p:
        certificate = farkas_certificate(problem.A_k, problem.beta_k)
        if certificate is not None:
            witness = np.array2string(certificate, precision=6, separator=", ")
            messages.append(
                "no x >= 0 reproduces the known rows; the null is vacuous "
                f"(certificate s = {witness} on the known rows)"
            )

    for message in messages:
        logger.info(message)
    return ProblemDiagnostics(
        rank=rank,
        p=problem.p,
        d=problem.d,
        p_u=problem.p_u,
        full_row_rank=frr,
        equality_test_active=not frr and problem.p_u > 0,
        xi_psd=bool(xi_psd),
        xi_min_eigenvalue=xi_min,
        known_block_feasible=certificate is None,
        known_block_certificate=None if certificate is None else certificate.tolist(),
        messages=messages,
    )


def estimate_beta_u(raw: RawSample) -> tuple[np.ndarray, np.ndarray]:
    """Estimate the unknown block and its asymptotic variance from raw data.

    For choice records the estimate is the vector of cell choice frequencies
    with variance diag(p(1 - p) / q), q the empirical cell mass. For moment
    records it is the column mean with the sample covariance.

    Raises:
        EmptyCellError: If a support point of w has no observations.
    """
    rows = raw.rows
    n = rows.shape[0]
    if raw.layout == "moment":
        beta_u = rows.mean(axis=0)
        xi = np.atleast_2d(np.cov(rows, rowvar=False)) if n > 1 else np.zeros((rows.shape[1],) * 2)
        return beta_u, xi

    assert raw.w_support is not None
    y, w = rows[:, 0], rows[:, 1]
    probs = np.empty(raw.w_support.size)
    mass = np.empty(raw.w_support.size)
    for j, point in enumerate(raw.w_support):
        in_cell = np.isclose(w, point)
        count = int(np.sum(in_cell))
        if count == 0:
            raise EmptyCellError(f"no observations with w = {point:g}")
        probs[j] = y[in_cell].mean()
        mass[j] = count / n
    return probs, np.diag(probs * (1.0 - probs) / mass)


def with_beta_u(
    problem: HypothesisProblem, beta_u: np.ndarray, xi_hat: Optional[np.ndarray] = None
) -> HypothesisProblem:
    """Copy of ``problem`` with a new unknown block (and optionally a new xi_hat)."""
    beta_u = as_vector(beta_u)
    if beta_u.size != problem.p_u:
        raise InputError(f"beta_u has {beta_u.size} entries but the problem has {problem.p_u}")
    beta_hat = problem.beta_hat.copy()
    beta_hat[problem.unknown] = beta_u
    return HypothesisProblem(
        A=problem.A,
        beta_hat=beta_hat,
        known_mask=problem.known_mask,
        n=problem.n,
        xi_hat=problem.xi_hat if xi_hat is None else xi_hat,
        omega_i=problem.omega_i,
    )


def dump_problem(problem: HypothesisProblem) -> str:
    """Serialize to the JSON problem file format."""
    return problem.model_dump_json(indent=2, exclude_none=True)


def parse_problem(text: str, source: str = "<string>") -> HypothesisProblem:
    try:
        return HypothesisProblem.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise InputError(f"{source} is not valid JSON: {e}") from e
    except ValidationError as e:
        raise InputError(f"invalid problem in {source}: {e}") from e


def load_problem(path: Path) -> HypothesisProblem:
    """Read a JSON problem file.

    Raises:
        InputError: If the file is missing, is not JSON, or a field is invalid.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read problem file {path}: {e}") from e
    return parse_problem(text, source=str(path))


def load_raw_csv(path: Path, w_support: Optional[np.ndarray] = None) -> RawSample:
    """Read y,w choice records from a CSV file with a header row.

    When ``w_support`` is not given, the sorted distinct values of w are used.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"cannot read data file {path}: {e}") from e
    missing = [column for column in ("y", "w") if column not in frame.columns]
    if missing:
        raise InputError(f"data file {path} is missing column(s): {', '.join(missing)}")
    try:
        records = frame[["y", "w"]].to_numpy(dtype=float)
    except ValueError as e:
        raise InputError(f"non-numeric y or w in {path}: {e}") from e
    support = np.unique(records[:, 1]) if w_support is None else as_vector(w_support)
    try:
        return RawSample(records=records, layout="choice", w_support=support)
    except ValidationError as e:
        raise InputError(f"invalid records in {path}: {e}") from e
