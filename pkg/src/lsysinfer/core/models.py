"""Data types shared by the statistic, bootstrap, inference and CLI layers."""

from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from lsysinfer.core.types import Mask, Matrix, Vector


def _symmetric(M: np.ndarray, name: str) -> None:
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = 1.0 + (float(np.max(np.abs(M))) if M.size else 0.0)
    if M.size and float(np.max(np.abs(M - M.T))) > 1e-10 * scale:
        raise ValueError(f"{name} must be symmetric")


class HypothesisProblem(BaseModel):
    """The pair (A, beta_hat) with its known/unknown row split and weights.

    Rows where ``known_mask`` is true carry exact constants (beta_k); the
    remaining rows (beta_u) are estimated from a sample of size ``n`` with
    asymptotic variance ``xi_hat``. ``omega_i`` is the studentization used by
    the inequality statistic; when unset the identity is used.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    A: Matrix
    beta_hat: Vector
    known_mask: Optional[Mask] = None
    n: int = Field(..., ge=1)
    xi_hat: Optional[Matrix] = None
    omega_i: Optional[Matrix] = None

    @model_validator(mode="after")
    def check_dimensions(self) -> "HypothesisProblem":
        """Check that every block conforms to A."""
        p = self.A.shape[0]
        if self.beta_hat.size != p:
            raise ValueError(f"beta_hat has {self.beta_hat.size} entries but A has {p} rows")
        if self.known_mask is None:
            self.known_mask = np.zeros(p, dtype=bool)
        if self.known_mask.size != p:
            raise ValueError(f"known_mask has {self.known_mask.size} entries but A has {p} rows")
        p_u = int(np.sum(~self.known_mask))
        if self.xi_hat is not None:
            if self.xi_hat.size == 0:
                self.xi_hat = np.zeros((p_u, p_u))
            if self.xi_hat.shape != (p_u, p_u):
                raise ValueError(f"xi_hat must be {p_u}x{p_u}, got {self.xi_hat.shape}")
            _symmetric(self.xi_hat, "xi_hat")
        if self.omega_i is not None:
            if self.omega_i.shape != (p, p):
                raise ValueError(f"omega_i must be {p}x{p}, got {self.omega_i.shape}")
            _symmetric(self.omega_i, "omega_i")
        return self

    @property
    def p(self) -> int:
        return int(self.A.shape[0])

    @property
    def d(self) -> int:
        return int(self.A.shape[1])

    @property
    def unknown(self) -> np.ndarray:
        assert self.known_mask is not None
        return ~self.known_mask

    @property
    def p_u(self) -> int:
        return int(np.sum(self.unknown))

    @property
    def A_u(self) -> np.ndarray:
        return self.A[self.unknown]

    @property
    def A_k(self) -> np.ndarray:
        return self.A[~self.unknown]

    @property
    def beta_u(self) -> np.ndarray:
        return self.beta_hat[self.unknown]

    @property
    def beta_k(self) -> np.ndarray:
        return self.beta_hat[~self.unknown]

    @property
    def xi(self) -> np.ndarray:
        """xi_hat, or the identity when none was supplied."""
        if self.xi_hat is None:
            return np.eye(self.p_u)
        return self.xi_hat

    @property
    def omega(self) -> np.ndarray:
        """omega_i, or the identity when unset."""
        if self.omega_i is None:
            return np.eye(self.p)
        return self.omega_i


class RawSample(BaseModel):
    """I.i.d. observations behind the unknown block of beta_hat.

    ``layout="choice"`` holds binary-choice records (y, w) and needs the
    ordered ``w_support`` defining the conditioning cells. ``layout="moment"``
    holds one row G_i per observation; beta_u is their column mean.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    records: Matrix
    layout: Literal["choice", "moment"] = "choice"
    w_support: Optional[Vector] = None
    resample_indices: Optional[list[int]] = None

    @model_validator(mode="after")
    def check_records(self) -> "RawSample":
        if self.records.shape[0] == 0:
            raise ValueError("records must not be empty")
        if self.layout == "choice":
            if self.records.shape[1] != 2:
                raise ValueError("choice records must have exactly two columns (y, w)")
            if self.w_support is None or self.w_support.size == 0:
                raise ValueError("choice records need a w_support")
            if not np.all(np.isin(self.records[:, 0], (0.0, 1.0))):
                raise ValueError("choice outcome y must be 0 or 1")
        if self.resample_indices is not None:
            idx = np.asarray(self.resample_indices)
            if idx.size and (idx.min() < 0 or idx.max() >= self.records.shape[0]):
                raise ValueError("resample_indices out of range")
        return self

    @property
    def rows(self) -> np.ndarray:
        """Records in effect, after applying any resample indices."""
        if self.resample_indices is None:
            return self.records
        return self.records[np.asarray(self.resample_indices, dtype=int)]

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    def resample(self, rng: np.random.Generator) -> "RawSample":
        """Multinomial bootstrap resample of the original records."""
        size = self.records.shape[0]
        indices = rng.integers(0, size, size=size)
        return self.model_copy(update={"resample_indices": indices.tolist()})


class ProblemDiagnostics(BaseModel):
    """Structural facts about a HypothesisProblem."""

    rank: int
    p: int
    d: int
    p_u: int
    full_row_rank: bool
    equality_test_active: bool
    xi_psd: bool
    xi_min_eigenvalue: Optional[float] = None
    known_block_feasible: bool
    known_block_certificate: Optional[list[float]] = None
    messages: list[str] = Field(default_factory=list)


class StarEstimate(BaseModel):
    """The projection estimator x_star and its fitted values A x_star."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x_star: Vector
    fitted: Vector
    method: Literal["PinvLeastNorm", "ConstrainedGLS"]


class StatisticValue(BaseModel):
    """The equality and inequality statistics and their maximum."""

    t_e: float = Field(..., ge=0.0)
    t_i: float = Field(..., ge=0.0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def t_n(self) -> float:
        return max(self.t_e, self.t_i)


class RestrictedEstimate(BaseModel):
    """A beta satisfying the null, used to bound the drift term."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    beta_r: Vector
    witness_x: Vector
    outer_value: float


class BootstrapDraw(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    g_e: Vector
    g_i: Vector
    replicate_index: int
    redraws: int = 0


class CriticalValueReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    c_value: float = Field(..., ge=0.0)
    alpha: float
    lambda_used: Optional[float] = None
    draws: int
    bootstrap_stats: Vector
    method: Literal["one-step", "two-stage"] = "one-step"
    gamma: Optional[float] = None
    first_stage: Optional[float] = None


class LambdaMode(BaseModel):
    """How the drift-bound weight lambda is chosen.

    ``rot`` is the rule of thumb, ``boot`` the bootstrap rule, ``fixed`` a
    given value in [0, 1], and ``two-stage`` replaces lambda with the
    two-stage critical value (``value`` holds gamma, None for alpha / 10).
    """

    kind: Literal["rot", "boot", "fixed", "two-stage"]
    value: Optional[float] = None

    @model_validator(mode="after")
    def check_value(self) -> "LambdaMode":
        if self.kind == "fixed":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise ValueError("a fixed lambda must lie in [0, 1]")
        if self.kind == "two-stage" and self.value is not None:
            if not 0.0 < self.value < 0.5:
                raise ValueError("two-stage gamma must lie in (0, 0.5)")
        return self

    @classmethod
    def parse(cls, text: str) -> "LambdaMode":
        """Parse ``rot``, ``boot``, ``two-stage[:gamma]`` or a number."""
        raw = text.strip().lower()
        if raw in ("rot", "boot"):
            return cls(kind=raw)  # type: ignore[arg-type]
        if raw.startswith("two-stage"):
            _, _, gamma = raw.partition(":")
            try:
                return cls(kind="two-stage", value=float(gamma) if gamma else None)
            except ValueError as e:
                raise ValueError(f"invalid two-stage gamma in lambda '{text}'") from e
        try:
            value = float(raw)
        except ValueError as e:
            raise ValueError(
                f"invalid lambda '{text}': expected rot, boot, two-stage[:gamma] or a number"
            ) from e
        return cls(kind="fixed", value=value)

    def label(self) -> str:
        if self.kind == "fixed":
            return f"{self.value:g}"
        if self.kind == "two-stage" and self.value is not None:
            return f"two-stage:{self.value:g}"
        return self.kind


class TestReport(BaseModel):
    """Outcome of one run of the test, with everything needed to re-run it."""

    __test__ = False  # not a pytest class

    statistic: StatisticValue
    critical: CriticalValueReport
    reject: bool
    p_value: float = Field(..., gt=0.0, le=1.0)
    seed: int
    bootstrap: int
    alpha: float
    lambda_used: Optional[float] = None
    lambda_mode: str
    timing_ms: float
    diagnostics: list[str] = Field(default_factory=list)
    tool_version: str


class GridPoint(BaseModel):
    """One evaluated hypothesis.

    t_n, c_value and lambda_used are None when the known rows are unattainable;
    lambda_used is also None under the two-stage critical value.
    """

    gamma: float
    reject: bool
    t_n: Optional[float] = None
    c_value: Optional[float] = None
    lambda_used: Optional[float] = None


class ConfidenceInterval(BaseModel):
    """Hull of the non-rejected hypothesized values."""

    lower: float
    upper: float
    alpha: float
    grid: list[GridPoint]
    contiguous: bool = True
    seed: int
    bootstrap: int
    lambda_mode: str
    tool_version: str

    @model_validator(mode="after")
    def check_order(self) -> "ConfidenceInterval":
        if self.lower > self.upper:
            raise ValueError("lower must not exceed upper")
        return self


class RunConfig(BaseModel):
    """Options shared by every CLI command."""

    command: Literal["test", "invert", "bounds", "mc", "power"]
    problem: Optional[Path] = None
    data: Optional[Path] = None
    design: Optional[Path] = None
    alpha: float = 0.05
    lambda_mode: LambdaMode = Field(default_factory=lambda: LambdaMode(kind="boot"))
    bootstrap: int = Field(250, ge=1)
    seed: int = Field(0, ge=0)
    output: Optional[Path] = None
    threads: int = Field(1, ge=1)

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, v: float) -> float:
        """alpha must lie strictly between 0 and 0.5."""
        if not 0.0 < v < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        return v

    @field_validator("lambda_mode", mode="before")
    @classmethod
    def parse_lambda(cls, v):
        """Accept the command-line spelling of a lambda mode."""
        if isinstance(v, str):
            return LambdaMode.parse(v)
        return v
