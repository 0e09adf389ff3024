"""Mixed-logit designs: support grids, study configuration and gamma rules."""

import json
import logging
import math
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.stats import qmc

from lsysinfer.core.errors import InputError
from lsysinfer.core.models import LambdaMode
from lsysinfer.core.types import Matrix, Vector

logger = logging.getLogger(__name__)

W_GRIDS = {
    4: np.array([0.0, 1.0, 2.0, 3.0]),
    16: np.linspace(0.0, 3.0, 16),
}
INTERCEPT_RANGE = (0.0, 0.5)
SLOPE_RANGE = (-3.0, 0.0)


def sobol_points(count: int) -> np.ndarray:
    """First ``count`` one-dimensional Sobol points after the leading 0.

    In one dimension the Sobol sequence is the base-2 radical inverse, which
    the unscrambled base-2 Halton generator enumerates in natural order
    (0.5, 0.25, 0.75, 0.125, ...).
    """
    if count < 0:
        raise InputError(f"point count must be non-negative, got {count}")
    sampler = qmc.Halton(d=1, scramble=False)
    return sampler.random(count + 1)[1:, 0]


class MixedLogitDesign(BaseModel):
    """Finite-support random-coefficient binary logit.

    ``v_support`` has one (intercept, slope) row per consumer type and
    ``x_true`` their population shares. ``t`` and ``w_bar`` select the
    target parameter F(t | w_bar), the share of types with price
    elasticity at w_bar no greater than t.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w_support: Vector
    v_support: Matrix
    x_true: Vector
    t: float
    w_bar: float
    n: int = Field(..., ge=1)

    @model_validator(mode="after")
    def check_support(self) -> "MixedLogitDesign":
        """Types are (c0, c1) pairs with shares forming a probability vector."""
        if self.v_support.ndim != 2 or self.v_support.shape[1] != 2:
            raise ValueError("v_support must have one (c0, c1) pair per row")
        if self.x_true.size != self.v_support.shape[0]:
            raise ValueError(
                f"x_true has {self.x_true.size} entries but there are "
                f"{self.v_support.shape[0]} types"
            )
        if np.any(self.x_true < 0) or not math.isclose(float(self.x_true.sum()), 1.0, abs_tol=1e-9):
            raise ValueError("x_true must be non-negative and sum to one")
        if np.unique(self.w_support).size != self.w_support.size:
            raise ValueError("w_support points must be distinct")
        return self

    @property
    def d(self) -> int:
        return int(self.v_support.shape[0])

    @property
    def p(self) -> int:
        return int(self.w_support.size) + 2


class ElasticityBounds(BaseModel):
    lower: float = Field(..., ge=-1e-9, le=1.0 + 1e-9)
    upper: float = Field(..., ge=-1e-9, le=1.0 + 1e-9)
    t: float
    w_bar: float

    @model_validator(mode="after")
    def check_order(self) -> "ElasticityBounds":
        if self.lower > self.upper + 1e-9:
            raise ValueError("lower bound exceeds upper bound")
        return self

    @property
    def width(self) -> float:
        return self.upper - self.lower


def build_design(d: int, w_points: int, t: float, w_bar: float, n: int) -> MixedLogitDesign:
    """Uniform design on a product grid of one-dimensional Sobol points.

    Args:
        d: Number of types; must be a perfect square.
        w_points: 4 for W in {0, 1, 2, 3}, 16 for W in {0, 0.2, ..., 3}.
        t: Elasticity threshold.
        w_bar: Evaluation price.
        n: Sample size.

    Raises:
        InputError: If d is not a perfect square or w_points is unsupported.
    """
    side = math.isqrt(d)
    if d < 1 or side * side != d:
        raise InputError(f"d must be a perfect square, got {d}")
    if w_points not in W_GRIDS:
        raise InputError(f"w_points must be one of {sorted(W_GRIDS)}, got {w_points}")

    u = sobol_points(side)
    intercepts = INTERCEPT_RANGE[0] + (INTERCEPT_RANGE[1] - INTERCEPT_RANGE[0]) * u
    slopes = SLOPE_RANGE[0] + (SLOPE_RANGE[1] - SLOPE_RANGE[0]) * u
    grid = np.array([(c0, c1) for c0 in intercepts for c1 in slopes])
    return MixedLogitDesign(
        w_support=W_GRIDS[w_points],
        v_support=grid,
        x_true=np.full(d, 1.0 / d),
        t=t,
        w_bar=w_bar,
        n=n,
    )


class GammaRule(BaseModel):
    """Where to put the hypothesized value of F(t | w_bar).

    ``lower``/``upper`` use the population identified-set endpoints, moved
    outward by ``offset``; ``midpoint`` and ``fixed`` are shifted by
    ``offset``; ``sweep`` evaluates every point of ``grid``.
    """

    kind: Literal["lower", "upper", "midpoint", "fixed", "sweep"] = "lower"
    value: Optional[float] = None
    grid: Optional[list[float]] = None
    offset: float = 0.0

    @model_validator(mode="after")
    def check_fields(self) -> "GammaRule":
        if self.kind == "fixed" and self.value is None:
            raise ValueError("a fixed gamma rule needs a value")
        if self.kind == "sweep" and not self.grid:
            raise ValueError("a sweep gamma rule needs a non-empty grid")
        return self

    @classmethod
    def parse(cls, text: str) -> "GammaRule":
        """Parse ``lower``, ``upper[+offset]``, ``midpoint``, a number or ``lo:hi:points``."""
        raw = text.strip().lower()
        if ":" in raw:
            try:
                lo, hi, count = raw.split(":")
                grid = np.linspace(float(lo), float(hi), int(count)).tolist()
            except ValueError as e:
                raise ValueError(f"invalid sweep '{text}': expected lo:hi:points") from e
            return cls(kind="sweep", grid=grid)
        name, sign, offset = raw.partition("+")
        if name in ("lower", "upper", "midpoint"):
            return cls(kind=name, offset=float(offset) if sign else 0.0)  # type: ignore[arg-type]
        try:
            return cls(kind="fixed", value=float(raw))
        except ValueError as e:
            raise ValueError(
                f"invalid gamma rule '{text}': expected lower, upper, midpoint, a number "
                "or lo:hi:points"
            ) from e


class StudyConfig(BaseModel):
    """A Monte Carlo study read from a design file."""

    d: int = Field(..., ge=1)
    w_points: int = 4
    t: float = -1.0
    w_bar: float = 1.0
    n: int = Field(1000, ge=1)
    replications: int = Field(100, ge=1)
    bootstrap: int = Field(250, ge=1)
    alpha: float = 0.05
    lambda_mode: LambdaMode = Field(default_factory=lambda: LambdaMode(kind="boot"), alias="lambda")
    gamma_rule: GammaRule = Field(default_factory=GammaRule)
    seed: int = Field(0, ge=0)

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, v: float) -> float:
        if not 0.0 < v < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        return v

    @field_validator("lambda_mode", mode="before")
    @classmethod
    def parse_lambda(cls, v):
        if isinstance(v, (int, float)):
            return LambdaMode(kind="fixed", value=float(v))
        if isinstance(v, str):
            return LambdaMode.parse(v)
        return v

    @field_validator("gamma_rule", mode="before")
    @classmethod
    def parse_gamma_rule(cls, v):
        if isinstance(v, (int, float)):
            return GammaRule(kind="fixed", value=float(v))
        if isinstance(v, str):
            return GammaRule.parse(v)
        return v

    def design(self) -> MixedLogitDesign:
        return build_design(self.d, self.w_points, self.t, self.w_bar, self.n)


def load_design(path: Path) -> Union[MixedLogitDesign, StudyConfig]:
    """Read a design file: explicit supports, or a study configuration.

    Files with a ``v_support`` key describe a design directly; anything else
    is parsed as a StudyConfig.

    Raises:
        InputError: If the file cannot be read or a field is invalid.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"cannot read design file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise InputError(f"{path} must hold a JSON object")
    try:
        if "v_support" in data:
            return MixedLogitDesign.model_validate(data)
        return StudyConfig.model_validate(data)
    except ValidationError as e:
        raise InputError(f"invalid design in {path}: {e}") from e
