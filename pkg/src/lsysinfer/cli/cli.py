"""lsysinfer CLI - test whether an estimated vector lies in the cone of a known matrix."""

import logging
from collections.abc import Callable
from pathlib import Path
from typing import Optional, TypeVar

import numpy as np
import typer
from pydantic import BaseModel, ValidationError

from lsysinfer import __version__
from lsysinfer.core.config import configure_logging, resolve_threads
from lsysinfer.core.errors import InputError, NumericalError
from lsysinfer.core.hypothesis import (
    augment_with_counterfactual,
    estimate_beta_u,
    load_problem,
    load_raw_csv,
)
from lsysinfer.core.models import HypothesisProblem, RawSample, RunConfig
from lsysinfer.inference.testing import invert_ci, run_test
from lsysinfer.mixedlogit.design import (
    GammaRule,
    MixedLogitDesign,
    StudyConfig,
    load_design,
)
from lsysinfer.mixedlogit.model import (
    build_problem,
    identified_band,
    identified_bounds,
    population_cond_probs,
)
from lsysinfer.mixedlogit.montecarlo import monte_carlo, write_power_csv

logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_NUMERICAL = 3

T = TypeVar("T")

app = typer.Typer(
    no_args_is_help=True,
    help="lsysinfer - inference on beta = Ax for some x >= 0",
)


def version_callback(value: bool):
    """Print version and exit."""
    if value:
        typer.echo(f"lsysinfer version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    ctx: typer.Context,
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-v",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit",
    ),
    threads: Optional[int] = typer.Option(
        None,
        "--threads",
        "-j",
        help="Worker count (default: LSYSINFER_THREADS or the number of CPUs)",
    ),
):
    """Configure logging and the worker count shared by every command."""
    try:
        configure_logging()
        ctx.obj = {"threads": resolve_threads(threads)}
    except ValueError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(EXIT_INPUT)


def _guarded(action: Callable[[], T]) -> T:
    """Run ``action`` and map failures onto exit codes."""
    try:
        return action()
    except NumericalError as e:
        typer.echo(f"Numerical error: {e}", err=True)
        raise typer.Exit(EXIT_NUMERICAL)
    except (InputError, ValidationError, ValueError) as e:
        typer.echo(f"Input error: {e}", err=True)
        raise typer.Exit(EXIT_INPUT)


def _emit(payload: BaseModel | str, output: Optional[Path]) -> None:
    text = payload if isinstance(payload, str) else payload.model_dump_json(indent=2)
    if output is None:
        typer.echo(text)
    else:
        output.write_text(text + "\n", encoding="utf-8")
        logger.info("Wrote %s", output)


def _parse_floats(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",") if part.strip()])
    except ValueError as e:
        raise InputError(f"{name} must be a comma-separated list of numbers") from e


def _parse_grid(text: str, name: str) -> np.ndarray:
    """``lo:hi:points`` or a comma-separated list."""
    if ":" not in text:
        return _parse_floats(text, name)
    try:
        lo, hi, count = text.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError as e:
        raise InputError(f"{name} must look like lo:hi:points") from e


def _mixed_logit_design(path: Path) -> MixedLogitDesign:
    loaded = load_design(path)
    return loaded.design() if isinstance(loaded, StudyConfig) else loaded


def _study(path: Path) -> StudyConfig:
    loaded = load_design(path)
    if not isinstance(loaded, StudyConfig):
        raise InputError(f"{path} describes a design, not a study (missing 'd')")
    return loaded


def _load_inputs(
    problem_path: Optional[Path],
    data: Optional[Path],
    design_path: Optional[Path],
    gamma: Optional[float],
) -> tuple[HypothesisProblem, Optional[RawSample]]:
    if problem_path is not None:
        raw = load_raw_csv(data) if data is not None else None
        return load_problem(problem_path), raw
    if design_path is None or data is None or gamma is None:
        raise InputError("pass --problem, or --design with --data and --gamma")
    design = _mixed_logit_design(design_path)
    sample = load_raw_csv(data, design.w_support)
    return build_problem(design, sample, gamma), sample


@app.command()
def test(
    ctx: typer.Context,
    problem: Optional[Path] = typer.Option(None, "--problem", help="Problem JSON file"),
    data: Optional[Path] = typer.Option(None, "--data", help="CSV with y,w columns"),
    design: Optional[Path] = typer.Option(None, "--design", help="Mixed-logit design JSON"),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Hypothesized F(t | w_bar)"),
    alpha: float = typer.Option(0.05, "--alpha", help="Nominal level in (0, 0.5)"),
    lambda_mode: str = typer.Option(
        "boot", "--lambda", help="rot, boot, two-stage[:gamma] or a number in [0, 1]"
    ),
    bootstrap: int = typer.Option(250, "--bootstrap", "-B", help="Bootstrap replicates"),
    seed: int = typer.Option(0, "--seed", help="Master seed"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write JSON here"),
):
    """Test the cone hypothesis and print a JSON report."""

    def action() -> None:
        config = RunConfig(
            command="test",
            problem=problem,
            data=data,
            design=design,
            alpha=alpha,
            lambda_mode=lambda_mode,
            bootstrap=bootstrap,
            seed=seed,
            output=output,
            threads=ctx.obj["threads"],
        )
        hypothesis, raw = _load_inputs(config.problem, config.data, config.design, gamma)
        report = run_test(
            hypothesis,
            raw,
            config.alpha,
            config.lambda_mode,
            config.bootstrap,
            config.seed,
            workers=config.threads,
        )
        _emit(report, config.output)

    _guarded(action)


@app.command()
def invert(
    ctx: typer.Context,
    problem: Optional[Path] = typer.Option(None, "--problem", help="Base problem JSON file"),
    a_row: Optional[str] = typer.Option(None, "--a-row", help="Comma-separated functional"),
    data: Optional[Path] = typer.Option(None, "--data", help="CSV with y,w columns"),
    design: Optional[Path] = typer.Option(None, "--design", help="Mixed-logit design JSON"),
    grid: str = typer.Option("0:1:21", "--grid", help="lo:hi:points or a list of values"),
    alpha: float = typer.Option(0.05, "--alpha", help="Nominal level in (0, 0.5)"),
    lambda_mode: str = typer.Option("boot", "--lambda", help="Lambda rule"),
    bootstrap: int = typer.Option(250, "--bootstrap", "-B", help="Bootstrap replicates"),
    seed: int = typer.Option(0, "--seed", help="Master seed"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write JSON here"),
):
    """Confidence interval for a linear functional by test inversion."""

    def action() -> None:
        config = RunConfig(
            command="invert",
            problem=problem,
            data=data,
            design=design,
            alpha=alpha,
            lambda_mode=lambda_mode,
            bootstrap=bootstrap,
            seed=seed,
            output=output,
            threads=ctx.obj["threads"],
        )
        raw: Optional[RawSample]
        if config.problem is not None:
            if a_row is None:
                raise InputError("--a-row is required with --problem")
            base = load_problem(config.problem)
            row = _parse_floats(a_row, "--a-row")
            raw = load_raw_csv(config.data) if config.data is not None else None

            def family(value: float) -> HypothesisProblem:
                return augment_with_counterfactual(base, row, value)

        else:
            if config.design is None or config.data is None:
                raise InputError("pass --problem with --a-row, or --design with --data")
            chosen = _mixed_logit_design(config.design)
            raw = load_raw_csv(config.data, chosen.w_support)
            sample = raw

            def family(value: float) -> HypothesisProblem:
                return build_problem(chosen, sample, value)

        interval = invert_ci(
            family,
            raw,
            config.alpha,
            _parse_grid(grid, "--grid").tolist(),
            B=config.bootstrap,
            seed=config.seed,
            lambda_mode=config.lambda_mode,
            workers=config.threads,
        )
        _emit(interval, config.output)

    _guarded(action)


class BoundsReport(BaseModel):
    lower: float
    upper: float
    t: float
    w_bar: float
    source: str
    band: Optional[list[dict]] = None
    tool_version: str = __version__


@app.command()
def bounds(
    design: Path = typer.Option(..., "--design", help="Mixed-logit design JSON"),
    data: Optional[Path] = typer.Option(None, "--data", help="Use empirical probabilities"),
    t_grid: Optional[str] = typer.Option(None, "--t-grid", help="Also bound F(t) over t"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write JSON here"),
):
    """Identified set for F(t | w_bar) from population or sample probabilities."""

    def action() -> None:
        chosen = _mixed_logit_design(design)
        if data is None:
            probs, source = population_cond_probs(chosen), "population"
        else:
            probs = estimate_beta_u(load_raw_csv(data, chosen.w_support))[0]
            source = "sample"
        result = identified_bounds(chosen, probs)
        band = None
        if t_grid is not None:
            t_values = _parse_grid(t_grid, "--t-grid")
            band = [item.model_dump() for item in identified_band(chosen, t_values)]
        _emit(
            BoundsReport(
                lower=result.lower,
                upper=result.upper,
                t=result.t,
                w_bar=result.w_bar,
                source=source,
                band=band,
            ),
            output,
        )

    _guarded(action)


def _run_study(
    ctx: typer.Context,
    design: Path,
    sweep: Optional[str],
    replications: Optional[int],
    csv: Optional[Path],
    output: Optional[Path],
    command: str,
) -> None:
    study = _study(design)
    rule = GammaRule.parse(sweep) if sweep is not None else study.gamma_rule
    if command == "power" and rule.kind != "sweep":
        raise InputError("power needs a sweep: pass --sweep lo:hi:points")
    table = monte_carlo(
        study.design(),
        rule,
        replications or study.replications,
        study.bootstrap,
        study.alpha,
        study.lambda_mode,
        study.seed,
        workers=ctx.obj["threads"],
    )
    if rule.kind == "sweep":
        text = write_power_csv(table, csv)
        if csv is None and output is not None:
            output.with_suffix(".csv").write_text(text, encoding="utf-8")
    _emit(table, output)


@app.command()
def mc(
    ctx: typer.Context,
    design: Path = typer.Option(..., "--design", help="Study configuration JSON"),
    sweep: Optional[str] = typer.Option(None, "--sweep", help="Gamma grid lo:hi:points"),
    replications: Optional[int] = typer.Option(None, "--replications", "-R", min=1),
    csv: Optional[Path] = typer.Option(None, "--csv", help="Power-curve CSV path"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write JSON here"),
):
    """Monte Carlo rejection rates for a mixed-logit study."""
    _guarded(lambda: _run_study(ctx, design, sweep, replications, csv, output, "mc"))


@app.command()
def power(
    ctx: typer.Context,
    design: Path = typer.Option(..., "--design", help="Study configuration JSON"),
    sweep: str = typer.Option(..., "--sweep", help="Gamma grid lo:hi:points"),
    replications: Optional[int] = typer.Option(None, "--replications", "-R", min=1),
    csv: Optional[Path] = typer.Option(None, "--csv", help="Power-curve CSV path"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write JSON here"),
):
    """Power curve over a gamma sweep."""
    _guarded(lambda: _run_study(ctx, design, sweep, replications, csv, output, "power"))


if __name__ == "__main__":
    app()
