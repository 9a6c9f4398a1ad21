import functools
import json
import logging
import sys
import typing as t

import click
from dotenv import find_dotenv, load_dotenv
from halo import Halo
from pydantic import ValidationError

from lionskit.core import LionsKit, load_config, validate_config
from lionskit.exceptions import ArgumentError, AssumptionError, ConfigError, InvariantViolation
from lionskit.model import SUITES, RunConfig, SuiteCounts, Tolerances
from lionskit.util import setup_logging

logger = logging.getLogger(__name__)

load_dotenv(find_dotenv())

EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def error_document(ex: Exception, field: t.Optional[str] = None) -> str:
    return json.dumps({"error": ex.__class__.__name__, "message": str(ex), "field": field})


def handle_errors(func):
    """
    Map errors to exit codes, and report them as JSON on stderr.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except ConfigError as ex:
            click.echo(error_document(ex, ex.field), err=True)
            ctx.exit(EXIT_CONFIG)
        except ValidationError as ex:
            errors = ex.errors()
            field = ".".join(str(part) for part in errors[0]["loc"]) if errors else None
            click.echo(error_document(ex, field), err=True)
            ctx.exit(EXIT_CONFIG)
        except ArgumentError as ex:
            click.echo(error_document(ex), err=True)
            ctx.exit(EXIT_CONFIG)
        except (AssumptionError, InvariantViolation) as ex:
            click.echo(error_document(ex), err=True)
            ctx.exit(EXIT_INVARIANT)

    return wrapper


def spinner(text: str) -> Halo:
    return Halo(text=text, spinner="dots", stream=sys.stderr, enabled=sys.stderr.isatty())


def _load(config: t.Optional[str], mode: str) -> RunConfig:
    if config is None:
        return validate_config({"mode": mode})
    run_config = load_config(config)
    if run_config.mode != mode:
        run_config = run_config.model_copy(update={"mode": mode})
    return run_config


def _dump(value: t.Any) -> t.Any:
    if hasattr(value, "model_dump"):
        return value.model_dump()
    return value


@click.group()
@click.option("--verbose", is_flag=True, required=False, default=True, help="Turn logging on/off")
@click.option("--debug", is_flag=True, required=False, help="Turn on logging with debug level")
@click.version_option(package_name="lionskit")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, debug: bool):
    if verbose:
        setup_logging(debug=debug)


@cli.command()
@click.option("--config", envvar="LK_CONFIG", type=str, required=True, help="Path or URL of the run configuration")
@click.option("--out", envvar="LK_OUT", type=str, required=False, help="Output directory")
@click.option("--timing", is_flag=True, required=False, help="Record wall times in the diagnostics")
@handle_errors
def solve(config: str, out: t.Optional[str], timing: bool):
    """
    Solve an evolution problem, write its trajectory and diagnostics.
    """
    run_config = _load(config, "solve")
    if timing:
        run_config.output.timing = True
    with spinner("Solving"):
        solution = LionsKit(run_config, out=out).run_solve()
    diagnostics = solution.diagnostics
    if diagnostics is not None:
        logger.info(f"Boundary residual {diagnostics.boundary_residual:.3e}, ||S_h|| = {diagnostics.propagator_norm}")


@cli.command()
@click.option("--config", envvar="LK_CONFIG", type=str, required=False, help="Path or URL of the run configuration")
@click.option("--suite", envvar="LK_SUITE", type=click.Choice(SUITES), required=False, help="Suite to run")
@click.option("--seed", envvar="LK_SEED", type=int, required=False, help="Seed of the random instances")
@click.option("--tol", type=float, required=False, help="Override every tolerance with this value")
@click.option("--scale", type=float, required=False, help="Scale the number of random instances")
@click.option("--out", envvar="LK_OUT", type=str, required=False, help="Output directory")
@click.option("--timing", is_flag=True, required=False, help="Record elapsed times in the report")
@handle_errors
def verify(
    config: t.Optional[str],
    suite: t.Optional[str],
    seed: t.Optional[int],
    tol: t.Optional[float],
    scale: t.Optional[float],
    out: t.Optional[str],
    timing: bool,
):
    """
    Run the randomized verification suites. Exits non-zero when any invariant fails.
    """
    run_config = _load(config, "verify")
    update: t.Dict[str, t.Any] = {}
    if suite is not None:
        update["suite"] = suite
    if seed is not None:
        update["seed"] = seed
    if tol is not None:
        update["tolerances"] = Tolerances.uniform(tol)
    if scale is not None:
        update["counts"] = SuiteCounts.scaled(scale)
    run_config = validate_config({**run_config.model_dump(), **{k: _dump(v) for k, v in update.items()}})
    if timing:
        run_config.output.timing = True
    with spinner(f"Running suite '{run_config.suite}'"):
        report = LionsKit(run_config, out=out).run_verify()
    for result in report.failed:
        click.echo(json.dumps({"invariant": result.name, "failures": result.failures, "witness": result.witness}))
    if not report.passed:
        click.get_current_context().exit(EXIT_INVARIANT)


@cli.command()
@click.option("--config", envvar="LK_CONFIG", type=str, required=True, help="Path or URL of the run configuration")
@click.option("--out", envvar="LK_OUT", type=str, required=False, help="Output directory")
@handle_errors
def converge(config: str, out: t.Optional[str]):
    """
    Tabulate errors and observed orders against the exact solution.
    """
    run_config = _load(config, "converge")
    with spinner("Running convergence study"):
        table = LionsKit(run_config, out=out).run_converge()
    for row in table.rows:
        logger.info(f"N={row.steps} theta={row.theta} error={row.error:.6e} order={row.order}")


if __name__ == "__main__":
    cli()
