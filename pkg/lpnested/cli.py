"""Command-line interface for the L_p-nested toolkit."""
import logging
import sys
from typing import List, Optional

import click
import numpy as np
from pydantic import ValidationError

from .bayes import location_posterior_grid, make_grid, prior_from_spec
from .checks import CHECKS, run_checks
from .config import LpNestedConfig
from .density import LpNestedModel, log_density
from .exceptions import (
    DataError,
    DimensionError,
    DomainError,
    NumericalError,
    TreeStructureError,
    TreeSyntaxError,
)
from .fitting import fit, whiten
from .io import load_fit_config, load_grid, load_model, read_csv, read_tree, save_model, write_csv
from .nrf import nrf_model_transform
from .radial import fit_radial, parse_radial_tag
from .sampler import sample_chunked
from .tree import evaluate_batch

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_ERRORS = (
    DataError,
    DimensionError,
    DomainError,
    TreeStructureError,
    TreeSyntaxError,
    ValidationError,
)


class ExitCodeGroup(click.Group):
    """Group that maps failures to the toolkit's exit codes."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            return super().main(*args, **kwargs)
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except DATA_ERRORS as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_DATA)
        except NumericalError as e:
            click.echo(f"Numerical error: {e}", err=True)
            sys.exit(EXIT_NUMERIC)


def _output(path: str):
    return sys.stdout if path == "-" else path


@click.group(cls=ExitCodeGroup)
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging")
@click.pass_context
def cli(ctx: click.Context, verbose: bool):
    """L_p-nested symmetric distributions: fit, sample, transform and evaluate."""
    config = LpNestedConfig.from_env()
    if verbose or config.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    else:
        logging.getLogger().setLevel(config.log_level.upper())
    ctx.obj = config


@cli.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(), help="CSV of samples")
@click.option("--tree", "tree_source", required=True, help="Tree DSL file (or DSL text)")
@click.option("--radial", "radial_tag", default="lognormal", show_default=True,
              help="Radial family: lognormal, gammap[:p], lnmix[:K], uniform_ball")
@click.option("--config", "config_path", type=click.Path(), help="Fit configuration JSON")
@click.option("--output", "-o", required=True, type=click.Path(), help="Fitted model JSON")
@click.option("--trace", "trace_path", type=click.Path(), help="Log-likelihood trace CSV")
@click.option("--starts", type=int, help="Random restarts of the orthogonal factor")
@click.pass_obj
def fit_command(
    config: LpNestedConfig,
    data_path: str,
    tree_source: str,
    radial_tag: str,
    config_path: Optional[str],
    output: str,
    trace_path: Optional[str],
    starts: Optional[int],
):
    """Fit radial, exponents and orthogonal factor to data."""
    data = read_csv(data_path)
    tree = read_tree(tree_source, config.p_min, config.p_max)
    if data.n != tree.n:
        raise DimensionError(f"data has {data.n} columns, tree has {tree.n} leaves")
    cfg = load_fit_config(config_path, config.fit_config())
    if starts is not None:
        cfg = cfg.model_copy(update={"n_starts": starts})

    options = parse_radial_tag(radial_tag)
    family = options.pop("family")
    if family == "gammap":
        options.setdefault("p", tree.p(()))
    elif family == "uniform_ball":
        options.setdefault("n", tree.n)
    elif family == "lnmix":
        options.setdefault("components", config.mixture_components)

    X = data.values
    y = (X - X.mean(axis=0)) @ whiten(X)[0].T if cfg.whiten else X
    radii = evaluate_batch(tree, y)[()]
    template = LpNestedModel(tree, fit_radial(family, radii, **options))
    logger.info(f"Fitting {tree.n}-d model with {family} radial on {data.m} samples")

    model, report = fit(template, X, cfg)
    save_model(model, output)
    if trace_path:
        frame_rows = [entry.model_dump() for entry in report.trace]
        write_csv(
            trace_path,
            np.array([[r["start"], r["cycle"], r["loglik"], r["mean_loglik_per_dim"]] for r in frame_rows]),
            labels=["start", "cycle", "loglik", "mean_loglik_per_dim"],
            extra={"block": [r["block"] for r in frame_rows]},
        )
    click.echo(f"Log-likelihood: {report.loglik:.6f} ({report.loglik / (report.n_samples * report.n_dims):.6f} nats/dim)")
    click.echo(f"Tree: {report.tree}")
    click.echo(f"Cycles: {report.cycles} (converged: {report.converged})")


@cli.command("sample")
@click.option("--model", "model_path", required=True, type=click.Path(), help="Model JSON")
@click.option("--n-samples", "-n", required=True, type=click.IntRange(min=1), help="Number of samples")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Random seed (default from config)")
@click.option("--output", "-o", default="-", show_default=True, help="Output CSV ('-' for stdout)")
@click.pass_obj
def sample_command(config: LpNestedConfig, model_path: str, n_samples: int, seed: Optional[int], output: str):
    """Draw exact samples from a model."""
    model = load_model(model_path)
    seed = config.seed if seed is None else seed
    x = sample_chunked(model, seed, n_samples, chunk_size=config.chunk_size, threads=config.threads)
    write_csv(_output(output), x)


@cli.command("transform")
@click.option("--model", "model_path", required=True, type=click.Path(), help="Model JSON")
@click.option("--data", "data_path", required=True, type=click.Path(), help="CSV of samples")
@click.option("--output", "-o", default="-", show_default=True, help="Output CSV ('-' for stdout)")
@click.pass_obj
def transform_command(config: LpNestedConfig, model_path: str, data_path: str, output: str):
    """Nested radial factorization of data.

    The logjac column holds log|det| of the full map x -> z, log|det W| included.
    """
    model = load_model(model_path)
    data = read_csv(data_path)
    if data.n != model.n:
        raise DimensionError(f"data has {data.n} columns, model expects {model.n}")
    z, logjac, logdet = nrf_model_transform(model, data.values, clip=config.cdf_clip)
    write_csv(
        _output(output),
        z,
        labels=[f"z{i}" for i in range(model.n)],
        extra={"logjac": logjac + logdet},
    )
    logger.info(f"Transformed {data.m} samples (log|det W| = {logdet:.6f})")


@cli.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(), help="Model JSON")
@click.option("--data", "data_path", required=True, type=click.Path(), help="CSV of samples")
@click.option("--output", "-o", type=click.Path(), help="Per-sample log-density CSV")
def eval_command(model_path: str, data_path: str, output: Optional[str]):
    """Per-sample log-density and mean nats per dimension."""
    model = load_model(model_path)
    data = read_csv(data_path)
    if data.n != model.n:
        raise DimensionError(f"data has {data.n} columns, model expects {model.n}")
    ld = np.asarray(log_density(model, data.values))
    if output:
        write_csv(output, ld[:, None], labels=["log_density"])
    per_dim = ld / model.n
    se = float(per_dim.std(ddof=1) / np.sqrt(per_dim.size)) if per_dim.size > 1 else float("nan")
    click.echo(f"mean_log_density: {ld.mean():.10g}")
    click.echo(f"nats_per_dim: {per_dim.mean():.10g}")
    click.echo(f"standard_error: {se:.10g}")


@cli.command("posterior")
@click.option("--tree", "tree_source", required=True, help="Tree DSL file (or DSL text)")
@click.option("--data", "data_path", required=True, type=click.Path(), help="CSV of observations")
@click.option("--grid", "grid_path", required=True, type=click.Path(), help="Grid specification JSON")
@click.option("--output", "-o", default="-", show_default=True, help="Output CSV ('-' for stdout)")
@click.pass_obj
def posterior_command(config: LpNestedConfig, tree_source: str, data_path: str, grid_path: str, output: str):
    """Location posterior on a grid (radial-independent)."""
    tree = read_tree(tree_source, config.p_min, config.p_max)
    data = read_csv(data_path)
    spec = load_grid(grid_path)
    grid = make_grid(spec, tree.n)
    log_post = location_posterior_grid(tree, data.values, grid, prior_from_spec(spec.prior, tree.n))
    write_csv(
        _output(output),
        grid,
        labels=[f"mu{i}" for i in range(tree.n)],
        extra={"log_posterior": log_post},
    )


def _parse_levels(text: str) -> List[float]:
    try:
        levels = sorted(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"levels must be comma-separated numbers, got {text!r}")
    if not levels:
        raise click.BadParameter("at least one level is required")
    return levels


@cli.command("contour")
@click.option("--tree", "tree_source", required=True, help="Tree DSL file (or DSL text) with two leaves")
@click.option("--levels", default="1.0", show_default=True, help="Comma-separated contour levels")
@click.option("--resolution", type=click.IntRange(min=2), default=201, show_default=True,
              help="Grid points per axis")
@click.option("--output", "-o", default="-", show_default=True, help="Output CSV ('-' for stdout)")
@click.pass_obj
def contour_command(config: LpNestedConfig, tree_source: str, levels: str, resolution: int, output: str):
    """Grid of f values over [-1.5, 1.5]^2 for two-leaf trees."""
    tree = read_tree(tree_source, config.p_min, config.p_max)
    if tree.n != 2:
        raise DimensionError(f"contour needs a tree with two leaves, got {tree.n}")
    level_values = _parse_levels(levels)
    axis = np.linspace(-1.5, 1.5, resolution)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([a.ravel(), b.ravel()])
    f = evaluate_batch(tree, points)[()]
    band = np.searchsorted(np.asarray(level_values), f, side="right")
    write_csv(
        _output(output),
        np.column_stack([points, f]),
        labels=["x0", "x1", "f"],
        extra={"level": band},
    )


@cli.command("check")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True, help="Random seed")
@click.option("--only", multiple=True, type=click.Choice([name for name, _ in CHECKS]),
              help="Run only the named check (repeatable)")
def check_command(seed: int, only: tuple):
    """Run the built-in numerical oracle suite."""
    report = run_checks(seed=seed, only=list(only) or None)
    click.echo("=" * 60)
    click.echo("ORACLE CHECKS")
    click.echo("=" * 60)
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        value = "" if result.value is None else f" value={result.value:.3g}"
        threshold = "" if result.threshold is None else f" threshold={result.threshold:.3g}"
        click.echo(f"  [{status}] {result.name}{value}{threshold} {result.detail}".rstrip())
    click.echo("-" * 60)
    passed = sum(r.passed for r in report.results)
    click.echo(f"TOTAL: {passed}/{len(report.results)} passed")
    if not report.passed:
        sys.exit(EXIT_NUMERIC)


def main():
    """Entry point for the lpnested console script."""
    cli()


if __name__ == "__main__":
    main()
