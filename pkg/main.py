#!/usr/bin/env python3
"""
Mixed-observation anomaly identification - command line

Exponents, designs, single decisions, Monte Carlo error curves and preset reruns.
Exit codes: 0 success, 2 configuration error, 3 degenerate model, 4 numerical failure.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import click
import numpy as np
from pydantic import ValidationError

from chernoff import format_summary, min_pairwise_exponent, nats_to_bits, sample_complexity, write_report_csv
from config import Config
from design import (
    bipartite_design, cyclic_ensemble, fixed_schedule, format_schedule, hamming74_design, optimal_mean_shift,
    optimal_variance_discrimination, optimize_base_vector, permutation_ensemble, read_schedule,
    separate_design, write_schedule,
)
from detect import format_decision, read_observations, run_detector
from gaussmodels import enumerate_hypotheses, hypothesis_law, load_model
from models import (
    AnomalyModel, BipartiteDesignSpec, ConfigError, DegenerateModelError, DesignKind,
    DetectorKind, Ensemble, MeasurementVector, NPConfig, NumericalError, OutOfScopeError,
    Regime, RunConfig, Schedule, TrialPlan,
)
from montecarlo import design_label, error_curve, write_curve_csv, write_plot_script
from presets import get_preset, get_preset_names, preset_plan, preset_rows

logger = logging.getLogger(__name__)

EXIT_CONFIG, EXIT_DEGENERATE, EXIT_NUMERICAL = 2, 3, 4

SCHEDULE_DESIGNS = ("fixed", "schedule", "separate", "bipartite", "hamming74")
ENSEMBLE_DESIGNS = ("permutation", "cyclic", "optimal-base")


def exit_code_for(error: Exception) -> Optional[int]:
    if isinstance(error, DegenerateModelError):
        return EXIT_DEGENERATE
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, (ConfigError, ValidationError)):
        return EXIT_CONFIG
    return None


def handle_errors(command):
    """Report domain errors on stderr and exit with their code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (DegenerateModelError, NumericalError, ConfigError, ValidationError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(exit_code_for(e))
    return wrapper


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else Config.LOG_LEVEL
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s", force=True)


def _model(run: RunConfig) -> AnomalyModel:
    if run.config_path is None:
        raise ConfigError("--config is required for this command")
    return load_model(run.config_path)


def _parse_vector(text: Optional[str]) -> np.ndarray:
    if not text:
        raise ConfigError("--vector is required for this design (comma-separated coefficients)")
    try:
        return np.array([float(token) for token in text.split(",")])
    except ValueError as e:
        raise ConfigError(f"--vector must be comma-separated numbers, got '{text}'") from e


def _trials(run: RunConfig) -> int:
    return run.trials or Config.DEFAULT_TRIALS


def build_design(
    selector: str,
    model: AnomalyModel,
    run: RunConfig,
    vector: Optional[str] = None,
    schedule_path: Optional[Path] = None,
    m: Optional[int] = None,
    right_degree: int = 6,
    uneven: bool = False,
) -> Union[MeasurementVector, Schedule, Ensemble]:
    """Design object for the exponent command."""
    if selector == "fixed":
        return MeasurementVector(coefficients=_parse_vector(vector))
    if selector == "schedule":
        if schedule_path is None:
            raise ConfigError("--schedule is required for the schedule design")
        return read_schedule(schedule_path)
    if selector == "separate":
        return separate_design(model.n, m or model.n, run.seed)
    if selector == "bipartite":
        if m is None:
            raise ConfigError("--m is required for the bipartite design")
        spec = BipartiteDesignSpec(n=model.n, m=m, right_degree=right_degree, seed=run.seed, uneven_left_degree=uneven)
        return bipartite_design(spec)
    if selector == "hamming74":
        return hamming74_design()
    if selector == "permutation":
        return permutation_ensemble(_parse_vector(vector))
    if selector == "cyclic":
        return cyclic_ensemble(_parse_vector(vector))
    if selector == "optimal-base":
        return permutation_ensemble(optimize_base_vector(model, run.seed))
    raise ConfigError(f"unknown design '{selector}'")


def _format_vector(vector: Union[MeasurementVector, np.ndarray]) -> str:
    coefficients = vector.coefficients if isinstance(vector, MeasurementVector) else vector
    return "(" + ", ".join(f"{x:.6g}" for x in coefficients) + ")"


def _write_ensemble(ens: Ensemble, path: Path) -> Tuple[Path, Path]:
    """Atoms in the schedule format plus one weight per line beside them."""
    atoms_path = write_schedule(Schedule(rows=ens.atoms, metadata={"design": "ensemble"}), path)
    weights_path = path.with_suffix(".weights")
    weights_path.write_text("".join(f"{float(w)!r}\n" for w in ens.weights))
    return atoms_path, weights_path

# =========== CLI ===========

@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="Model file (key=value).")
@click.option("--seed", type=int, required=True, help="Master seed; every run is reproducible from it.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None, help="Output directory.")
@click.option("--workers", type=int, default=None, help="Worker processes for Monte Carlo trials.")
@click.option("--trials", type=int, default=None, help="Trials per budget.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.option("--quiet", is_flag=True, help="Warnings only, no progress bars.")
@click.pass_context
@handle_errors
def cli(ctx, config_path, seed, out_dir, workers, trials, verbose, quiet):
    """Mixed-observation anomaly identification toolkit."""
    _setup_logging(verbose, quiet)
    try:
        Config.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    ctx.obj = RunConfig(
        config_path=config_path,
        seed=seed,
        out_dir=out_dir or Path(Config.OUTPUT_DIR),
        workers=workers or Config.DEFAULT_WORKERS,
        trials=trials,
        show_progress=not quiet,
    )


@cli.command()
@click.option("--design", "selector", type=click.Choice(SCHEDULE_DESIGNS + ENSEMBLE_DESIGNS), required=True)
@click.option("--vector", default=None, help="Comma-separated coefficients (fixed, permutation, cyclic).")
@click.option("--schedule", "schedule_path", type=click.Path(path_type=Path), default=None)
@click.option("--m", type=int, default=None, help="Number of measurements (separate, bipartite).")
@click.option("--right-degree", type=int, default=6)
@click.option("--uneven", is_flag=True, help="Allow unequal variable degrees in the bipartite design.")
@click.option("--regime", type=click.Choice([r.value for r in Regime]), default=None)
@click.option("--name", default="exponent", help="CSV file name (without extension).")
@click.pass_obj
@handle_errors
def exponent(run: RunConfig, selector, vector, schedule_path, m, right_degree, uneven, regime, name):
    """Pairwise error exponents of a design; the minimum and sample complexity."""
    model = _model(run)
    design = build_design(selector, model, run, vector, schedule_path, m, right_degree, uneven)
    report = min_pairwise_exponent(design, model, Regime(regime) if regime else None)
    path = write_report_csv(report, run.out_dir / f"{name}.csv")

    click.echo(format_summary(report))
    click.echo(f"E_bits={nats_to_bits(report.min_exponent)!r}")
    i, j = report.argmin_pair
    click.echo(f"argmin hypotheses: {report.hypotheses[i]} vs {report.hypotheses[j]}")
    for target in (0.1, 0.01):
        click.echo(f"sample_complexity(eps={target})={sample_complexity(report.min_exponent, model.n, model.k, target)}")
    click.echo(f"Wrote {path}")


@cli.command()
@click.argument("selector", type=click.Choice(
    ("fixed", "separate", "bipartite", "hamming74", "optimal-mean-shift", "optimal-variance") + ENSEMBLE_DESIGNS
))
@click.option("--m", type=int, default=None)
@click.option("--right-degree", type=int, default=6)
@click.option("--uneven", is_flag=True)
@click.option("--vector", default=None)
@click.option("--pair", type=(int, int), default=(1, 2), help="1-based hypothesis positions for two-law designs.")
@click.option("--name", default=None, help="Output file name (defaults to the selector).")
@click.pass_obj
@handle_errors
def design(run: RunConfig, selector, m, right_degree, uneven, vector, pair, name):
    """Build a schedule or ensemble and write it in the schedule file format."""
    path = run.out_dir / f"{name or selector}.txt"

    if selector == "hamming74":
        result = hamming74_design()
    elif selector == "fixed":
        result = fixed_schedule(_parse_vector(vector), m or 1)
    elif selector in ("optimal-mean-shift", "optimal-variance"):
        result = _two_law_design(selector, _model(run), pair)
    else:
        result = build_design(selector, _model(run), run, vector, None, m, right_degree, uneven)

    if isinstance(result, Ensemble):
        atoms_path, weights_path = _write_ensemble(result, path)
        click.echo(f"Ensemble with {result.size} atoms over n={result.n}")
        click.echo(f"Wrote {atoms_path} and {weights_path}")
        return
    if isinstance(result, MeasurementVector):
        result = Schedule(rows=result.coefficients[np.newaxis, :], metadata={"design": selector})

    meta = {k: v for k, v in result.metadata.items() if k != "design"}
    if meta:
        click.echo(" ".join(f"{k}={v}" for k, v in meta.items()))
    click.echo(format_schedule(result), nl=False)
    write_schedule(result, path)
    click.echo(f"Wrote {path}")


def _two_law_design(selector: str, model: AnomalyModel, pair: Sequence[int]) -> MeasurementVector:
    hypotheses = enumerate_hypotheses(model.n, model.k)
    i, j = pair
    if not (1 <= i <= len(hypotheses) and 1 <= j <= len(hypotheses)) or i == j:
        raise ConfigError(f"--pair must name two distinct positions in 1..{len(hypotheses)}, got {i} {j}")
    law_i, law_j = hypothesis_law(model, hypotheses[i - 1]), hypothesis_law(model, hypotheses[j - 1])
    click.echo(f"pair: {hypotheses[i - 1]} vs {hypotheses[j - 1]}")

    if selector == "optimal-mean-shift":
        if not np.array_equal(law_i.covariance, law_j.covariance):
            raise OutOfScopeError("the mean-shift design needs both hypotheses to share a covariance")
        a, value = optimal_mean_shift(law_i.mean, law_j.mean, law_i.covariance)
        click.echo(f"a={_format_vector(a)}")
        click.echo(f"exponent={value!r}")
        return a

    if not np.array_equal(law_i.mean, law_j.mean):
        raise OutOfScopeError("the variance discrimination design needs both hypotheses to share a mean")
    a, ratio, lam, value = optimal_variance_discrimination(law_i.covariance, law_j.covariance)
    click.echo(f"a={_format_vector(a)}")
    click.echo(f"B={ratio!r} lambda*={lam!r} exponent={value!r}")
    return a


@cli.command()
@click.option("--design", "selector", type=click.Choice(["separate", "bipartite", "fixed", "schedule", "permutation", "cyclic", "optimal-base"]), required=True)
@click.option("--detector", type=click.Choice([d.value for d in DetectorKind]), default=DetectorKind.LRT.value)
@click.option("--m", "m_values", type=int, multiple=True, required=True, help="Budgets, repeatable.")
@click.option("--right-degree", type=int, default=6)
@click.option("--uneven", is_flag=True)
@click.option("--vector", default=None)
@click.option("--schedule", "schedule_path", type=click.Path(path_type=Path), default=None)
@click.option("--regime", type=click.Choice([Regime.RANDOM.value, Regime.DETERMINISTIC.value]), default=Regime.RANDOM.value)
@click.option("--threshold", type=float, default=0.0, help="Per-sample log threshold for pairwise-np.")
@click.option("--freeze-design", is_flag=True, help="Realize randomized designs once per budget.")
@click.option("--name", default="curve")
@click.pass_obj
@handle_errors
def simulate(run: RunConfig, selector, detector, m_values, right_degree, uneven, vector, schedule_path,
             regime, threshold, freeze_design, name):
    """Monte Carlo error curve for one design and detector."""
    model = _model(run)
    plan_kwargs = dict(
        model=model,
        m_values=tuple(sorted(set(m_values))),
        trials=_trials(run),
        detector=DetectorKind(detector),
        master_seed=run.seed,
        np_config=NPConfig(log_threshold=threshold),
        right_degree=right_degree,
        uneven_left_degree=uneven,
        regime=Regime(regime),
        freeze_design=freeze_design,
    )
    if selector in ("separate", "bipartite"):
        plan = TrialPlan(design=DesignKind(selector), **plan_kwargs)
    elif selector in ("fixed", "schedule"):
        built = build_design(selector, model, run, vector, schedule_path)
        if isinstance(built, MeasurementVector):
            built = Schedule(rows=built.coefficients[np.newaxis, :])
        plan = TrialPlan(design=DesignKind.FIXED, schedule=built, **plan_kwargs)
    else:
        ens = build_design(selector, model, run, vector)
        plan = TrialPlan(design=DesignKind.ENSEMBLE, ensemble=ens, **plan_kwargs)

    points = error_curve(plan, workers=run.workers, show_progress=run.show_progress)
    csv_path = write_curve_csv(points, run.out_dir / f"{name}.csv", design_label(plan), plan.detector)
    script_path = write_plot_script(csv_path, run.out_dir / f"{name}_plot.py")
    for p in points:
        click.echo(f"m={p.m} errors={p.errors}/{p.trials} rate={p.error_rate!r} ci=[{p.ci_low!r}, {p.ci_high!r}]")
    click.echo(f"Wrote {csv_path} and {script_path}")


@cli.command()
@click.argument("figure", type=click.Choice(get_preset_names()))
@click.pass_obj
@handle_errors
def reproduce(run: RunConfig, figure):
    """Rerun a named experiment, one curve per design it compares."""
    preset = get_preset(figure)
    csv_path = run.out_dir / f"{figure}.csv"
    if csv_path.exists():
        csv_path.unlink()

    for selector in preset.designs:
        plan = preset_plan(preset, selector, _trials(run), run.seed)
        points = error_curve(plan, workers=run.workers, show_progress=run.show_progress)
        write_curve_csv(points, csv_path, selector, plan.detector, append=True)
        for p in points:
            click.echo(f"{selector} m={p.m} rate={p.error_rate!r} ci=[{p.ci_low!r}, {p.ci_high!r}]")

    script_path = write_plot_script(csv_path, run.out_dir / f"{figure}_plot.py")
    click.echo(f"Wrote {csv_path} and {script_path}")


@cli.command("detect")
@click.option("--schedule", "schedule_path", type=click.Path(path_type=Path), required=True)
@click.option("--observations", "observations_path", type=click.Path(path_type=Path), required=True,
              help="One observed value per line, aligned with the schedule rows.")
@click.option("--detector", type=click.Choice([d.value for d in DetectorKind]), default=DetectorKind.LRT.value)
@click.option("--threshold", type=float, default=0.0, help="Per-sample log threshold for pairwise-np.")
@click.pass_obj
@handle_errors
def detect_command(run: RunConfig, schedule_path, observations_path, detector, threshold):
    """Decide which hypothesis produced a set of observations."""
    model = _model(run)
    schedule = read_schedule(schedule_path)
    obs = read_observations(observations_path)
    decision = run_detector(DetectorKind(detector), model, schedule, obs, np_config=NPConfig(log_threshold=threshold))
    click.echo(format_decision(decision))


@cli.command()
def presets():
    """List the named experiments."""
    for name, description in preset_rows():
        click.echo(f"{name}: {description}")


def main():
    cli()


if __name__ == "__main__":
    main()
