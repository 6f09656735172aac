"""
Seeded Monte Carlo harness for error-probability curves.

Every trial owns three generators split off the master seed by the counter
(m, trial, stream): design, truth and data. Adding budgets or trials never
perturbs existing ones, and any worker split gives the same counts.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from tqdm import tqdm

from config import Config
from design import bipartite_design, separate_design
from detect import realize_deterministic_schedule, realize_random_schedule, run_detector
from gaussmodels import enumerate_hypotheses, hypothesis_parameters
from models import (
    AnomalyModel, AnomalyToolkitError, BipartiteDesignSpec, ConfigError,
    DesignKind, DetectorKind, ErrorCurvePoint, ExponentFit, Hypothesis,
    NPConfig, NumericalError, Observations, Regime, Schedule, TrialPlan,
)

logger = logging.getLogger(__name__)

STREAM_DESIGN, STREAM_TRUTH, STREAM_DATA = 0, 1, 2

CURVE_HEADER = ["m", "design", "detector", "trials", "errors", "error_rate", "ci_low", "ci_high"]

# =========== STREAMS ===========

def _check_seed(master_seed: int) -> None:
    if master_seed < 0:
        raise ConfigError(f"master seed must be non-negative, got {master_seed}")


def trial_streams(master_seed: int, m: int, trial: int) -> Tuple[np.random.Generator, ...]:
    """(design, truth, data) generators for one trial."""
    _check_seed(master_seed)
    return tuple(
        np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(m, trial, stream)))
        for stream in (STREAM_DESIGN, STREAM_TRUTH, STREAM_DATA)
    )


def frozen_design_stream(master_seed: int, m: int) -> np.random.Generator:
    """Design generator shared by every trial of a budget when the design is frozen."""
    _check_seed(master_seed)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(m,)))


def draw_truth(hypotheses: Sequence[Hypothesis], rng: np.random.Generator) -> int:
    """Uniform position in the hypothesis list."""
    return int(rng.integers(len(hypotheses)))

# =========== ONE TRIAL ===========

def draw_realizations(model: AnomalyModel, truth: Hypothesis, m: int, rng: np.random.Generator) -> np.ndarray:
    """
    n x m table of realizations: column j holds fresh independent draws of
    X_1..X_n for measurement j.
    """
    means, variances = hypothesis_parameters(model, [truth])
    noise = rng.standard_normal((model.n, m))
    return means[0][:, np.newaxis] + np.sqrt(variances[0])[:, np.newaxis] * noise


def measure(schedule: Schedule, realizations: np.ndarray) -> Observations:
    """Y_j = <A^j, X^j>."""
    return Observations(values=np.sum(schedule.rows * realizations.T, axis=1))


def simulate_trial(
    model: AnomalyModel,
    truth: Hypothesis,
    schedule: Schedule,
    detector: DetectorKind,
    seed: Union[int, np.random.Generator, None],
    hypotheses: Optional[Sequence[Hypothesis]] = None,
    np_config: Optional[NPConfig] = None,
) -> bool:
    """True when the detector selects the truth."""
    rng = np.random.default_rng(seed)
    realizations = draw_realizations(model, truth, schedule.m, rng)
    decision = run_detector(detector, model, schedule, measure(schedule, realizations), hypotheses, np_config)
    return decision.is_selected and decision.hypothesis.support == truth.support

# =========== DESIGNS PER TRIAL ===========

def design_label(plan: TrialPlan) -> str:
    if plan.design == DesignKind.ENSEMBLE:
        return f"ensemble-{plan.regime.value}"
    return plan.design.value


def realize_design(plan: TrialPlan, m: int, rng: np.random.Generator) -> Schedule:
    """The schedule a trial at budget m measures with."""
    n = plan.model.n
    if m == 0:
        return Schedule(rows=np.zeros((0, n)), metadata={"design": design_label(plan)})
    if plan.design == DesignKind.SEPARATE:
        return separate_design(n, m, rng)
    if plan.design == DesignKind.BIPARTITE:
        spec = BipartiteDesignSpec(
            n=n,
            m=m,
            right_degree=plan.right_degree,
            seed=plan.master_seed,
            uneven_left_degree=plan.uneven_left_degree,
        )
        return bipartite_design(spec, rng=rng)
    if plan.design == DesignKind.ENSEMBLE:
        if plan.regime == Regime.DETERMINISTIC:
            return realize_deterministic_schedule(plan.ensemble, m)
        return realize_random_schedule(plan.ensemble, m, rng)
    rows = plan.schedule.rows[np.arange(m) % plan.schedule.m]
    return Schedule(rows=rows, metadata={"design": "fixed"})


def _count_errors(plan: TrialPlan, m: int, start: int, stop: int) -> int:
    """Errors among trials [start, stop) at budget m. Runs inside worker processes."""
    hypotheses = enumerate_hypotheses(plan.model.n, plan.model.k)
    frozen = None
    if plan.freeze_design:
        frozen = realize_design(plan, m, frozen_design_stream(plan.master_seed, m))

    errors = 0
    for trial in range(start, stop):
        design_rng, truth_rng, data_rng = trial_streams(plan.master_seed, m, trial)
        try:
            schedule = frozen if frozen is not None else realize_design(plan, m, design_rng)
            truth = hypotheses[draw_truth(hypotheses, truth_rng)]
            correct = simulate_trial(
                plan.model, truth, schedule, plan.detector, data_rng, hypotheses, plan.np_config
            )
        except AnomalyToolkitError as e:
            raise type(e)(f"m={m} trial={trial}: {e}") from e
        errors += not correct
    return errors

# =========== CURVES ===========

def wilson_interval(errors: int, trials: int, confidence: Optional[float] = None) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion, clamped to contain the estimate."""
    if trials < 1 or not 0 <= errors <= trials:
        raise ConfigError(f"invalid counts: {errors} errors in {trials} trials")
    confidence = Config.CONFIDENCE_LEVEL if confidence is None else confidence
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    rate = errors / trials
    denominator = 1.0 + z ** 2 / trials
    centre = (rate + z ** 2 / (2.0 * trials)) / denominator
    half_width = z * math.sqrt(rate * (1.0 - rate) / trials + z ** 2 / (4.0 * trials ** 2)) / denominator
    low = min(max(0.0, centre - half_width), rate)
    high = max(min(1.0, centre + half_width), rate)
    return low, high


def curve_point(m: int, trials: int, errors: int, confidence: Optional[float] = None) -> ErrorCurvePoint:
    low, high = wilson_interval(errors, trials, confidence)
    return ErrorCurvePoint(m=m, trials=trials, errors=errors, error_rate=errors / trials, ci_low=low, ci_high=high)


def _chunks(trials: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, math.ceil(trials / (workers * 8)))
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def error_curve(plan: TrialPlan, workers: int = 1, show_progress: bool = False) -> List[ErrorCurvePoint]:
    """
    One ErrorCurvePoint per budget in plan.m_values. Trial chunks are farmed
    out to worker processes when workers > 1; counts are summed, so the
    curve does not depend on the worker count.
    """
    if workers < 1:
        raise ConfigError(f"workers must be positive, got {workers}")
    label = design_label(plan)
    logger.info(
        "Error curve: design=%s detector=%s trials=%d budgets=%s workers=%d",
        label, plan.detector.value, plan.trials, list(plan.m_values), workers,
    )
    chunks = _chunks(plan.trials, workers)
    points = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for m in plan.m_values:
            errors = 0
            with tqdm(total=plan.trials, desc=f"{label} m={m}", disable=not show_progress, leave=False) as bar:
                if executor is None:
                    for start, stop in chunks:
                        errors += _count_errors(plan, m, start, stop)
                        bar.update(stop - start)
                else:
                    futures = [(executor.submit(_count_errors, plan, m, start, stop), stop - start) for start, stop in chunks]
                    for future, size in futures:
                        errors += future.result()
                        bar.update(size)
            point = curve_point(m, plan.trials, errors)
            logger.info(
                "m=%d: %d/%d errors, rate %.4g [%.4g, %.4g]",
                m, errors, plan.trials, point.error_rate, point.ci_low, point.ci_high,
            )
            points.append(point)
    finally:
        if executor is not None:
            executor.shutdown()
    return points


def empirical_exponent(points: Sequence[ErrorCurvePoint]) -> ExponentFit:
    """Least-squares slope of -ln(error rate) against m over points with 0 < rate < 1."""
    usable = [p for p in points if 0.0 < p.error_rate < 1.0]
    dropped = len(points) - len(usable)
    if dropped:
        logger.warning("Exponent fit drops %d points with error rate 0 or 1", dropped)
    if len(usable) < 3:
        raise NumericalError(f"exponent fit needs at least 3 points with 0 < error rate < 1, got {len(usable)}")
    budgets = np.array([p.m for p in usable], dtype=float)
    logs = -np.log([p.error_rate for p in usable])
    fit = stats.linregress(budgets, logs)
    return ExponentFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        points_used=len(usable),
    )

# =========== OUTPUT ===========

def write_curve_csv(
    points: Sequence[ErrorCurvePoint],
    path: Union[str, Path],
    design: str,
    detector: Union[str, DetectorKind],
    append: bool = False,
) -> Path:
    """Curve rows; append adds further designs to an existing file without a second header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    detector = detector.value if isinstance(detector, DetectorKind) else detector
    write_header = not (append and path.exists())
    with path.open("a" if append else "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if write_header:
            writer.writerow(CURVE_HEADER)
        for p in points:
            writer.writerow([
                p.m, design, detector, p.trials, p.errors,
                repr(p.error_rate), repr(p.ci_low), repr(p.ci_high),
            ])
    return path


_PLOT_TEMPLATE = '''"""Plot the error curves in {csv_name}."""

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent

curves = defaultdict(lambda: ([], [], []))
with open(HERE / "{csv_name}") as handle:
    for row in csv.DictReader(handle):
        m, rate, bars = curves[(row["design"], row["detector"])]
        m.append(int(row["m"]))
        rate.append(float(row["error_rate"]))
        bars.append((float(row["error_rate"]) - float(row["ci_low"]), float(row["ci_high"]) - float(row["error_rate"])))

fig, ax = plt.subplots()
for (design, detector), (m, rate, bars) in sorted(curves.items()):
    ax.errorbar(m, rate, yerr=list(zip(*bars)), fmt="o-", capsize=3, label=f"{{design}} ({{detector}})")
ax.set_xlabel("m")
ax.set_ylabel("error probability")
ax.set_yscale("log")
ax.legend()
fig.savefig(HERE / "{png_name}", dpi=150)
'''


def write_plot_script(csv_path: Union[str, Path], script_path: Union[str, Path]) -> Path:
    """A standalone matplotlib script plotting every (design, detector) curve with Wilson bars."""
    csv_path, script_path = Path(csv_path), Path(script_path)
    script_path.parent.mkdir(parents=True, exist_ok=True)
    script_path.write_text(_PLOT_TEMPLATE.format(csv_name=csv_path.name, png_name=csv_path.with_suffix(".png").name))
    return script_path
