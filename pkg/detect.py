"""
Detectors over a known measurement schedule.

Once the rows A^j are known (given, drawn, or apportioned), P(A, Y | H)
factors as P(A) P(Y | A, H) and P(A) is the same under every hypothesis, so
one conditional likelihood serves fixed, random and deterministic designs.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from gaussmodels import enumerate_hypotheses, hypothesis_parameters
from models import (
    AnomalyModel, ConfigError, Decision, DegenerateModelError, DetectorKind,
    Ensemble, Hypothesis, NPConfig, Observations, Schedule,
)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def _check_alignment(model: AnomalyModel, schedule: Schedule, obs: Observations) -> None:
    if schedule.n != model.n:
        raise ConfigError(f"schedule has {schedule.n} columns, model has n={model.n}")
    if obs.m != schedule.m:
        raise ConfigError(f"{obs.m} observations for a schedule of {schedule.m} rows")


def _output_laws(
    model: AnomalyModel, hypotheses: Sequence[Hypothesis], schedule: Schedule
) -> Tuple[np.ndarray, np.ndarray]:
    """L x m means and variances of Y_j under every hypothesis."""
    mean_table, variance_table = hypothesis_parameters(model, hypotheses)
    means = mean_table @ schedule.rows.T
    variances = variance_table @ (schedule.rows ** 2).T
    degenerate = np.argwhere(variances <= 0.0)
    if degenerate.size:
        position, row = degenerate[0]
        raise DegenerateModelError(
            f"row {int(row) + 1} has a degenerate output law under hypothesis {hypotheses[position]}"
        )
    return means, variances


def log_likelihood_table(
    model: AnomalyModel, hypotheses: Sequence[Hypothesis], schedule: Schedule, obs: Observations
) -> np.ndarray:
    """log P(Y | A, H_l) for every hypothesis; zeros when the schedule is empty."""
    _check_alignment(model, schedule, obs)
    if not hypotheses:
        raise ConfigError("no hypotheses to score")
    if schedule.m == 0:
        return np.zeros(len(hypotheses))
    means, variances = _output_laws(model, hypotheses, schedule)
    residuals = obs.values[np.newaxis, :] - means
    return -0.5 * np.sum(LOG_2PI + np.log(variances) + residuals ** 2 / variances, axis=1)


def log_likelihood(model: AnomalyModel, h: Hypothesis, schedule: Schedule, obs: Observations) -> float:
    return float(log_likelihood_table(model, [h], schedule, obs)[0])


def lrt(
    model: AnomalyModel,
    schedule: Schedule,
    obs: Observations,
    hypotheses: Optional[Sequence[Hypothesis]] = None,
) -> Decision:
    """Maximum likelihood; ties go to the lowest hypothesis index. Never fails."""
    if hypotheses is None:
        hypotheses = enumerate_hypotheses(model.n, model.k)
    scores = log_likelihood_table(model, hypotheses, schedule, obs)
    index = int(np.argmax(scores))
    return Decision.selected(hypotheses[index], index)


def pairwise_np(
    model: AnomalyModel,
    schedule: Schedule,
    obs: Observations,
    hypotheses: Optional[Sequence[Hypothesis]] = None,
    cfg: Optional[NPConfig] = None,
) -> Decision:
    """
    Round-robin of Neyman-Pearson tests. For i < j, H_i wins when
    ll_i - ll_j > m * threshold and H_j wins when it is below; equality is a
    tie nobody wins. A hypothesis winning every pairing it is in is selected,
    otherwise the result is a failure (this includes cycles among winners).
    """
    cfg = cfg or NPConfig()
    if hypotheses is None:
        hypotheses = enumerate_hypotheses(model.n, model.k)
    scores = log_likelihood_table(model, hypotheses, schedule, obs)
    threshold = schedule.m * cfg.log_threshold

    differences = scores[:, np.newaxis] - scores[np.newaxis, :]
    upper = np.triu(np.ones(differences.shape, dtype=bool), k=1)
    beats = np.where(upper, differences > threshold, differences > -threshold)
    np.fill_diagonal(beats, True)

    winners = np.flatnonzero(beats.all(axis=1))
    if winners.size == 0:
        logger.debug("Pairwise tournament over %d hypotheses has no overall winner", len(hypotheses))
        return Decision.failure()
    index = int(winners[0])
    return Decision.selected(hypotheses[index], index)


def run_detector(
    detector: DetectorKind,
    model: AnomalyModel,
    schedule: Schedule,
    obs: Observations,
    hypotheses: Optional[Sequence[Hypothesis]] = None,
    np_config: Optional[NPConfig] = None,
) -> Decision:
    if detector == DetectorKind.LRT:
        return lrt(model, schedule, obs, hypotheses)
    if detector == DetectorKind.PAIRWISE_NP:
        return pairwise_np(model, schedule, obs, hypotheses, np_config)
    raise ConfigError(f"unknown detector '{detector}'")

# =========== SCHEDULE REALIZATION ===========

def realize_random_schedule(
    ens: Ensemble, m: int, seed: Union[int, np.random.Generator, None] = None
) -> Schedule:
    """m i.i.d. atom draws by weight."""
    if m < 0:
        raise ConfigError(f"budget must be non-negative, got {m}")
    rng = np.random.default_rng(seed)
    draws = rng.choice(ens.size, size=m, p=ens.weights)
    return Schedule(rows=ens.atoms[draws], metadata={"design": "random"})


def apportion(weights: np.ndarray, m: int) -> np.ndarray:
    """Largest-remainder counts summing to m; equal remainders favour the lower index."""
    quotas = np.asarray(weights, dtype=float) * m
    counts = np.floor(quotas).astype(int)
    short = m - int(counts.sum())
    remainders = quotas - counts
    order = np.lexsort((np.arange(len(quotas)), -remainders))
    counts[order[:short]] += 1
    return counts


def realize_deterministic_schedule(ens: Ensemble, m: int) -> Schedule:
    """Each atom appears about w_t * m times, atoms interleaved round-robin."""
    positive = np.flatnonzero(ens.weights > 0.0)
    if m < positive.size:
        raise ConfigError(f"budget m={m} is smaller than the {positive.size} atoms with positive weight")
    counts = apportion(ens.weights[positive], m)
    sequence: List[int] = [
        int(positive[t])
        for rank in range(int(counts.max(initial=0)))
        for t in range(positive.size)
        if counts[t] > rank
    ]
    rows = ens.atoms[sequence] if sequence else np.zeros((0, ens.n))
    return Schedule(rows=rows, metadata={"design": "deterministic", "counts": counts.tolist()})

# =========== FILES ===========

def read_observations(path: Union[str, Path]) -> Observations:
    """One real per line; blank lines are ignored."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"observations file '{path}' does not exist")
    values = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as e:
            raise ConfigError(f"observations line {number} is not a number: '{line.strip()}'") from e
    return Observations(values=np.array(values, dtype=float))


def format_decision(decision: Decision) -> str:
    if decision.is_selected:
        return f"SELECTED {decision.hypothesis.label()}"
    return "FAILURE"
