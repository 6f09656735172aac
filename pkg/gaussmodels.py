"""
Anomaly model plumbing: hypothesis enumeration, the law of one mixed
measurement under a hypothesis, and model files.

Indices are 0-based in code and 1-based wherever a person reads them.
"""

import itertools
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from config import Config
from models import (
    AnomalyModel, ConfigError, DegenerateModelError, Gaussian1D, GaussianVec,
    Hypothesis, HypothesisSpaceTooLarge, IndistinguishableHypotheses, MeasurementVector,
)

logger = logging.getLogger(__name__)

MODEL_KEYS = ("n", "k", "common", "anomalous")

_NORMAL_LITERAL = re.compile(r"^normal\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$", re.IGNORECASE)
_DIRAC_LITERAL = re.compile(r"^dirac\(\s*([^,()]+?)\s*\)$", re.IGNORECASE)

CoefficientsLike = Union[MeasurementVector, Sequence[float], np.ndarray]


def _coefficients(a: CoefficientsLike) -> np.ndarray:
    if isinstance(a, MeasurementVector):
        return a.coefficients
    return np.asarray(a, dtype=float)


def check_hypothesis(model: AnomalyModel, h: Hypothesis) -> None:
    """Raise ConfigError unless h is a size-k support inside {0..n-1}."""
    if h.k != model.k:
        raise ConfigError(f"hypothesis {h} has {h.k} indices, model has k={model.k}")
    if h.support[-1] >= model.n:
        raise ConfigError(f"hypothesis {h} refers to a variable beyond n={model.n}")


def enumerate_hypotheses(n: int, k: int, cap: Optional[int] = None) -> List[Hypothesis]:
    """
    All C(n,k) supports in lexicographic order.

    Raises HypothesisSpaceTooLarge when C(n,k) exceeds the cap
    (Config.ENUMERATION_CAP unless given).
    """
    if not 1 <= k < n:
        raise ConfigError(f"need 1 <= k < n, got n={n}, k={k}")
    cap = Config.ENUMERATION_CAP if cap is None else cap
    size = math.comb(n, k)
    if size > cap:
        raise HypothesisSpaceTooLarge(
            f"hypothesis space too large: C({n},{k}) = {size} exceeds the cap of {cap}"
        )
    return [Hypothesis(support=support) for support in itertools.combinations(range(n), k)]


def hypothesis_index(hypotheses: Sequence[Hypothesis], h: Hypothesis) -> int:
    for position, candidate in enumerate(hypotheses):
        if candidate.support == h.support:
            return position
    raise ConfigError(f"hypothesis {h} is not in the enumerated list")


def _parameter_vectors(model: AnomalyModel, h: Hypothesis) -> Tuple[np.ndarray, np.ndarray]:
    means = np.full(model.n, model.common.mean)
    variances = np.full(model.n, model.common.variance)
    support = list(h.support)
    means[support] = model.anomalous.mean
    variances[support] = model.anomalous.variance
    return means, variances


def output_distribution(model: AnomalyModel, h: Hypothesis, a: CoefficientsLike) -> Gaussian1D:
    """Law of Y = sum_i a_i X_i when the anomalous variables are h.support."""
    check_hypothesis(model, h)
    coefficients = _coefficients(a)
    if coefficients.shape != (model.n,):
        raise ConfigError(f"measurement has length {coefficients.shape[0]}, model has n={model.n}")
    means, variances = _parameter_vectors(model, h)
    return Gaussian1D(
        mean=float(coefficients @ means),
        variance=float((coefficients ** 2) @ variances),
    )


def hypothesis_law(model: AnomalyModel, h: Hypothesis) -> GaussianVec:
    """Joint law of (X_1..X_n) under h: independent, so the covariance is diagonal."""
    check_hypothesis(model, h)
    means, variances = _parameter_vectors(model, h)
    return GaussianVec(mean=means, covariance=np.diag(variances))


def hypothesis_parameters(
    model: AnomalyModel, hypotheses: Sequence[Hypothesis]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    L x n tables of per-variable means and variances, one row per hypothesis.

    Row l equals the diagonal of hypothesis_law(model, hypotheses[l]).
    """
    size = len(hypotheses)
    anomalous = np.zeros((size, model.n), dtype=bool)
    for row, h in enumerate(hypotheses):
        anomalous[row, list(h.support)] = True
    means = np.where(anomalous, model.anomalous.mean, model.common.mean)
    variances = np.where(anomalous, model.anomalous.variance, model.common.variance)
    return means, variances


def log_density(g: Gaussian1D, y: float) -> float:
    if g.is_degenerate:
        raise DegenerateModelError(f"degenerate output distribution {g}: density is undefined")
    return -0.5 * (math.log(2.0 * math.pi * g.variance) + (y - g.mean) ** 2 / g.variance)

# =========== MODEL FILES ===========

def parse_distribution(literal: str) -> Gaussian1D:
    """Parse `normal(mean,variance)` or `dirac(mean)`."""
    text = literal.strip()
    try:
        match = _NORMAL_LITERAL.match(text)
        if match:
            return Gaussian1D(mean=float(match.group(1)), variance=float(match.group(2)))
        match = _DIRAC_LITERAL.match(text)
        if match:
            return Gaussian1D.dirac(float(match.group(1)))
    except (ValueError, ValidationError) as e:
        raise ConfigError(f"invalid distribution literal '{literal}': {e}") from e
    raise ConfigError(
        f"invalid distribution literal '{literal}'; expected normal(mean,variance) or dirac(mean)"
    )


def model_from_mapping(values: Mapping[str, Optional[str]]) -> AnomalyModel:
    unknown = sorted(set(values) - set(MODEL_KEYS))
    if unknown:
        raise ConfigError(f"unknown model keys: {', '.join(unknown)}")
    missing = [key for key in MODEL_KEYS if not values.get(key)]
    if missing:
        raise ConfigError(f"missing model keys: {', '.join(missing)}")

    try:
        n = int(values["n"])
        k = int(values["k"])
    except ValueError as e:
        raise ConfigError(f"n and k must be integers: {e}") from e

    common = parse_distribution(values["common"])
    anomalous = parse_distribution(values["anomalous"])
    if common == anomalous:
        raise IndistinguishableHypotheses(
            f"indistinguishable hypotheses: common and anomalous laws are both {common}"
        )
    try:
        return AnomalyModel(n=n, k=k, common=common, anomalous=anomalous)
    except ValidationError as e:
        raise ConfigError(f"invalid anomaly model: {e}") from e


def load_model(path: Union[str, Path]) -> AnomalyModel:
    """Read a key=value model file (`n=102`, `common=normal(8,1)`, ...)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"model config '{path}' does not exist")
    values: Dict[str, Optional[str]] = dotenv_values(path)
    model = model_from_mapping(values)
    logger.info(
        "Loaded model from %s: n=%d k=%d common=%s anomalous=%s",
        path, model.n, model.k, model.common, model.anomalous,
    )
    return model


def format_distribution(g: Gaussian1D) -> str:
    """Exact literal for g; parse_distribution reads it back unchanged."""
    if g.is_degenerate:
        return f"dirac({g.mean!r})"
    return f"normal({g.mean!r},{g.variance!r})"


def format_model(model: AnomalyModel) -> str:
    return "\n".join([
        f"n={model.n}",
        f"k={model.k}",
        f"common={format_distribution(model.common)}",
        f"anomalous={format_distribution(model.anomalous)}",
    ]) + "\n"
