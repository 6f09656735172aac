"""
Measurement designs: schedules of mixing vectors and finite ensembles p(A).
"""

import itertools
import logging
import math
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from chernoff import chernoff_equal_variance, zero_mean_chernoff, zero_mean_lambda
from config import Config
from models import (
    AnomalyModel, BipartiteDesignSpec, ConfigError, DegenerateModelError,
    Ensemble, EnsembleTooLarge, MeasurementVector, NumericalError,
    OutOfScopeError, Schedule,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]
VectorLike = Union[MeasurementVector, Sequence[float], np.ndarray]


def _coefficients(a: VectorLike) -> np.ndarray:
    if isinstance(a, MeasurementVector):
        return np.array(a.coefficients)
    return np.asarray(a, dtype=float)


def normalize_direction(a: VectorLike) -> MeasurementVector:
    """Unit norm, first nonzero entry positive. Exponents do not see either choice."""
    coefficients = _coefficients(a)
    norm = float(np.linalg.norm(coefficients))
    if norm == 0.0:
        raise DegenerateModelError("cannot normalize an all-zero measurement")
    coefficients = coefficients / norm
    first = coefficients[np.flatnonzero(coefficients)[0]]
    if first < 0.0:
        coefficients = -coefficients
    return MeasurementVector(coefficients=coefficients)

# =========== SCHEDULES ===========

def separate_design(n: int, m: int, seed: SeedLike = None) -> Schedule:
    """
    floor(m/n) passes over every unit vector, then m mod n extra unit vectors
    on distinct indices drawn uniformly from the seeded generator.
    """
    if n < 1 or m < 1:
        raise ConfigError(f"separate design needs n >= 1 and m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    passes, extra = divmod(m, n)
    indices = np.concatenate([np.tile(np.arange(n), passes), rng.choice(n, size=extra, replace=False)])
    rows = np.zeros((m, n))
    rows[np.arange(m), indices] = 1.0
    return Schedule(rows=rows, metadata={"design": "separate", "passes": passes, "extra": extra})


def bipartite_design(spec: BipartiteDesignSpec, rng: Optional[np.random.Generator] = None) -> Schedule:
    """
    Configuration-model sparse bipartite mixing: the d*m measurement edge ends
    are matched to variable sockets by a uniform permutation, and every edge
    sets its coefficient to 1. Parallel edges collapse to a single 1.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n, m, d = spec.n, spec.m, spec.right_degree
    total = d * m

    degrees = np.full(n, total // n)
    remainder = total % n
    if remainder:
        degrees[rng.choice(n, size=remainder, replace=False)] += 1

    sockets = rng.permutation(np.repeat(np.arange(n), degrees))
    ends = sockets.reshape(m, d)
    rows = np.zeros((m, n))
    rows[np.arange(m)[:, np.newaxis], ends] = 1.0

    collapsed = total - int(rows.sum())
    if collapsed:
        logger.debug("Bipartite design n=%d m=%d d=%d collapsed %d parallel edges", n, m, d, collapsed)
    return Schedule(
        rows=rows,
        metadata={
            "design": "bipartite",
            "left_degree": total / n,
            "right_degree": d,
            "collapsed_edges": collapsed,
            "uneven_left_degree": bool(remainder),
        },
    )


def hamming74_design() -> Schedule:
    """Parity-check matrix of the (7,4) Hamming code: column j is j in binary."""
    columns = np.arange(1, 8)
    rows = np.array([(columns >> bit) & 1 for bit in range(3)], dtype=float)
    return Schedule(rows=rows, metadata={"design": "hamming74"})


def fixed_schedule(a: VectorLike, m: int) -> Schedule:
    """The same measurement repeated m times (time-invariant regime)."""
    vector = MeasurementVector(coefficients=_coefficients(a))
    if m < 0:
        raise ConfigError(f"budget must be non-negative, got {m}")
    rows = np.tile(vector.coefficients, (m, 1)) if m else np.zeros((0, vector.n))
    return Schedule(rows=rows, metadata={"design": "fixed"})

# =========== OPTIMAL DESIGNS ===========

def _check_symmetric(matrix: np.ndarray, name: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigError(f"{name} must be a square matrix, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, rtol=1e-12, atol=1e-12 * max(float(np.max(np.abs(matrix))), 1.0)):
        raise ConfigError(f"{name} must be symmetric")
    return matrix


def _cholesky(matrix: np.ndarray, name: str):
    try:
        return linalg.cho_factor(matrix)
    except linalg.LinAlgError as e:
        raise NumericalError(f"{name} is singular or not positive definite: {e}") from e


def optimal_mean_shift(mu1: VectorLike, mu2: VectorLike, sigma) -> Tuple[MeasurementVector, float]:
    """
    Best single projection for N(mu1, Sigma) against N(mu2, Sigma):
    a = Sigma^-1 (mu1 - mu2) with exponent (mu1 - mu2)' Sigma^-1 (mu1 - mu2) / 8.
    """
    delta = _coefficients(mu1) - _coefficients(mu2)
    sigma = _check_symmetric(sigma, "covariance")
    if sigma.shape[0] != delta.shape[0]:
        raise ConfigError(f"covariance is {sigma.shape[0]}x{sigma.shape[0]}, means have length {delta.shape[0]}")
    if not np.any(delta != 0.0):
        raise DegenerateModelError("no mean separation: mu1 equals mu2")

    a = linalg.cho_solve(_cholesky(sigma, "covariance"), delta)
    exponent = float(delta @ a) / 8.0
    return MeasurementVector(coefficients=a), exponent


def optimal_variance_discrimination(sigma1, sigma2) -> Tuple[MeasurementVector, float, float, float]:
    """
    Best single projection for N(mu, Sigma1) against N(mu, Sigma2).

    The exponent grows with the variance ratio B of the projected laws, so
    both max a'S1a s.t. a'S2a <= 1 and its swap are solved as generalized
    symmetric eigenproblems. Returns (a, B, lambda*, exponent) with lambda*
    carried by the law of larger projected variance.
    """
    s1 = _check_symmetric(sigma1, "sigma1")
    s2 = _check_symmetric(sigma2, "sigma2")
    if s1.shape != s2.shape:
        raise ConfigError(f"covariances differ in shape: {s1.shape} vs {s2.shape}")
    _cholesky(s1, "sigma1")
    _cholesky(s2, "sigma2")

    ratios, vectors = linalg.eigh(s1, s2)
    if ratios[-1] * ratios[0] >= 1.0:
        ratio, direction = float(ratios[-1]), vectors[:, -1]
    else:
        ratio, direction = 1.0 / float(ratios[0]), vectors[:, 0]
    ratio = max(ratio, 1.0)

    lam = zero_mean_lambda(ratio)
    exponent = zero_mean_chernoff(ratio)
    logger.debug("Variance discrimination: B=%.6g lambda*=%.6g exponent=%.6g", ratio, lam, exponent)
    return normalize_direction(direction), ratio, lam, exponent

# =========== ENSEMBLES ===========

def _merged_ensemble(vectors, total: int) -> Ensemble:
    counts = Counter(vectors)
    atoms = sorted(counts)
    return Ensemble(
        atoms=np.array(atoms, dtype=float),
        weights=np.array([counts[atom] for atom in atoms], dtype=float) / total,
    )


def permutation_ensemble(base: VectorLike) -> Ensemble:
    """Uniform ensemble over all coordinate permutations of base, duplicates merged."""
    coefficients = _coefficients(base)
    n = coefficients.shape[0]
    if n > Config.PERMUTATION_CAP_N:
        raise EnsembleTooLarge(
            f"permutation ensemble over n={n} needs {math.factorial(n)} permutations "
            f"(cap n <= {Config.PERMUTATION_CAP_N}); use cyclic_ensemble instead"
        )
    MeasurementVector(coefficients=coefficients)
    return _merged_ensemble(itertools.permutations(coefficients.tolist()), math.factorial(n))


def cyclic_ensemble(base: VectorLike) -> Ensemble:
    """Uniform ensemble over the n cyclic shifts of base, duplicates merged."""
    coefficients = _coefficients(base)
    MeasurementVector(coefficients=coefficients)
    n = coefficients.shape[0]
    shifts = (tuple(np.roll(coefficients, shift).tolist()) for shift in range(n))
    return _merged_ensemble(shifts, n)


def base_vector_objective(model: AnomalyModel, a: VectorLike) -> float:
    """
    Sum over unordered hypothesis pairs of the Chernoff information of one
    measurement a, for k = 1 and a shared variance.
    """
    coefficients = _coefficients(a)
    variance = model.common.variance * float(coefficients @ coefficients)
    shift = model.anomalous.mean - model.common.mean
    means = model.common.mean * coefficients.sum() + shift * coefficients
    upper = np.triu_indices(model.n, k=1)
    return float(np.sum(chernoff_equal_variance(means[upper[0]], means[upper[1]], variance)))


def optimize_base_vector(model: AnomalyModel, seed: SeedLike = 0) -> MeasurementVector:
    """
    Unit vector A* maximizing the pairwise Chernoff sum; its permutation
    ensemble equalizes every pairwise outer exponent.

    Pattern search on the sphere: coordinate moves of size step, renormalized,
    step halved when no move improves; Config.BASE_SEARCH_RESTARTS random
    starts, best objective wins (earliest restart on ties).
    """
    if model.k != 1 or not model.equal_variance or model.common.is_degenerate:
        raise OutOfScopeError(
            "out of scope: optimal ensembles are built for k=1 and "
            "independent Gaussian variables sharing a positive variance"
        )
    rng = np.random.default_rng(seed)
    n = model.n
    best_vector, best_value = None, -math.inf

    for restart in range(Config.BASE_SEARCH_RESTARTS):
        a = rng.standard_normal(n)
        a /= np.linalg.norm(a)
        value = base_vector_objective(model, a)
        step = 0.5
        while step >= Config.BASE_SEARCH_MIN_STEP:
            improved = False
            for i in range(n):
                for sign in (1.0, -1.0):
                    candidate = a.copy()
                    candidate[i] += sign * step
                    norm = np.linalg.norm(candidate)
                    if norm == 0.0:
                        continue
                    candidate /= norm
                    candidate_value = base_vector_objective(model, candidate)
                    if candidate_value > value:
                        a, value, improved = candidate, candidate_value, True
            if not improved:
                step /= 2.0
        logger.debug("Base search restart %d: objective %.12g", restart, value)
        if value > best_value:
            best_vector, best_value = a, value

    logger.info("Optimized base vector for n=%d: objective %.12g", n, best_value)
    return normalize_direction(best_vector)

# =========== SCHEDULE FILES ===========

def _format_coefficient(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def format_schedule(schedule: Schedule) -> str:
    lines = [f"{schedule.m} {schedule.n}"]
    lines.extend(" ".join(_format_coefficient(x) for x in row) for row in schedule.rows)
    return "\n".join(lines) + "\n"


def write_schedule(schedule: Schedule, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_schedule(schedule))
    return path


def parse_schedule(text: str) -> Schedule:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ConfigError("schedule file is empty")
    try:
        m, n = (int(token) for token in lines[0].split())
    except ValueError as e:
        raise ConfigError(f"schedule header must be 'm n', got '{lines[0]}'") from e
    if len(lines) - 1 != m:
        raise ConfigError(f"schedule header announces {m} rows, found {len(lines) - 1}")
    rows = []
    for j, line in enumerate(lines[1:], start=1):
        try:
            row = [float(token) for token in line.split()]
        except ValueError as e:
            raise ConfigError(f"schedule row {j} is not numeric: {e}") from e
        if len(row) != n:
            raise ConfigError(f"schedule row {j} has {len(row)} entries, expected {n}")
        rows.append(row)
    return Schedule(rows=np.array(rows).reshape(m, n), metadata={"design": "file"})


def read_schedule(path: Union[str, Path]) -> Schedule:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"schedule file '{path}' does not exist")
    return parse_schedule(path.read_text())
