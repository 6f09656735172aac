"""
Error exponents for Gaussian measurement laws.

Every quantity is in nats. For a pair (g1, g2) the tilting parameter lambda is
the exponent carried by g1: affinity(lambda) = integral of g1^lambda g2^(1-lambda).
The minimized objectives (log-affinity, its ensemble average, the log of its
ensemble mixture) are all convex in lambda, so one scalar routine serves
every exponent here.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from config import Config
from gaussmodels import check_hypothesis, enumerate_hypotheses, hypothesis_parameters
from models import (
    AnomalyModel, ConfigError, DegenerateModelError, Ensemble, ExponentReport,
    Gaussian1D, Hypothesis, IndistinguishableHypotheses, MeasurementVector,
    NumericalError, Regime, Schedule,
)

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

Design = Union[MeasurementVector, Schedule, Ensemble]

# =========== SCALAR SEARCH ===========

def _golden_bracket(f: Callable[[float], float], a: float, b: float, width: float) -> Tuple[float, float]:
    """
    Golden-section search: shrink [a, b] around the minimum of a unimodal f
    until b - a <= width.
    """
    h = b - a
    if h <= width:
        return a, b

    steps = int(math.ceil(math.log(width / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(steps - 1):
        if yc < yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc < yd:
        return a, d
    return c, b


def _argmin_convex(
    f: Callable[[float], float],
    df: Callable[[float], float],
    tol: Optional[float] = None,
) -> float:
    """
    Minimizer of a convex f on [0, 1]: golden-section bracket, then bisection
    on the sign of df down to tol. A flat f returns 1/2.
    """
    tol = Config.LAMBDA_TOLERANCE if tol is None else tol
    slope_left, slope_right = df(0.0), df(1.0)
    if slope_left >= 0.0 and slope_right <= 0.0:
        return 0.5
    if slope_left >= 0.0:
        return 0.0
    if slope_right <= 0.0:
        return 1.0

    a, b = _golden_bracket(f, 0.0, 1.0, Config.GOLDEN_BRACKET_WIDTH)
    if df(a) >= 0.0:
        return a
    if df(b) <= 0.0:
        return b

    while b - a > tol:
        mid = 0.5 * (a + b)
        if df(mid) > 0.0:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)

# =========== PAIRWISE LAWS ===========

def _log_affinity_terms(m1, v1, m2, v2, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    log integral of N(m1,v1)^lam N(m2,v2)^(1-lam) and its lambda-derivative,
    elementwise over atom arrays.
    """
    m1, v1, m2, v2 = (np.asarray(x, dtype=float) for x in (m1, v1, m2, v2))
    dv = v2 - v1
    v_lam = lam * v2 + (1.0 - lam) * v1
    d2 = (m1 - m2) ** 2
    log_v1, log_v2, log_v_lam = np.log(v1), np.log(v2), np.log(v_lam)

    value = (
        -0.5 * d2 * lam * (1.0 - lam) / v_lam
        + 0.5 * ((1.0 - lam) * log_v1 + lam * log_v2 - log_v_lam)
    )
    dq = ((1.0 - 2.0 * lam) * v_lam - lam * (1.0 - lam) * dv) / v_lam ** 2
    derivative = -0.5 * d2 * dq + 0.5 * (log_v2 - log_v1 - dv / v_lam)
    return value, derivative


def _require_nondegenerate(*laws: Gaussian1D) -> None:
    for g in laws:
        if g.is_degenerate:
            raise DegenerateModelError(f"degenerate output distribution {g}")


def log_affinity(g1: Gaussian1D, g2: Gaussian1D, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    _require_nondegenerate(g1, g2)
    if lam in (0.0, 1.0):
        return 0.0
    value, _ = _log_affinity_terms(g1.mean, g1.variance, g2.mean, g2.variance, lam)
    return min(float(value), 0.0)


def _pair_exponent(
    means_i: np.ndarray,
    variances_i: np.ndarray,
    means_j: np.ndarray,
    variances_j: np.ndarray,
    weights: np.ndarray,
    inner: bool,
) -> Tuple[float, float]:
    """
    Outer (weighted mean of log-affinities) or inner (log of the weighted
    mean of affinities) exponent over atoms. Returns (value, lambda*).
    """
    if inner:
        def objective(lam: float) -> float:
            values, _ = _log_affinity_terms(means_i, variances_i, means_j, variances_j, lam)
            return float(logsumexp(values, b=weights))

        def slope(lam: float) -> float:
            values, derivatives = _log_affinity_terms(means_i, variances_i, means_j, variances_j, lam)
            total = logsumexp(values, b=weights)
            return float(np.sum(weights * np.exp(values - total) * derivatives))
    else:
        def objective(lam: float) -> float:
            values, _ = _log_affinity_terms(means_i, variances_i, means_j, variances_j, lam)
            return float(weights @ values)

        def slope(lam: float) -> float:
            _, derivatives = _log_affinity_terms(means_i, variances_i, means_j, variances_j, lam)
            return float(weights @ derivatives)

    lam_star = _argmin_convex(objective, slope)
    if lam_star in (0.0, 1.0):
        return 0.0, lam_star
    return max(-objective(lam_star), 0.0), lam_star


def chernoff_gaussian(g1: Gaussian1D, g2: Gaussian1D) -> Tuple[float, float]:
    """Chernoff information between two Gaussians and the optimizing lambda."""
    _require_nondegenerate(g1, g2)
    one = np.ones(1)
    return _pair_exponent(
        np.array([g1.mean]), np.array([g1.variance]),
        np.array([g2.mean]), np.array([g2.variance]),
        one, inner=False,
    )


def chernoff_equal_variance(mean_a, mean_b, variance):
    """(A - B)^2 / (8 sigma^2); accepts numpy arrays elementwise."""
    if np.any(np.asarray(variance) <= 0.0):
        raise DegenerateModelError(f"variance must be positive, got {variance}")
    return (np.asarray(mean_a) - np.asarray(mean_b)) ** 2 / (8.0 * np.asarray(variance))


def zero_mean_lambda(variance_ratio: float) -> float:
    """
    Optimal lambda for N(0, B) against N(0, 1), lambda on the wider law:
    (-(B-1) + B ln B) / ((B-1) ln B), with limit 1/2 at B = 1.
    """
    b = float(variance_ratio)
    if b < 1.0:
        raise ConfigError(f"variance ratio must be >= 1, got {b}")
    if b - 1.0 < 1e-9:
        return 0.5
    log_b = math.log(b)
    return (-(b - 1.0) + b * log_b) / ((b - 1.0) * log_b)


def zero_mean_chernoff(variance_ratio: float) -> float:
    """Chernoff information between N(0, B) and N(0, 1)."""
    b = float(variance_ratio)
    alpha = zero_mean_lambda(b)
    if alpha == 0.5 and b - 1.0 < 1e-9:
        return 0.0
    return 0.5 * math.log((alpha + (1.0 - alpha) * b) / b ** (1.0 - alpha))


def separate_variance_exponent(variance_ratio: float, n: int) -> float:
    """Outer exponent of uniform separate observations, one variance anomaly among n."""
    b = float(variance_ratio)
    return math.log((b + 1.0) / (2.0 * math.sqrt(b))) / n


def row_lambda_half_bound(v1: float, v2: float, rows: int) -> float:
    """
    lambda = 1/2 lower bound when one of `rows` equally weighted rows sees
    variance v1 under one hypothesis and v2 under the other.
    """
    return 0.5 * math.log((v1 + v2) / (2.0 * math.sqrt(v1 * v2))) / rows


def delta_pair_lower_bound(a_i: float, a_j: float) -> float:
    """
    Lower bound on the Chernoff information between two single-anomaly laws
    when the common law is a Dirac delta and one fixed vector is used: the
    output variances are a_i^2 and a_j^2 (times the anomalous variance).
    """
    if a_i == 0.0 or a_j == 0.0:
        return 0.0
    return 0.5 * math.log((a_i ** 2 + a_j ** 2) / (2.0 * abs(a_i * a_j)))

# =========== ENSEMBLES ===========

def ensemble_from_schedule(schedule: Schedule) -> Ensemble:
    """Distinct rows of a schedule weighted by how often they occur."""
    if schedule.m < 1:
        raise ConfigError("an empty schedule has no empirical ensemble")
    atoms, counts = np.unique(schedule.rows, axis=0, return_counts=True)
    return Ensemble(atoms=atoms, weights=counts / counts.sum())


def _as_ensemble(design: Design) -> Ensemble:
    if isinstance(design, Ensemble):
        return design
    if isinstance(design, Schedule):
        return ensemble_from_schedule(design)
    return Ensemble(atoms=design.coefficients[np.newaxis, :], weights=np.ones(1))


def _atom_laws(
    ens: Ensemble, model: AnomalyModel, hypotheses: Sequence[Hypothesis]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """L x T tables of output means and variances over positive-weight atoms."""
    if ens.n != model.n:
        raise ConfigError(f"ensemble has {ens.n} columns, model has n={model.n}")
    keep = np.flatnonzero(ens.weights > 0.0)
    atoms = ens.atoms[keep]
    mean_table, variance_table = hypothesis_parameters(model, hypotheses)
    means = mean_table @ atoms.T
    variances = variance_table @ (atoms ** 2).T

    degenerate = np.argwhere(variances <= 0.0)
    if degenerate.size:
        row, column = degenerate[0]
        raise DegenerateModelError(
            f"atom {int(keep[column])} has a degenerate output law under hypothesis {hypotheses[row]}"
        )
    return means, variances, ens.weights[keep]


def _conditional_chernoff(
    ens: Ensemble, model: AnomalyModel, hi: Hypothesis, hj: Hypothesis, inner: bool
) -> Tuple[float, float]:
    check_hypothesis(model, hi)
    check_hypothesis(model, hj)
    means, variances, weights = _atom_laws(ens, model, [hi, hj])
    return _pair_exponent(means[0], variances[0], means[1], variances[1], weights, inner=inner)


def inner_chernoff(ens: Ensemble, model: AnomalyModel, hi: Hypothesis, hj: Hypothesis) -> Tuple[float, float]:
    """-min_lambda log E_A[affinity]: the exponent of random time-varying measurements."""
    return _conditional_chernoff(ens, model, hi, hj, inner=True)


def outer_chernoff(ens: Ensemble, model: AnomalyModel, hi: Hypothesis, hj: Hypothesis) -> Tuple[float, float]:
    """-min_lambda E_A[log affinity]: the exponent of deterministic time-varying measurements."""
    return _conditional_chernoff(ens, model, hi, hj, inner=False)


def holder_lower_bound(ens: Ensemble, model: AnomalyModel, hi: Hypothesis, hj: Hypothesis) -> float:
    """
    Best single-atom bound max_t -log(1 - w_t + w_t exp(-C_t)) on the inner
    conditional Chernoff information.
    """
    check_hypothesis(model, hi)
    check_hypothesis(model, hj)
    means, variances, weights = _atom_laws(ens, model, [hi, hj])
    best = 0.0
    for t, weight in enumerate(weights):
        atom_value, _ = _pair_exponent(
            means[0, t:t + 1], variances[0, t:t + 1],
            means[1, t:t + 1], variances[1, t:t + 1],
            np.ones(1), inner=False,
        )
        bound = -math.log1p(weight * math.expm1(-atom_value))
        best = max(best, bound)
    return best

# =========== TILTED LAWS ===========

def tilted_gaussian(g1: Gaussian1D, g2: Gaussian1D, lam: float) -> Gaussian1D:
    """Normalized g1^lam g2^(1-lam); Gaussian again."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 1.0:
        return g1
    if lam == 0.0:
        return g2
    _require_nondegenerate(g1, g2)
    precision = lam / g1.variance + (1.0 - lam) / g2.variance
    if precision <= 0.0:
        raise NumericalError(f"tilted precision {precision} is not positive")
    variance = 1.0 / precision
    mean = variance * (lam * g1.mean / g1.variance + (1.0 - lam) * g2.mean / g2.variance)
    return Gaussian1D(mean=mean, variance=variance)


def _kl_terms(mean_p, variance_p, mean_q, variance_q):
    return 0.5 * (
        np.log(variance_q / variance_p)
        + (variance_p + (mean_p - mean_q) ** 2) / variance_q
        - 1.0
    )


def kl_gaussian(p: Gaussian1D, q: Gaussian1D) -> float:
    """D(p || q) in nats."""
    _require_nondegenerate(p, q)
    return float(_kl_terms(p.mean, p.variance, q.mean, q.variance))


def oc_via_kl_balance(ens: Ensemble, model: AnomalyModel, hi: Hypothesis, hj: Hypothesis) -> Tuple[float, float]:
    """
    Outer conditional Chernoff information as the common value of
    E_A D(P_lambda || P_i) and E_A D(P_lambda || P_j) at the balancing lambda.
    Returns (lambda*, value).
    """
    check_hypothesis(model, hi)
    check_hypothesis(model, hj)
    means, variances, weights = _atom_laws(ens, model, [hi, hj])
    m_i, v_i, m_j, v_j = means[0], variances[0], means[1], variances[1]

    def divergences(lam: float) -> Tuple[float, float]:
        tilted_variance = 1.0 / (lam / v_i + (1.0 - lam) / v_j)
        tilted_mean = tilted_variance * (lam * m_i / v_i + (1.0 - lam) * m_j / v_j)
        to_i = float(weights @ _kl_terms(tilted_mean, tilted_variance, m_i, v_i))
        to_j = float(weights @ _kl_terms(tilted_mean, tilted_variance, m_j, v_j))
        return to_i, to_j

    # to_i - to_j falls from E D(P_j||P_i) at lambda=0 to -E D(P_i||P_j) at lambda=1
    low, high = 0.0, 1.0
    gap_low = np.subtract(*divergences(low))
    if gap_low <= 0.0:
        return 0.5, 0.0
    while high - low > Config.LAMBDA_TOLERANCE:
        mid = 0.5 * (low + high)
        if np.subtract(*divergences(mid)) > 0.0:
            low = mid
        else:
            high = mid
    lam_star = 0.5 * (low + high)
    to_i, to_j = divergences(lam_star)
    return lam_star, 0.5 * (to_i + to_j)

# =========== HYPOTHESIS SPACE ===========

def min_pairwise_exponent(
    design: Design,
    model: AnomalyModel,
    regime: Optional[Regime] = None,
    hypotheses: Optional[Sequence[Hypothesis]] = None,
) -> ExponentReport:
    """
    Exponent for every pair of hypotheses and the smallest of them.

    A single MeasurementVector is the time-invariant regime (plain Chernoff
    information); schedules and ensembles default to the deterministic
    regime (outer conditional Chernoff); Regime.RANDOM uses the inner one.
    """
    if regime is None:
        regime = Regime.FIXED if isinstance(design, MeasurementVector) else Regime.DETERMINISTIC
    if regime == Regime.FIXED and not isinstance(design, MeasurementVector):
        raise ConfigError("the fixed regime takes a single measurement vector")
    if hypotheses is None:
        hypotheses = enumerate_hypotheses(model.n, model.k)
    hypotheses = tuple(hypotheses)
    size = len(hypotheses)
    if size < 2:
        raise ConfigError("at least two hypotheses are needed for a pairwise exponent")

    ens = _as_ensemble(design)
    means, variances, weights = _atom_laws(ens, model, hypotheses)
    inner = regime == Regime.RANDOM

    pairwise = np.zeros((size, size))
    lambdas = np.full((size, size), 0.5)
    for i in range(size):
        for j in range(i + 1, size):
            value, lam = _pair_exponent(means[i], variances[i], means[j], variances[j], weights, inner=inner)
            pairwise[i, j] = pairwise[j, i] = value
            lambdas[i, j], lambdas[j, i] = lam, 1.0 - lam

    upper = np.triu_indices(size, k=1)
    best = int(np.argmin(pairwise[upper]))
    argmin_pair = (int(upper[0][best]), int(upper[1][best]))
    min_exponent = float(pairwise[argmin_pair])
    logger.info(
        "Exponent sweep over %d hypotheses (%s regime): E=%.6g at %s vs %s",
        size, regime.value, min_exponent,
        hypotheses[argmin_pair[0]], hypotheses[argmin_pair[1]],
    )
    return ExponentReport(
        hypotheses=hypotheses,
        pairwise=pairwise,
        lambdas=lambdas,
        min_exponent=min_exponent,
        argmin_pair=argmin_pair,
        regime=regime,
    )


def sample_complexity(exponent: float, n: int, k: int, target_error: float) -> int:
    """
    Union-bound budget ceil((ln L + ln(1/eps)) / E) with L = C(n,k).
    An order-of-magnitude predictor, not a guarantee.
    """
    if exponent <= 0.0:
        raise IndistinguishableHypotheses(
            "indistinguishable hypotheses: a zero error exponent admits no finite sample complexity"
        )
    # target_error = 1 is accepted as the eps -> 1 limit
    if not 0.0 < target_error <= 1.0:
        raise ConfigError(f"target error must lie in (0, 1), got {target_error}")
    size = math.comb(n, k)
    return int(math.ceil((math.log(size) + math.log(1.0 / target_error)) / exponent))


def nats_to_bits(value: float) -> float:
    return value / math.log(2.0)

# =========== REPORTING ===========

def format_summary(report: ExponentReport) -> str:
    i, j = report.argmin_pair
    return f"E={report.min_exponent!r} pair=({i + 1},{j + 1})"


def write_report_csv(report: ExponentReport, path: Union[str, Path]) -> Path:
    """One row per unordered pair, 1-based hypothesis positions."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    size = len(report.hypotheses)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["i", "j", "exponent_nats", "lambda_star"])
        for i in range(size):
            for j in range(i + 1, size):
                writer.writerow([i + 1, j + 1, repr(float(report.pairwise[i, j])), repr(float(report.lambdas[i, j]))])
    return path
