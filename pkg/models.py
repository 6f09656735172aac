from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple
import math

import numpy as np

# =========== ERRORS ===========

class AnomalyToolkitError(ValueError):
    """Base class for every domain error raised by the toolkit"""

class ConfigError(AnomalyToolkitError):
    """Malformed configuration, input file or design parameters"""

class HypothesisSpaceTooLarge(ConfigError):
    """C(n,k) exceeds the enumeration cap"""

class EnsembleTooLarge(ConfigError):
    """A full permutation ensemble would exceed the permutation cap"""

class DegenerateModelError(AnomalyToolkitError):
    """A zero-variance output law was evaluated, or hypotheses cannot be told apart"""

class IndistinguishableHypotheses(DegenerateModelError):
    """The minimum error exponent is zero"""

class OutOfScopeError(DegenerateModelError):
    """The request lies outside the scope of the optimal-ensemble construction"""

class NumericalError(AnomalyToolkitError, RuntimeError):
    """Singular systems, non-positive-definite matrices, failed searches"""


def _frozen_array(value: Any, ndim: int, name: str) -> np.ndarray:
    """Copy into a read-only float array of the given rank."""
    array = np.array(value, dtype=float)
    if array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must contain only finite entries")
    array.setflags(write=False)
    return array

# =========== ENUMS ===========

class DetectorKind(str, Enum):
    LRT = "lrt"
    PAIRWISE_NP = "pairwise-np"

class DesignKind(str, Enum):
    FIXED = "fixed"  # a given schedule, cycled to the budget
    BIPARTITE = "bipartite"
    ENSEMBLE = "ensemble"
    SEPARATE = "separate"

class Regime(str, Enum):
    FIXED = "fixed"  # one time-invariant measurement
    RANDOM = "random"  # i.i.d. draws from an ensemble (inner conditional Chernoff)
    DETERMINISTIC = "deterministic"  # apportioned schedule (outer conditional Chernoff)

class DecisionOutcome(str, Enum):
    SELECTED = "selected"
    FAILURE = "failure"

# =========== DISTRIBUTIONS AND HYPOTHESES ===========

class Gaussian1D(BaseModel):
    """
    Univariate Gaussian law. Variance 0 encodes the Dirac delta at the mean.
    """
    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float = Field(ge=0.0)

    @field_validator("mean", "variance")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("Gaussian parameters must be finite")
        return value

    @classmethod
    def dirac(cls, mean: float) -> "Gaussian1D":
        return cls(mean=mean, variance=0.0)

    @property
    def is_degenerate(self) -> bool:
        return self.variance == 0.0

    def __str__(self) -> str:
        if self.is_degenerate:
            return f"dirac({self.mean:g})"
        return f"normal({self.mean:g},{self.variance:g})"

class AnomalyModel(BaseModel):
    """
    n variables, k of which follow the anomalous law; the rest follow the common law.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)
    k: int = Field(ge=1)
    common: Gaussian1D
    anomalous: Gaussian1D

    @model_validator(mode="after")
    def _check_shape(self) -> "AnomalyModel":
        if self.k >= self.n:
            raise ValueError(f"k must be smaller than n (got n={self.n}, k={self.k})")
        if self.common == self.anomalous:
            raise ValueError("common and anomalous distributions must differ")
        return self

    @property
    def equal_variance(self) -> bool:
        return self.common.variance == self.anomalous.variance

class Hypothesis(BaseModel):
    """
    Support set of the anomalous variables, stored 0-based and shown 1-based.
    """
    model_config = ConfigDict(frozen=True)

    support: Tuple[int, ...]

    @field_validator("support")
    @classmethod
    def _strictly_increasing(cls, support: Tuple[int, ...]) -> Tuple[int, ...]:
        if not support:
            raise ValueError("support must not be empty")
        if support[0] < 0:
            raise ValueError("support indices must be non-negative")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError(f"support must be strictly increasing, got {support}")
        return support

    @property
    def k(self) -> int:
        return len(self.support)

    def label(self) -> str:
        return "{" + ",".join(str(i + 1) for i in self.support) + "}"

    def __str__(self) -> str:
        return self.label()

class GaussianVec(BaseModel):
    """
    Multivariate Gaussian law of the n variables under one hypothesis.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mean: np.ndarray
    covariance: np.ndarray

    @field_validator("mean", mode="before")
    @classmethod
    def _mean_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 1, "mean")

    @field_validator("covariance", mode="before")
    @classmethod
    def _covariance_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 2, "covariance")

    @model_validator(mode="after")
    def _check_covariance(self) -> "GaussianVec":
        n = self.mean.shape[0]
        if self.covariance.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got {self.covariance.shape}")
        scale = max(float(np.max(np.abs(self.covariance))), 1.0)
        if not np.allclose(self.covariance, self.covariance.T, rtol=1e-12, atol=1e-12 * scale):
            raise ValueError("covariance must be symmetric")
        trace = float(np.trace(self.covariance))
        if float(np.min(np.linalg.eigvalsh(self.covariance))) < -1e-10 * max(trace, 1.0):
            raise ValueError("covariance must be positive semidefinite")
        return self

# =========== MEASUREMENTS ===========

class MeasurementVector(BaseModel):
    """
    One mixing vector a: the measurement returns sum_i a_i X_i.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coefficients: np.ndarray

    @field_validator("coefficients", mode="before")
    @classmethod
    def _coefficients_array(cls, value: Any) -> np.ndarray:
        array = _frozen_array(value, 1, "coefficients")
        if not np.any(array != 0.0):
            raise ValueError("measurement vector must not be all zero")
        return array

    @property
    def n(self) -> int:
        return int(self.coefficients.shape[0])

class Schedule(BaseModel):
    """
    Ordered measurement rows A^1..A^m, stored as an m x n matrix.
    An empty (0 x n) schedule is allowed for zero-budget detection.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rows: np.ndarray
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("rows", mode="before")
    @classmethod
    def _rows_array(cls, value: Any) -> np.ndarray:
        array = _frozen_array(value, 2, "schedule rows")
        if array.shape[1] < 1:
            raise ValueError("schedule rows must have at least one coefficient")
        return array

    @property
    def m(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n(self) -> int:
        return int(self.rows.shape[1])

    def row(self, j: int) -> MeasurementVector:
        return MeasurementVector(coefficients=self.rows[j])

class Ensemble(BaseModel):
    """
    Finite-support distribution p(A) over measurement vectors.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    atoms: np.ndarray
    weights: np.ndarray

    @field_validator("atoms", mode="before")
    @classmethod
    def _atoms_array(cls, value: Any) -> np.ndarray:
        array = _frozen_array(value, 2, "ensemble atoms")
        if array.shape[0] < 1:
            raise ValueError("ensemble needs at least one atom")
        if np.any(~np.any(array != 0.0, axis=1)):
            raise ValueError("ensemble atoms must not be all zero")
        return array

    @field_validator("weights", mode="before")
    @classmethod
    def _weights_array(cls, value: Any) -> np.ndarray:
        array = _frozen_array(value, 1, "ensemble weights")
        if np.any(array < 0.0):
            raise ValueError("ensemble weights must be non-negative")
        if abs(float(np.sum(array)) - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights must sum to 1, got {float(np.sum(array))!r}")
        return array

    @model_validator(mode="after")
    def _aligned(self) -> "Ensemble":
        if self.atoms.shape[0] != self.weights.shape[0]:
            raise ValueError("one weight per atom is required")
        return self

    @property
    def n(self) -> int:
        return int(self.atoms.shape[1])

    @property
    def size(self) -> int:
        return int(self.atoms.shape[0])

class BipartiteDesignSpec(BaseModel):
    """
    Configuration-model bipartite graph: m measurement nodes of degree d over n variables.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    m: int = Field(ge=1)
    right_degree: int = Field(ge=1)
    seed: int
    uneven_left_degree: bool = False  # spread d*m sockets as evenly as possible instead of requiring divisibility

    @model_validator(mode="after")
    def _check_degrees(self) -> "BipartiteDesignSpec":
        if self.right_degree > self.n:
            raise ValueError(f"right degree {self.right_degree} exceeds n={self.n}")
        if not self.uneven_left_degree and (self.right_degree * self.m) % self.n != 0:
            raise ValueError(
                f"d*m = {self.right_degree * self.m} is not divisible by n={self.n}; "
                "variable nodes cannot share an equal degree"
            )
        return self

# =========== EXPONENTS ===========

class ExponentReport(BaseModel):
    """
    Pairwise error exponents (nats) over an enumerated hypothesis list.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    hypotheses: Tuple[Hypothesis, ...]
    pairwise: np.ndarray
    lambdas: np.ndarray
    min_exponent: float = Field(ge=0.0)
    argmin_pair: Tuple[int, int]  # 0-based positions in `hypotheses`
    regime: Regime

    @model_validator(mode="after")
    def _check_matrices(self) -> "ExponentReport":
        size = len(self.hypotheses)
        for name, matrix in (("pairwise", self.pairwise), ("lambdas", self.lambdas)):
            if matrix.shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}")
        if np.any(self.pairwise < 0.0):
            raise ValueError("exponents must be non-negative")
        if not np.allclose(self.pairwise, self.pairwise.T, atol=1e-9):
            raise ValueError("pairwise exponents must be symmetric")
        return self

# =========== DETECTION ===========

class Observations(BaseModel):
    """
    Observed values Y_1..Y_m aligned with a schedule's rows.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 1, "observations")

    @property
    def m(self) -> int:
        return int(self.values.shape[0])

class NPConfig(BaseModel):
    """Pairwise Neyman-Pearson settings"""
    model_config = ConfigDict(frozen=True)

    log_threshold: float = 0.0  # per-sample log-likelihood-ratio threshold
    tie_rule: str = "lowest-index"

    @field_validator("log_threshold")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("log_threshold must be finite")
        return value

    @field_validator("tie_rule")
    @classmethod
    def _known_rule(cls, value: str) -> str:
        if value != "lowest-index":
            raise ValueError(f"unsupported tie rule '{value}'")
        return value

class Decision(BaseModel):
    """Detector output: a selected hypothesis or a failure"""
    model_config = ConfigDict(frozen=True)

    outcome: DecisionOutcome
    hypothesis: Optional[Hypothesis] = None
    index: Optional[int] = None  # 0-based position in the hypothesis list

    @model_validator(mode="after")
    def _selected_has_hypothesis(self) -> "Decision":
        if self.outcome == DecisionOutcome.SELECTED and (self.hypothesis is None or self.index is None):
            raise ValueError("a selected decision must carry its hypothesis and index")
        if self.outcome == DecisionOutcome.FAILURE and self.hypothesis is not None:
            raise ValueError("a failure carries no hypothesis")
        return self

    @classmethod
    def selected(cls, hypothesis: Hypothesis, index: int) -> "Decision":
        return cls(outcome=DecisionOutcome.SELECTED, hypothesis=hypothesis, index=index)

    @classmethod
    def failure(cls) -> "Decision":
        return cls(outcome=DecisionOutcome.FAILURE)

    @property
    def is_selected(self) -> bool:
        return self.outcome == DecisionOutcome.SELECTED

# =========== SIMULATION ===========

class TrialPlan(BaseModel):
    """
    Monte Carlo plan: one error-rate estimate per measurement budget.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: AnomalyModel
    design: DesignKind
    m_values: Tuple[int, ...]
    trials: int = Field(ge=1)
    detector: DetectorKind = DetectorKind.LRT
    master_seed: int
    np_config: NPConfig = Field(default_factory=NPConfig)
    schedule: Optional[Schedule] = None  # DesignKind.FIXED
    right_degree: int = Field(default=6, ge=1)  # DesignKind.BIPARTITE
    uneven_left_degree: bool = False
    ensemble: Optional[Ensemble] = None  # DesignKind.ENSEMBLE
    regime: Regime = Regime.RANDOM
    freeze_design: bool = False  # realize randomized designs once per budget instead of once per trial

    @field_validator("m_values")
    @classmethod
    def _increasing(cls, m_values: Tuple[int, ...]) -> Tuple[int, ...]:
        if not m_values:
            raise ValueError("at least one budget is required")
        if m_values[0] < 0:
            raise ValueError("budgets must be non-negative")
        if any(b <= a for a, b in zip(m_values, m_values[1:])):
            raise ValueError(f"budgets must be strictly increasing, got {m_values}")
        return m_values

    @model_validator(mode="after")
    def _design_inputs(self) -> "TrialPlan":
        if self.design == DesignKind.FIXED:
            if self.schedule is None or self.schedule.m < 1:
                raise ValueError("a fixed design needs a non-empty schedule")
            if self.schedule.n != self.model.n:
                raise ValueError(f"schedule has {self.schedule.n} columns, model has n={self.model.n}")
        if self.design == DesignKind.ENSEMBLE:
            if self.ensemble is None:
                raise ValueError("an ensemble design needs an ensemble")
            if self.ensemble.n != self.model.n:
                raise ValueError(f"ensemble has {self.ensemble.n} columns, model has n={self.model.n}")
            if self.regime == Regime.FIXED:
                raise ValueError("ensemble designs run in the random or deterministic regime")
        if self.design == DesignKind.BIPARTITE and self.right_degree > self.model.n:
            raise ValueError(f"right degree {self.right_degree} exceeds n={self.model.n}")
        return self

class ErrorCurvePoint(BaseModel):
    """One budget's error estimate with its Wilson interval"""
    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=0)
    trials: int = Field(ge=1)
    errors: int = Field(ge=0)
    error_rate: float
    ci_low: float
    ci_high: float

    @model_validator(mode="after")
    def _ordered(self) -> "ErrorCurvePoint":
        if self.errors > self.trials:
            raise ValueError("errors cannot exceed trials")
        if not 0.0 <= self.ci_low <= self.error_rate <= self.ci_high <= 1.0:
            raise ValueError(
                f"interval must satisfy 0 <= low <= rate <= high <= 1, "
                f"got ({self.ci_low}, {self.error_rate}, {self.ci_high})"
            )
        return self

class ExponentFit(BaseModel):
    """Least-squares slope of -ln(error rate) against m"""
    model_config = ConfigDict(frozen=True)

    slope: float
    stderr: float
    intercept: float
    points_used: int

# =========== CLI ===========

class Preset(BaseModel):
    """A named experiment: model, budgets and the designs compared"""
    model_config = ConfigDict(frozen=True)

    name: str
    description: str
    model: AnomalyModel
    m_values: Tuple[int, ...]
    designs: Tuple[str, ...]  # separate, bipartite, hamming74 or fixed
    right_degree: int = 6
    uneven_left_degree: bool = False
    vector: Optional[Tuple[float, ...]] = None  # the "fixed" design's measurement

    @model_validator(mode="after")
    def _known_designs(self) -> "Preset":
        unknown = set(self.designs) - {"separate", "bipartite", "hamming74", "fixed"}
        if unknown:
            raise ValueError(f"unknown preset designs: {sorted(unknown)}")
        if "fixed" in self.designs and (self.vector is None or len(self.vector) != self.model.n):
            raise ValueError(f"the fixed design needs a vector of length n={self.model.n}")
        if "hamming74" in self.designs and self.model.n != 7:
            raise ValueError("the hamming74 design needs n=7")
        return self

class RunConfig(BaseModel):
    """
    Settings shared by every command. The seed is mandatory.
    """
    model_config = ConfigDict(frozen=True)

    config_path: Optional[Path] = None
    seed: int
    out_dir: Path
    workers: int = Field(default=1, ge=1)
    trials: Optional[int] = Field(default=None, ge=1)
    show_progress: bool = True

    @field_validator("config_path")
    @classmethod
    def _exists(cls, path: Optional[Path]) -> Optional[Path]:
        if path is not None and not path.is_file():
            raise ValueError(f"model config '{path}' does not exist")
        return path
