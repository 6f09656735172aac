"""
Exponent checks against closed forms, worked examples and the ordering
between the inner, outer and averaged exponents.
"""

import csv
import math

import numpy as np
import pytest
from scipy import integrate, stats

from chernoff import (
    chernoff_equal_variance, chernoff_gaussian, delta_pair_lower_bound,
    ensemble_from_schedule, format_summary, holder_lower_bound, inner_chernoff,
    kl_gaussian, log_affinity, min_pairwise_exponent, nats_to_bits,
    oc_via_kl_balance, outer_chernoff, row_lambda_half_bound, sample_complexity,
    separate_variance_exponent, tilted_gaussian, write_report_csv,
    zero_mean_chernoff, zero_mean_lambda,
)
from design import hamming74_design, separate_design
from gaussmodels import enumerate_hypotheses
from models import (
    AnomalyModel, ConfigError, DegenerateModelError, Ensemble, Gaussian1D,
    Hypothesis, IndistinguishableHypotheses, MeasurementVector, Regime,
)


def normal(mean, variance):
    return Gaussian1D(mean=mean, variance=variance)


def alpha(b):
    return (-(b - 1) + b * math.log(b)) / ((b - 1) * math.log(b))


# =============================================================================
# Affinities and the scalar search
# =============================================================================

class TestLogAffinity:

    def test_endpoints_vanish(self):
        g1, g2 = normal(1.0, 2.0), normal(-3.0, 0.5)
        assert log_affinity(g1, g2, 0.0) == 0.0
        assert log_affinity(g1, g2, 1.0) == 0.0

    def test_matches_numerical_integral(self):
        g1, g2, lam = normal(0.3, 1.7), normal(-1.1, 0.6), 0.35
        x = np.linspace(-30, 30, 200001)
        integrand = stats.norm.pdf(x, g1.mean, math.sqrt(g1.variance)) ** lam * \
            stats.norm.pdf(x, g2.mean, math.sqrt(g2.variance)) ** (1 - lam)
        assert log_affinity(g1, g2, lam) == pytest.approx(math.log(integrate.trapezoid(integrand, x)), abs=1e-8)

    def test_identical_laws(self):
        g = normal(2.0, 3.0)
        assert log_affinity(g, g, 0.4) == pytest.approx(0.0, abs=1e-15)
        value, lam = chernoff_gaussian(g, g)
        assert value == 0.0
        assert lam == 0.5

    def test_lambda_out_of_range(self):
        with pytest.raises(ConfigError):
            log_affinity(normal(0, 1), normal(1, 1), 1.5)

    def test_degenerate_law(self):
        with pytest.raises(DegenerateModelError):
            log_affinity(Gaussian1D.dirac(0.0), normal(1, 1), 0.5)


class TestChernoffGaussian:

    def test_equal_variance_closed_form(self):
        value, lam = chernoff_gaussian(normal(0.0, 1.0), normal(2.0, 1.0))
        assert value == pytest.approx(0.5, abs=1e-12)
        assert lam == pytest.approx(0.5, abs=1e-8)

    def test_variance_pair(self):
        # lambda is carried by the first law; the wider law takes alpha(4)
        value, lam = chernoff_gaussian(normal(0.0, 1.0), normal(0.0, 4.0))
        assert value == pytest.approx(0.1170, abs=1e-4)
        assert lam == pytest.approx(1 - alpha(4.0), abs=1e-6)
        value_swapped, lam_swapped = chernoff_gaussian(normal(0.0, 4.0), normal(0.0, 1.0))
        assert value_swapped == pytest.approx(value, abs=1e-12)
        assert lam_swapped == pytest.approx(alpha(4.0), abs=1e-6)
        assert lam_swapped == pytest.approx(0.612, abs=1e-3)

    def test_far_apart(self):
        value, _ = chernoff_gaussian(normal(0.0, 1.0), normal(1e3, 1.0))
        assert value == pytest.approx(1e6 / 8, rel=1e-9)

    def test_random_pairs_against_closed_forms(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a, b = rng.normal(0, 3, size=2)
            v = rng.uniform(0.1, 10)
            value, _ = chernoff_gaussian(normal(a, v), normal(b, v))
            assert value == pytest.approx(float(chernoff_equal_variance(a, b, v)), abs=1e-9)
            ratio = rng.uniform(1.01, 50)
            value, _ = chernoff_gaussian(normal(0.0, ratio), normal(0.0, 1.0))
            assert value == pytest.approx(zero_mean_chernoff(ratio), abs=1e-9)

    @pytest.mark.parametrize("b", [1.5, 2.0, 4.0, 10.0, 100.0])
    def test_lambda_matches_alpha(self, b):
        _, lam = chernoff_gaussian(normal(0.0, b), normal(0.0, 1.0))
        assert lam == pytest.approx(alpha(b), abs=1e-6)
        assert zero_mean_lambda(b) == pytest.approx(alpha(b), abs=1e-15)

    def test_zero_mean_limit(self):
        assert zero_mean_lambda(1.0) == 0.5
        assert zero_mean_chernoff(1.0) == 0.0

    def test_zero_mean_increases_with_ratio(self):
        values = np.array([zero_mean_chernoff(b) for b in np.geomspace(1.01, 1e4, 200)])
        assert values[0] > 0.0
        assert np.all(np.diff(values) > 0.0)

    def test_tilted_law_balances_divergences(self):
        g1, g2 = normal(0.0, 1.0), normal(1.0, 4.0)
        value, lam = chernoff_gaussian(g1, g2)
        tilted = tilted_gaussian(g1, g2, lam)
        assert kl_gaussian(tilted, g1) == pytest.approx(value, abs=1e-8)
        assert kl_gaussian(tilted, g2) == pytest.approx(value, abs=1e-8)

    def test_kl_closed_form(self):
        assert kl_gaussian(normal(0, 1), normal(1, 1)) == pytest.approx(0.5)
        assert kl_gaussian(normal(0, 1), normal(0, 1)) == 0.0


# =============================================================================
# Closed-form bounds
# =============================================================================

class TestBounds:

    def test_example4_separate_exponent(self):
        b = 1e6
        assert separate_variance_exponent(b, 7) == pytest.approx(0.8878, abs=1e-4)

    def test_example4_hamming_bound_exceeds_separate(self):
        sigma2 = 1e6
        bound = row_lambda_half_bound(sigma2 + 3, 4.0, 3)
        assert bound == pytest.approx(0.9202, abs=1e-4)
        assert bound > separate_variance_exponent(sigma2, 7)

    def test_asymptotic_slopes(self):
        sigma2 = np.logspace(4, 8, 9)
        separate = [separate_variance_exponent(s, 7) for s in sigma2]
        hamming = [row_lambda_half_bound(s + 3, 4.0, 3) for s in sigma2]
        assert stats.linregress(np.log(sigma2), separate).slope == pytest.approx(1 / 14, rel=0.05)
        assert stats.linregress(np.log(sigma2), hamming).slope == pytest.approx(1 / 12, rel=0.05)

    def test_delta_pair_bound(self):
        assert delta_pair_lower_bound(1.0, 1.0) == pytest.approx(0.0)
        assert delta_pair_lower_bound(1.0, 0.0) == 0.0
        assert delta_pair_lower_bound(1.0, 3.0) == pytest.approx(0.5 * math.log(10 / 6))

    def test_nats_to_bits(self):
        assert nats_to_bits(math.log(2)) == pytest.approx(1.0)


# =============================================================================
# Designs
# =============================================================================

class TestDesignExponents:

    def test_example1_mixing_doubles_exponent(self):
        a_mean, b_mean, sigma2 = 1.7, -0.4, 2.3
        model = AnomalyModel(n=2, k=1, common=normal(b_mean, sigma2), anomalous=normal(a_mean, sigma2))
        separate = (a_mean - b_mean) ** 2 / (8 * sigma2)

        mixed = min_pairwise_exponent(MeasurementVector(coefficients=[1.0, -1.0]), model)
        assert mixed.regime == Regime.FIXED
        assert mixed.min_exponent == pytest.approx(2 * separate, abs=1e-9)

        observed = min_pairwise_exponent(separate_design(2, 2, seed=0), model)
        assert observed.min_exponent == pytest.approx(separate, abs=1e-9)

    def test_example4_hamming_beats_separate(self, example4_model):
        hamming = min_pairwise_exponent(hamming74_design(), example4_model)
        separate = min_pairwise_exponent(separate_design(7, 7, seed=0), example4_model)
        assert separate.min_exponent == pytest.approx(separate_variance_exponent(1e6, 7), abs=1e-9)
        assert hamming.min_exponent >= row_lambda_half_bound(1e6 + 3, 4.0, 3) - 1e-9
        assert hamming.min_exponent > separate.min_exponent

    def test_example4_argmin_pair_shares_a_row(self, example4_model):
        schedule = hamming74_design()
        report = min_pairwise_exponent(schedule, example4_model)
        i, j = report.argmin_pair
        columns = schedule.rows[:, [report.hypotheses[i].support[0], report.hypotheses[j].support[0]]]
        assert np.any(columns.sum(axis=1) == 2)

    def test_report_shape_and_symmetry(self, small_model):
        report = min_pairwise_exponent(separate_design(4, 8, seed=1), small_model, regime=Regime.RANDOM)
        assert len(report.hypotheses) == 6
        assert np.allclose(report.pairwise, report.pairwise.T)
        assert np.allclose(report.lambdas + report.lambdas.T, 1.0)
        assert report.min_exponent == pytest.approx(report.pairwise[report.argmin_pair])

    def test_indistinguishable_pair(self, example1_model):
        report = min_pairwise_exponent(MeasurementVector(coefficients=[1.0, 1.0]), example1_model)
        assert report.min_exponent == 0.0
        with pytest.raises(IndistinguishableHypotheses):
            sample_complexity(report.min_exponent, 2, 1, 0.1)

    def test_fixed_regime_needs_a_vector(self, example1_model):
        with pytest.raises(ConfigError):
            min_pairwise_exponent(separate_design(2, 2, seed=0), example1_model, regime=Regime.FIXED)

    def test_summary_and_csv(self, tmp_path, example4_model):
        report = min_pairwise_exponent(hamming74_design(), example4_model)
        i, j = report.argmin_pair
        assert format_summary(report) == f"E={report.min_exponent!r} pair=({i + 1},{j + 1})"
        path = write_report_csv(report, tmp_path / "exponent.csv")
        with path.open() as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["i", "j", "exponent_nats", "lambda_star"]
        assert len(rows) == 1 + 21

    def test_sample_complexity(self):
        assert sample_complexity(0.5, 10, 1, 0.01) == math.ceil((math.log(10) + math.log(100)) / 0.5)


# =============================================================================
# Conditional exponents over finite ensembles
# =============================================================================

def _random_instances(count, seed):
    rng = np.random.default_rng(seed)
    model = AnomalyModel(n=4, k=1, common=normal(0.0, 1.0), anomalous=normal(1.5, 2.5))
    hypotheses = enumerate_hypotheses(4, 1)
    for _ in range(count):
        size = int(rng.integers(1, 5))
        ens = Ensemble(atoms=rng.normal(size=(size, 4)), weights=rng.dirichlet(np.ones(size)))
        i, j = rng.choice(4, size=2, replace=False)
        yield ens, model, hypotheses[i], hypotheses[j]


class TestConditionalExponents:

    def test_kl_balance_equals_outer(self):
        for ens, model, hi, hj in _random_instances(200, seed=11):
            _, via_kl = oc_via_kl_balance(ens, model, hi, hj)
            outer, _ = outer_chernoff(ens, model, hi, hj)
            assert via_kl == pytest.approx(outer, abs=1e-8)

    def test_ordering_chain(self):
        for ens, model, hi, hj in _random_instances(200, seed=12):
            holder = holder_lower_bound(ens, model, hi, hj)
            inner, _ = inner_chernoff(ens, model, hi, hj)
            outer, _ = outer_chernoff(ens, model, hi, hj)
            averaged = 0.0
            for atom, weight in zip(ens.atoms, ens.weights):
                single = Ensemble(atoms=atom[np.newaxis, :], weights=np.ones(1))
                averaged += weight * outer_chernoff(single, model, hi, hj)[0]
            assert holder <= inner + 1e-9
            assert inner <= outer + 1e-9
            assert outer <= averaged + 1e-9

    def test_single_atom_collapses(self, small_model):
        ens = Ensemble(atoms=[[1.0, -1.0, 0.5, 2.0]], weights=[1.0])
        hi, hj = Hypothesis(support=(0, 1)), Hypothesis(support=(2, 3))
        inner, _ = inner_chernoff(ens, small_model, hi, hj)
        outer, _ = outer_chernoff(ens, small_model, hi, hj)
        assert inner == pytest.approx(outer, abs=1e-12)

    @pytest.mark.parametrize("w", [0.1, 0.3, 0.8])
    def test_uninformative_atom_dilutes_inner(self, w):
        model = AnomalyModel(n=3, k=1, common=normal(0.0, 1.0), anomalous=normal(1.0, 2.0))
        hi, hj = Hypothesis(support=(0,)), Hypothesis(support=(1,))
        # the second atom only sees variable 3, so both hypotheses give it N(0,1)
        ens = Ensemble(atoms=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], weights=[w, 1.0 - w])
        single, _ = chernoff_gaussian(normal(1.0, 2.0), normal(0.0, 1.0))
        expected = -math.log(1.0 - w + w * math.exp(-single))
        inner, _ = inner_chernoff(ens, model, hi, hj)
        assert inner == pytest.approx(expected, abs=1e-8)
        assert holder_lower_bound(ens, model, hi, hj) == pytest.approx(expected, abs=1e-8)

    def test_schedule_ensemble_weights(self):
        schedule = separate_design(3, 7, seed=5)
        ens = ensemble_from_schedule(schedule)
        assert ens.size == 3
        assert sorted(ens.weights * 7) == pytest.approx([2.0, 2.0, 3.0])

    def test_degenerate_atom_is_named(self):
        model = AnomalyModel(n=3, k=1, common=Gaussian1D.dirac(0.0), anomalous=normal(0.0, 1.0))
        ens = Ensemble(atoms=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], weights=[0.5, 0.5])
        with pytest.raises(DegenerateModelError, match="atom"):
            outer_chernoff(ens, model, Hypothesis(support=(0,)), Hypothesis(support=(2,)))
