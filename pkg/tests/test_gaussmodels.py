import math

import numpy as np
import pytest
from pydantic import ValidationError

from gaussmodels import (
    enumerate_hypotheses, format_model, hypothesis_index, hypothesis_law,
    hypothesis_parameters, load_model, log_density, model_from_mapping,
    output_distribution, parse_distribution,
)
from models import (
    AnomalyModel, ConfigError, DegenerateModelError, Gaussian1D, Hypothesis,
    HypothesisSpaceTooLarge, IndistinguishableHypotheses,
)


# =============================================================================
# Hypothesis enumeration
# =============================================================================

class TestEnumerateHypotheses:

    def test_lexicographic_order(self):
        supports = [h.support for h in enumerate_hypotheses(4, 2)]
        assert supports == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

    def test_single_anomaly_count(self):
        hypotheses = enumerate_hypotheses(100, 1)
        assert len(hypotheses) == 100
        assert hypotheses[0].label() == "{1}"
        assert hypotheses[-1].label() == "{100}"

    def test_cap_exceeded(self):
        with pytest.raises(HypothesisSpaceTooLarge, match=r"C\(50,25\)"):
            enumerate_hypotheses(50, 25)

    @pytest.mark.parametrize("n", range(2, 13))
    def test_count_is_binomial(self, n):
        for k in range(1, n):
            hypotheses = enumerate_hypotheses(n, k)
            assert len(hypotheses) == math.comb(n, k)
            assert len({h.support for h in hypotheses}) == len(hypotheses)

    def test_explicit_cap(self):
        with pytest.raises(HypothesisSpaceTooLarge):
            enumerate_hypotheses(10, 3, cap=100)
        assert len(enumerate_hypotheses(10, 3, cap=120)) == 120

    @pytest.mark.parametrize("n, k", [(3, 0), (3, 3), (2, 5)])
    def test_invalid_sizes(self, n, k):
        with pytest.raises(ConfigError):
            enumerate_hypotheses(n, k)

    def test_hypothesis_index(self):
        hypotheses = enumerate_hypotheses(5, 2)
        assert hypothesis_index(hypotheses, Hypothesis(support=(1, 3))) == 5
        with pytest.raises(ConfigError):
            hypothesis_index(hypotheses, Hypothesis(support=(1, 7)))

    def test_hypothesis_rejects_unsorted_support(self):
        with pytest.raises(ValidationError):
            Hypothesis(support=(2, 1))


# =============================================================================
# Output laws
# =============================================================================

class TestOutputDistribution:

    def test_example1_difference_measurement(self):
        model = AnomalyModel(
            n=2, k=1,
            common=Gaussian1D(mean=2.0, variance=3.0),
            anomalous=Gaussian1D(mean=5.0, variance=3.0),
        )
        g = output_distribution(model, Hypothesis(support=(0,)), [1.0, -1.0])
        assert g.mean == pytest.approx(3.0)
        assert g.variance == pytest.approx(6.0)

    def test_unit_vector_on_anomaly(self, fig1_model):
        g = output_distribution(fig1_model, Hypothesis(support=(4,)), np.eye(100)[4])
        assert g == Gaussian1D(mean=0.0, variance=100.0)

    def test_dirac_common_law_is_degenerate_off_support(self):
        model = AnomalyModel(n=3, k=1, common=Gaussian1D.dirac(0.0), anomalous=Gaussian1D(mean=0.0, variance=1.0))
        g = output_distribution(model, Hypothesis(support=(0,)), [0.0, 1.0, 1.0])
        assert g.is_degenerate
        with pytest.raises(DegenerateModelError):
            log_density(g, 0.0)

    def test_length_mismatch(self, example1_model):
        with pytest.raises(ConfigError):
            output_distribution(example1_model, Hypothesis(support=(0,)), [1.0, 1.0, 1.0])

    def test_support_beyond_n(self, example1_model):
        with pytest.raises(ConfigError, match="beyond n=2"):
            output_distribution(example1_model, Hypothesis(support=(5,)), [1.0, -1.0])
        with pytest.raises(ConfigError, match="k=1"):
            output_distribution(example1_model, Hypothesis(support=(0, 1)), [1.0, -1.0])

    @pytest.mark.parametrize("c", [-3.0, 0.5, 7.0])
    def test_scaling(self, small_model, c):
        h = Hypothesis(support=(1, 3))
        a = np.array([0.3, -1.2, 2.0, 0.7])
        base = output_distribution(small_model, h, a)
        scaled = output_distribution(small_model, h, c * a)
        assert scaled.mean == pytest.approx(c * base.mean)
        assert scaled.variance == pytest.approx(c ** 2 * base.variance)

    def test_random_triples_match_joint_law(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(2, 9))
            k = int(rng.integers(1, n))
            model = AnomalyModel(
                n=n, k=k,
                common=Gaussian1D(mean=float(rng.normal()), variance=float(rng.uniform(0.1, 5.0))),
                anomalous=Gaussian1D(mean=float(rng.normal(2.0)), variance=float(rng.uniform(0.1, 5.0))),
            )
            h = Hypothesis(support=tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False))))
            a = rng.normal(size=n)
            law = hypothesis_law(model, h)
            g = output_distribution(model, h, a)
            assert g.mean == pytest.approx(float(a @ law.mean), rel=1e-12, abs=1e-12)
            assert g.variance == pytest.approx(float(a @ law.covariance @ a), rel=1e-12)

    def test_parameters_agree_with_joint_law(self, small_model):
        hypotheses = enumerate_hypotheses(small_model.n, small_model.k)
        means, variances = hypothesis_parameters(small_model, hypotheses)
        for row, h in enumerate(hypotheses):
            law = hypothesis_law(small_model, h)
            assert np.array_equal(means[row], law.mean)
            assert np.array_equal(variances[row], np.diag(law.covariance))

    def test_log_density_standard_normal(self):
        assert log_density(Gaussian1D(mean=0.0, variance=1.0), 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi))


# =============================================================================
# Model files
# =============================================================================

class TestModelFiles:

    @pytest.mark.parametrize("literal, expected", [
        ("normal(8,1)", Gaussian1D(mean=8.0, variance=1.0)),
        ("  normal( 0 , 1e6 ) ", Gaussian1D(mean=0.0, variance=1e6)),
        ("dirac(-2.5)", Gaussian1D(mean=-2.5, variance=0.0)),
    ])
    def test_parse_distribution(self, literal, expected):
        assert parse_distribution(literal) == expected

    @pytest.mark.parametrize("literal", ["normal(1)", "gauss(0,1)", "normal(0,-1)", "normal(a,1)"])
    def test_parse_distribution_rejects(self, literal):
        with pytest.raises(ConfigError):
            parse_distribution(literal)

    def test_load_model(self, tmp_path):
        path = tmp_path / "fig2.env"
        path.write_text("# second experiment\nn=102\nk=1\ncommon=normal(8,1)\nanomalous=normal(0,1)\n")
        model = load_model(path)
        assert model.n == 102 and model.k == 1
        assert model.common == Gaussian1D(mean=8.0, variance=1.0)

    def test_format_model_reads_back(self, tmp_path, example4_model):
        path = tmp_path / "model.env"
        path.write_text(format_model(example4_model))
        assert load_model(path) == example4_model

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown model keys: sigma"):
            model_from_mapping({"n": "3", "k": "1", "common": "normal(0,1)", "anomalous": "normal(1,1)", "sigma": "2"})

    def test_missing_key(self):
        with pytest.raises(ConfigError, match="anomalous"):
            model_from_mapping({"n": "3", "k": "1", "common": "normal(0,1)"})

    def test_identical_laws(self):
        with pytest.raises(IndistinguishableHypotheses):
            model_from_mapping({"n": "3", "k": "1", "common": "normal(0,1)", "anomalous": "normal(0,1)"})

    def test_k_not_below_n(self):
        with pytest.raises(ConfigError):
            model_from_mapping({"n": "3", "k": "3", "common": "normal(0,1)", "anomalous": "normal(1,1)"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            load_model(tmp_path / "nope.env")
