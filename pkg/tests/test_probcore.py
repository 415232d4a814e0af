import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bayesauth.probcore import (
    CountVector,
    DirichletBelief,
    MultinomialModel,
    PriorOdds,
    log_likelihood,
    log_marginal,
    posterior_update,
    sample_counts,
    sample_dirichlet,
    sample_dirichlet_many,
)


def beta_quadrature_marginal(a, b, c1, c2):
    """ln of E[theta^c1 (1-theta)^c2] under Beta(a, b), by numeric integration."""
    log_b = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    f = lambda t: t ** c1 * (1 - t) ** c2
    val, _ = integrate.quad(f, 0, 1, weight="alg", wvar=(a - 1, b - 1), epsabs=1e-14, epsrel=1e-12)
    return math.log(val) - log_b


class TestTypes:
    def test_model_must_sum_to_one(self):
        with pytest.raises(ValueError):
            MultinomialModel(np.array([0.5, 0.4]))

    def test_model_needs_two_outcomes(self):
        with pytest.raises(ValueError):
            MultinomialModel(np.array([1.0]))

    def test_counts_nonnegative(self):
        with pytest.raises(ValueError):
            CountVector(np.array([1.0, -1.0]))

    def test_belief_positive(self):
        with pytest.raises(ValueError):
            DirichletBelief(np.array([1.0, 0.0]))

    def test_prior_open_interval(self):
        with pytest.raises(ValueError):
            PriorOdds(1.0)
        assert PriorOdds(0.3).p_adversary == pytest.approx(0.7)

    def test_from_sequence(self):
        c = CountVector.from_sequence([2, 1, 1], 3)
        np.testing.assert_array_equal(c.counts, [0, 2, 1])
        assert c.n == 3

    def test_scaled_and_add(self):
        c = CountVector(np.array([4.0, 2.0])).scaled(0.5)
        np.testing.assert_array_equal(c.counts, [2, 1])
        assert not CountVector(np.array([0.5, 0.0])).is_integral()
        np.testing.assert_array_equal((c + c).counts, [4, 2])


class TestLogLikelihood:
    def test_fair_coin(self):
        v = log_likelihood(MultinomialModel(np.array([0.5, 0.5])), CountVector(np.array([1.0, 0.0])))
        assert v == pytest.approx(math.log(0.5))

    def test_product(self):
        v = log_likelihood(MultinomialModel(np.array([0.8, 0.2])), CountVector(np.array([2.0, 1.0])))
        assert v == pytest.approx(2 * math.log(0.8) + math.log(0.2))

    def test_impossible(self):
        v = log_likelihood(MultinomialModel(np.array([1.0, 0.0])), CountVector(np.array([0.0, 1.0])))
        assert v == -np.inf

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            log_likelihood(MultinomialModel(np.array([0.5, 0.5])), CountVector(np.ones(3)))


class TestPosteriorUpdate:
    @pytest.mark.parametrize(
        "phi, c, expected",
        [
            ([1, 1], [3, 2], [4, 3]),
            ([2, 5], [0, 0], [2, 5]),
            ([1, 1], [0.5, 0.5], [1.5, 1.5]),
        ],
    )
    def test_examples(self, phi, c, expected):
        post = posterior_update(DirichletBelief(np.array(phi, float)), CountVector(np.array(c, float)))
        np.testing.assert_allclose(post.phi, expected)


class TestLogMarginal:
    def test_single_draw_uniform(self):
        v = log_marginal(DirichletBelief(np.ones(2)), CountVector(np.array([1.0, 0.0])))
        assert v == pytest.approx(math.log(0.5), abs=1e-14)

    def test_two_draws_uniform(self):
        v = log_marginal(DirichletBelief(np.ones(2)), CountVector(np.array([2.0, 0.0])))
        assert v == pytest.approx(math.log(1 / 3), abs=1e-14)
        assert v == pytest.approx(beta_quadrature_marginal(1, 1, 2, 0), abs=1e-10)

    def test_quadrature_beta21(self):
        v = log_marginal(DirichletBelief(np.array([2.0, 1.0])), CountVector(np.array([1.0, 1.0])))
        assert v == pytest.approx(beta_quadrature_marginal(2, 1, 1, 1), abs=1e-6)
        # closed form: E[t(1-t)] under Beta(2,1) = 2/12
        assert v == pytest.approx(math.log(1 / 6), abs=1e-12)

    def test_empty_is_zero(self):
        assert log_marginal(DirichletBelief(np.array([0.3, 2.0])), CountVector.empty(2)) == 0.0

    def test_concentrated_limit(self):
        # Sum(phi) -> inf: marginal tends to the likelihood under the mean
        phi = 1e9 * np.array([0.3, 0.7])
        c = CountVector(np.array([3.0, 4.0]))
        expected = log_likelihood(MultinomialModel(np.array([0.3, 0.7])), c)
        assert log_marginal(DirichletBelief(phi), c) == pytest.approx(expected, abs=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(0.01, 100), min_size=3, max_size=3),
        st.lists(st.integers(0, 10), min_size=3, max_size=3),
        st.lists(st.integers(0, 10), min_size=3, max_size=3),
    )
    def test_chain_rule(self, phi, a, b):
        phi = np.array(phi)
        a, b = np.array(a, float), np.array(b, float)
        lhs = log_marginal(DirichletBelief(phi), CountVector(a + b))
        rhs = log_marginal(DirichletBelief(phi), CountVector(a)) + log_marginal(
            DirichletBelief(phi + a), CountVector(b)
        )
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestSampling:
    def test_concentrated(self):
        rng = np.random.default_rng(0)
        p = sample_dirichlet(DirichletBelief(np.array([1e6, 1e6])), rng).probs
        np.testing.assert_allclose(p, [0.5, 0.5], atol=0.01)

    @pytest.mark.parametrize("phi, mean", [([1, 1], [0.5, 0.5]), ([9, 1], [0.9, 0.1])])
    def test_mean(self, phi, mean):
        rng = np.random.default_rng(1)
        draws = sample_dirichlet_many(np.array(phi, float), 100_000, rng)
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.01)

    def test_tiny_parameters_stay_normalised(self):
        rng = np.random.default_rng(2)
        draws = sample_dirichlet_many(np.full(10, 1e-3), 1000, rng)
        assert np.all(np.isfinite(draws))
        np.testing.assert_allclose(draws.sum(axis=1), 1.0)

    def test_degenerate_model(self):
        c = sample_counts(MultinomialModel(np.array([1.0, 0.0])), 5, np.random.default_rng(0))
        np.testing.assert_array_equal(c.counts, [5, 0])

    def test_law_of_large_numbers(self):
        c = sample_counts(MultinomialModel(np.array([0.5, 0.5])), 100_000, np.random.default_rng(0))
        assert c.counts[0] / c.n == pytest.approx(0.5, abs=0.01)

    def test_single_draw(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            c = sample_counts(MultinomialModel(np.array([0.2, 0.3, 0.5])), 1, rng)
            assert sorted(c.counts.tolist()) == [0, 0, 1]
            assert len(c.sequence) == 1
