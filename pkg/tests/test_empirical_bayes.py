import numpy as np
import pytest
from scipy.special import digamma

from bayesauth.empirical_bayes import (
    PopulationData,
    _DigammaSums,
    fit_dirichlet,
    initialize_phi,
    population_log_likelihood,
    user_posterior,
)
from bayesauth.probcore import CountVector, DirichletBelief


def polya_population(phi, users, draws, seed):
    rng = np.random.default_rng(seed)
    models = rng.dirichlet(phi, size=users)
    return PopulationData(rng.multinomial(draws, models))


class TestPopulationData:
    def test_drops_empty_users(self):
        with pytest.warns(UserWarning):
            data = PopulationData(np.array([[1, 0], [0, 0], [0, 1]]))
        assert data.n_users == 2

    def test_all_empty_raises(self):
        with pytest.raises(ValueError, match="zero counts"):
            PopulationData(np.zeros((3, 2)))

    def test_needs_two_users(self):
        with pytest.raises(ValueError):
            PopulationData(np.array([[1, 2]]))

    def test_from_vectors(self):
        data = PopulationData.from_vectors([CountVector(np.array([1.0, 2.0])), CountVector(np.array([0.0, 1.0]))])
        assert data.degree == 2
        assert len(data.users()) == 2


class TestInitialize:
    def test_symmetric_pool(self):
        phi = initialize_phi(PopulationData(np.array([[1, 0], [0, 1]]))).phi
        np.testing.assert_allclose(phi, [1, 1])

    def test_proportional(self):
        phi = initialize_phi(PopulationData(np.array([[9, 1], [9, 1]]))).phi
        np.testing.assert_allclose(phi, [1.8, 0.2])

    def test_floor(self):
        phi = initialize_phi(PopulationData(np.array([[3, 0], [5, 0]]))).phi
        assert phi[1] > 0
        # floored at 1e-3/K, then rescaled so the total is K
        assert phi[1] == pytest.approx(2 * 5e-4 / (1 + 5e-4))


class TestFixedPoint:
    def test_single_iteration_by_hand(self):
        data = PopulationData(np.array([[2, 0], [0, 2]]))
        # numerator: Psi(3) - Psi(1) = 1 + 1/2; denominator: 2 (Psi(4) - Psi(2)) = 2 (1/2 + 1/3)
        num = digamma(3.0) - digamma(1.0)
        den = 2 * (digamma(4.0) - digamma(2.0))
        fit = fit_dirichlet(data, max_iterations=1, init=DirichletBelief(np.ones(2)))
        np.testing.assert_allclose(fit.belief.phi, [num / den] * 2, rtol=1e-14)
        assert num / den == pytest.approx(0.9)
        assert not fit.converged

    def test_recovery(self):
        data = polya_population(np.array([3.0, 7.0]), 2000, 50, seed=0)
        fit = fit_dirichlet(data)
        assert fit.converged
        np.testing.assert_allclose(fit.belief.phi, [3, 7], rtol=0.15)

    def test_identical_users_concentrate(self):
        # the MLE is at infinite concentration; the fixed point creeps toward it
        data = PopulationData(np.tile([5000, 5000], (50, 1)))
        fit = fit_dirichlet(data, max_iterations=10_000)
        phi = fit.belief.phi
        assert phi[0] == pytest.approx(phi[1], rel=1e-6)
        assert phi.sum() > 1e3

    def test_likelihood_monotone(self):
        data = polya_population(np.array([0.5, 2.0, 1.0, 0.1]), 300, 20, seed=4)
        fit = fit_dirichlet(data, trace=True)
        ll = np.array(fit.log_likelihood_trace)
        assert np.all(np.diff(ll) >= -1e-8 * np.abs(ll[:-1]))

    def test_permutation_invariance(self):
        data = polya_population(np.array([1.0, 2.0, 3.0]), 200, 15, seed=5)
        perm = np.random.default_rng(0).permutation(data.n_users)
        a = fit_dirichlet(data).belief.phi
        b = fit_dirichlet(PopulationData(data.counts[perm])).belief.phi
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_histogram_matches_digamma(self):
        data = polya_population(np.array([0.2, 1.0, 4.0]), 100, 30, seed=6)
        phi = np.array([0.7, 1.3, 2.2])
        h = _DigammaSums(data.counts, "histogram")
        d = _DigammaSums(data.counts, "digamma")
        np.testing.assert_allclose(h.numerator(phi), d.numerator(phi), rtol=1e-10)
        assert h.denominator(phi.sum()) == pytest.approx(d.denominator(phi.sum()), rel=1e-10)

    def test_fractional_counts_use_digamma(self):
        data = PopulationData(np.array([[0.5, 1.5], [1.0, 0.25], [2.0, 2.0]]))
        assert _DigammaSums(data.counts).method == "digamma"
        with pytest.raises(ValueError):
            _DigammaSums(data.counts, "histogram")

    def test_non_convergence_reported(self, caplog):
        data = polya_population(np.array([1.0, 1.0]), 50, 10, seed=7)
        fit = fit_dirichlet(data, tolerance=1e-15, max_iterations=2)
        assert not fit.converged
        assert fit.iterations == 2
        assert "stopped" in caplog.text

    def test_stationary_point_beats_neighbours(self):
        data = polya_population(np.array([2.0, 5.0]), 500, 30, seed=8)
        phi = fit_dirichlet(data).belief.phi
        best = population_log_likelihood(data, phi)
        for d in ([1.01, 1], [0.99, 1], [1, 1.01], [1, 0.99]):
            assert population_log_likelihood(data, phi * np.array(d)) < best

    def test_invalid_arguments(self):
        data = PopulationData(np.array([[1, 0], [0, 1]]))
        with pytest.raises(ValueError):
            fit_dirichlet(data, tolerance=0)
        with pytest.raises(ValueError):
            fit_dirichlet(data, max_iterations=0)


class TestUserPosterior:
    @pytest.mark.parametrize(
        "prior, x, expected",
        [([1, 1], [4, 1], [5, 2]), ([0.3, 2.0], [0, 0], [0.3, 2.0]), ([0.5, 0.5], [10, 0], [10.5, 0.5])],
    )
    def test_examples(self, prior, x, expected):
        post = user_posterior(DirichletBelief(np.array(prior, float)), CountVector(np.array(x, float)))
        np.testing.assert_allclose(post.phi, expected)
