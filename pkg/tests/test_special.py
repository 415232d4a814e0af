import math

import mpmath
import numpy as np
import pytest

from bayesauth.special import digamma, log_gamma

EULER = 0.5772156649015329


class TestLogGamma:
    def test_one(self):
        assert log_gamma(1.0) == 0.0

    def test_half(self):
        assert log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), abs=1e-10)

    def test_factorial(self):
        assert log_gamma(10.0) == pytest.approx(math.log(362880), rel=1e-14)

    @pytest.mark.parametrize("x", [1e-8, 1e-3, 0.3, 2.5, 17.2, 1e3, 1e8])
    def test_against_mpmath(self, x):
        assert log_gamma(x) == pytest.approx(float(mpmath.loggamma(x)), rel=1e-13, abs=1e-13)

    def test_vectorised(self):
        out = log_gamma(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out, [0.0, 0.0, math.log(2)], atol=1e-15)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_rejects_nonpositive(self, x):
        with pytest.raises(ValueError):
            log_gamma(x)

    def test_rejects_nonpositive_in_array(self):
        with pytest.raises(ValueError):
            log_gamma(np.array([1.0, 0.0]))


class TestDigamma:
    def test_one(self):
        assert digamma(1.0) == pytest.approx(-EULER, abs=1e-12)

    def test_recurrence(self):
        assert digamma(2.0) == pytest.approx(1 - EULER, abs=1e-12)

    def test_half(self):
        assert digamma(0.5) == pytest.approx(-EULER - 2 * math.log(2), abs=1e-12)

    @pytest.mark.parametrize("x", [1e-6, 0.01, 0.7, 3.3, 50.0, 1e6])
    def test_against_mpmath(self, x):
        assert digamma(x) == pytest.approx(float(mpmath.digamma(x)), rel=1e-12)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            digamma(0.0)

    def test_scalar_returns_float(self):
        assert isinstance(digamma(3.0), float)
