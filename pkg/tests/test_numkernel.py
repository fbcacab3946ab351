import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gammaln

from spghmm.errors import DomainError
from spghmm.numkernel import digamma, kl_dirichlet, kl_gamma, log_gamma, log_sum_exp

mpmath.mp.dps = 40
EULER = 0.57721566490153286061


def kernel_points(n=10_000, seed=0):
    """Log-uniform points over [1e-6, 1e6] plus the integers and half-integers near 0."""
    rng = np.random.default_rng(seed)
    x = 10.0 ** rng.uniform(-6, 6, n - 40)
    fixed = np.concatenate([np.arange(1, 21, dtype=float), np.arange(0.5, 10.5, 1.0), [1e-6, 1e6] * 5])
    return np.concatenate([x, fixed])


def mixed_error(value, ref):
    return np.abs(value - ref) / np.maximum(1.0, np.abs(ref))


class TestDigamma:
    def test_known_values(self):
        assert digamma(1.0) == pytest.approx(-EULER, abs=1e-15)
        assert digamma(0.5) == pytest.approx(-EULER - 2 * math.log(2), abs=1e-15)
        assert digamma(2.0) == pytest.approx(1 - EULER, abs=1e-15)

    def test_against_mpmath(self):
        x = kernel_points(2000, seed=1)
        ref = np.array([float(mpmath.digamma(mpmath.mpf(v))) for v in x])
        assert mixed_error(digamma(x), ref).max() < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=1e-4, max_value=1e4))
    def test_recurrence(self, x):
        # psi(x + 1) = psi(x) + 1/x
        lhs = digamma(x + 1.0)
        rhs = digamma(x) + 1.0 / x
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_shape_and_scalar(self):
        assert np.ndim(digamma(3.0)) == 0
        assert digamma(np.ones((2, 3))).shape == (2, 3)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            digamma(bad)


class TestLogGamma:
    def test_factorials(self):
        n = np.arange(1, 25, dtype=float)
        expect = np.array([math.log(math.factorial(int(k) - 1)) for k in n])
        np.testing.assert_allclose(log_gamma(n), expect, rtol=0, atol=1e-12 * max(1, expect.max()))
        assert abs(log_gamma(1.0)) < 1e-14 and abs(log_gamma(2.0)) < 1e-14

    def test_against_mpmath(self):
        x = kernel_points(2000, seed=2)
        ref = np.array([float(mpmath.loggamma(mpmath.mpf(v))) for v in x])
        assert mixed_error(log_gamma(x), ref).max() < 1e-12

    def test_matches_scipy(self):
        x = kernel_points(5000, seed=3)
        assert mixed_error(log_gamma(x), gammaln(x)).max() < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=1e-3, max_value=1e3))
    def test_recurrence(self, x):
        lhs = log_gamma(x + 1.0)
        rhs = log_gamma(x) + math.log(x)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_domain(self):
        with pytest.raises(DomainError):
            log_gamma(np.array([1.0, 0.0]))


class TestLogSumExp:
    def test_simple(self):
        assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
        assert log_sum_exp([math.log(3), math.log(5)]) == pytest.approx(math.log(8), abs=1e-15)

    def test_no_overflow(self):
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), rel=1e-15)
        assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000 + math.log(2), rel=1e-15)

    def test_neg_inf_entries(self):
        assert log_sum_exp([-np.inf, 0.0]) == 0.0
        assert log_sum_exp([-np.inf, -np.inf]) == -np.inf

    def test_axis(self):
        v = np.log(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        np.testing.assert_allclose(log_sum_exp(v, axis=1), np.log([6.0, 15.0]), atol=1e-15)
        assert log_sum_exp(v, axis=0, keepdims=True).shape == (1, 3)

    def test_empty(self):
        with pytest.raises(DomainError):
            log_sum_exp([])

    @settings(max_examples=300, deadline=None)
    @given(
        st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=20),
        st.floats(min_value=-500, max_value=500),
    )
    def test_shift_invariance(self, v, c):
        v = np.array(v)
        lhs = log_sum_exp(v + c)
        rhs = log_sum_exp(v) + c
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def dirichlet_kl_quadrature(q, p):
    """KL by numerical integration over the 1- or 2-simplex."""
    q = [float(v) for v in q]
    p = [float(v) for v in p]
    norm_q = math.lgamma(sum(q)) - sum(math.lgamma(v) for v in q)
    norm_p = math.lgamma(sum(p)) - sum(math.lgamma(v) for v in p)

    def integrand(*z):
        z = list(z) + [1.0 - sum(z)]
        if z[-1] <= 0:
            return 0.0
        logs = [math.log(v) for v in z]
        lq = norm_q + sum((a - 1) * w for a, w in zip(q, logs))
        lp = norm_p + sum((a - 1) * w for a, w in zip(p, logs))
        return math.exp(lq) * (lq - lp)

    if len(q) == 2:
        return integrate.quad(integrand, 0, 1, limit=200, epsabs=1e-11, epsrel=1e-11)[0]
    return integrate.dblquad(
        lambda x2, x1: integrand(x1, x2), 0, 1, 0, lambda x1: 1.0 - x1, epsabs=1e-9, epsrel=1e-9
    )[0]


def gamma_kl_quadrature(aq, bq, ap, bp):
    from scipy.stats import gamma

    def f(x):
        lq = gamma.logpdf(x, aq, scale=1 / bq)
        return math.exp(lq) * (lq - gamma.logpdf(x, ap, scale=1 / bp))

    return integrate.quad(f, 0, np.inf, limit=400, epsabs=1e-11, epsrel=1e-11)[0]


class TestKL:
    @pytest.mark.parametrize("seed", range(10))
    def test_beta_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        q, p = rng.uniform(1.0, 6.0, 2), rng.uniform(1.0, 6.0, 2)
        assert kl_dirichlet(q, p) == pytest.approx(dirichlet_kl_quadrature(q, p), abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_dirichlet3_quadrature(self, seed):
        rng = np.random.default_rng(100 + seed)
        q, p = rng.uniform(1.5, 5.0, 3), rng.uniform(1.5, 5.0, 3)
        assert kl_dirichlet(q, p) == pytest.approx(dirichlet_kl_quadrature(q, p), abs=1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_gamma_quadrature(self, seed):
        rng = np.random.default_rng(200 + seed)
        aq, ap = rng.uniform(0.5, 8.0, 2)
        bq, bp = rng.uniform(0.2, 5.0, 2)
        assert kl_gamma(aq, bq, ap, bp) == pytest.approx(gamma_kl_quadrature(aq, bq, ap, bp), abs=1e-6)

    def test_zero_at_equality(self):
        a = np.array([[1.0, 2.0, 3.0], [0.5, 0.5, 7.0]])
        np.testing.assert_allclose(kl_dirichlet(a, a), 0.0, atol=1e-13)
        assert kl_gamma(2.0, 3.0, 2.0, 3.0) == pytest.approx(0.0, abs=1e-13)

    def test_rowwise_broadcast(self):
        rng = np.random.default_rng(5)
        q, p = rng.uniform(1, 4, (4, 3)), rng.uniform(1, 4, (4, 3))
        rows = kl_dirichlet(q, p)
        assert rows.shape == (4,)
        np.testing.assert_allclose(rows, [kl_dirichlet(q[i], p[i]) for i in range(4)], atol=0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.05, 50.0), min_size=4, max_size=4))
    def test_gamma_nonnegative(self, v):
        assert kl_gamma(*v) >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            kl_dirichlet(np.ones(3), np.ones(2))
