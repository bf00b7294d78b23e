import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import integrate, special, stats

from deal_al.distributions import (
    BetaParams,
    DiscreteSecondOrder,
    DomainError,
    GammaParams,
    beta_mean,
    discrete_expected_min,
    expected_min,
    reg_inc_beta,
    sample_gamma,
)

shape = hst.floats(min_value=0.05, max_value=200.0, allow_nan=False)
unit = hst.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def quad_expected_min(a, b):
    """E[min(Q, 1-Q)] by adaptive quadrature of the Beta density, split at 1/2."""
    f = lambda q: min(q, 1.0 - q) * stats.beta.pdf(q, a, b)
    lo, _ = integrate.quad(f, 0.0, 0.5, epsabs=1e-13, epsrel=1e-12, limit=200)
    hi, _ = integrate.quad(f, 0.5, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return lo + hi


class TestBetaParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            BetaParams(0.0, 1.0)
        with pytest.raises(DomainError):
            BetaParams(1.0, -2.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            BetaParams(np.inf, 1.0)
        with pytest.raises(DomainError):
            BetaParams(np.array([1.0, np.nan]), np.array([1.0, 1.0]))

    def test_array_valued(self):
        p = BetaParams(np.array([1.0, 2.0]), np.array([1.0, 6.0]))
        np.testing.assert_allclose(beta_mean(p), [0.5, 0.25])

    def test_gamma_params_validated(self):
        with pytest.raises(DomainError):
            GammaParams(0.0, 1.0)
        with pytest.raises(DomainError):
            GammaParams(1.0, 0.0)


class TestRegIncBeta:
    @pytest.mark.parametrize("a", [0.5, 1.0, 3.7, 40.0, 1500.0, 4e4])
    def test_symmetric_half(self, a):
        assert reg_inc_beta(0.5, BetaParams(a, a)) == pytest.approx(0.5, abs=1e-12)

    def test_uniform(self):
        assert reg_inc_beta(0.3, BetaParams(1.0, 1.0)) == pytest.approx(0.3, abs=1e-15)

    def test_arcsine_like_value(self):
        # closed form 1/2 - 1/pi
        v = reg_inc_beta(0.5, BetaParams(1.5, 0.5))
        assert v == pytest.approx(0.5 - 1.0 / np.pi, abs=1e-12)
        assert v == pytest.approx(0.18169, abs=1e-5)

    def test_endpoints(self):
        p = BetaParams(2.0, 3.0)
        assert reg_inc_beta(0.0, p) == 0.0
        assert reg_inc_beta(1.0, p) == 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            reg_inc_beta(-0.1, BetaParams(1.0, 1.0))
        with pytest.raises(DomainError):
            reg_inc_beta(1.5, BetaParams(1.0, 1.0))
        with pytest.raises(DomainError):
            reg_inc_beta(np.nan, BetaParams(1.0, 1.0))

    def test_against_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            a, b = np.exp(rng.uniform(np.log(0.5), np.log(50.0), 2))
            x = rng.uniform()
            ref, _ = integrate.quad(lambda q: stats.beta.pdf(q, a, b), 0.0, x,
                                    epsabs=1e-14, epsrel=1e-13, limit=200)
            assert reg_inc_beta(x, BetaParams(a, b)) == pytest.approx(ref, abs=1e-12)

    def test_against_scipy_large_shapes(self):
        rng = np.random.default_rng(4)
        a = np.exp(rng.uniform(np.log(0.05), np.log(5000.0), 500))
        b = np.exp(rng.uniform(np.log(0.05), np.log(5000.0), 500))
        x = rng.uniform(size=500)
        np.testing.assert_allclose(reg_inc_beta(x, BetaParams(a, b)), special.betainc(a, b, x),
                                   atol=1e-12, rtol=0)

    def test_vectorized_matches_scalar(self):
        x = np.array([0.1, 0.5, 0.9])
        a = np.array([0.5, 2.0, 30.0])
        b = np.array([3.0, 2.0, 0.7])
        vec = reg_inc_beta(x, BetaParams(a, b))
        for i in range(3):
            one = reg_inc_beta(float(x[i]), BetaParams(float(a[i]), float(b[i])))
            assert isinstance(one, float)
            assert vec[i] == pytest.approx(one, rel=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(x=unit, a=shape, b=shape)
    def test_reflection(self, x, a, b):
        # y and 1 - y are exact complements in floating point
        y = 1.0 - x
        x = 1.0 - y
        s = reg_inc_beta(x, BetaParams(a, b)) + reg_inc_beta(y, BetaParams(b, a))
        assert s == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(x=unit, b=shape)
    def test_first_shape_one(self, x, b):
        # I_x(1, b) = 1 - (1 - x)^b
        expected = -np.expm1(b * np.log1p(-x)) if x < 1 else 1.0
        assert reg_inc_beta(x, BetaParams(1.0, b)) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(x1=unit, x2=unit, a=shape, b=shape)
    def test_monotone(self, x1, x2, a, b):
        lo, hi = sorted((x1, x2))
        p = BetaParams(a, b)
        assert reg_inc_beta(lo, p) <= reg_inc_beta(hi, p) + 1e-15


class TestBetaMean:
    @pytest.mark.parametrize("a,b,m", [(1, 1, 0.5), (2, 6, 0.25), (0.5, 4.5, 0.1)])
    def test_examples(self, a, b, m):
        assert beta_mean(BetaParams(a, b)) == pytest.approx(m, abs=1e-15)


class TestExpectedMin:
    def test_uniform(self):
        assert expected_min(BetaParams(1.0, 1.0)) == pytest.approx(0.25, abs=1e-14)

    def test_arcsine(self):
        assert expected_min(BetaParams(0.5, 0.5)) == pytest.approx(0.5 - 1.0 / np.pi, abs=1e-12)

    def test_grid_against_quadrature(self):
        g = np.geomspace(0.5, 50.0, 20)
        A, B = np.meshgrid(g, g)
        got = expected_min(BetaParams(A, B))
        ref = np.vectorize(quad_expected_min)(A, B)
        np.testing.assert_allclose(got, ref, atol=1e-8, rtol=0)

    @settings(max_examples=300, deadline=None)
    @given(a=shape, b=shape)
    def test_bounds_and_jensen(self, a, b):
        p = BetaParams(a, b)
        e = expected_min(p)
        m = beta_mean(p)
        assert 0.0 <= e <= 0.5
        assert e <= min(m, 1.0 - m) + 1e-15

    @settings(max_examples=100, deadline=None)
    @given(a=shape, b=shape)
    def test_swap_symmetry(self, a, b):
        assert expected_min(BetaParams(a, b)) == pytest.approx(
            expected_min(BetaParams(b, a)), abs=1e-12)

    def test_concentrates_on_point_risk(self):
        # a very peaked Beta behaves like a point mass at its mean
        p = BetaParams(3e5, 1e5)
        assert expected_min(p) == pytest.approx(0.25, abs=1e-3)


class TestDiscrete:
    def test_split_mass_has_no_expected_risk(self):
        d = DiscreteSecondOrder([(0.0, 0.5), (1.0, 0.5)])
        assert d.mean() == 0.5
        assert discrete_expected_min(d) == 0.0

    def test_dirac_at_half(self):
        assert discrete_expected_min(DiscreteSecondOrder([(0.5, 1.0)])) == 0.5

    def test_two_atoms(self):
        d = DiscreteSecondOrder([(0.2, 0.5), (0.8, 0.5)])
        assert discrete_expected_min(d) == pytest.approx(0.2, abs=1e-15)

    def test_validation(self):
        with pytest.raises(DomainError):
            DiscreteSecondOrder([])
        with pytest.raises(DomainError):
            DiscreteSecondOrder([(1.2, 1.0)])
        with pytest.raises(DomainError):
            DiscreteSecondOrder([(0.2, 0.4), (0.3, 0.4)])
        with pytest.raises(DomainError):
            DiscreteSecondOrder([(0.2, -0.5), (0.3, 1.5)])


class TestSampleGamma:
    def test_mean(self):
        x = sample_gamma(GammaParams(1.0, 1.0), 0, 10**6)
        assert x.shape == (10**6,)
        assert np.all(x >= 0)
        assert abs(x.mean() - 1.0) < 0.01

    def test_variance(self):
        x = sample_gamma(GammaParams(3.0, 2.0), 1, 10**6)
        assert abs(x.var() / 12.0 - 1.0) < 0.02

    def test_deterministic(self):
        g = GammaParams(2.5, 0.3)
        np.testing.assert_array_equal(sample_gamma(g, 7, 100), sample_gamma(g, 7, 100))
        assert not np.array_equal(sample_gamma(g, 7, 100), sample_gamma(g, 8, 100))

    def test_ratio_is_beta(self):
        g1 = sample_gamma(GammaParams(2.0, 1.7), 11, 10**6)
        g2 = sample_gamma(GammaParams(5.0, 1.7), 12, 10**6)
        ks = stats.kstest(g1 / (g1 + g2), stats.beta(2.0, 5.0).cdf).statistic
        assert ks < 0.005

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_gamma(GammaParams(1.0, 1.0), 0, 0)
