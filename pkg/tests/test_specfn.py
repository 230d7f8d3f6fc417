import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from cpsm import specfn
from cpsm.specfn import (
    SignedLog,
    StableDensityEvaluator,
    UnsupportedSizeError,
    bn_series,
    gfc_exact,
    gfc_table,
    incgamma_ratio,
    log_ascending_factorial,
    log_falling_factorial,
    sml_cdf,
    sml_density,
    sml_moment,
    sml_sf,
    stable_density,
    wright_crossover,
    wright_log_asymptotic,
    wright_log_series,
    wright_mainardi,
    wright_series,
)

ALPHAS_EXACT = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(-1, 2), Fraction(-1), Fraction(-2)]


def half_stable_pdf(x):
    return x**-1.5 * np.exp(-1.0 / (4.0 * x)) / (2.0 * math.sqrt(math.pi))


def half_stable_cdf(x):
    return special.erfc(1.0 / (2.0 * np.sqrt(x)))


def explicit_gfc(n, k, alpha):
    """The alternating sum written out independently with mpmath rationals."""
    alpha = mpmath.mpf(alpha.numerator) / alpha.denominator
    total = mpmath.mpf(0)
    for i in range(k + 1):
        total += (-1) ** i * mpmath.binomial(k, i) * mpmath.rf(-i * alpha, n)
    return total / mpmath.factorial(k)


# ---------------------------------------------------------------- SignedLog


class TestSignedLog:
    def test_zero_round_trip(self):
        z = SignedLog.from_float(0.0)
        assert z.is_zero() and float(z) == 0.0

    def test_cancellation_is_exact_zero(self):
        a = SignedLog.from_float(3.5)
        assert (a - 3.5).is_zero()

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    def test_add_matches_float(self, x, y):
        got = float(SignedLog.from_float(x) + SignedLog.from_float(y))
        assert got == pytest.approx(x + y, rel=1e-12, abs=1e-9 * (abs(x) + abs(y)))

    @given(st.floats(-1e100, 1e100).filter(lambda v: abs(v) > 1e-100),
           st.floats(-1e100, 1e100).filter(lambda v: abs(v) > 1e-100))
    def test_mul_div_match_float(self, x, y):
        a, b = SignedLog.from_float(x), SignedLog.from_float(y)
        assert float(a * b) == pytest.approx(x * y, rel=1e-12)
        assert float(a / b) == pytest.approx(x / y, rel=1e-12)

    def test_power_sign(self):
        assert float(SignedLog.from_float(-2.0) ** 3) == pytest.approx(-8.0)
        assert float(SignedLog.from_float(-2.0) ** 2) == pytest.approx(4.0)

    def test_huge_magnitudes_do_not_overflow(self):
        a = SignedLog(1, 1e5)
        b = a * a + a
        assert b.logmag == pytest.approx(2e5)

    def test_long_chain_against_fractions(self):
        rng = np.random.default_rng(5)
        exact = Fraction(1)
        acc = SignedLog.one()
        for v in rng.uniform(0.5, 2.0, 10_000):
            f = float(v)
            exact = exact * Fraction(f) + Fraction(f)
            acc = acc * f + f
            # keep the exact value manageable: renormalise both sides
            scale = Fraction(float(exact))
            exact /= scale
            acc = acc / float(scale)
        assert float(acc) == pytest.approx(float(exact), rel=1e-12)

    def test_overflowing_value_converts_to_inf(self):
        assert float(SignedLog(-1, 1000.0)) == -math.inf

    def test_invalid_sign(self):
        with pytest.raises(ValueError):
            SignedLog(2, 0.0)


# ---------------------------------------------------------------- factorials


def test_ascending_factorial_examples():
    assert float(log_ascending_factorial(3, 0)) == 1.0
    assert float(log_ascending_factorial(0.5, 2)) == pytest.approx(0.75)
    v = log_ascending_factorial(-1.5, 2)
    assert v.sign == 1 and float(v) == pytest.approx(0.75)


def test_ascending_factorial_hits_zero():
    assert log_ascending_factorial(-2.0, 4).is_zero()


def test_falling_factorial_examples():
    assert float(log_falling_factorial(5, 2)) == pytest.approx(20.0)
    assert float(log_falling_factorial(5, 0)) == 1.0
    assert log_falling_factorial(2, 3).is_zero()


@given(st.floats(-20, 20).filter(lambda v: v == 0 or abs(v) > 1e-200), st.integers(0, 30))
def test_ascending_factorial_vs_mpmath(x, n):
    got = float(log_ascending_factorial(x, n))
    want = float(mpmath.rf(x, n))
    assert got == pytest.approx(want, rel=1e-11, abs=1e-300)


# ---------------------------------------------------------------- coefficients


@pytest.mark.parametrize("alpha", ALPHAS_EXACT, ids=str)
def test_table_matches_exact_rationals(alpha):
    tab = gfc_table(float(alpha), 25)
    for n in range(26):
        for k in range(n + 1):
            exact = gfc_exact(n, k, alpha)
            if exact == 0:
                assert tab.sign(n, k) == 0
                continue
            assert tab.sign(n, k) == (1 if exact > 0 else -1)
            want = math.log(abs(exact))
            assert abs(tab.log_abs(n, k) - want) <= 1e-10 * max(1.0, abs(want))


@pytest.mark.parametrize("alpha", [Fraction(1, 2), Fraction(-1), Fraction(-2, 3)], ids=str)
def test_exact_against_independent_alternating_sum(alpha):
    mpmath.mp.dps = 50
    for n in range(1, 12):
        for k in range(1, n + 1):
            assert float(gfc_exact(n, k, alpha)) == pytest.approx(float(explicit_gfc(n, k, alpha)), rel=1e-14)


def test_gfc_exact_examples():
    assert gfc_exact(2, 1, Fraction(1, 2)) == Fraction(1, 4)
    assert gfc_exact(1, 1, -1) == -1
    assert gfc_exact(2, 2, -1) == 1


def test_gfc_exact_size_budget():
    with pytest.raises(UnsupportedSizeError):
        gfc_exact(31, 3, Fraction(1, 2))


def test_table_provisos_and_examples():
    tab = gfc_table(0.5, 6)
    assert float(tab[0, 0]) == 1.0
    assert all(tab[n, 0].is_zero() for n in range(1, 7))
    assert float(tab[2, 1]) == pytest.approx(0.25)
    for a in (0.3, -1.7):
        assert float(gfc_table(a, 3)[3, 3]) == pytest.approx(a**3)


@pytest.mark.parametrize("alpha", [0.25, 0.9, -0.5, -3.0])
def test_sign_law(alpha):
    tab = gfc_table(alpha, 60)
    for n in range(1, 61):
        signs = tab.row_signs(n)[1:]
        want = np.ones(n) if alpha > 0 else (-1.0) ** np.arange(1, n + 1)
        assert np.array_equal(signs, want)


def test_table_is_read_only():
    tab = gfc_table(0.5, 5)
    with pytest.raises(ValueError):
        tab.log_scaled[1, 1] = 0.0


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
def test_table_rejects_bad_alpha(alpha):
    with pytest.raises(ValueError):
        gfc_table(alpha, 5)


def test_table_rejects_empty():
    with pytest.raises(ValueError):
        gfc_table(0.5, 0)


@pytest.mark.parametrize("alpha,theta", [(0.5, 1.0), (0.25, -0.2), (0.75, 3.0), (-1.0, 2.0), (-0.5, 1.5)])
def test_normalization_contraction(alpha, theta):
    # sum_k C(n,k;alpha) (theta/alpha)_(k) = (theta)_(n)
    tab = gfc_table(alpha, 100)
    for n in (1, 5, 17, 100):
        acc = SignedLog.zero()
        for k in range(1, n + 1):
            acc = acc + tab[n, k] * log_ascending_factorial(theta / alpha, k)
        want = log_ascending_factorial(theta, n)
        assert acc.sign == want.sign
        assert acc.logmag == pytest.approx(want.logmag, rel=1e-10, abs=1e-10)


def test_streamed_rows_match_table():
    rows = specfn.scaled_gfc_log_rows(0.4, 2500, offsets=(0, 7))
    direct = specfn.kernels.log_scaled_gfc_table(0.4, 2500)
    np.testing.assert_allclose(rows[2500], direct[2500], rtol=1e-12)
    np.testing.assert_allclose(rows[2493], direct[2493, :2494], rtol=1e-12)


# ---------------------------------------------------------------- incomplete gamma


def test_incgamma_examples():
    assert incgamma_ratio(3, 0) == 1.0
    assert incgamma_ratio(1, 1) == pytest.approx(math.exp(-1), rel=1e-12)
    assert incgamma_ratio(2, 1) == pytest.approx(2 * math.exp(-1), rel=1e-12)


@given(st.integers(1, 15), st.floats(0, 40))
def test_incgamma_integer_closed_form(a, x):
    # Gamma(a, x)/Gamma(a) = exp(-x) sum_{j<a} x^j / j!
    want = math.exp(-x) * math.fsum(x**j / math.factorial(j) for j in range(a))
    assert incgamma_ratio(a, x) == pytest.approx(want, rel=1e-12, abs=1e-300)


# ---------------------------------------------------------------- Wright functions


def mp_wright(sigma, tau, y, terms=400):
    mpmath.mp.dps = 60
    s = mpmath.mpf(0)
    for j in range(terms):
        g = j * mpmath.mpf(sigma) + tau
        if g == 0:
            continue
        s += mpmath.mpf(y) ** j / (mpmath.factorial(j) * mpmath.gamma(g))
    return s


def test_wright_zero():
    assert wright_series(0.5, 0, 0) == 0.0


def test_wright_bessel_case():
    # W_{1,1}(y) = I_0(2 sqrt(y))
    assert wright_series(1, 1, 2) == pytest.approx(float(special.i0(2 * math.sqrt(2))), rel=1e-14)


@pytest.mark.parametrize("sigma,tau,y", [(0.5, 0, 1), (0.5, 1, 3), (1.0, 0, 10), (2.0, 0.5, 7), (0.25, 0, 50)])
def test_wright_series_vs_high_precision(sigma, tau, y):
    assert wright_series(sigma, tau, y) == pytest.approx(float(mp_wright(sigma, tau, y)), rel=1e-12)


def test_wright_asymptotic_formula():
    y = 9.0
    assert wright_log_asymptotic(1.0, y) == pytest.approx(0.25 * math.log(y) + 2 * 3.0)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_wright_asymptotic_differences(sigma):
    y1 = wright_crossover(sigma)
    for y2 in (2 * y1, 10 * y1):
        series = wright_log_series(sigma, 0, y2) - wright_log_series(sigma, 0, y1)
        asym = wright_log_asymptotic(sigma, y2) - wright_log_asymptotic(sigma, y1)
        assert series == pytest.approx(asym, rel=0.01)


@pytest.mark.parametrize("sigma", [0.5, 1.0])
def test_wright_log_slope(sigma):
    y = 10 * wright_crossover(sigma)
    h = 1e-4
    slope = (wright_log_series(sigma, 0, y * math.exp(h)) - wright_log_series(sigma, 0, y * math.exp(-h))) / (2 * h)
    # derivative of the leading exponent in log y
    assert slope == pytest.approx((sigma * y) ** (1 / (1 + sigma)) / sigma, rel=0.02)


def test_wright_crossover_keeps_terms_finite():
    y = wright_crossover(0.5)
    assert specfn._wright_log_max_term(0.5, 0.0, math.log(y)) == pytest.approx(280 * math.log(10), rel=1e-6)


def test_mainardi_at_zero():
    m, _ = wright_mainardi(0.5, 0.0)
    assert m == pytest.approx(1 / math.gamma(0.5), rel=1e-14)
    assert wright_mainardi(0.5, 1e-8)[0] == pytest.approx(0.5641895835, rel=1e-7)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_mainardi_derivative_vs_finite_difference(alpha):
    h = 1e-5
    _, d = wright_mainardi(alpha, 0.5)
    fd = (wright_mainardi(alpha, 0.5 + h)[0] - wright_mainardi(alpha, 0.5 - h)[0]) / (2 * h)
    assert d == pytest.approx(fd, abs=1e-6)
    assert wright_mainardi(alpha, 0.1)[0] > 0


def test_mainardi_half_closed_form():
    # M_{1/2}(t) = exp(-t^2/4)/sqrt(pi)
    for t in (0.3, 1.0, 2.5):
        m, d = wright_mainardi(0.5, t)
        assert m == pytest.approx(math.exp(-t * t / 4) / math.sqrt(math.pi), rel=1e-12)
        assert d == pytest.approx(-t / 2 * m, rel=1e-10)


# ---------------------------------------------------------------- stable law


def test_stable_half_closed_form():
    x = np.logspace(-2, 2, 400)
    got = stable_density(0.5, x)
    assert np.max(np.abs(got - half_stable_pdf(x))) < 1e-8
    assert float(stable_density(0.5, 1.0)) == pytest.approx(math.exp(-0.25) / (2 * math.sqrt(math.pi)), rel=1e-10)
    assert float(stable_density(0.5, 0.01)) == pytest.approx(half_stable_pdf(0.01), rel=1e-8)
    assert float(stable_density(0.5, 1e-3)) < 1e-100


def test_stable_half_cdf():
    ev = StableDensityEvaluator(0.5)
    x = np.logspace(-2, 3, 50)
    np.testing.assert_allclose(ev.cdf(x), half_stable_cdf(x), atol=1e-10)
    np.testing.assert_allclose(ev.sf(x), 1 - half_stable_cdf(x), atol=1e-10)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_stable_normalization(alpha):
    ev = StableDensityEvaluator(alpha)
    total, _ = integrate.quad(lambda t: float(ev.pdf(math.exp(t))) * math.exp(t), -30, 60, limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_stable_laplace_transform(alpha):
    # E[exp(-t X)] = exp(-t^alpha)
    ev = StableDensityEvaluator(alpha)
    for t in (0.5, 2.0):
        val, _ = integrate.quad(lambda u: float(ev.pdf(math.exp(u))) * math.exp(u - t * math.exp(u)), -30, 30, limit=400)
        assert val == pytest.approx(math.exp(-(t**alpha)), rel=1e-7)


def test_stable_positive_and_zero_below():
    ev = StableDensityEvaluator(0.7)
    vals = ev.pdf(np.logspace(-1, 4, 100))
    assert np.all(vals > 0)
    assert ev.pdf(1e-6) == 0.0


# ---------------------------------------------------------------- scaled Mittag-Leffler


@pytest.mark.parametrize("alpha,theta", [(0.5, 0.0), (0.5, 1.0), (0.25, 0.5)])
def test_sml_normalization(alpha, theta):
    total, _ = integrate.quad(lambda t: float(sml_density(alpha, theta, math.exp(t))) * math.exp(t), -25, 8, limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("alpha,theta", [(0.5, 0.0), (0.5, 1.0), (0.25, 0.5), (0.75, -0.5)])
@pytest.mark.parametrize("p", [1, 2])
def test_sml_moments_quadrature_vs_gamma(alpha, theta, p):
    quad, _ = integrate.quad(
        lambda t: float(sml_density(alpha, theta, math.exp(t))) * math.exp((p + 1) * t), -25, 8, limit=400
    )
    assert quad == pytest.approx(sml_moment(alpha, theta, p), rel=1e-6)


def test_sml_untilted_first_moment():
    assert sml_moment(0.5, 0.0, 1) == pytest.approx(2 / math.sqrt(math.pi))


def test_sml_half_untilted_is_half_normal():
    # S_{1/2,0} = X^{-1/2} has the law of |N(0, 2)|
    s = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
    np.testing.assert_allclose(sml_cdf(0.5, 0.0, s), special.erf(s / 2), atol=1e-12)


@pytest.mark.parametrize("alpha,theta", [(0.5, 1.0), (0.3, 2.0), (0.8, -0.5)])
def test_sml_cdf_against_density_quadrature(alpha, theta):
    lo = 0.05
    for s in (0.3, 1.0, 2.5):
        val, _ = integrate.quad(lambda t: float(sml_density(alpha, theta, math.exp(t))) * math.exp(t),
                                math.log(lo), math.log(s), limit=400, epsabs=1e-13)
        got = float(sml_cdf(alpha, theta, s) - sml_cdf(alpha, theta, lo))
        assert got == pytest.approx(val, abs=1e-9)


def test_sml_cdf_limits_and_monotone():
    s = np.logspace(-4, 2, 300)
    c = sml_cdf(0.5, 1.0, s)
    assert np.all(np.diff(c) >= -1e-15)
    assert float(sml_cdf(0.5, 1.0, 1e-6)) < 1e-8
    assert float(sml_sf(0.5, 1.0, 50.0)) < 1e-6
    assert float(sml_cdf(0.5, 1.0, 50.0)) == pytest.approx(1.0, abs=1e-6)


def test_sml_median_self_consistent():
    from scipy.optimize import brentq

    m = brentq(lambda s: float(sml_cdf(0.5, 0.0, s)) - 0.5, 0.01, 10, xtol=1e-14)
    assert m == pytest.approx(2 * special.erfinv(0.5), rel=1e-10)


# ---------------------------------------------------------------- B_n series


def test_bn_examples():
    assert float(bn_series(0.7, 1.3, 1)) == pytest.approx(0.7 * 1.3, rel=1e-13)
    assert float(bn_series(1, 1, 2)) == pytest.approx(3.0, rel=1e-13)


@pytest.mark.parametrize("sigma,zeta", [(0.5, 0.5), (1.0, 1.0), (2.0, 2.0), (0.5, 3.0)])
def test_bn_dual_path(sigma, zeta):
    tab = gfc_table(-sigma, 25)
    for n in range(1, 26):
        acc = SignedLog.zero()
        for j in range(1, n + 1):
            acc = acc + tab[n, j] * SignedLog.from_float(-zeta) ** j
        series = bn_series(sigma, zeta, n)
        assert series.sign == 1 and acc.sign == 1
        assert math.exp(series.logmag - acc.logmag) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("alpha,theta", [(0.75, -0.5), (0.3, 1.0), (0.5, -0.25)])
def test_sml_cdf_small_argument(alpha, theta):
    # near zero the density is Gamma(theta+1)/Gamma(theta/alpha+1) s^(theta/alpha) / Gamma(1-alpha)
    b = theta / alpha + 1
    for s in (1e-40, 1e-12):
        lead = math.exp(math.lgamma(theta + 1) - math.lgamma(b) - math.lgamma(1 - alpha)) * s**b / b
        assert specfn.sml_cdf(alpha, theta, s) == pytest.approx(lead, rel=1e-9)
    across = specfn.sml_cdf(alpha, theta, np.array([0.2499, 0.2501]))
    assert 0 < across[1] - across[0] < 1e-3
