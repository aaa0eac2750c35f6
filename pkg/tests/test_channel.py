import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellchannel.channel import (
    Dirac, Empirical, LogNormal, TransmissionSample, average, load_samples,
    log_normal_density, make_rng, pdtc_moment, sample,
)
from bellchannel.quadrature import integrate


def trapezoid_mean(theta_bar, sigma, f, points=2_000_001):
    """Brute-force truncated average over theta = -ln(eta) in [0, theta_bar + 10 sigma]."""
    theta = np.linspace(0.0, theta_bar + 10 * sigma, points)
    dens = np.exp(-0.5 * ((theta - theta_bar) / sigma) ** 2)
    eta = np.exp(-theta)
    return np.trapezoid(f(eta) * dens, theta) / np.trapezoid(dens, theta)


# ---------------------------------------------------------------- types

@pytest.mark.parametrize("a, b", [(-0.1, 0.5), (0.5, 1.1)])
def test_transmission_sample_bounds(a, b):
    with pytest.raises(ValueError):
        TransmissionSample(a, b)


@pytest.mark.parametrize("theta_bar, sigma", [(0.0, 1.0), (7.7, 0.0), (7.7, -1.0)])
def test_lognormal_rejects_bad_parameters(theta_bar, sigma):
    with pytest.raises(ValueError):
        LogNormal(theta_bar, sigma)


# ---------------------------------------------------------------- density

def test_density_at_mode_adjacent_point():
    assert log_normal_density(math.exp(-7.7), 7.7, 1.0) == pytest.approx(
        math.exp(7.7) / math.sqrt(2 * math.pi), rel=1e-13)


def test_density_at_unit_transmission():
    expected = math.exp(-9.1 ** 2 / 8) / (math.sqrt(2 * math.pi) * 2)
    assert log_normal_density(1.0, 9.1, 2.0) == pytest.approx(expected, rel=1e-13)


def test_density_integrates_to_one_below_unit_transmission():
    value, _ = integrate(lambda t: np.array([log_normal_density(math.exp(-x), 7.7, 0.1) * math.exp(-x)
                                             for x in t]), 5.0, 10.5)
    assert value == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("eta, sigma", [(0.0, 1.0), (-1.0, 1.0), (0.5, 0.0)])
def test_density_domain_errors(eta, sigma):
    with pytest.raises(ValueError):
        log_normal_density(eta, 7.7, sigma)


# ---------------------------------------------------------------- averages

def test_dirac_average():
    assert average(Dirac(0.3, 0.5), lambda a, b: a * b) == pytest.approx(0.15, rel=1e-15)


def test_narrow_lognormal_collapses_to_point():
    value = average(LogNormal(7.7, 1e-6), lambda a, b: a)
    assert value == pytest.approx(math.exp(-7.7), rel=1e-6)


def test_lognormal_mean_against_trapezoid():
    value = average(LogNormal(7.7, 1.0), lambda a, b: a)
    assert value == pytest.approx(trapezoid_mean(7.7, 1.0, lambda e: e), rel=1e-9)
    assert value < math.exp(-7.7 + 0.5)


def test_truncation_matters_for_wide_distribution():
    value = average(LogNormal(2.0, 3.0), lambda a, b: a)
    assert value == pytest.approx(trapezoid_mean(2.0, 3.0, lambda e: e), rel=1e-8)


@pytest.mark.parametrize("pdtc", [
    Dirac(0.2, 0.7), LogNormal(7.7, 1.0), LogNormal(3.0, 1.0, correlated=False),
    Empirical((TransmissionSample(0.1, 0.2), TransmissionSample(0.3, 0.9))),
])
def test_constant_functional(pdtc):
    assert average(pdtc, lambda a, b: np.full(np.shape(a), 3.5)) == pytest.approx(3.5, rel=1e-10)


def test_block_functional_matches_separate_averages():
    pdtc = LogNormal(1.5, 0.8, correlated=False)
    block = average(pdtc, lambda a, b: np.stack([a, b * b, a * b], axis=-1))
    separate = [average(pdtc, f) for f in (lambda a, b: a, lambda a, b: b * b, lambda a, b: a * b)]
    np.testing.assert_allclose(block, separate, rtol=1e-10)


def test_uncorrelated_factorises():
    pdtc = LogNormal(1.5, 0.8, correlated=False)
    m1 = pdtc_moment(pdtc, 1, 0)
    assert pdtc_moment(pdtc, 1, 1) == pytest.approx(m1 * m1, rel=1e-10)
    assert pdtc_moment(pdtc, 0, 1) == pytest.approx(m1, rel=1e-10)


def test_correlated_joint_moment_is_second_moment():
    pdtc = LogNormal(1.5, 0.8)
    assert pdtc_moment(pdtc, 1, 1) == pytest.approx(pdtc_moment(pdtc, 2, 0), rel=1e-12)


def test_empirical_is_sample_mean():
    pdtc = Empirical((TransmissionSample(0.1, 0.2), TransmissionSample(0.3, 0.6)))
    assert average(pdtc, lambda a, b: a + b) == pytest.approx(0.6)


# ---------------------------------------------------------------- moments

@pytest.mark.parametrize("pdtc", [Dirac(0.4, 0.1), LogNormal(9.1, 2.0), LogNormal(1.0, 0.5, False)])
def test_zeroth_moment_is_one(pdtc):
    assert pdtc_moment(pdtc, 0, 0) == 1.0


def test_dirac_moment():
    assert pdtc_moment(Dirac(0.2, 0.4), 2, 1) == pytest.approx(0.016, rel=1e-14)


def test_second_moment_against_monte_carlo():
    pdtc = LogNormal(9.1, 2.0)
    a, b = sample(pdtc, 10_000_000, make_rng(11))
    x = a * b
    mean, se = x.mean(), x.std(ddof=1) / math.sqrt(x.size)
    assert abs(pdtc_moment(pdtc, 1, 1) - mean) < 3 * se


@pytest.mark.parametrize("f", [
    lambda e: e, lambda e: e * e, lambda e: np.sqrt(e), lambda e: 1 - e, lambda e: np.exp(-100 * e),
])
def test_quadrature_against_monte_carlo(f):
    pdtc = LogNormal(4.0, 1.0)
    a, _ = sample(pdtc, 1_000_000, make_rng(5))
    x = f(a)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(average(pdtc, lambda p, q: f(p)) - x.mean()) < 3 * se


@settings(max_examples=20, deadline=None)
@given(theta_bar=st.floats(0.5, 10.0), sigma=st.floats(0.05, 3.0),
       n=st.integers(0, 3), m=st.integers(0, 3))
def test_moment_ordering(theta_bar, sigma, n, m):
    pdtc = LogNormal(theta_bar, sigma, correlated=False)
    assert pdtc_moment(pdtc, n + 1, m) <= pdtc_moment(pdtc, n, m) * (1 + 1e-10)


@settings(max_examples=20, deadline=None)
@given(theta_bar=st.floats(0.5, 10.0), sigma=st.floats(0.05, 3.0), k=st.floats(0.1, 50.0))
def test_monotonicity(theta_bar, sigma, k):
    pdtc = LogNormal(theta_bar, sigma)
    lower = average(pdtc, lambda a, b: np.exp(-k * a))
    upper = average(pdtc, lambda a, b: np.exp(-k * a * a))
    assert upper >= lower * (1 - 1e-10)


@pytest.mark.parametrize("theta_bar", [1.0, 7.7, 9.1])
def test_small_sigma_limit(theta_bar):
    narrow = LogNormal(theta_bar, 1e-4)
    point = math.exp(-theta_bar)
    for f in (lambda a, b: a, lambda a, b: a * a * (1 - b)):
        assert average(narrow, f) == pytest.approx(float(f(point, point)), rel=1e-6)


# ---------------------------------------------------------------- sampling

def test_sampling_is_reproducible_and_bounded():
    pdtc = LogNormal(0.5, 1.0, correlated=False)
    a1, b1 = sample(pdtc, 1000, make_rng(3))
    a2, b2 = sample(pdtc, 1000, make_rng(3))
    assert np.array_equal(a1, a2) and np.array_equal(b1, b2)
    assert a1.max() <= 1.0 and b1.max() <= 1.0
    assert not np.array_equal(a1, b1)


def test_load_samples(tmp_path):
    path = tmp_path / "samples.txt"
    path.write_text("# eta_a eta_b\n0.1 0.2\n0.3 0.4\n")
    pdtc = load_samples(path)
    assert pdtc_moment(pdtc, 1, 0) == pytest.approx(0.2)
    path.write_text("0.1 0.2 0.3\n")
    with pytest.raises(ValueError):
        load_samples(path)
