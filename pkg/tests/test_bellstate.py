import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bellchannel import bellstate as bs
from bellchannel import oracle
from bellchannel.channel import Dirac, LogNormal, pdtc_moment
from bellchannel.chsh import NoSignalError, correlation
from bellchannel.detectors import DetectorBank, DetectorMode, DetectorParams

MODES = ["pnr", "onoff"]

# S at weights Dirac(e^-7.7, e^-7.7), eta_c = 0.25, N = 1e-6; reproduced by the
# dense oracle as E(pi/4, pi/4) at phi = 0 (see test_s_parameter_regression)
S_REGRESSION = {"pnr": 0.9655849938503817, "onoff": 0.9655850106111513}


def random_bank(rng, mode):
    dets = [DetectorParams(rng.uniform(0.05, 1.0), rng.uniform(0.0, 1e-3)) for _ in range(4)]
    return DetectorBank(*dets, mode=mode)


# ---------------------------------------------------------------- mixture weights

@pytest.mark.parametrize("pdtc, expected", [
    (Dirac(1, 1), (0, 0, 0, 0, 0, 1)),
    (Dirac(0, 0), (1, 0, 0, 0, 0, 0)),
    (Dirac(0.5, 0.5), (0.25, 0.125, 0.125, 0.125, 0.125, 0.25)),
])
def test_mixture_weights_examples(pdtc, expected):
    w = bs.mixture_weights(pdtc)
    np.testing.assert_allclose(w.as_tuple(), expected, atol=1e-15)
    assert sum(w.as_tuple()) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(theta_bar=st.floats(0.1, 12.0), sigma=st.floats(0.05, 3.0), correlated=st.booleans())
def test_mixture_weights_normalised(theta_bar, sigma, correlated):
    w = bs.mixture_weights(LogNormal(theta_bar, sigma, correlated))
    assert abs(sum(w.as_tuple()) - 1.0) <= 1e-12
    assert w.p_ha == w.p_va and w.p_hb == w.p_vb
    assert all(v >= 0 for v in w.as_tuple())


def test_correlated_weights_use_second_moment():
    pdtc = LogNormal(2.0, 0.5)
    w = bs.mixture_weights(pdtc)
    assert w.p_bell == pytest.approx(pdtc_moment(pdtc, 2, 0), rel=1e-10)
    assert 2 * w.p_ha == pytest.approx(pdtc_moment(pdtc, 1, 0) - pdtc_moment(pdtc, 2, 0), rel=1e-9)


def test_invalid_weights_rejected():
    with pytest.raises(ValueError):
        bs.MixtureWeights(0.5, 0.1, 0.1, 0.1, 0.1, 0.5)


# ---------------------------------------------------------------- S parameter

@pytest.mark.parametrize("mode", MODES)
def test_s_is_one_without_noise(mode):
    w = bs.mixture_weights(Dirac(0.3, 0.6))
    assert bs.s_parameter(w, 0.25, 0.0, mode) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("mode", MODES)
def test_s_parameter_regression(mode):
    e = math.exp(-7.7)
    w = bs.MixtureWeights.from_transmissions(e, e)
    s = bs.s_parameter(w, 0.25, 1e-6, mode)
    assert s == pytest.approx(S_REGRESSION[mode], rel=1e-12)
    bank = DetectorBank.equal(0.25, 1e-6, mode)
    table = oracle.coincidence_table(oracle.BellSource(0.0), bank, e, e, math.pi / 4, math.pi / 4,
                                     dense=True)
    assert correlation(table) == pytest.approx(s, abs=1e-10)


def test_onoff_close_to_pnr():
    e = math.exp(-7.7)
    w = bs.MixtureWeights.from_transmissions(e, e)
    pnr = bs.s_parameter(w, 0.25, 1e-6, "pnr")
    onoff = bs.s_parameter(w, 0.25, 1e-6, "onoff")
    assert pnr != onoff
    assert abs(pnr - onoff) / pnr < 1e-4


@pytest.mark.parametrize("mode", MODES)
def test_s_monotone_in_noise(mode):
    w = bs.mixture_weights(LogNormal(7.7, 1.0))
    values = [bs.s_parameter(w, 0.25, n, mode) for n in np.logspace(-9, -2, 40)]
    assert np.all(np.diff(values) < 0)
    assert all(0 <= v <= 1 for v in values)


def test_s_without_signal_warns():
    w = bs.mixture_weights(Dirac(0.0, 0.0))
    with pytest.warns(bs.NoSignalWarning):
        assert bs.s_parameter(w, 0.25, 0.0) == 0.0


# ---------------------------------------------------------------- equal-detector correlation

@pytest.mark.parametrize("ta, tb, phi, s, expected", [
    (math.pi / 4, math.pi / 4, 0.0, 1.0, 1.0),
    (0.0, 0.0, 1.234, 0.8, -0.8),
    (0.0, math.pi / 8, math.pi, 1.0, -math.sqrt(2) / 2),
])
def test_correlation_equal_examples(ta, tb, phi, s, expected):
    assert bs.correlation_equal(ta, tb, phi, s) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(ta=st.floats(-4, 4), tb=st.floats(-4, 4), phi=st.floats(-7, 7), s=st.floats(-1, 1))
def test_correlation_equal_properties(ta, tb, phi, s):
    e = bs.correlation_equal(ta, tb, phi, s)
    assert abs(e) <= abs(s) + 1e-15
    shifted = bs.correlation_equal(ta, tb, phi + math.pi, s)
    assert e + shifted == pytest.approx(-2 * s * math.cos(2 * ta) * math.cos(2 * tb), abs=1e-12)


@pytest.mark.parametrize("s, phi, expected", [(1.0, 0.0, 1.0), (0.9, math.pi, -0.9)])
def test_visibility(s, phi, expected):
    assert bs.visibility(s, phi) == pytest.approx(expected, abs=1e-15)
    assert bs.visibility(s, phi) == pytest.approx(bs.correlation_equal(math.pi / 4, math.pi / 4, phi, s))


def test_visibility_grows_with_turbulence():
    def v_plus(sigma):
        w = bs.mixture_weights(LogNormal(7.7, sigma))
        return bs.visibility(bs.s_parameter(w, 0.25, 1e-5), 0.0)

    assert v_plus(2.0) > v_plus(0.1)


# ---------------------------------------------------------------- general detectors

@settings(max_examples=100, deadline=None)
@given(eta=st.floats(0.01, 1.0), noise=st.floats(0.0, 1e-3), eta_a=st.floats(0.0, 1.0),
       eta_b=st.floats(0.0, 1.0), ta=st.floats(0, math.pi), tb=st.floats(0, math.pi),
       phi=st.floats(0, 2 * math.pi), mode=st.sampled_from(MODES))
def test_general_reduces_to_equal_detectors(eta, noise, eta_a, eta_b, ta, tb, phi, mode):
    bank = DetectorBank.equal(eta, noise, mode)
    w = bs.MixtureWeights.from_transmissions(eta_a, eta_b)
    assume(w.p_bell > 1e-12 or noise > 1e-12)
    e, den = bs.general_correlation(bank, w, ta, tb, phi)
    s = bs.s_parameter(w, eta, noise, mode)
    assert e == pytest.approx(bs.correlation_equal(ta, tb, phi, s), abs=1e-12)
    assert abs(e) <= 1 + 1e-12 and den > 0


def test_general_example_equal_detectors():
    bank = DetectorBank.equal(0.25, 1e-6)
    w = bs.mixture_weights(Dirac(0.5, 0.5))
    e, _ = bs.general_correlation(bank, w, 0.0, math.pi / 8, math.pi)
    s = bs.s_parameter(w, 0.25, 1e-6)
    assert e == pytest.approx(bs.correlation_equal(0.0, math.pi / 8, math.pi, s), abs=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_noiseless_efficiencies_cancel(mode):
    rng = np.random.default_rng(4)
    w = bs.MixtureWeights(0, 0, 0, 0, 0, 1)
    for _ in range(20):
        etas = rng.uniform(0.05, 1.0, 4)
        ta, tb, phi = rng.uniform(0, math.pi, 3)
        bank = DetectorBank(*(DetectorParams(x, 0.0) for x in etas), mode=mode)
        e, _ = bs.general_correlation(bank, w, ta, tb, phi)
        table = oracle.coincidence_table(oracle.BellSource(phi), bank, 1.0, 1.0, ta, tb, dense=True)
        assert e == pytest.approx(correlation(table), abs=1e-10)
        # with equal efficiencies the ideal correlation survives unchanged
        eq = DetectorBank.equal(etas[0], 0.0, mode)
        assert bs.general_correlation(eq, w, ta, tb, phi).value == pytest.approx(
            bs.correlation_equal(ta, tb, phi, 1.0), abs=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_unequal_noise_breaks_visibility_symmetry(mode):
    def visibilities(noises):
        bank = DetectorBank(*(DetectorParams(0.25, n) for n in noises), mode=mode)
        w = bs.mixture_weights(Dirac(0.1, 0.1))
        return (bs.general_correlation(bank, w, math.pi / 4, math.pi / 4, 0.0).value,
                bs.general_correlation(bank, w, math.pi / 4, math.pi / 4, math.pi).value)

    # one noisier detector: the receiver with balanced noise zeroes every
    # phi-independent numerator term, so V+ = -V- still holds exactly
    v_plus, v_minus = visibilities((2e-6, 1e-6, 1e-6, 1e-6))
    assert v_plus + v_minus == pytest.approx(0.0, abs=1e-15)
    # imbalance at both receivers breaks the symmetry
    v_plus, v_minus = visibilities((2e-6, 1e-6, 2e-6, 1e-6))
    assert v_plus + v_minus == pytest.approx(3.04e-9, rel=0.05)


def test_no_signal_raises():
    bank = DetectorBank.equal(0.5, 0.0)
    with pytest.raises(NoSignalError):
        bs.general_correlation(bank, bs.mixture_weights(Dirac(0, 0)), 0.1, 0.2)


@pytest.mark.parametrize("mode", MODES)
def test_general_matches_oracle(mode):
    rng = np.random.default_rng(17)
    for _ in range(10):
        bank = random_bank(rng, mode)
        eta_a, eta_b = rng.uniform(0, 1, 2)
        ta, tb = rng.uniform(0, math.pi, 2)
        phi = rng.uniform(0, 2 * math.pi)
        w = bs.MixtureWeights.from_transmissions(eta_a, eta_b)
        closed = bs.coincidence_table(bank, w, ta, tb, phi)
        brute = oracle.coincidence_table(oracle.BellSource(phi), bank, eta_a, eta_b, ta, tb, dense=True)
        for name in ("p_tt", "p_rr", "p_tr", "p_rt"):
            assert getattr(closed, name) == pytest.approx(getattr(brute, name), abs=1e-10)
        e, den = bs.general_correlation(bank, w, ta, tb, phi)
        assert den == pytest.approx(brute.total, abs=1e-10)
        assert e == pytest.approx(correlation(brute), abs=1e-9)


def single_photon(index):
    amps = np.zeros((2,) * 4, dtype=complex)
    pos = [0, 0, 0, 0]
    if index is not None:
        pos[index] = 1
    amps[tuple(pos)] = 1.0
    return oracle.FockState4(1, amps)


COEFFICIENTS = [
    (bs.e_0, bs.p_0, None), (bs.e_h_a, bs.p_h_a, 0), (bs.e_v_a, bs.p_v_a, 1),
    (bs.e_h_b, bs.p_h_b, 2), (bs.e_v_b, bs.p_v_b, 3),
]


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("e_fn, p_fn, index", COEFFICIENTS)
def test_each_coefficient_against_oracle(mode, e_fn, p_fn, index):
    rng = np.random.default_rng(23)
    for _ in range(5):
        bank = random_bank(rng, mode)
        ta, tb = rng.uniform(0, math.pi, 2)
        probs = oracle.pair_probabilities(single_photon(index), bank, 1.0, 1.0, ta, tb)[0]
        same, diff = probs[0] + probs[1], probs[2] + probs[3]
        assert p_fn(bank, ta, tb) == pytest.approx(same + diff, abs=1e-12)
        assert e_fn(bank, ta, tb) == pytest.approx(same - diff, abs=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_bell_coefficients_against_oracle(mode):
    rng = np.random.default_rng(29)
    for _ in range(5):
        bank = random_bank(rng, mode)
        ta, tb = rng.uniform(0, math.pi, 2)
        phi = rng.uniform(0, 2 * math.pi)
        probs = oracle.pair_probabilities(oracle.build_bell_state(phi), bank, 1.0, 1.0, ta, tb)[0]
        assert bs.p_bell(bank, ta, tb, phi) == pytest.approx(probs.sum(), abs=1e-12)
        assert bs.e_bell(bank, ta, tb, phi) == pytest.approx(probs[0] + probs[1] - probs[2] - probs[3],
                                                             abs=1e-12)


def test_onoff_coefficients_keep_quarter_turn_symmetry():
    # rotating an analyzer by pi/2 swaps the roles of its H and V inputs
    rng = np.random.default_rng(31)
    bank = random_bank(rng, DetectorMode.ON_OFF)
    for ta, tb in rng.uniform(0, math.pi, (5, 2)):
        assert bs.p_v_a(bank, ta, tb) == pytest.approx(bs.p_h_a(bank, ta + math.pi / 2, tb), abs=1e-15)
        assert bs.p_v_b(bank, ta, tb) == pytest.approx(bs.p_h_b(bank, ta, tb + math.pi / 2), abs=1e-15)


def test_mode_parsing():
    assert DetectorMode.parse("On/Off") is DetectorMode.ON_OFF
    assert DetectorMode.parse("PNR") is DetectorMode.PNR
    with pytest.raises(ValueError):
        DetectorMode.parse("apd")


def test_total_noise():
    bank = DetectorBank(DetectorParams(0.1, 1e-6), DetectorParams(0.2, 2e-6),
                        DetectorParams(0.3, 3e-6), DetectorParams(0.4, 4e-6))
    assert bank.total_noise == pytest.approx(1e-5)
