import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellchannel import oracle
from bellchannel.bellstate import correlation_equal
from bellchannel.chsh import (
    AngleSettings, CoincidenceTable, NoSignalError, bell_from_correlation, bell_parameter,
    correlation, maximize_bell,
)
from bellchannel.detectors import DetectorBank

IDEAL = AngleSettings(0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8)


def family(s, k):
    return lambda a, b: s * (-np.cos(2 * a) * np.cos(2 * b) + k * np.sin(2 * a) * np.sin(2 * b))


@pytest.mark.parametrize("probs, expected", [
    ((0.5, 0.5, 0, 0), 1.0), ((0, 0, 0.25, 0.25), -1.0), ((0.3, 0.3, 0.2, 0.2), 0.2),
])
def test_correlation_examples(probs, expected):
    assert correlation(CoincidenceTable(*probs)) == pytest.approx(expected, abs=1e-15)


def test_correlation_without_signal():
    with pytest.raises(NoSignalError):
        correlation(CoincidenceTable(0, 0, 1e-31, 0))


def test_negative_probability_rejected():
    with pytest.raises(ValueError):
        CoincidenceTable(0.1, -0.1, 0, 0)


def test_angles_reduced_mod_pi():
    s = AngleSettings(-0.1, math.pi + 0.2, 2 * math.pi, 0.3)
    np.testing.assert_allclose(s.as_tuple(), (math.pi - 0.1, 0.2, 0.0, 0.3), atol=1e-15)
    assert s.pairs[1] == (s.a1, s.b2)


def test_ideal_bell_state_reaches_tsirelson_bound():
    bank = DetectorBank.equal(1.0, 0.0)
    tables = [oracle.coincidence_table(oracle.BellSource(math.pi), bank, 1.0, 1.0, a, b, dense=True)
              for a, b in IDEAL.pairs]
    assert bell_parameter(tables) == pytest.approx(2 * math.sqrt(2), abs=1e-12)


def test_scaled_model_at_ideal_settings():
    e = [correlation_equal(a, b, math.pi, 0.8) for a, b in IDEAL.pairs]
    assert bell_from_correlation(*e) == pytest.approx(0.8 * 2 * math.sqrt(2), abs=1e-14)


def test_bell_parameter_zero_and_arity():
    flat = CoincidenceTable(0.25, 0.25, 0.25, 0.25)
    assert bell_parameter([flat] * 4) == 0.0
    with pytest.raises(ValueError):
        bell_parameter([flat] * 3)


@pytest.mark.parametrize("s", [0.5, 0.8, 0.9, 1.0])
@pytest.mark.parametrize("k", [-1.0, -0.5, 0.0, 0.5, 1.0])
def test_maximum_of_correlation_family(s, k):
    result = maximize_bell(family(s, k))
    assert result.value == pytest.approx(2 * s * math.sqrt(1 + k * k), abs=1e-6)
    assert result.value >= result.grid_value
    e = [family(s, k)(a, b) for a, b in result.settings.pairs]
    assert bell_from_correlation(*e) == pytest.approx(result.value, abs=1e-14)


@pytest.mark.parametrize("cos_phi, expected", [(-1.0, 2 * math.sqrt(2)), (0.0, 2.0)])
def test_figure_endpoints(cos_phi, expected):
    phi = math.acos(cos_phi)
    value, settings_ = maximize_bell(lambda a, b: correlation_equal(a, b, phi, 1.0))
    assert value == pytest.approx(expected, abs=1e-6)
    assert isinstance(settings_, AngleSettings)


def test_zero_model():
    assert maximize_bell(lambda a, b: np.zeros(np.broadcast(a, b).shape)).value == 0.0


def test_scalar_model_is_accepted():
    def scalar(a, b):
        return float(correlation_equal(float(a), float(b), math.pi, 1.0))

    assert maximize_bell(scalar).value == pytest.approx(2 * math.sqrt(2), abs=1e-6)


def test_dense_grid_brute_force():
    # exhaustive 256^4 search, split as max over A-angles of each half
    model = family(0.9, 0.37)
    axis = np.arange(256) * math.pi / 256
    table = model(axis[:, None], axis[None, :])
    left = np.abs(table[:, :, None] - table[:, None, :]).max(axis=0)
    right = np.abs(table[:, None, :] + table[:, :, None]).max(axis=0)
    brute = float((left + right).max())
    best = maximize_bell(model).value
    assert best >= brute - 1e-12
    assert best - brute < 1e-3


@settings(max_examples=50, deadline=None)
@given(angles=st.tuples(*[st.floats(0, math.pi)] * 4), shift=st.floats(-3, 3), s=st.floats(0, 1))
def test_global_shift_invariance(angles, shift, s):
    model = family(s, -1.0)      # depends on theta_A - theta_B only

    def b_of(x):
        a1, b1, a2, b2 = x
        return bell_from_correlation(model(a1, b1), model(a1, b2), model(a2, b2), model(a2, b1))

    assert b_of([x + shift for x in angles]) == pytest.approx(b_of(angles), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.05, 1), k=st.floats(-1, 1))
def test_refinement_never_loses_to_grid(s, k):
    result = maximize_bell(family(s, k))
    assert result.value >= result.grid_value
    assert result.value <= 2 * math.sqrt(2) + 1e-12
