"""Closed-form statistics for an ideal polarization Bell state after fluctuating loss.

Loss turns the Bell state into a mixture of the Bell state itself, four
single-photon states (H or V at one receiver, vacuum at the other) and vacuum.
Each receiver is then described by two postselection operators on the
{vacuum, one photon} subspace: M_T (only the T detector clicks) and M_R (only
the R detector clicks). Their difference X = M_T - M_R gives the numerator
coefficients E_i of the correlation coefficient and their sum Y = M_T + M_R
the denominator coefficients P_i.

All site operators carry the factor exp(-N_T - N_R) of their own receiver, so
every coefficient below is a true probability and no exp(+N) factor appears.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import Pdtc, average
from .chsh import SIGNAL_FLOOR, CoincidenceTable, NoSignalError
from .detectors import DetectorBank, DetectorMode, DetectorParams

__all__ = [
    "DetectorParams", "DetectorBank", "DetectorMode", "MixtureWeights", "SourcePhase",
    "NoSignalWarning", "mixture_weights", "s_parameter", "correlation_equal", "visibility",
    "SiteResponse", "site_response", "SiteOperator", "site_operator",
    "e_0", "e_bell", "e_h_a", "e_v_a", "e_h_b", "e_v_b",
    "p_0", "p_bell", "p_h_a", "p_v_a", "p_h_b", "p_v_b",
    "general_correlation", "GeneralCorrelation", "coincidence_table",
]


class NoSignalWarning(RuntimeWarning):
    """Emitted when a normalisation denominator vanishes and zero is returned instead."""


@dataclass(frozen=True)
class SourcePhase:
    phi: float = math.pi


@dataclass(frozen=True)
class MixtureWeights:
    """Weights of vacuum, the four single-photon states and the surviving Bell state."""

    p0: float
    p_ha: float
    p_va: float
    p_hb: float
    p_vb: float
    p_bell: float

    def __post_init__(self):
        values = self.as_tuple()
        if any(v < -1e-15 or v > 1 + 1e-12 for v in values):
            raise ValueError(f"weights outside [0, 1]: {values}")
        if abs(sum(values) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {sum(values)!r}, not 1")

    @property
    def p1(self) -> float:
        """Total single-photon weight."""
        return self.p_ha + self.p_va + self.p_hb + self.p_vb

    def as_tuple(self) -> tuple[float, ...]:
        return self.p0, self.p_ha, self.p_va, self.p_hb, self.p_vb, self.p_bell

    @classmethod
    def from_transmissions(cls, eta_a: float, eta_b: float) -> "MixtureWeights":
        return cls((1 - eta_a) * (1 - eta_b), 0.5 * eta_a * (1 - eta_b), 0.5 * eta_a * (1 - eta_b),
                   0.5 * eta_b * (1 - eta_a), 0.5 * eta_b * (1 - eta_a), eta_a * eta_b)


def mixture_weights(pdtc: Pdtc) -> MixtureWeights:
    """PDTC-averaged mixture weights."""
    def block(a, b):
        return np.stack([(1 - a) * (1 - b), a * (1 - b), b * (1 - a), a * b], axis=-1)

    p0, one_a, one_b, bell = np.asarray(average(pdtc, block), dtype=float)
    # remove rounding drift so the weights sum to one
    p0 = 1.0 - one_a - one_b - bell
    return MixtureWeights(p0, 0.5 * one_a, 0.5 * one_a, 0.5 * one_b, 0.5 * one_b, bell)


def _equal_detector_terms(eta_c: float, n_nc: float, mode) -> tuple[float, float, float]:
    """(contrast per photon, click sum per photon, click per vacuum), common factors removed."""
    mode = DetectorMode.parse(mode)
    # on/off detectors behave like PNR ones with N replaced by 1 - e^{-N}
    noise = -math.expm1(-n_nc) if mode is DetectorMode.ON_OFF else n_nc
    alpha = eta_c
    gamma = eta_c + 2.0 * (1.0 - eta_c) * noise
    return alpha, gamma, noise


def s_parameter(weights: MixtureWeights, eta_c: float, n_nc: float, mode="pnr") -> float:
    """Contrast factor S of the equal-detector correlation coefficient.

    S = p_B a^2 / (p_B g^2 + 2 p_1 v g + 4 p_0 v^2), where for one photon a is
    the T-minus-R postselected contrast, g the T-plus-R postselected click
    probability, and v the single-detector noise click probability on vacuum.
    Returns 0 with a :class:`NoSignalWarning` if the denominator vanishes.
    """
    alpha, gamma, v = _equal_detector_terms(eta_c, n_nc, mode)
    num = weights.p_bell * alpha * alpha
    den = weights.p_bell * gamma * gamma + 2.0 * weights.p1 * v * gamma + 4.0 * weights.p0 * v * v
    if den <= 0.0:
        warnings.warn("no signal: S-parameter denominator vanishes", NoSignalWarning, stacklevel=2)
        return 0.0
    return num / den


def correlation_equal(theta_a, theta_b, phi, s):
    """Equal-detector correlation S[-cos2a cos2b + cos(phi) sin2a sin2b]."""
    return s * (-np.cos(2 * theta_a) * np.cos(2 * theta_b)
                + np.cos(phi) * np.sin(2 * theta_a) * np.sin(2 * theta_b))


def visibility(s: float, phi: float) -> float:
    """Correlation at theta_A = theta_B = pi/4."""
    return s * math.cos(phi)


# ---------------------------------------------------------------- general detectors

@dataclass(frozen=True)
class SiteResponse:
    """Postselected single-click probabilities at one receiver.

    ``vac_t`` is P(only T clicks | vacuum); ``hit_t`` is P(only T clicks | one
    photon in T); ``miss_t`` is P(only T clicks | one photon in R). The R
    fields are the mirror images.
    """

    vac_t: float
    vac_r: float
    hit_t: float
    hit_r: float
    miss_t: float
    miss_r: float


def site_response(t: DetectorParams, r: DetectorParams, mode) -> SiteResponse:
    mode = DetectorMode.parse(mode)
    dark_t = math.exp(-t.noise)
    dark_r = math.exp(-r.noise)
    if mode is DetectorMode.PNR:
        vac_t = t.noise * dark_t * dark_r
        vac_r = r.noise * dark_t * dark_r
        hit_t = (t.eta + (1 - t.eta) * t.noise) * dark_t * dark_r
        hit_r = (r.eta + (1 - r.eta) * r.noise) * dark_t * dark_r
    else:
        fire_t = -math.expm1(-t.noise)
        fire_r = -math.expm1(-r.noise)
        vac_t = fire_t * dark_r
        vac_r = fire_r * dark_t
        hit_t = (1.0 - (1.0 - t.eta) * dark_t) * dark_r
        hit_r = (1.0 - (1.0 - r.eta) * dark_r) * dark_t
    return SiteResponse(vac_t, vac_r, hit_t, hit_r, vac_t * (1 - r.eta), vac_r * (1 - t.eta))


@dataclass(frozen=True)
class SiteOperator:
    """Matrix elements of a receiver operator on {vacuum, |H>, |V>}."""

    vac: float
    hh: float
    vv: float
    hv: float


def site_operator(resp: SiteResponse, theta: float, sign: int) -> SiteOperator:
    """M_T + sign * M_R in the H/V basis of the analyzer at angle ``theta``.

    With |H> = c|T> - s|R> and |V> = s|T> + c|R>, an operator diagonal in
    (T, R) with entries (x_t, x_r) has <H|.|H> = x_t c^2 + x_r s^2,
    <V|.|V> = x_t s^2 + x_r c^2 and <H|.|V> = (x_t - x_r) s c.
    """
    c, s = math.cos(theta), math.sin(theta)
    x_t = resp.hit_t + sign * resp.miss_r      # photon in T
    x_r = resp.miss_t + sign * resp.hit_r      # photon in R
    return SiteOperator(resp.vac_t + sign * resp.vac_r,
                        x_t * c * c + x_r * s * s,
                        x_t * s * s + x_r * c * c,
                        (x_t - x_r) * s * c)


def _sites(bank: DetectorBank, theta_a: float, theta_b: float, sign: int):
    ra = site_response(bank.t_a, bank.r_a, bank.mode)
    rb = site_response(bank.t_b, bank.r_b, bank.mode)
    return site_operator(ra, theta_a, sign), site_operator(rb, theta_b, sign)


def _bell_term(a: SiteOperator, b: SiteOperator, phi: float) -> float:
    # state (|H_A V_B> + e^{i phi}|V_A H_B>)/sqrt(2); operator elements are real
    return 0.5 * (a.hh * b.vv + a.vv * b.hh + 2.0 * math.cos(phi) * a.hv * b.hv)


def e_0(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, -1)
    return a.vac * b.vac


def e_bell(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, -1)
    return _bell_term(a, b, phi)


def e_h_a(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, -1)
    return a.hh * b.vac


def e_v_a(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, -1)
    return a.vv * b.vac


def e_h_b(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, -1)
    return a.vac * b.hh


def e_v_b(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, -1)
    return a.vac * b.vv


def p_0(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, +1)
    return a.vac * b.vac


def p_bell(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, +1)
    return _bell_term(a, b, phi)


def p_h_a(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, +1)
    return a.hh * b.vac


def p_v_a(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, +1)
    return a.vv * b.vac


def p_h_b(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, +1)
    return a.vac * b.hh


def p_v_b(bank, theta_a, theta_b, phi=math.pi):
    a, b = _sites(bank, theta_a, theta_b, +1)
    return a.vac * b.vv


def _weighted(weights: MixtureWeights, bank, theta_a, theta_b, phi, sign: int) -> float:
    a, b = _sites(bank, theta_a, theta_b, sign)
    return (weights.p_bell * _bell_term(a, b, phi)
            + weights.p_ha * a.hh * b.vac + weights.p_va * a.vv * b.vac
            + weights.p_hb * a.vac * b.hh + weights.p_vb * a.vac * b.vv
            + weights.p0 * a.vac * b.vac)


class GeneralCorrelation(NamedTuple):
    value: float
    denominator: float


def general_correlation(bank: DetectorBank, weights: MixtureWeights, theta_a: float,
                        theta_b: float, phi: float = math.pi) -> GeneralCorrelation:
    """Correlation coefficient for four arbitrary detectors.

    ``denominator`` is the total postselected coincidence probability.
    Raises :class:`NoSignalError` when it is below 1e-30.
    """
    num = _weighted(weights, bank, theta_a, theta_b, phi, -1)
    den = _weighted(weights, bank, theta_a, theta_b, phi, +1)
    if den < SIGNAL_FLOOR:
        raise NoSignalError(f"coincidence probability {den:.3e} below {SIGNAL_FLOOR}")
    return GeneralCorrelation(num / den, den)


def coincidence_table(bank: DetectorBank, weights: MixtureWeights, theta_a: float,
                      theta_b: float, phi: float = math.pi) -> CoincidenceTable:
    """The four coincidence probabilities P_{iA,iB} of the mixture."""
    ra = site_response(bank.t_a, bank.r_a, bank.mode)
    rb = site_response(bank.t_b, bank.r_b, bank.mode)
    # single-outcome operators from the sum and difference operators
    sa, da = site_operator(ra, theta_a, +1), site_operator(ra, theta_a, -1)
    sb, db = site_operator(rb, theta_b, +1), site_operator(rb, theta_b, -1)

    def half(p: SiteOperator, q: SiteOperator, sign: int) -> SiteOperator:
        return SiteOperator(*(0.5 * (x + sign * y) for x, y in
                              zip((p.vac, p.hh, p.vv, p.hv), (q.vac, q.hh, q.vv, q.hv))))

    m = {("A", "T"): half(sa, da, +1), ("A", "R"): half(sa, da, -1),
         ("B", "T"): half(sb, db, +1), ("B", "R"): half(sb, db, -1)}

    def prob(ia: str, ib: str) -> float:
        a, b = m[("A", ia)], m[("B", ib)]
        value = (weights.p_bell * _bell_term(a, b, phi)
                 + weights.p_ha * a.hh * b.vac + weights.p_va * a.vv * b.vac
                 + weights.p_hb * a.vac * b.hh + weights.p_vb * a.vac * b.vv
                 + weights.p0 * a.vac * b.vac)
        return max(value, 0.0)

    return CoincidenceTable(prob("T", "T"), prob("R", "R"), prob("T", "R"), prob("R", "T"))
