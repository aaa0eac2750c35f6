"""Coincidence probabilities for a parametric down-conversion source.

The normally ordered generating function of the lossy, rotated PDC state is

    < :exp(-sum_k Omega_k n_k): > = (1 - t^2)^4 / C0(Omega),   t = tanh(chi),

where Omega_k is the product of detector efficiency and channel transmission
for output mode k, and C0 is multilinear in the four Omegas. The remaining
coefficients are derivatives of C0:

    C_i  = -Omega_i dC0/dOmega_i,
    C_ij = Omega_i Omega_j d^2 C0 / dOmega_i dOmega_j,

so that C0 + C_i is C0 evaluated at Omega_i = 0 and C0 + C_i + C_j + C_ij is
C0 at Omega_i = Omega_j = 0. Detection probabilities follow by
differentiating (PNR) or by inclusion-exclusion over click events (on/off).

Pairs are labelled by the clicking detectors, receiver A first:
'TT', 'RR', 'TR', 'RT'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import Dirac, LogNormal, Pdtc, TransmissionSample, average
from .chsh import CoincidenceTable
from .detectors import DetectorBank, DetectorMode
from .quadrature import integrate

__all__ = [
    "SqueezingParam", "Omegas", "DCoefficients", "PdcCoefficients", "PAIRS",
    "omegas", "d_coefficients", "c_coefficients_general", "c_coefficients_correlated",
    "pair_brackets", "coincidence_probability", "coincidence_table",
    "CorrelatedPdcModel", "PdcDomainError",
]

PAIRS = ("TT", "RR", "TR", "RT")
# (index of clicking detector at A, at B) in (T_A, R_A, T_B, R_B) order
_PAIR_INDEX = {"TT": (0, 2), "RR": (1, 3), "TR": (0, 3), "RT": (1, 2)}


class PdcDomainError(ValueError):
    """C0 is not positive: the parameters leave the physical region."""


@dataclass(frozen=True)
class SqueezingParam:
    tanh_chi: float

    def __post_init__(self):
        if not 0.0 <= self.tanh_chi < 1.0:
            raise ValueError("tanh_chi must lie in [0, 1)")

    @property
    def chi(self) -> float:
        return math.atanh(self.tanh_chi)


class Omegas(NamedTuple):
    ta: float
    ra: float
    tb: float
    rb: float


class DCoefficients(NamedTuple):
    tt: float
    tr: float
    rr: float
    rt: float
    d0: float


@dataclass(frozen=True)
class PdcCoefficients:
    """Omega, D and C coefficients for one transmission realisation.

    ``c_tr`` pairs T_A with R_B and ``c_rt`` pairs R_A with T_B.
    """

    omega_ta: float
    omega_ra: float
    omega_tb: float
    omega_rb: float
    d_tt: float
    d_tr: float
    d_rr: float
    d_rt: float
    d0: float
    c0: float
    c_ta: float
    c_ra: float
    c_tb: float
    c_rb: float
    c_tt: float
    c_tr: float
    c_rt: float
    c_rr: float

    def single(self, pair: str) -> tuple[float, float]:
        """(C_{i_A}, C_{i_B}) for a click pair."""
        ia, ib = pair.upper()
        return (self.c_ta if ia == "T" else self.c_ra), (self.c_tb if ib == "T" else self.c_rb)

    def joint(self, pair: str) -> float:
        return {"TT": self.c_tt, "TR": self.c_tr, "RT": self.c_rt, "RR": self.c_rr}[pair.upper()]


def omegas(bank: DetectorBank, t: TransmissionSample) -> Omegas:
    """Products of detector efficiency and channel transmission per output mode."""
    return Omegas(bank.t_a.eta * t.eta_a, bank.r_a.eta * t.eta_a,
                  bank.t_b.eta * t.eta_b, bank.r_b.eta * t.eta_b)


def d_coefficients(om, theta_a, theta_b, phi, tanh_chi) -> DCoefficients:
    """The D coefficients; broadcasts over array-valued Omegas."""
    o_ta, o_ra, o_tb, o_rb = om
    t2 = tanh_chi * tanh_chi
    ca, sa = np.cos(theta_a), np.sin(theta_a)
    cb, sb = np.cos(theta_b), np.sin(theta_b)
    ph = np.exp(-1j * phi)
    d_tt = o_ra * o_rb * t2 * abs(ph * sa * cb + ca * sb) ** 2
    d_tr = o_ra * o_tb * t2 * abs(ph * sa * sb - ca * cb) ** 2
    d_rr = o_ta * o_tb * t2 * abs(-ph * ca * sb - sa * cb) ** 2
    d_rt = o_ta * o_rb * t2 * abs(-ph * ca * cb + sa * sb) ** 2
    d0 = o_ta * o_ra * o_tb * o_rb * t2 * t2
    return DCoefficients(d_tt, d_tr, d_rr, d_rt, d0)


def _c0(om, d: DCoefficients, t2):
    o_ta, o_ra, o_tb, o_rb = om
    b_ta, b_ra = 1 + (o_ta - 1) * t2, 1 + (o_ra - 1) * t2
    b_tb, b_rb = 1 + (o_tb - 1) * t2, 1 + (o_rb - 1) * t2
    return (b_ta * b_ra * b_tb * b_rb - b_ta * b_tb * d.tt - b_ta * b_rb * d.tr
            - b_ra * b_rb * d.rr - b_ra * b_tb * d.rt + d.d0)


def c_coefficients_general(om, d: DCoefficients, tanh_chi) -> PdcCoefficients:
    """All nine C coefficients; each bracket 1 + (Omega - 1) t^2 is formed once.

    Broadcasts over array-valued Omegas (the fields are then arrays).
    """
    o_ta, o_ra, o_tb, o_rb = om
    t2 = tanh_chi * tanh_chi
    t4 = t2 * t2
    b_ta, b_ra = 1 + (o_ta - 1) * t2, 1 + (o_ra - 1) * t2
    b_tb, b_rb = 1 + (o_tb - 1) * t2, 1 + (o_rb - 1) * t2

    c0 = (b_ta * b_ra * b_tb * b_rb - b_ta * b_tb * d.tt - b_ta * b_rb * d.tr
          - b_ra * b_rb * d.rr - b_ra * b_tb * d.rt + d.d0)

    c_ta = (-o_ta * t2 * b_ra * b_tb * b_rb + o_ta * t2 * b_tb * d.tt + o_ta * t2 * b_rb * d.tr
            + b_ra * b_rb * d.rr + b_ra * b_tb * d.rt - d.d0)
    c_ra = (-o_ra * t2 * b_ta * b_tb * b_rb + b_ta * b_tb * d.tt + b_ta * b_rb * d.tr
            + o_ra * t2 * b_rb * d.rr + o_ra * t2 * b_tb * d.rt - d.d0)
    c_tb = (-o_tb * t2 * b_ta * b_ra * b_rb + o_tb * t2 * b_ta * d.tt + b_ta * b_rb * d.tr
            + b_ra * b_rb * d.rr + o_tb * t2 * b_ra * d.rt - d.d0)
    c_rb = (-o_rb * t2 * b_ta * b_ra * b_tb + b_ta * b_tb * d.tt + o_rb * t2 * b_ta * d.tr
            + o_rb * t2 * b_ra * d.rr + b_ra * b_tb * d.rt - d.d0)

    c_tt = (o_ta * o_tb * t4 * b_ra * b_rb - o_ta * o_tb * t4 * d.tt - o_ta * t2 * b_rb * d.tr
            - b_ra * b_rb * d.rr - o_tb * t2 * b_ra * d.rt + d.d0)
    c_tr = (o_ta * o_rb * t4 * b_ra * b_tb - o_ta * t2 * b_tb * d.tt - o_ta * o_rb * t4 * d.tr
            - o_rb * t2 * b_ra * d.rr - b_ra * b_tb * d.rt + d.d0)
    c_rt = (o_ra * o_tb * t4 * b_ta * b_rb - o_tb * t2 * b_ta * d.tt - b_ta * b_rb * d.tr
            - o_ra * t2 * b_rb * d.rr - o_ra * o_tb * t4 * d.rt + d.d0)
    c_rr = (o_ra * o_rb * t4 * b_ta * b_tb - b_ta * b_tb * d.tt - o_rb * t2 * b_ta * d.tr
            - o_ra * o_rb * t4 * d.rr - o_ra * t2 * b_tb * d.rt + d.d0)

    return PdcCoefficients(o_ta, o_ra, o_tb, o_rb, d.tt, d.tr, d.rr, d.rt, d.d0,
                           c0, c_ta, c_ra, c_tb, c_rb, c_tt, c_tr, c_rt, c_rr)


def c_coefficients_correlated(eta, theta_a, theta_b, tanh_chi):
    """(C0, C_iA = C_iB, C_same, C_diff) for four equal Omegas = ``eta``.

    ``C_same`` is C_{T_A,T_B} = C_{R_A,R_B}; ``C_diff`` is C_{T_A,R_B} = C_{R_A,T_B}.
    These are the general coefficients at phi = pi.
    """
    t2 = tanh_chi * tanh_chi
    b = 1 + (eta - 1) * t2
    core = eta * eta * t2 - b * b
    c0 = core * core
    c1 = eta * (1 - eta) * (1 - t2) * t2 * core
    pref = eta * eta * t2 * (1 - t2) ** 2
    base = (1 - eta) ** 2 * t2
    s2 = np.sin(theta_a - theta_b) ** 2
    return c0, c1, pref * (base - s2), pref * (base - (1 - s2))


def _zeroed(om, index):
    om = list(om)
    for i in index:
        om[i] = np.zeros_like(np.asarray(om[i], dtype=float))
    return tuple(om)


def pair_brackets(bank: DetectorBank, eta_a, eta_b, theta_a, theta_b, phi, tanh_chi,
                  mode: DetectorMode | None = None) -> np.ndarray:
    """Per-realisation bracket for each click pair, shape ``(n, 4)`` in :data:`PAIRS` order.

    The coincidence probability is ``(1 - t^2)^4 exp(-N_total)`` times the
    PDTC average of this bracket.

    PNR:    2 C_a C_b / C0^3 - C_ab / C0^2 - N_a C_b / C0^2 - N_b C_a / C0^2 + N_a N_b / C0
    on/off: e^{N_a + N_b} X - e^{N_a} Y_a - e^{N_b} Y_b + Z,
            X = 1/C0(Om_a = Om_b = 0), Y_a = 1/C0(Om_a = 0), Y_b = 1/C0(Om_b = 0), Z = 1/C0,
    with the on/off form rearranged so that no large terms cancel.
    """
    mode = bank.mode if mode is None else DetectorMode.parse(mode)
    eta_a = np.atleast_1d(np.asarray(eta_a, dtype=float))
    eta_b = np.atleast_1d(np.asarray(eta_b, dtype=float))
    om = (bank.t_a.eta * eta_a, bank.r_a.eta * eta_a, bank.t_b.eta * eta_b, bank.r_b.eta * eta_b)
    t2 = tanh_chi * tanh_chi
    d = d_coefficients(om, theta_a, theta_b, phi, tanh_chi)
    cc = c_coefficients_general(om, d, tanh_chi)
    c0 = cc.c0
    if np.any(c0 <= 0):
        raise PdcDomainError("C0 must be positive")
    singles = (cc.c_ta, cc.c_ra, cc.c_tb, cc.c_rb)
    joints = {"TT": cc.c_tt, "RR": cc.c_rr, "TR": cc.c_tr, "RT": cc.c_rt}
    noise = [det.noise for det in bank.detectors]
    out = np.empty((eta_a.size, 4))
    for k, pair in enumerate(PAIRS):
        ia, ib = _PAIR_INDEX[pair]
        ca, cb, cab = singles[ia], singles[ib], joints[pair]
        na, nb = noise[ia], noise[ib]
        if mode is DetectorMode.PNR:
            out[:, k] = (2 * ca * cb / c0 ** 3 - cab / c0 ** 2
                         - (na * cb + nb * ca) / c0 ** 2 + na * nb / c0)
        else:
            # exact partial evaluations of C0 avoid summing C0 + C_a + ...
            ca0 = _c0(_zeroed(om, [ia]), d_coefficients(_zeroed(om, [ia]), theta_a, theta_b, phi, tanh_chi), t2)
            cb0 = _c0(_zeroed(om, [ib]), d_coefficients(_zeroed(om, [ib]), theta_a, theta_b, phi, tanh_chi), t2)
            both = _zeroed(om, [ia, ib])
            cab0 = _c0(both, d_coefficients(both, theta_a, theta_b, phi, tanh_chi), t2)
            x, ya, yb = 1 / cab0, 1 / ca0, 1 / cb0
            # X - Y_a - Y_b + Z written over a common denominator
            second = (ca * cb * (2 * c0 + ca + cb + cab) - c0 * c0 * cab) / (c0 * ca0 * cb0 * cab0)
            ea, eb = math.expm1(na), math.expm1(nb)
            out[:, k] = second + ea * (x - ya) + eb * (x - yb) + ea * eb * x
    return out


def _prefactor(bank: DetectorBank, tanh_chi: float) -> float:
    return (1 - tanh_chi ** 2) ** 4 * math.exp(-bank.total_noise)


def coincidence_table(bank: DetectorBank, pdtc: Pdtc, tanh_chi: float, theta_a: float,
                      theta_b: float, phi: float = math.pi,
                      mode: DetectorMode | None = None) -> CoincidenceTable:
    """All four coincidence probabilities, averaging the four brackets in one pass."""
    def block(a, b):
        return pair_brackets(bank, a, b, theta_a, theta_b, phi, tanh_chi, mode)

    values = _prefactor(bank, tanh_chi) * np.asarray(average(pdtc, block), dtype=float)
    return CoincidenceTable(*(max(float(v), 0.0) for v in values))


def coincidence_probability(bank: DetectorBank, pdtc: Pdtc, tanh_chi: float, theta_a: float,
                            theta_b: float, phi: float = math.pi, pair: str = "TT",
                            mode: DetectorMode | None = None) -> float:
    """Coincidence probability for one click pair."""
    pair = pair.upper()
    if pair not in PAIRS:
        raise ValueError(f"pair must be one of {PAIRS}")
    table = coincidence_table(bank, pdtc, tanh_chi, theta_a, theta_b, phi, mode)
    return {"TT": table.p_tt, "RR": table.p_rr, "TR": table.p_tr, "RT": table.p_rt}[pair]


class CorrelatedPdcModel:
    """Fast path for equal detectors behind a single shared channel realisation.

    The combined efficiency eta = eta_det * eta_atm is the only random
    quantity, and every coefficient depends on the angles only through
    s = sin^2(theta_A - theta_B) at phi = pi. PNR probabilities are affine in
    s, so two averages per squeezing value give E exactly. On/off
    probabilities are not, so a quadrature rule in theta = -ln(eta_atm) is
    built once (adaptively, against a few probe values of s) and reused for
    every angle pair.

    Instances are callables E(theta_a, theta_b) accepting numpy arrays.
    """

    def __init__(self, tanh_chi: float, pdtc: Pdtc, eta_c: float, noise: float,
                 mode="pnr", rtol: float = 1e-10):
        self.tanh_chi = float(tanh_chi)
        self.eta_c = float(eta_c)
        self.noise = float(noise)
        self.mode = DetectorMode.parse(mode)
        self.pdtc = pdtc
        self.rtol = rtol
        if isinstance(pdtc, LogNormal) and not pdtc.correlated:
            raise ValueError("the fast path needs a correlated channel")
        if self.mode is DetectorMode.PNR:
            self._u, self._w = self._pnr_coefficients()
        else:
            self._nodes, self._weights = self._onoff_rule()

    # common factor (1 - t^2)^4 e^{-4N} cancels in E and is dropped here
    def _brackets(self, eta, s):
        """Brackets for (same, different) click pairs; broadcasts eta against s."""
        t2 = self.tanh_chi ** 2
        n = self.noise
        b = 1 + (eta - 1) * t2
        core = eta * eta * t2 - b * b
        c0 = core * core
        c1 = eta * (1 - eta) * (1 - t2) * t2 * core
        pref = eta * eta * t2 * (1 - t2) ** 2
        base = (1 - eta) ** 2 * t2
        c_same = pref * (base - s)
        c_diff = pref * (base - (1 - s))
        if self.mode is DetectorMode.PNR:
            common = 2 * c1 * c1 / c0 ** 3 - 2 * n * c1 / c0 ** 2 + n * n / c0
            return common - c_same / c0 ** 2, common - c_diff / c0 ** 2
        # C0 with one or two of the clicking detectors' efficiencies set to zero
        b0 = 1 - t2
        one = -b0 * b * core
        ea = math.expm1(n)
        res = []
        for cab, overlap in ((c_same, s), (c_diff, 1 - s)):
            # only the D term pairing the two silent detectors survives
            two = b0 * b0 * (b * b - eta * eta * t2 * overlap)
            second = (c1 * c1 * (2 * c0 + 2 * c1 + cab) - c0 * c0 * cab) / (c0 * one * one * two)
            x, y = 1 / two, 1 / one
            res.append(second + 2 * ea * (x - y) + ea * ea * x)
        return tuple(res)

    def _average(self, f):
        return average(self.pdtc, lambda a, b: f(self.eta_c * a), rtol=self.rtol)

    def _pnr_coefficients(self):
        def block(eta):
            same0, _ = self._brackets(eta, 0.0)
            same1, _ = self._brackets(eta, 1.0)
            return np.stack([same0, same1 - same0], axis=-1)
        u, w = np.asarray(self._average(block), dtype=float)
        return u, w

    def _onoff_rule(self):
        pdtc = self.pdtc
        probes = np.array([0.0, 0.5, 1.0])
        if isinstance(pdtc, Dirac):
            return np.array([pdtc.eta_a]), np.array([1.0])
        if not isinstance(pdtc, LogNormal):
            a, _ = pdtc.arrays
            return a, np.full(a.size, 1.0 / a.size)
        lo, hi = pdtc.window

        def integrand(theta):
            eta = self.eta_c * np.exp(-theta)[:, None]
            same, diff = self._brackets(eta, probes[None, :])
            dens = pdtc.theta_density(theta)[:, None]
            return np.concatenate([same, diff], axis=1) * dens

        panels = max(8, int(math.ceil((hi - lo) / pdtc.sigma / 1.5)))
        _, _, rule = integrate(integrand, lo, hi, rtol=self.rtol, panels=panels, return_rule=True)
        nodes, weights = rule
        return np.exp(-nodes), weights * pdtc.theta_density(nodes)

    def probabilities(self, s) -> tuple[np.ndarray, np.ndarray]:
        """(P_TT, P_TR) up to the common prefactor, for s = sin^2(theta_A - theta_B)."""
        s = np.asarray(s, dtype=float)
        if self.mode is DetectorMode.PNR:
            return self._u + self._w * s, self._u + self._w * (1 - s)
        eta = self.eta_c * self._nodes
        same, diff = self._brackets(eta[:, None], s.reshape(1, -1))
        p_same = self._weights @ same
        p_diff = self._weights @ diff
        return p_same.reshape(s.shape), p_diff.reshape(s.shape)

    def __call__(self, theta_a, theta_b):
        s = np.sin(np.asarray(theta_a, dtype=float) - np.asarray(theta_b, dtype=float)) ** 2
        p_same, p_diff = self.probabilities(s)
        return (p_same - p_diff) / (p_same + p_diff)
