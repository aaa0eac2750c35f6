"""Brute-force reference: truncated four-mode Fock space and direct density-operator algebra.

Mode order is (H_A, V_A, H_B, V_B) before the analyzers and (T_A, R_A, T_B, R_B)
after them. A density operator on the truncated space is stored as an
eight-index array ``rho[k1, k2, k3, k4, b1, b2, b3, b4]`` (four ket indices,
then four bra indices), each running over ``0..n_max``.

Two evaluation routes are provided:

* the dense route (:func:`apply_loss`, :func:`rotate_analyzer`,
  :func:`click_probability`) works on the full density operator and is meant
  for small truncations;
* the pure-state route (:func:`pair_probabilities`) exploits that the sources
  are pure and that loss is polarization independent at each receiver, so it
  commutes with the analyzer rotation and folds into the detector efficiency.
  Only the photon-number distribution of the rotated pure state is needed,
  which makes ``n_max = 14`` cheap. The two routes are cross-checked in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .channel import Pdtc, make_rng, sample
from .chsh import CoincidenceTable
from .detectors import DetectorBank, DetectorMode

__all__ = [
    "FockState4", "BellSource", "PdcSource", "build_bell_state", "build_pdc_state",
    "pdc_tail", "kraus_operators", "apply_loss", "rotation_tensor", "rotate_analyzer",
    "povm_diagonal", "click_factor", "click_probability", "pair_probabilities",
    "coincidence_table", "averaged_statistics", "AveragedTable", "PAIRS", "MODES",
]

MODES = ("H_A", "V_A", "H_B", "V_B")
PAIRS = ("TT", "RR", "TR", "RT")
POISSON_TAIL = 1e-15


@dataclass(frozen=True)
class FockState4:
    """Pure four-mode state truncated at ``n_max`` photons per mode."""

    n_max: int
    amplitudes: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.n_max + 1,) * 4:
            raise ValueError(f"amplitudes must have shape {(self.n_max + 1,) * 4}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def density(self) -> np.ndarray:
        psi = self.amplitudes
        return np.multiply.outer(psi, psi.conj())


def build_bell_state(phi: float, n_max: int = 1) -> FockState4:
    """(|1001> + e^{i phi}|0110>)/sqrt(2) in (H_A, V_A, H_B, V_B) order."""
    amps = np.zeros((n_max + 1,) * 4, dtype=complex)
    amps[1, 0, 0, 1] = 1 / math.sqrt(2)
    amps[0, 1, 1, 0] = np.exp(1j * phi) / math.sqrt(2)
    return FockState4(n_max, amps)


def pdc_tail(tanh_chi: float, n_max: int) -> float:
    """Probability of more than ``n_max`` pairs: sum over n > n_max of (n+1) x^n (1-x)^2, x = tanh^2."""
    x = tanh_chi ** 2
    return (n_max + 2) * x ** (n_max + 1) - (n_max + 1) * x ** (n_max + 2)


def build_pdc_state(tanh_chi: float, phi: float, n_max: int) -> FockState4:
    """Down-conversion state with amplitude (1 - t^2) t^n e^{i phi m} on |n-m, m, m, n-m>, n <= n_max."""
    if not 0.0 <= tanh_chi < 1.0:
        raise ValueError("tanh_chi must lie in [0, 1)")
    amps = np.zeros((n_max + 1,) * 4, dtype=complex)
    scale = 1.0 - tanh_chi ** 2
    for n in range(n_max + 1):
        for m in range(n + 1):
            amps[n - m, m, m, n - m] = scale * tanh_chi ** n * np.exp(1j * phi * m)
    return FockState4(n_max, amps, pdc_tail(tanh_chi, n_max))


@dataclass(frozen=True)
class BellSource:
    phi: float = math.pi

    def state(self, n_max: int = 1) -> FockState4:
        return build_bell_state(self.phi, n_max)

    @property
    def n_max(self) -> int:
        return 1


@dataclass(frozen=True)
class PdcSource:
    tanh_chi: float
    phi: float = math.pi
    n_max: int = 14

    def state(self, n_max: int | None = None) -> FockState4:
        return build_pdc_state(self.tanh_chi, self.phi, self.n_max if n_max is None else n_max)


Source = Union[BellSource, PdcSource]


# ---------------------------------------------------------------- loss

def kraus_operators(eta: float, dim: int) -> np.ndarray:
    """Pure-loss Kraus operators K_k[n-k, n] = sqrt(C(n,k) eta^(n-k) (1-eta)^k), k = 0..dim-1."""
    ops = np.zeros((dim, dim, dim))
    for k in range(dim):
        for n in range(k, dim):
            ops[k, n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
    return ops


def _apply_on_axis(rho: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    moved = np.tensordot(op, rho, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


def apply_loss(rho: np.ndarray, mode: int | str, eta: float) -> np.ndarray:
    """Single-mode pure-loss channel with power transmissivity ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    axis = MODES.index(mode) if isinstance(mode, str) else int(mode)
    dim = rho.shape[0]
    out = np.zeros_like(rho)
    for op in kraus_operators(eta, dim):
        if not op.any():
            continue
        out += _apply_on_axis(_apply_on_axis(rho, op, axis), op.conj(), axis + 4)
    return out


# ---------------------------------------------------------------- analyzers

@lru_cache(maxsize=64)
def _rotation_tensor(theta: float, dim: int) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    u = np.zeros((dim,) * 4)
    # a_H^dag = c a_T^dag - s a_R^dag,  a_V^dag = s a_T^dag + c a_R^dag
    for h in range(dim):
        for v in range(dim):
            if h + v >= dim:
                continue
            norm_in = math.sqrt(math.factorial(h) * math.factorial(v))
            for j in range(h + 1):
                a = math.comb(h, j) * c ** j * (-s) ** (h - j)
                if a == 0.0:
                    continue
                for k in range(v + 1):
                    b = math.comb(v, k) * s ** k * c ** (v - k)
                    t, r = j + k, h + v - j - k
                    u[t, r, h, v] += a * b * math.sqrt(math.factorial(t) * math.factorial(r)) / norm_in
    u.setflags(write=False)
    return u


def rotation_tensor(theta: float, dim: int) -> np.ndarray:
    """Site unitary U[t, r, h, v] mapping |h>_H|v>_V to the analyzer output modes.

    Exact on the subspace with at most ``dim - 1`` photons at the site, which
    is where both sources live.
    """
    return _rotation_tensor(float(theta), int(dim))


def rotate_analyzer(rho: np.ndarray, site: str, theta: float) -> np.ndarray:
    """Rotate the (H, V) mode pair of ``site`` ('A' or 'B') into (T, R)."""
    first = {"A": 0, "B": 2}[site.upper()]
    u = rotation_tensor(theta, rho.shape[0])
    letters = "abcdefgh"
    ket = list(letters)
    ket_out = ket.copy()
    ket_out[first], ket_out[first + 1] = "x", "y"
    sub = f"xy{ket[first]}{ket[first + 1]}"
    rho = np.einsum(f"{sub},{''.join(ket)}->{''.join(ket_out)}", u, rho)
    bra_out = ket.copy()
    bra_out[first + 4], bra_out[first + 5] = "x", "y"
    sub = f"xy{ket[first + 4]}{ket[first + 5]}"
    return np.einsum(f"{sub},{''.join(ket)}->{''.join(bra_out)}", u.conj(), rho)


def _rotate_pure(psi: np.ndarray, theta_a: float, theta_b: float) -> np.ndarray:
    dim = psi.shape[0]
    psi = np.einsum("xyab,abcd->xycd", rotation_tensor(theta_a, dim), psi)
    return np.einsum("xycd,abcd->abxy", rotation_tensor(theta_b, dim), psi)


# ---------------------------------------------------------------- detection

def povm_diagonal(eta, noise, m: int, dim: int) -> np.ndarray:
    """<n|Pi^(m)|n> for n = 0..dim-1 (last axis), broadcasting over ``eta`` and ``noise``.

    Pi^(m) counts m clicks from a Binomial(n, eta) signal convolved with
    Poisson(noise) background.
    """
    eta = np.asarray(eta, dtype=float)[..., None]
    noise = np.asarray(noise, dtype=float)[..., None]
    n = np.arange(dim)
    total = np.zeros(np.broadcast(eta, noise, n).shape)
    for k in range(0, m + 1):
        binom = np.array([math.comb(int(x), k) for x in n], dtype=float)
        with np.errstate(invalid="ignore"):
            sig = binom * eta ** k * np.where(n - k >= 0, (1.0 - eta) ** np.maximum(n - k, 0), 0.0)
        sig = np.where(n >= k, sig, 0.0)
        total = total + sig * noise ** (m - k) / math.factorial(m - k)
    return np.exp(-noise) * total


def click_factor(eta, noise, clicks: bool, mode: DetectorMode, dim: int) -> np.ndarray:
    """Diagonal of the operator for one detector clicking (or staying silent) under ``mode``."""
    mode = DetectorMode.parse(mode)
    eta = np.asarray(eta, dtype=float)[..., None]
    noise = np.asarray(noise, dtype=float)[..., None]
    n = np.arange(dim)
    # Pi^(0) = e^{-N} (1-eta)^n, written so that eta = 1, n = 0 gives exactly e^{-N}
    with np.errstate(divide="ignore", invalid="ignore"):
        log_dark = n * np.log1p(-np.minimum(eta, 1.0))
    log_dark = np.where(n == 0, 0.0, log_dark)
    if not clicks:
        return np.exp(-noise + log_dark)
    if mode is DetectorMode.ON_OFF:
        return -np.expm1(-noise + log_dark)
    return povm_diagonal(eta[..., 0], noise[..., 0], 1, dim)


_PAIR_CLICKS = {"TT": (0, 2), "RR": (1, 3), "TR": (0, 3), "RT": (1, 2)}


def click_probability(rho: np.ndarray, bank: DetectorBank, pattern: str,
                      mode: DetectorMode | None = None) -> float:
    """Postselected probability that exactly the two detectors in ``pattern`` click.

    ``rho`` must already be in the rotated (T_A, R_A, T_B, R_B) basis.
    ``pattern`` is one of 'TT', 'RR', 'TR', 'RT' (receiver A first).
    """
    mode = bank.mode if mode is None else DetectorMode.parse(mode)
    dim = rho.shape[0]
    diag = np.real(np.einsum("abcdabcd->abcd", rho))
    clicking = _PAIR_CLICKS[pattern.upper()]
    factors = [click_factor(d.eta, d.noise, i in clicking, mode, dim)
               for i, d in enumerate(bank.detectors)]
    return float(np.einsum("abcd,a,b,c,d->", diag, *factors))


def pair_probabilities(state: FockState4, bank: DetectorBank, eta_a, eta_b,
                       theta_a: float, theta_b: float,
                       mode: DetectorMode | None = None) -> np.ndarray:
    """Coincidence probabilities via the pure-state route, vectorised over transmissions.

    ``eta_a``/``eta_b`` are channel transmissions (scalars or equal-length
    arrays). Returns an array of shape ``(..., 4)`` ordered as :data:`PAIRS`.
    """
    mode = bank.mode if mode is None else DetectorMode.parse(mode)
    eta_a = np.atleast_1d(np.asarray(eta_a, dtype=float))
    eta_b = np.atleast_1d(np.asarray(eta_b, dtype=float))
    dim = state.dim
    prob = np.abs(_rotate_pure(state.amplitudes, theta_a, theta_b)) ** 2
    site = (eta_a, eta_a, eta_b, eta_b)
    on, off = [], []
    for det, t in zip(bank.detectors, site):
        omega = det.eta * t
        on.append(click_factor(omega, det.noise, True, mode, dim))
        off.append(click_factor(omega, det.noise, False, mode, dim))
    out = []
    for pattern in PAIRS:
        ia, ib = _PAIR_CLICKS[pattern]
        f = [on[i] if i in (ia, ib) else off[i] for i in range(4)]
        partial = np.einsum("abcd,sc,sd->sab", prob, f[2], f[3])
        out.append(np.einsum("sab,sa,sb->s", partial, f[0], f[1]))
    return np.stack(out, axis=-1)


def coincidence_table(source: Source, bank: DetectorBank, eta_a: float, eta_b: float,
                      theta_a: float, theta_b: float, *, dense: bool = False) -> CoincidenceTable:
    """Coincidence table at fixed transmissions, by either evaluation route."""
    state = source.state()
    if dense:
        rho = state.density()
        for axis, eta in enumerate((eta_a, eta_a, eta_b, eta_b)):
            rho = apply_loss(rho, axis, eta)
        rho = rotate_analyzer(rho, "A", theta_a)
        rho = rotate_analyzer(rho, "B", theta_b)
        values = [click_probability(rho, bank, p) for p in PAIRS]
    else:
        values = pair_probabilities(state, bank, eta_a, eta_b, theta_a, theta_b)[0]
    return CoincidenceTable(*(max(float(v), 0.0) for v in values))


@dataclass(frozen=True)
class AveragedTable:
    table: CoincidenceTable
    stderr: CoincidenceTable
    n_samples: int


def averaged_statistics(source: Source, bank: DetectorBank, pdtc: Pdtc,
                        theta_a: float, theta_b: float, n_samples: int, seed: int,
                        *, mode: DetectorMode | None = None,
                        chunk: int = 20000) -> AveragedTable:
    """Monte-Carlo average of the coincidence table over channel realisations.

    Transmission pairs come from :func:`channel.sample` driven by a Philox
    stream seeded with ``seed``; the same seed reproduces the table bit for bit.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if mode is not None:
        bank = bank.with_mode(mode)
    rng = make_rng(seed)
    state = source.state()
    # running mean and sum of squared deviations, merged chunk by chunk
    mean = np.zeros(4)
    m2 = np.zeros(4)
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        eta_a, eta_b = sample(pdtc, k, rng)
        probs = pair_probabilities(state, bank, eta_a, eta_b, theta_a, theta_b)
        c_mean = probs.mean(axis=0)
        c_m2 = ((probs - c_mean) ** 2).sum(axis=0)
        delta = c_mean - mean
        total = done + k
        mean = mean + delta * (k / total)
        m2 = m2 + c_m2 + delta ** 2 * (done * k / total)
        done = total
    if n_samples > 1:
        err = np.sqrt(m2 / (n_samples - 1) / n_samples)
    else:
        err = np.zeros(4)
    return AveragedTable(CoincidenceTable(*np.maximum(mean, 0.0)), CoincidenceTable(*err), n_samples)
