"""Probability distributions of the channel power transmission and averages over them.

A distribution (PDTC) is one of three immutable variants:

* :class:`Dirac` -- a fixed transmission pair, i.e. an ordinary loss channel;
* :class:`LogNormal` -- ``theta = -ln(eta)`` is normal with mean ``theta_bar`` and
  standard deviation ``sigma``, truncated to ``eta <= 1`` and renormalised;
  ``correlated=True`` puts both arms on the same realisation;
* :class:`Empirical` -- a finite list of samples with equal weight.

Functionals passed to :func:`average` are vectorised: ``f(eta_a, eta_b)``
receives two equal-length arrays and returns one value per point, or an
``(n, k)`` block to average ``k`` functionals in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .quadrature import QuadratureError, integrate, panel_rule

__all__ = [
    "TransmissionSample", "Dirac", "LogNormal", "Empirical", "Pdtc",
    "QuadratureError", "log_normal_density", "average", "pdtc_moment",
    "sample", "make_rng", "spawn_rngs", "load_samples",
]

RTOL = 1e-10
WINDOW_SIGMAS = 12.0


@dataclass(frozen=True)
class TransmissionSample:
    eta_a: float
    eta_b: float

    def __post_init__(self):
        for name in ("eta_a", "eta_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class Dirac:
    eta_a: float
    eta_b: float

    def __post_init__(self):
        TransmissionSample(self.eta_a, self.eta_b)


@dataclass(frozen=True)
class LogNormal:
    theta_bar: float
    sigma: float
    correlated: bool = True

    def __post_init__(self):
        if not self.theta_bar > 0:
            raise ValueError("theta_bar must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def window(self) -> tuple[float, float]:
        """Integration window in ``theta``, clamped to ``theta >= 0``."""
        lo = max(0.0, self.theta_bar - WINDOW_SIGMAS * self.sigma)
        return lo, self.theta_bar + WINDOW_SIGMAS * self.sigma

    @property
    def mass(self) -> float:
        """Normal mass inside the window (the truncation renormaliser)."""
        lo, hi = self.window
        s = self.sigma * math.sqrt(2.0)
        # difference of upper tails keeps precision when both are tiny
        return 0.5 * (math.erfc((lo - self.theta_bar) / s)
                      - math.erfc((hi - self.theta_bar) / s))

    def theta_density(self, theta):
        """Truncated, renormalised density of ``theta = -ln eta`` on the window."""
        z = (np.asarray(theta) - self.theta_bar) / self.sigma
        return np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigma * self.mass)


@dataclass(frozen=True)
class Empirical:
    samples: tuple[TransmissionSample, ...]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("empirical distribution needs at least one sample")
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.array([s.eta_a for s in self.samples], dtype=float)
        b = np.array([s.eta_b for s in self.samples], dtype=float)
        return a, b


Pdtc = Union[Dirac, LogNormal, Empirical]
Functional = Callable[[np.ndarray, np.ndarray], np.ndarray]


def log_normal_density(eta: float, theta_bar: float, sigma: float) -> float:
    """Untruncated log-normal density of the transmission at ``eta``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    z = (math.log(eta) + theta_bar) / sigma
    return math.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * sigma * eta)


def _finish(values, scalar_hint):
    values = np.asarray(values, dtype=float)
    if scalar_hint:
        return float(values.reshape(-1)[0])
    return values


def average(pdtc: Pdtc, f: Functional, *, rtol: float = RTOL):
    """Ensemble average of ``f(eta_a, eta_b)`` over the distribution.

    Raises :class:`QuadratureError` if the adaptive rule cannot reach
    ``rtol`` within its subdivision budget.
    """
    if isinstance(pdtc, Dirac):
        raw = f(np.array([pdtc.eta_a]), np.array([pdtc.eta_b]))
        return _finish(np.asarray(raw, dtype=float).reshape(1, -1)[0], np.ndim(raw) <= 1)

    if isinstance(pdtc, Empirical):
        a, b = pdtc.arrays
        raw = np.asarray(f(a, b), dtype=float)
        scalar = raw.ndim <= 1
        return _finish(raw.reshape(a.size, -1).mean(axis=0), scalar)

    if isinstance(pdtc, LogNormal):
        lo, hi = pdtc.window
        if pdtc.correlated:
            def integrand(theta):
                eta = np.exp(-theta)
                vals = np.asarray(f(eta, eta), dtype=float)
                dens = pdtc.theta_density(theta)
                return vals * (dens if vals.ndim == 1 else dens[:, None])

            panels = max(8, int(math.ceil((hi - lo) / pdtc.sigma / 1.5)))
            value, _ = integrate(integrand, lo, hi, rtol=rtol, panels=panels)
            return value
        return _average_product(pdtc, f, rtol)

    raise TypeError(f"unsupported distribution {pdtc!r}")


def _average_product(pdtc: LogNormal, f: Functional, rtol: float, max_panels: int = 512):
    """Tensor product of two composite rules, refined by uniform panel doubling."""
    lo, hi = pdtc.window
    panels = max(8, int(math.ceil((hi - lo) / pdtc.sigma / 1.5)))
    previous = None
    while panels <= max_panels:
        nodes, weights = panel_rule(np.linspace(lo, hi, panels + 1))
        weights = weights * pdtc.theta_density(nodes)
        ta, tb = np.meshgrid(nodes, nodes, indexing="ij")
        raw = np.asarray(f(np.exp(-ta.ravel()), np.exp(-tb.ravel())), dtype=float)
        scalar = raw.ndim <= 1
        vals = raw.reshape(nodes.size, nodes.size, -1)
        w2 = np.outer(weights, weights)
        current = np.einsum("ijk,ij->k", vals, w2)
        scale = np.einsum("ijk,ij->k", np.abs(vals), w2)
        if previous is not None and np.all(np.abs(current - previous) <= rtol * scale):
            return _finish(current, scalar)
        previous = current
        panels *= 2
    raise QuadratureError("tensor-product rule did not converge")


def pdtc_moment(pdtc: Pdtc, n: int, m: int) -> float:
    """``<eta_a**n * eta_b**m>``; the (0, 0) moment is exactly one."""
    if n < 0 or m < 0:
        raise ValueError("moment orders must be nonnegative")
    if n == 0 and m == 0:
        return 1.0
    return average(pdtc, lambda a, b: a ** n * b ** m)


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based (Philox) generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent child streams split deterministically from a master seed."""
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def sample(pdtc: Pdtc, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` transmission pairs; log-normal draws with eta > 1 are rejected."""
    if isinstance(pdtc, Dirac):
        return np.full(size, pdtc.eta_a), np.full(size, pdtc.eta_b)
    if isinstance(pdtc, Empirical):
        a, b = pdtc.arrays
        idx = rng.integers(0, a.size, size)
        return a[idx], b[idx]
    if isinstance(pdtc, LogNormal):
        def draw(k):
            out = np.empty(0)
            while out.size < k:
                theta = rng.normal(pdtc.theta_bar, pdtc.sigma, k)
                out = np.concatenate([out, theta[theta >= 0.0]])
            return np.exp(-out[:k])

        a = draw(size)
        b = a.copy() if pdtc.correlated else draw(size)
        return a, b
    raise TypeError(f"unsupported distribution {pdtc!r}")


def load_samples(path: str | Path) -> Empirical:
    """Read a two-column text file of ``eta_a eta_b`` pairs."""
    data = np.loadtxt(path, ndmin=2, comments="#", delimiter=None)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    return Empirical(tuple(TransmissionSample(float(a), float(b)) for a, b in data))
