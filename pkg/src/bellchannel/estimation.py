"""Reconstructing moments of the transmission distribution from coherent-probe photocounts.

Counts at each receiver are Poisson with a random mean eta_c * eta * |alpha|^2,
so the factorial moments of the counts are the raw moments of that mean:

    E[(n_A)_k (n_B)_l] = (eta_c |alpha_A|^2)^k (eta_c |alpha_B|^2)^l <eta_A^k eta_B^l>,

with (n)_k = n (n - 1) ... (n - k + 1). Factorial moments are obtained from
raw count moments through Stirling numbers of the first kind.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .channel import Pdtc, sample, spawn_rngs

__all__ = [
    "ProbeConfig", "CountRecord", "CountRecords", "IllConditionedWarning",
    "simulate_photocounts", "count_moments", "raw_count_moments",
    "stirling_first", "factorial_moments", "pdtc_moments_from_counts",
    "pdtc_moments_from_raw", "CHUNK", "MIN_EXPECTED_COUNTS",
]

CHUNK = 1 << 18
MIN_EXPECTED_COUNTS = 100.0


class IllConditionedWarning(RuntimeWarning):
    """Too few expected counts for a stable moment inversion."""


@dataclass(frozen=True)
class ProbeConfig:
    """Coherent probe: mean photon numbers per arm, receiver efficiency, shots, seed."""

    alpha_a_sq: float
    alpha_b_sq: float
    eta_c: float
    shots: int
    seed: int = 0

    def __post_init__(self):
        if self.alpha_a_sq < 0 or self.alpha_b_sq < 0:
            raise ValueError("|alpha|^2 must be nonnegative")
        if not 0.0 <= self.eta_c <= 1.0:
            raise ValueError("eta_c must lie in [0, 1]")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")

    def scale(self, arm: str) -> float:
        """eta_c |alpha|^2 for arm 'a' or 'b'."""
        return self.eta_c * (self.alpha_a_sq if arm == "a" else self.alpha_b_sq)


@dataclass(frozen=True)
class CountRecord:
    n_a: int
    n_b: int


class CountRecords(Sequence[CountRecord]):
    """Columnar, read-only sequence of count records."""

    def __init__(self, n_a, n_b):
        self.n_a = np.asarray(n_a, dtype=np.int64)
        self.n_b = np.asarray(n_b, dtype=np.int64)
        if self.n_a.shape != self.n_b.shape or self.n_a.ndim != 1:
            raise ValueError("count columns must be 1-D and of equal length")
        self.n_a.setflags(write=False)
        self.n_b.setflags(write=False)

    @classmethod
    def coerce(cls, records) -> "CountRecords":
        if isinstance(records, CountRecords):
            return records
        records = list(records)
        return cls([r.n_a for r in records], [r.n_b for r in records])

    def __len__(self) -> int:
        return int(self.n_a.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CountRecords(self.n_a[i], self.n_b[i])
        return CountRecord(int(self.n_a[i]), int(self.n_b[i]))


def simulate_photocounts(probe: ProbeConfig, pdtc: Pdtc) -> CountRecords:
    """Simulate ``probe.shots`` joint photocount records.

    Each shot draws a transmission pair, then independent Poisson counts with
    means eta_c * eta_A |alpha_A|^2 and eta_c * eta_B |alpha_B|^2. Shots are
    generated in fixed-size chunks, each on its own stream split from
    ``probe.seed``, so the output is reproducible.
    """
    n_chunks = -(-probe.shots // CHUNK)
    streams = spawn_rngs(probe.seed, n_chunks)
    cols_a, cols_b = [], []
    for k, rng in enumerate(streams):
        size = min(CHUNK, probe.shots - k * CHUNK)
        eta_a, eta_b = sample(pdtc, size, rng)
        cols_a.append(rng.poisson(probe.scale("a") * eta_a))
        cols_b.append(rng.poisson(probe.scale("b") * eta_b))
    return CountRecords(np.concatenate(cols_a), np.concatenate(cols_b))


def count_moments(records, n: int, m: int) -> float:
    """Sample mean of n_A^n n_B^m."""
    recs = CountRecords.coerce(records)
    if len(recs) == 0:
        raise ValueError("no count records")
    if n < 0 or m < 0:
        raise ValueError("moment orders must be nonnegative")
    a = recs.n_a.astype(float)
    b = recs.n_b.astype(float)
    return float(np.mean(a ** n * b ** m))


def raw_count_moments(records, max_order: int) -> dict[tuple[int, int], float]:
    """All sample moments n_A^i n_B^j with i + j <= max_order."""
    return {(i, j): count_moments(records, i, j)
            for i in range(max_order + 1) for j in range(max_order + 1 - i)}


@lru_cache(maxsize=None)
def stirling_first(k: int) -> tuple[int, ...]:
    """Signed Stirling numbers s(k, j), j = 0..k: (x)_k = sum_j s(k, j) x^j."""
    coeffs = [1]
    for i in range(k):
        # multiply the polynomial by (x - i)
        nxt = [0] * (len(coeffs) + 1)
        for j, c in enumerate(coeffs):
            nxt[j + 1] += c
            nxt[j] -= i * c
        coeffs = nxt
    return tuple(coeffs)


def factorial_moments(raw: Mapping[tuple[int, int], float], max_order: int) -> dict[tuple[int, int], float]:
    """E[(n_A)_k (n_B)_l] for k + l <= max_order from raw moments."""
    out = {}
    for k in range(max_order + 1):
        for l in range(max_order + 1 - k):
            sk, sl = stirling_first(k), stirling_first(l)
            out[(k, l)] = float(sum(sk[i] * sl[j] * raw[(i, j)]
                                    for i in range(k + 1) for j in range(l + 1)
                                    if sk[i] and sl[j]))
    return out


def pdtc_moments_from_raw(raw: Mapping[tuple[int, int], float], probe: ProbeConfig,
                          max_order: int = 2, shots: int | None = None) -> dict[tuple[int, int], float]:
    """Invert raw count moments to <eta_A^k eta_B^l> for k + l <= max_order.

    Moments that involve an arm with zero probe intensity are omitted. When
    ``shots`` is given, a :class:`IllConditionedWarning` is issued for any arm
    whose expected total count is below :data:`MIN_EXPECTED_COUNTS`.
    """
    fact = factorial_moments(raw, max_order)
    scale_a, scale_b = probe.scale("a"), probe.scale("b")
    if shots is not None:
        for arm, key in (("A", (1, 0)), ("B", (0, 1))):
            expected = fact.get(key, 0.0) * shots
            if (probe.alpha_a_sq if arm == "A" else probe.alpha_b_sq) > 0 and expected < MIN_EXPECTED_COUNTS:
                warnings.warn(f"arm {arm}: only {expected:.3g} expected counts; moment inversion is "
                              "ill-conditioned", IllConditionedWarning, stacklevel=3)
    out = {}
    for (k, l), value in fact.items():
        if (k and scale_a == 0) or (l and scale_b == 0):
            continue
        out[(k, l)] = value / (scale_a ** k * scale_b ** l)
    return out


def pdtc_moments_from_counts(records, probe: ProbeConfig,
                             max_order: int = 2) -> dict[tuple[int, int], float]:
    """Estimate <eta_A^k eta_B^l> from photocount records.

    Keys are ``(k, l)``; e.g. ``(1, 0)`` is <eta_A> = mean(n_A) / (eta_c |alpha_A|^2)
    and ``(2, 0)`` is <eta_A^2> = (mean(n_A^2) - mean(n_A)) / (eta_c |alpha_A|^2)^2.
    """
    recs = CountRecords.coerce(records)
    if len(recs) == 0:
        raise ValueError("no count records")
    raw = raw_count_moments(recs, max_order)
    return pdtc_moments_from_raw(raw, probe, max_order, shots=len(recs))

