"""Detector parameters shared by the Bell-state, PDC and oracle code."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class DetectorMode(enum.Enum):
    """Photon-number-resolving detectors or click (on/off) detectors."""

    PNR = "pnr"
    ON_OFF = "onoff"

    @classmethod
    def parse(cls, value: "str | DetectorMode") -> "DetectorMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("/", "").replace("-", "").replace("_", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown detector mode {value!r}; expected 'pnr' or 'onoff'")


@dataclass(frozen=True)
class DetectorParams:
    """Efficiency ``eta`` and mean noise counts ``noise`` per measurement window."""

    eta: float
    noise: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"detector efficiency {self.eta} outside [0, 1]")
        if self.noise < 0.0:
            raise ValueError(f"noise counts {self.noise} must be nonnegative")


@dataclass(frozen=True)
class DetectorBank:
    """The four detectors behind the two analyzers.

    ``t_a``/``r_a`` sit on the transmitted and reflected ports at receiver A,
    ``t_b``/``r_b`` likewise at receiver B.
    """

    t_a: DetectorParams
    r_a: DetectorParams
    t_b: DetectorParams
    r_b: DetectorParams
    mode: DetectorMode = DetectorMode.PNR

    def __post_init__(self):
        object.__setattr__(self, "mode", DetectorMode.parse(self.mode))

    @classmethod
    def equal(cls, eta: float, noise: float, mode="pnr") -> "DetectorBank":
        d = DetectorParams(eta, noise)
        return cls(d, d, d, d, DetectorMode.parse(mode))

    @property
    def detectors(self) -> tuple[DetectorParams, DetectorParams, DetectorParams, DetectorParams]:
        """Detectors in mode order (T_A, R_A, T_B, R_B)."""
        return self.t_a, self.r_a, self.t_b, self.r_b

    @property
    def total_noise(self) -> float:
        return sum(d.noise for d in self.detectors)

    def with_mode(self, mode) -> "DetectorBank":
        return DetectorBank(self.t_a, self.r_a, self.t_b, self.r_b, DetectorMode.parse(mode))

    def swapped(self) -> "DetectorBank":
        """Exchange the roles of receivers A and B."""
        return DetectorBank(self.t_b, self.r_b, self.t_a, self.r_a, self.mode)
