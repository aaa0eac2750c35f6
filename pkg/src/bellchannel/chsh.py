"""Correlation coefficients, the CHSH combination and its maximisation over analyzer angles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NoSignalError", "AngleSettings", "CoincidenceTable", "correlation",
    "bell_parameter", "bell_from_correlation", "maximize_bell", "BellOptimum",
    "GRID_POINTS", "SIGNAL_FLOOR",
]

SIGNAL_FLOOR = 1e-30
GRID_POINTS = 16


class NoSignalError(ArithmeticError):
    """The postselected coincidence probability is too small to normalise."""


def _reduce(angle: float) -> float:
    return float(np.mod(angle, math.pi))


@dataclass(frozen=True)
class AngleSettings:
    """Analyzer angles (a1, b1, a2, b2), stored modulo pi."""

    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "b1", "a2", "b2"):
            object.__setattr__(self, name, _reduce(getattr(self, name)))

    @property
    def pairs(self) -> tuple[tuple[float, float], ...]:
        """The four (theta_a, theta_b) pairs in the order (a1,b1), (a1,b2), (a2,b2), (a2,b1)."""
        return ((self.a1, self.b1), (self.a1, self.b2),
                (self.a2, self.b2), (self.a2, self.b1))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.a1, self.b1, self.a2, self.b2


@dataclass(frozen=True)
class CoincidenceTable:
    """Coincidence probabilities P_{iA,iB} for one pair of analyzer angles."""

    p_tt: float
    p_rr: float
    p_tr: float
    p_rt: float

    def __post_init__(self):
        for name in ("p_tt", "p_rr", "p_tr", "p_rt"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def same(self) -> float:
        return self.p_tt + self.p_rr

    @property
    def different(self) -> float:
        return self.p_tr + self.p_rt

    @property
    def total(self) -> float:
        return self.same + self.different


def correlation(table: CoincidenceTable) -> float:
    """Normalised contrast (P_same - P_diff) / (P_same + P_diff)."""
    total = table.total
    if total < SIGNAL_FLOOR:
        raise NoSignalError(f"coincidence probability {total:.3e} below {SIGNAL_FLOOR}")
    return (table.same - table.different) / total


def bell_from_correlation(e11: float, e12: float, e22: float, e21: float) -> float:
    """|E(a1,b1) - E(a1,b2)| + |E(a2,b2) + E(a2,b1)|."""
    return abs(e11 - e12) + abs(e22 + e21)


def bell_parameter(tables) -> float:
    """CHSH value from four tables ordered as :attr:`AngleSettings.pairs`."""
    tables = list(tables)
    if len(tables) != 4:
        raise ValueError("need exactly four coincidence tables")
    return bell_from_correlation(*(correlation(t) for t in tables))


@dataclass(frozen=True)
class BellOptimum:
    value: float
    settings: AngleSettings
    grid_value: float
    sweeps: int

    def __iter__(self):
        # unpacks as (B_max, argmax)
        return iter((self.value, self.settings))


def _vectorize(model):
    """Wrap a scalar E(theta_a, theta_b) so it accepts equal-shape arrays."""
    def evaluate(ta, tb):
        ta = np.asarray(ta, dtype=float)
        tb = np.asarray(tb, dtype=float)
        try:
            out = np.asarray(model(ta, tb), dtype=float)
            if out.shape == np.broadcast(ta, tb).shape:
                return out
        except (TypeError, ValueError):
            pass
        flat = [float(model(float(a), float(b))) for a, b in zip(ta.ravel(), tb.ravel())]
        return np.asarray(flat).reshape(np.broadcast(ta, tb).shape)
    return evaluate


def _zoom_max(f_many, centre, half, tol, points=33):
    """Maximise along one line by repeated vectorised grid zooms.

    ``f_many`` maps an array of positions to values. Each round samples
    ``points`` positions on [centre - half, centre + half] and recentres on
    the best one with the bracket shrunk to two sample spacings.
    """
    best_x, best_f = centre, None
    while True:
        xs = centre + np.linspace(-half, half, points)
        vals = f_many(xs)
        j = int(np.argmax(vals))
        if best_f is None or vals[j] > best_f:
            best_x, best_f = float(xs[j]), float(vals[j])
        centre = best_x
        half = 2.0 * half / (points - 1)
        if half < tol:
            return best_x, best_f


def _chsh_many(model, quads: np.ndarray) -> np.ndarray:
    """CHSH values for an (n, 4) array of angle quadruples."""
    a1, b1, a2, b2 = quads.T
    e = model(np.concatenate([a1, a1, a2, a2]), np.concatenate([b1, b2, b2, b1]))
    e11, e12, e22, e21 = np.split(np.asarray(e, dtype=float), 4)
    return np.abs(e11 - e12) + np.abs(e22 + e21)


def _refine(model, x, half, min_sweeps, max_sweeps, tol, angle_tol):
    value = float(_chsh_many(model, x[None, :])[0])
    sweeps = 0
    while sweeps < max_sweeps:
        before = value
        for k in range(4):
            def along(vs, k=k):
                quads = np.repeat(x[None, :], vs.size, axis=0)
                quads[:, k] = vs
                return _chsh_many(model, quads)
            arg, val = _zoom_max(along, x[k], half, angle_tol)
            if val > value:
                x[k], value = arg, val
        sweeps += 1
        if sweeps >= min_sweeps and value - before < tol:
            break
    return x, value, sweeps


def maximize_bell(model: Callable, *, grid: int = GRID_POINTS, min_sweeps: int = 3,
                  max_sweeps: int = 50, tol: float = 1e-8,
                  angle_tol: float = 1e-7) -> BellOptimum:
    """Maximise the CHSH value of a correlation model ``E(theta_a, theta_b)``.

    A ``grid`` x ``grid`` table of E on [0, pi)^2 seeds an exhaustive search
    over all ``grid**4`` angle quadruples. Two starts are then refined by
    coordinate ascent (a vectorised zooming line search per angle, at least
    ``min_sweeps`` sweeps, stopping once a sweep gains less than ``tol``):
    the best quadruple overall and the best one with a1 != a2 and b1 != b2.
    Quadruples with a repeated angle cannot exceed 2 and sit on plateaus
    where single-angle moves stall, so the second start matters whenever
    the optimum is only slightly above 2.

    ``model`` may be vectorised over numpy arrays; scalar models also work.
    The result unpacks as ``(B_max, AngleSettings)``.
    """
    evaluate = _vectorize(model)
    axis = np.arange(grid) * (math.pi / grid)
    ta, tb = np.meshgrid(axis, axis, indexing="ij")
    table = evaluate(ta, tb)  # table[i, j] = E(axis[i], axis[j])

    # B[i1, j1, i2, j2] = |E[i1,j1] - E[i1,j2]| + |E[i2,j2] + E[i2,j1]|
    left = np.abs(table[:, :, None] - table[:, None, :])   # (i1, j1, j2)
    right = np.abs(table[:, None, :] + table[:, :, None])  # (i2, j1, j2)
    starts = []
    for distinct in (False, True):
        combined_mask = np.ones((grid, grid), dtype=bool)
        if distinct:
            combined_mask &= ~np.eye(grid, dtype=bool)
        best_left = left.max(axis=0)
        # for a1 != a2 take the best and second-best a over each (j1, j2)
        order_r = np.argsort(-right, axis=0)
        i1 = left.argmax(axis=0)
        i2 = order_r[0]
        if distinct:
            clash = i2 == i1
            i2 = np.where(clash, order_r[1], i2)
        best_right = np.take_along_axis(right, i2[None], axis=0)[0]
        combined = np.where(combined_mask, best_left + best_right, -np.inf)
        j1, j2 = np.unravel_index(int(np.argmax(combined)), combined.shape)
        starts.append(np.array([axis[i1[j1, j2]], axis[j1], axis[i2[j1, j2]], axis[j2]]))
    grid_value = float(_chsh_many(evaluate, starts[0][None, :])[0])

    if np.array_equal(starts[0], starts[1]):
        starts.pop()
    best = None
    for x0 in starts:
        x, value, sweeps = _refine(evaluate, x0.copy(), math.pi / grid / 2.0,
                                   min_sweeps, max_sweeps, tol, angle_tol)
        if best is None or value > best[1]:
            best = (x, value, sweeps)
    x, value, sweeps = best
    return BellOptimum(value, AngleSettings(*x), grid_value, sweeps)
