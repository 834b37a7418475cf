"""Weighted cubature rules on the unit cube and their Hölder worst-case error.

The fooling function ``dist(., P)^s`` vanishes on every node, so any rule
assigns it zero; its integral is therefore a lower bound for every rule with
nodes ``P`` and, up to a constant, the error of the Voronoi-weighted rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ZeroSum
from .pointset import PointSet, distortion_integral, uniform_samples, voronoi_weights
from .rng import as_generator


@dataclass(frozen=True, eq=False)
class CubatureRule:
    points: PointSet
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size != len(self.points):
            raise ValueError("weights must align with points")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def to_json(self) -> str:
        return json.dumps({"points": self.points.points.tolist(), "weights": self.weights.tolist()})

    @classmethod
    def from_json(cls, text: str, torus: bool = False) -> "CubatureRule":
        data = json.loads(text)
        return cls(PointSet(data["points"], torus), data["weights"])


def equal_weight_rule(P: PointSet) -> CubatureRule:
    n = len(P)
    return CubatureRule(P, np.full(n, 1.0 / n))


def voronoi_rule(P: PointSet, sample_count: int, rng) -> CubatureRule:
    return CubatureRule(P, voronoi_weights(P, sample_count, rng))


def normalize_weights(rule: CubatureRule) -> CubatureRule:
    """Divide by the weight sum, so constants are integrated exactly."""
    total = float(np.sum(rule.weights))
    if total == 0.0:
        raise ZeroSum("weights sum to zero")
    return CubatureRule(rule.points, rule.weights / total)


def apply_rule(rule: CubatureRule, f: Callable) -> float:
    """``sum_i a_i f(x_i)``; ``f`` maps an ``(n, d)`` array to ``n`` values."""
    values = np.asarray(f(rule.points.points), dtype=float).ravel()
    return float(rule.weights @ values)


def holder_wce(P: PointSet, s: float, sample_count: int, rng) -> float:
    """Monte Carlo ``∫ dist(x, P)^s dx``, the Hölder-s worst-case error up to constants."""
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    return distortion_integral(P, s, uniform_samples(P.dim, sample_count, rng)).value


def fooling_gap(rule: CubatureRule, s: float, sample_count: int, rng) -> float:
    """``|∫ f* - Q(f*)|`` for ``f* = dist(., P)^s``; the rule term is exactly zero."""
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    P = rule.points
    integral = distortion_integral(P, s, uniform_samples(P.dim, sample_count, rng)).value
    quadrature = apply_rule(rule, lambda X: P.distances(X) ** s)
    return abs(integral - quadrature)


def mc_integrate(f: Callable, n: int, rng, dim: int = 1) -> tuple[float, float]:
    """Plain Monte Carlo mean of ``f`` over the cube with its standard error."""
    if n < 2:
        raise ValueError("n must be at least 2")
    values = np.asarray(f(as_generator(rng).random((n, dim))), dtype=float).ravel()
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n))
