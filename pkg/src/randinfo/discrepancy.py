"""Local discrepancy of convex test sets and constructive lower bounds.

Test sets live in the unit cube.  Counting conventions at the boundary:
halfspaces and axis boxes are closed, slabs and balls are open.  Points within
``BOUNDARY_TOL`` of a boundary are treated as lying on it, so that lattice
points sitting exactly on a hyperplane are classified consistently despite
rounding.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DimensionMismatch, NumericalFailure, UnsupportedKind, ZeroNormal
from .lattice import IntegrationLattice, dual_shortest
from .pointset import MCEstimate, PointSet
from .rng import RngStream, as_generator

BOUNDARY_TOL = 1e-12
DEFAULT_VOLUME_SAMPLES = 1 << 14


def ball_volume(d: int, r: float = 1.0) -> float:
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(1 + d / 2)) * r**d


def halfspace_cube_volume(a, b: float) -> float:
    """Exact volume of ``{x in [0,1]^d : <a, x> <= b}``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if not np.any(a != 0):
        raise ZeroNormal("normal vector is zero")
    a = a[a != 0]
    # reflect x_i -> 1 - x_i on negative components
    b = float(b) - float(a[a < 0].sum())
    a = np.abs(a)
    total = float(a.sum())
    if b <= 0:
        return 0.0
    if b >= total:
        return 1.0
    d = len(a)
    acc = 0.0
    for size in range(d + 1):
        sign = -1.0 if size % 2 else 1.0
        for S in itertools.combinations(range(d), size):
            rem = b - sum(a[i] for i in S)
            if rem > 0:
                acc += sign * rem**d
    vol = acc / (math.factorial(d) * float(np.prod(a)))
    return min(1.0, max(0.0, vol))


class ConvexTestSet:
    kind: str = ""

    def contains(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_volume(self) -> float | None:
        return None

    def params(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, **self.params()})


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True, eq=False)
class HalfspaceCut(ConvexTestSet):
    """Closed halfspace ``<a, x> <= b``."""

    a: np.ndarray
    b: float
    kind = "halfspace_cut"

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        if not np.any(self.a != 0):
            raise ZeroNormal("normal vector is zero")

    def contains(self, X):
        return X @ self.a <= self.b + BOUNDARY_TOL * np.abs(self.a).sum()

    def exact_volume(self):
        return halfspace_cube_volume(self.a, self.b)

    def params(self):
        return {"a": self.a.tolist(), "b": float(self.b)}


@dataclass(frozen=True, eq=False)
class Slab(ConvexTestSet):
    """Open slab ``b_lo < <a, x> < b_hi``."""

    a: np.ndarray
    b_lo: float
    b_hi: float
    kind = "slab"

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        if not np.any(self.a != 0):
            raise ZeroNormal("normal vector is zero")
        if not self.b_lo < self.b_hi:
            raise ValueError("slab needs b_lo < b_hi")

    def contains(self, X):
        t = X @ self.a
        tol = BOUNDARY_TOL * np.abs(self.a).sum()
        return (t > self.b_lo + tol) & (t < self.b_hi - tol)

    def exact_volume(self):
        return max(0.0, halfspace_cube_volume(self.a, self.b_hi) - halfspace_cube_volume(self.a, self.b_lo))

    def width(self) -> float:
        return (self.b_hi - self.b_lo) / float(np.linalg.norm(self.a))

    def params(self):
        return {"a": self.a.tolist(), "b_lo": float(self.b_lo), "b_hi": float(self.b_hi)}


@dataclass(frozen=True, eq=False)
class Ball(ConvexTestSet):
    """Open Euclidean ball."""

    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def contains(self, X):
        return np.linalg.norm(X - self.center, axis=1) < self.radius * (1 - BOUNDARY_TOL)

    def inside_cube(self) -> bool:
        return bool(np.all(self.center - self.radius >= 0) and np.all(self.center + self.radius <= 1))

    def exact_volume(self):
        return ball_volume(len(self.center), self.radius) if self.inside_cube() else None

    def distance_outside(self, X):
        return np.maximum(np.linalg.norm(X - self.center, axis=1) - self.radius, 0.0)

    def depth_inside(self, X):
        return np.maximum(self.radius - np.linalg.norm(X - self.center, axis=1), 0.0)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def params(self):
        return {"center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class AxisBox(ConvexTestSet):
    """Closed box ``lo <= x <= hi`` (componentwise)."""

    lo: np.ndarray
    hi: np.ndarray
    kind = "axis_box"

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))
        if self.lo.shape != self.hi.shape or not np.all(self.lo < self.hi):
            raise ValueError("box needs lo < hi componentwise")

    def contains(self, X):
        return np.all((X >= self.lo - BOUNDARY_TOL) & (X <= self.hi + BOUNDARY_TOL), axis=1)

    def exact_volume(self):
        return float(np.prod(np.clip(self.hi, 0, 1) - np.clip(self.lo, 0, 1)))

    def distance_outside(self, X):
        gap = np.maximum(np.maximum(self.lo - X, X - self.hi), 0.0)
        return np.linalg.norm(gap, axis=1)

    def depth_inside(self, X):
        depth = np.minimum(X - self.lo, self.hi - X).min(axis=1)
        return np.maximum(depth, 0.0)

    def bounding_box(self):
        return self.lo, self.hi

    def params(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class DiscrepancyWitness:
    set: ConvexTestSet
    count_fraction: float
    volume: float
    volume_error: float = 0.0
    value: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "value", abs(self.count_fraction - self.volume))

    def to_json(self) -> str:
        return json.dumps(
            {
                "set": json.loads(self.set.to_json()),
                "count_fraction": self.count_fraction,
                "volume": self.volume,
                "volume_error": self.volume_error,
                "value": self.value,
            }
        )


def _clipped_ball_volume(K: Ball, sample_count: int, rng) -> tuple[float, float]:
    """Monte Carlo volume of ``K ∩ [0,1]^d`` and a three-sigma half-width."""
    lo = np.clip(K.center - K.radius, 0, 1)
    hi = np.clip(K.center + K.radius, 0, 1)
    box = float(np.prod(hi - lo))
    if box == 0.0:
        return 0.0, 0.0
    X = lo + (hi - lo) * as_generator(rng).random((sample_count, len(lo)))
    p = float(np.mean(np.linalg.norm(X - K.center, axis=1) < K.radius))
    return box * p, 3.0 * box * math.sqrt(p * (1 - p) / sample_count)


def local_discrepancy(P: PointSet, K: ConvexTestSet, sample_count: int = DEFAULT_VOLUME_SAMPLES, rng=0) -> DiscrepancyWitness:
    """``|#(P ∩ K)/n - vol(K)|`` for one test set.

    Volumes are exact except for balls sticking out of the cube, where the
    reported ``volume_error`` is a three-standard-error half-width.
    """
    X = P.points
    dims = {"halfspace_cut": lambda: len(K.a), "slab": lambda: len(K.a), "ball": lambda: len(K.center)}
    kdim = dims.get(K.kind, lambda: len(K.lo))()
    if kdim != P.dim:
        raise DimensionMismatch(f"test set dim {kdim} != point dim {P.dim}")
    frac = float(np.count_nonzero(K.contains(X))) / len(P)
    vol = K.exact_volume()
    err = 0.0
    if vol is None:
        vol, err = _clipped_ball_volume(K, sample_count, rng)
    return DiscrepancyWitness(K, frac, vol, err)


def dual_slab_witness(L: IntegrationLattice) -> Slab:
    """Open slab between the two lattice hyperplanes enclosing the cube center."""
    h = dual_shortest(L).vector
    c = 0.5 * float(h.sum())
    k0 = math.floor(c + 1e-12)
    slab = Slab(h, float(k0), float(k0 + 1))
    if np.any(slab.contains(L.point_set().points)):
        raise NumericalFailure("dual slab contains lattice points")
    return slab


# search


def _unit_vector(gen: np.random.Generator, d: int) -> np.ndarray:
    v = gen.standard_normal(d)
    while not np.any(v):
        v = gen.standard_normal(d)
    return v / np.linalg.norm(v)


def _projection_range(a: np.ndarray) -> tuple[float, float]:
    return float(np.minimum(a, 0).sum()), float(np.maximum(a, 0).sum())


def _candidates(P: PointSet, gen: np.random.Generator, family: int, probes: int):
    """Test sets for one slot of the search; anchored variants pass through data points."""
    X = P.points
    n, d = X.shape
    anchored = gen.random() < 0.5
    if family == 0:
        a = _unit_vector(gen, d)
        if anchored:
            b = float(X[gen.integers(n)] @ a)
            return [HalfspaceCut(a, b), HalfspaceCut(a, b - 1e-9)]
        lo, hi = _projection_range(a)
        return [HalfspaceCut(a, lo + (hi - lo) * gen.random())]
    if family == 1:
        a = _unit_vector(gen, d)
        if anchored:
            t = np.sort(X[gen.integers(n, size=2)] @ a)
        else:
            lo, hi = _projection_range(a)
            t = np.sort(lo + (hi - lo) * gen.random(2))
        if t[1] - t[0] <= 1e-9:
            return []
        return [Slab(a, float(t[0]), float(t[1]))]
    if family == 2:
        Y = gen.random((probes, d))
        dist = P.distances(Y)
        j = int(np.argmax(dist))
        if dist[j] <= 0:
            return []
        return [Ball(Y[j], float(dist[j]))]
    if anchored:
        if gen.random() < 0.5:
            hi = X[gen.integers(n)]
            lo = np.zeros(d)
        else:
            pair = X[gen.integers(n, size=2)]
            lo, hi = pair.min(axis=0), pair.max(axis=0)
        if np.any(hi <= lo):
            return []
        out = [AxisBox(lo, hi)]
        inner_lo, inner_hi = lo + 1e-9 * (lo > 0), hi - 1e-9
        if np.all(inner_lo < inner_hi):
            out.append(AxisBox(inner_lo, inner_hi))
        return out
    corners = np.sort(gen.random((2, d)), axis=0)
    if np.any(corners[1] <= corners[0]):
        return []
    return [AxisBox(corners[0], corners[1])]


def iso_lower_search(P: PointSet, budget: int, rng=0, volume_samples: int = DEFAULT_VOLUME_SAMPLES, probes: int = 64) -> DiscrepancyWitness:
    """Best local discrepancy over a seeded stream of candidate test sets.

    Candidate ``i`` depends only on the base stream and ``i``, so a larger
    budget explores a superset and never returns a smaller value.  Families
    rotate through halfspaces, slabs, balls around the emptiest probe, and
    axis boxes.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    base = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    best: DiscrepancyWitness | None = None
    for i in range(budget):
        stream = base.child(i)
        gen = stream.generator()
        for K in _candidates(P, gen, i % 4, probes):
            w = local_discrepancy(P, K, volume_samples, stream.child(0))
            if best is None or w.value > best.value:
                best = w
    if best is None:
        # every candidate was degenerate; the whole cube is always valid
        best = local_discrepancy(P, AxisBox(np.zeros(P.dim), np.ones(P.dim)))
    return best


# neighborhood volumes


def neighborhood_volume(K: ConvexTestSet, rho: float, side: str, sample_count: int, rng) -> MCEstimate:
    """Monte Carlo volume of the outer (``dist(x, K) in (0, rho]``) or inner
    (``x in K`` within ``rho`` of the complement) shell of a ball or box."""
    if K.kind not in ("ball", "axis_box"):
        raise UnsupportedKind(f"neighborhood volume is not available for {K.kind}")
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    if side not in ("inner", "outer"):
        raise ValueError("side must be 'inner' or 'outer'")
    if rho == 0:
        return MCEstimate(0.0, 0.0)
    lo, hi = K.bounding_box()
    if side == "outer":
        lo, hi = lo - rho, hi + rho
    box = float(np.prod(hi - lo))
    X = lo + (hi - lo) * as_generator(rng).random((sample_count, len(lo)))
    if side == "outer":
        dist = K.distance_outside(X)
        hit = (dist > 0) & (dist <= rho)
    else:
        depth = K.depth_inside(X)
        hit = (depth > 0) & (depth <= rho)
    p = float(np.mean(hit))
    return MCEstimate(box * p, box * math.sqrt(p * (1 - p) / sample_count))


def kappa_sum(d: int) -> tuple[float, float]:
    """``sum_{j=1}^d C(d,j) vol(B^j)`` and its log-gap to ``1.5 (2 pi)^(1/3) d^(2/3)``."""
    if d < 1:
        raise ValueError("d must be positive")
    j = np.arange(1, d + 1)
    log_terms = gammaln(d + 1) - gammaln(j + 1) - gammaln(d - j + 1) + 0.5 * j * math.log(math.pi) - gammaln(1 + j / 2)
    log_sum = float(logsumexp(log_terms))
    gap = log_sum - 1.5 * (2 * math.pi) ** (1 / 3) * d ** (2 / 3)
    total = math.exp(log_sum) if log_sum < 700 else math.inf
    return total, gap

