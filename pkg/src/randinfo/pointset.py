"""Finite point sets in the unit cube and their nearest-point geometry.

Everything here is driven by the distance function ``dist(x, P)``: covering
radius (its supremum), distortion (its L_gamma norm), separation and Voronoi
weights.  Nearest-point queries go through ``scipy.spatial.cKDTree``; on the
torus the tree's periodic ``boxsize`` handles the wraparound metric.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, GridTooLarge, HoleTooLarge, SinglePoint
from .rng import as_generator

GRID_NODE_CAP = 1 << 24
_CHUNK = 1 << 16


class PointSet:
    """Immutable set of distinct points in ``[0, 1)^dim``.

    ``torus=True`` switches every distance computation to the flat torus
    metric (coordinates compared modulo 1).
    """

    __slots__ = ("_points", "_torus", "_tree")

    def __init__(self, points, torus: bool = False, *, dim: int | None = None):
        arr = np.array(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("a point set needs at least one point")
        if dim is not None and arr.shape[1] != dim:
            raise DimensionMismatch(f"expected dim {dim}, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() >= 1.0:
            raise ValueError("coordinates must lie in [0, 1)")
        if len(np.unique(arr, axis=0)) != len(arr):
            raise ValueError("points must be pairwise distinct")
        arr.setflags(write=False)
        self._points = arr
        self._torus = bool(torus)
        self._tree = None

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    @property
    def torus(self) -> bool:
        return self._torus

    def __len__(self) -> int:
        return self._points.shape[0]

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)}, dim={self.dim}, torus={self.torus})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.torus == other.torus and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.torus, self._points.tobytes()))

    def with_torus(self, torus: bool) -> "PointSet":
        return PointSet(self._points, torus)

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self._points, boxsize=1.0 if self._torus else None)
        return self._tree

    def nearest(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Distances and indices of the nearest point for each row of ``X``.

        Exact two-way ties go to the lower index.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"query dim {X.shape[1]} != point dim {self.dim}")
        if self._torus:
            X = np.mod(X, 1.0)
            X[X >= 1.0] = 0.0
        if len(self) == 1:
            d, i = self.tree().query(X, k=1)
            return d, i
        d, i = self.tree().query(X, k=2)
        tie = d[:, 0] == d[:, 1]
        idx = np.where(tie, np.minimum(i[:, 0], i[:, 1]), i[:, 0])
        return d[:, 0], idx

    def distances(self, X: np.ndarray) -> np.ndarray:
        return self.nearest(X)[0]

    # serialization

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "torus": self.torus, "points": self._points.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "PointSet":
        data = json.loads(text)
        return cls(data["points"], bool(data.get("torus", False)), dim=int(data["dim"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self._points:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, torus: bool = False) -> "PointSet":
        rows = [[float(v) for v in row] for row in csv.reader(io.StringIO(text)) if row]
        return cls(rows, torus)


@dataclass(frozen=True)
class DistortionQuery:
    """Exponent, Monte Carlo sample size and seed for a distortion estimate."""

    gamma: float
    sample_count: int = 1 << 16
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")


class MCEstimate(NamedTuple):
    value: float
    stderr: float


class CoveringRadius(NamedTuple):
    estimate: float
    upper_bound: float


def _as_pointset(P) -> PointSet:
    return P if isinstance(P, PointSet) else PointSet(P)


def uniform_samples(dim: int, count: int, rng) -> np.ndarray:
    """``count`` uniform points of the unit cube from the given stream."""
    return as_generator(rng).random((count, dim))


# generators


def sample_uniform(dim: int, n: int, rng, torus: bool = False) -> PointSet:
    if dim < 1 or n < 1:
        raise ValueError("dim and n must be positive")
    return PointSet(as_generator(rng).random((n, dim)), torus)


def hole_radius(n: int, beta: float) -> float:
    return float(n) ** (-beta)


def planted_hole_points(dim: int, n: int, beta: float, rng) -> PointSet:
    """``n`` uniform points conditioned to avoid the ball of radius ``n**-beta``
    around the cube center."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    radius = hole_radius(n, beta)
    if radius >= 0.25:
        raise HoleTooLarge(f"hole radius {radius:.6g} >= 1/4 for n={n}, beta={beta}")
    gen = as_generator(rng)
    center = np.full(dim, 0.5)
    kept: list[np.ndarray] = []
    total = 0
    while total < n:
        batch = gen.random((max(64, 2 * (n - total)), dim))
        batch = batch[np.linalg.norm(batch - center, axis=1) >= radius]
        kept.append(batch)
        total += len(batch)
    return PointSet(np.concatenate(kept)[:n])


# distance function and derived quantities


def dist_to_set(x, P: PointSet) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != P.dim:
        raise DimensionMismatch(f"point has dim {x.shape[0]}, set has dim {P.dim}")
    return float(P.distances(x.reshape(1, -1))[0])


def _sorted_gaps_1d(P: PointSet) -> tuple[np.ndarray, np.ndarray]:
    """Interior gaps and the two end gaps (merged into one on the torus)."""
    x = np.sort(P.points[:, 0])
    inner = np.diff(x)
    if P.torus:
        return np.append(inner, 1.0 - x[-1] + x[0]), np.empty(0)
    return inner, np.array([x[0], 1.0 - x[-1]])


def covering_radius(P: PointSet, resolution: int = 257, cap: int = GRID_NODE_CAP) -> CoveringRadius:
    """Certified interval for ``sup_x dist(x, P)``.

    In one dimension the value is exact.  Otherwise ``dist`` is maximised over
    a regular grid; since ``dist`` is 1-Lipschitz, adding the half-diagonal of
    a grid cell gives an upper bound.
    """
    if P.dim == 1:
        inner, ends = _sorted_gaps_1d(P)
        h = float(max(inner.max(initial=0.0) / 2.0, ends.max(initial=0.0)))
        return CoveringRadius(h, h)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if resolution**P.dim > cap:
        raise GridTooLarge(f"{resolution}^{P.dim} grid nodes exceed cap {cap}")
    if P.torus:
        axis = np.arange(resolution) / resolution
        spacing = 1.0 / resolution
    else:
        axis = np.linspace(0.0, 1.0, resolution)
        spacing = 1.0 / (resolution - 1)
    best = 0.0
    for chunk in _grid_chunks(axis, P.dim):
        best = max(best, float(P.distances(chunk).max()))
    slack = 0.5 * spacing * math.sqrt(P.dim)
    return CoveringRadius(best, best + slack)


def _grid_chunks(axis: np.ndarray, dim: int) -> Iterable[np.ndarray]:
    # walk the tensor grid by fixing the leading coordinates
    tail_dims = 1
    while tail_dims < dim and len(axis) ** (tail_dims + 1) <= 1 << 20:
        tail_dims += 1
    tail = np.stack(np.meshgrid(*([axis] * tail_dims), indexing="ij"), -1).reshape(-1, tail_dims)
    lead_dims = dim - tail_dims
    if lead_dims == 0:
        yield tail
        return
    for lead in np.ndindex(*([len(axis)] * lead_dims)):
        head = np.broadcast_to(axis[list(lead)], (len(tail), lead_dims))
        yield np.hstack([head, tail])


def separation_distance(P: PointSet) -> float:
    if len(P) < 2:
        raise SinglePoint("separation needs at least two points")
    d, _ = P.tree().query(P.points, k=2)
    return 0.5 * float(d[:, 1].min())


def distortion_integral(P: PointSet, gamma: float, samples: np.ndarray) -> MCEstimate:
    """Sample mean of ``dist(x, P)**gamma`` over the given samples."""
    total = 0.0
    total_sq = 0.0
    count = len(samples)
    for start in range(0, count, _CHUNK):
        v = P.distances(samples[start : start + _CHUNK]) ** gamma
        total += float(v.sum())
        total_sq += float(np.dot(v, v))
    mean = total / count
    if count < 2:
        return MCEstimate(mean, math.inf)
    var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    return MCEstimate(mean, math.sqrt(var / count))


def exact_distortion_1d(P: PointSet, gamma: float) -> float:
    """Closed form of ``(∫ dist^gamma)^(1/gamma)`` on [0,1] (or the circle)."""
    if P.dim != 1:
        raise DimensionMismatch("exact path is one-dimensional only")
    inner, ends = _sorted_gaps_1d(P)
    if math.isinf(gamma):
        return covering_radius(P).estimate
    g1 = gamma + 1.0
    integral = float(np.sum(2.0 * (inner / 2.0) ** g1) + np.sum(ends**g1)) / g1
    return integral ** (1.0 / gamma)


def distortion_estimate(P: PointSet, q: DistortionQuery) -> MCEstimate:
    """Monte Carlo ``(∫ dist^gamma)^(1/gamma)`` with a delta-method standard error."""
    if math.isinf(q.gamma):
        return MCEstimate(covering_radius(P, _default_resolution(P.dim)).estimate, 0.0)
    samples = uniform_samples(P.dim, q.sample_count, q.seed)
    mean, se = distortion_integral(P, q.gamma, samples)
    value = mean ** (1.0 / q.gamma)
    if mean == 0.0:
        return MCEstimate(0.0, 0.0)
    return MCEstimate(value, value * se / (q.gamma * mean))


def distortion(P: PointSet, q: DistortionQuery, exact_1d: bool = False) -> float:
    if exact_1d:
        return exact_distortion_1d(P, q.gamma)
    return distortion_estimate(P, q).value


def _default_resolution(dim: int) -> int:
    return max(2, int(round((1 << 20) ** (1.0 / dim))))


def voronoi_weights(P: PointSet, sample_count: int, rng) -> np.ndarray:
    """Fraction of uniform samples falling in each point's nearest-point cell."""
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    gen = as_generator(rng)
    counts = np.zeros(len(P), dtype=np.int64)
    for start in range(0, sample_count, _CHUNK):
        m = min(_CHUNK, sample_count - start)
        _, idx = P.nearest(gen.random((m, P.dim)))
        counts += np.bincount(idx, minlength=len(P))
    return counts / sample_count


def grid_points(m: int, dim: int, centered: bool = False, torus: bool = False) -> PointSet:
    """The grid ``(1/m) Z^dim`` inside the cube, optionally shifted to cell centers."""
    axis = (np.arange(m) + (0.5 if centered else 0.0)) / m
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), -1).reshape(-1, dim)
    return PointSet(pts, torus)


def weights_to_json(weights: Sequence[float]) -> str:
    return json.dumps([float(w) for w in weights])
