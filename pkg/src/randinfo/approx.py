"""Moving least squares reconstruction from scattered function values.

For an evaluation point ``y`` the coefficients ``u_i(y)`` minimise
``sum u_i^2 / w_i`` subject to reproducing every polynomial of the chosen
degree, where ``w_i`` is a compactly supported bump of ``|y - x_i| / delta(y)``.
The scale ``delta(y)`` adapts to the local point density through the distance
to the k-th nearest point, k being the number of polynomial coefficients.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import NotEnoughPoints, SingularMoments
from .pointset import PointSet, uniform_samples

MAX_SCALE_RETRIES = 6
MOMENT_COND_LIMIT = 1e12


def wendland(r):
    """C^2 bump ``(1 - r)_+^4 (4 r + 1)``, equal to 1 at 0 and supported on [0, 1]."""
    r = np.asarray(r, dtype=float)
    t = np.clip(1.0 - r, 0.0, None)
    return t**4 * (4.0 * r + 1.0)


@dataclass(frozen=True)
class MLSConfig:
    degree: int = 2
    scale_multiplier: float = 2.0
    weight: Callable = wendland

    def __post_init__(self):
        if self.degree < 0 or int(self.degree) != self.degree:
            raise ValueError("degree must be a non-negative integer")
        if not self.scale_multiplier > 0:
            raise ValueError("scale_multiplier must be positive")


class ShapeFunctions(NamedTuple):
    """Coefficients ``u(y)`` as a dense vector, the scale used and ``sum |u_i|``."""

    coefficients: np.ndarray
    scale: float
    abs_sum: float


def polynomial_dimension(degree: int, dim: int) -> int:
    return math.comb(degree + dim, dim)


def monomial_exponents(degree: int, dim: int) -> np.ndarray:
    """Exponent vectors of all monomials of total degree at most ``degree``."""
    exps = [e for total in range(degree + 1) for e in _compositions(total, dim)]
    return np.array(exps, dtype=int).reshape(-1, dim)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _vandermonde(X: np.ndarray, exps: np.ndarray) -> np.ndarray:
    return np.prod(X[:, None, :] ** exps[None, :, :], axis=2)


def _coords(P) -> np.ndarray:
    if isinstance(P, PointSet):
        return P.points
    X = np.asarray(P, dtype=float)
    return X.reshape(-1, 1) if X.ndim == 1 else X


class _Neighbors:
    """Cached tree over the data sites."""

    def __init__(self, X: np.ndarray):
        self.X = X
        self.tree = cKDTree(X)


def _site_index(P) -> _Neighbors:
    return _Neighbors(_coords(P))


def local_scale(P, y, config: MLSConfig) -> float:
    """``multiplier * (distance from y to its k-th nearest site)``."""
    return _local_scale(_site_index(P), np.asarray(y, dtype=float).ravel(), config)


def _local_scale(nb: _Neighbors, y: np.ndarray, config: MLSConfig) -> float:
    k = polynomial_dimension(config.degree, nb.X.shape[1])
    if len(nb.X) < k:
        raise NotEnoughPoints(f"degree {config.degree} needs {k} points, got {len(nb.X)}")
    d, _ = nb.tree.query(y, k=[k])
    scale = config.scale_multiplier * float(d[0])
    if scale <= 0.0:
        # y coincides with the only needed site; any positive radius works
        scale = config.scale_multiplier * float(np.ptp(nb.X, axis=0).max() or 1.0)
    return scale


def mls_shape_functions(y, P, config: MLSConfig) -> ShapeFunctions:
    return _shape(_site_index(P), np.asarray(y, dtype=float).ravel(), config)


def _shape(nb: _Neighbors, y: np.ndarray, config: MLSConfig, retries: int = MAX_SCALE_RETRIES) -> ShapeFunctions:
    X = nb.X
    if X.shape[1] != y.size:
        raise ValueError("evaluation point has the wrong dimension")
    exps = monomial_exponents(config.degree, X.shape[1])
    scale = _local_scale(nb, y, config)
    for _ in range(retries + 1):
        idx = np.array(nb.tree.query_ball_point(y, scale), dtype=int)
        if idx.size:
            local = (X[idx] - y) / scale
            w = np.asarray(config.weight(np.linalg.norm(local, axis=1)), dtype=float)
            keep = w > 0
            idx, local, w = idx[keep], local[keep], w[keep]
        if idx.size >= len(exps):
            V = _vandermonde(local, exps)
            gram = V.T @ (w[:, None] * V)
            if np.linalg.cond(gram) < MOMENT_COND_LIMIT:
                # in local coordinates the monomials at y are (1, 0, ..., 0)
                rhs = np.zeros(len(exps))
                rhs[0] = 1.0
                lam = np.linalg.solve(gram, rhs)
                u = np.zeros(len(X))
                u[idx] = w * (V @ lam)
                return ShapeFunctions(u, scale, float(np.abs(u).sum()))
        scale *= 2.0
    raise SingularMoments(f"moment matrix singular at y={y.tolist()} after {retries} scale doublings")


def mls_evaluate(f_values, P, Y, config: MLSConfig) -> np.ndarray:
    """``S(f)(y) = sum_i f(x_i) u_i(y)`` for every row ``y`` of ``Y``."""
    nb = _site_index(P)
    f = np.asarray(f_values, dtype=float).ravel()
    if f.size != len(nb.X):
        raise ValueError("f_values must align with the data sites")
    Y = np.asarray(Y, dtype=float)
    Y = Y.reshape(-1, nb.X.shape[1])
    return np.array([_shape(nb, y, config).coefficients @ f for y in Y])


def lq_error(f: Callable, f_values, P, q: float, config: MLSConfig, sample_count: int, rng) -> float:
    """Monte Carlo ``||f - S(f)||_{L_q}`` over the cube; the sample maximum for ``q = inf``."""
    if not q > 0:
        raise ValueError("q must be positive")
    X = _coords(P)
    Y = uniform_samples(X.shape[1], sample_count, rng)
    err = np.abs(np.asarray(f(Y), dtype=float) - mls_evaluate(f_values, X, Y, config))
    if math.isinf(q):
        return float(err.max())
    return float(np.mean(err**q) ** (1.0 / q))


def write_values_csv(X, values) -> str:
    """Rows of point coordinates followed by the value."""
    X = _coords(X)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(X.shape[1])] + ["value"])
    for row, v in zip(X, np.asarray(values, dtype=float).ravel()):
        writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])
    return out.getvalue()


def read_values_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    return data[:, :-1], data[:, -1]
