"""Integration lattices, LLL reduction and exact shortest vectors.

Bases are stored column-wise: ``basis[:, i]`` is the i-th basis vector, so a
lattice vector with integer coefficients ``c`` is ``basis @ c``.  The spectral
test of an integration lattice is the reciprocal length of the shortest
nonzero vector of its dual lattice; that vector is found by LLL reduction
followed by exhaustive enumeration, so the value is exact rather than an
LLL approximation.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionTooLarge,
    NearSingular,
    NumericalFailure,
    Overflow,
    PointCountMismatch,
)
from .pointset import PointSet
from .rng import as_generator

INTEGRALITY_TOL = 1e-9
MAX_CERTIFIED_DIM = 10
MAX_DIAMETER_DIM = 20
CONDITION_CAP = 1e12


class LatticeBasis:
    """A full-rank lattice given by the columns of a square matrix."""

    def __init__(self, basis):
        B = np.array(basis, dtype=float)
        if B.ndim == 0:
            B = B.reshape(1, 1)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError("basis must be a square matrix")
        if not np.all(np.isfinite(B)):
            raise ValueError("basis entries must be finite")
        if abs(np.linalg.det(B)) == 0.0 or np.linalg.matrix_rank(B) < B.shape[0]:
            raise ValueError("basis columns must be linearly independent")
        B.setflags(write=False)
        self._basis = B

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def dim(self) -> int:
        return self._basis.shape[0]

    @property
    def det(self) -> float:
        return abs(float(np.linalg.det(self._basis)))

    def column(self, i: int) -> np.ndarray:
        return self._basis[:, i]

    def to_json(self) -> str:
        return json.dumps(self._basis.tolist())

    @classmethod
    def from_json(cls, text: str) -> "LatticeBasis":
        return cls(json.loads(text))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class IntegrationLattice(LatticeBasis):
    """Lattice containing ``Z^d``; its points in the unit cube number ``n = 1/det``."""

    def __init__(self, basis, generator: Sequence[int] | None = None):
        super().__init__(basis)
        inv = np.linalg.inv(self._basis)
        if np.max(np.abs(inv - np.round(inv))) > INTEGRALITY_TOL * max(1.0, np.abs(inv).max()):
            raise ValueError("basis inverse is not integral, lattice does not contain Z^d")
        n_real = 1.0 / self.det
        n = int(round(n_real))
        if n < 1 or abs(n_real - n) > 1e-6 * n:
            raise ValueError("1/det is not a positive integer")
        self._n = n
        self._generator = None if generator is None else tuple(int(v) for v in generator)
        self._points: PointSet | None = None

    @property
    def n(self) -> int:
        return self._n

    @property
    def generator(self) -> tuple[int, ...] | None:
        return self._generator

    @classmethod
    def from_basis(cls, B: LatticeBasis) -> "IntegrationLattice":
        return cls(B.basis)

    def point_set(self, torus: bool = False) -> PointSet:
        if self._points is None:
            if self._generator is not None:
                pts = _rank1_points(self._n, self._generator)
            else:
                pts = _enumerate_points(self._basis, self._n)
            self._points = PointSet(pts)
        return self._points.with_torus(True) if torus else self._points


@dataclass(frozen=True)
class LLLParams:
    delta: float = 0.75

    def __post_init__(self):
        if not 0.25 < self.delta <= 1.0:
            raise ValueError("delta must lie in (1/4, 1]")


@dataclass(frozen=True)
class DualShortest:
    """Shortest nonzero lattice vector; ``certified`` means enumeration proved it."""

    vector: np.ndarray
    norm: float
    certified: bool


class HyperplaneWitness(NamedTuple):
    fraction: float
    level: int
    normal: np.ndarray


# constructions


def fibonacci_numbers(k: int) -> tuple[int, int]:
    """``(F_k, F_{k-1})`` with ``F_1 = F_2 = 1``."""
    prev, cur = 0, 1
    for _ in range(k - 1):
        prev, cur = cur, prev + cur
    return cur, prev


def fibonacci_lattice(k: int) -> tuple[IntegrationLattice, PointSet]:
    if k < 3:
        raise ValueError("k must be at least 3")
    F, F_prev = fibonacci_numbers(k)
    if F >= 1 << 63:
        raise Overflow(f"F_{k} exceeds the 64-bit range")
    B = np.array([[1.0 / F, 0.0], [F_prev / F, 1.0]])
    L = IntegrationLattice(B, generator=(1, F_prev))
    return L, L.point_set()


def rank1_lattice(n: int, z: Sequence[int]) -> tuple[IntegrationLattice, PointSet]:
    """Lattice generated by ``z/n`` and ``Z^d``, with its ``n``-point set."""
    if n < 1:
        raise ValueError("n must be positive")
    z = [int(v) for v in z]
    if not z:
        raise ValueError("generating vector must be non-empty")
    if n > 1 and any(math.gcd(v % n, n) != 1 for v in z):
        warnings.warn(f"generating vector {z} has components not coprime to n={n}", stacklevel=2)
    pts = _rank1_points(n, z)
    if len(np.unique(pts, axis=0)) < n:
        raise PointCountMismatch(f"z={z} yields fewer than n={n} distinct points")
    gens = [[v % n for v in z]] + [[n if i == j else 0 for j in range(len(z))] for i in range(len(z))]
    B = np.array(_integer_row_basis(gens, len(z)), dtype=float).T / n
    L = IntegrationLattice(B, generator=z)
    return L, L.point_set()


def _rank1_points(n: int, z: Sequence[int]) -> np.ndarray:
    i = np.arange(n, dtype=np.int64).reshape(-1, 1)
    zz = np.array([v % n for v in z], dtype=np.int64).reshape(1, -1)
    # (i * z) mod n without overflow for n below 2**31
    return ((i * zz) % n) / n


def _integer_row_basis(gens: list[list[int]], d: int) -> list[list[int]]:
    """Echelon basis of the integer span of ``gens`` (Euclid on each coordinate)."""
    vecs = [list(v) for v in gens if any(v)]
    basis = []
    for j in range(d):
        active = [v for v in vecs if v[j] != 0]
        rest = [v for v in vecs if v[j] == 0]
        while len(active) > 1:
            active.sort(key=lambda v: abs(v[j]))
            pivot = active[0]
            nxt = [pivot]
            for v in active[1:]:
                q = v[j] // pivot[j]
                w = [a - q * b for a, b in zip(v, pivot)]
                if w[j] != 0:
                    nxt.append(w)
                elif any(w):
                    rest.append(w)
            active = nxt
        if active:
            basis.append(active[0])
        vecs = rest
    return basis


def _enumerate_points(B: np.ndarray, n: int) -> np.ndarray:
    """All lattice points in ``[0,1)^d`` by scanning integer coefficient boxes."""
    d = B.shape[0]
    R = lll_reduce(LatticeBasis(B)).basis
    Rinv = np.linalg.inv(R)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d))).T
    coeffs = Rinv @ corners
    lo = np.floor(coeffs.min(axis=1) - 1e-9).astype(int)
    hi = np.ceil(coeffs.max(axis=1) + 1e-9).astype(int)
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    found = []
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, d)
    for start in range(0, len(grid), 1 << 16):
        C = grid[start : start + (1 << 16)]
        # n * (lattice vector) is an integer vector for an integration lattice
        K = np.rint((C @ R.T) * n).astype(np.int64)
        keep = np.all((K >= 0) & (K < n), axis=1)
        found.append(K[keep])
    K = np.unique(np.concatenate(found), axis=0)
    if len(K) != n:
        raise PointCountMismatch(f"enumerated {len(K)} points, expected {n}")
    return K / n


# duality and reduction


def dual_basis(B: LatticeBasis) -> LatticeBasis:
    cond = np.linalg.cond(B.basis)
    if not np.isfinite(cond) or cond > CONDITION_CAP:
        raise NearSingular(f"condition number {cond:.3g} exceeds {CONDITION_CAP:g}")
    return LatticeBasis(np.linalg.inv(B.basis).T)


def gram_schmidt(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squared lengths of the orthogonalized columns and the ``mu`` coefficients."""
    d = B.shape[1]
    Bs = np.array(B, dtype=float)
    mu = np.eye(d)
    r = np.zeros(d)
    for i in range(d):
        for j in range(i):
            mu[i, j] = B[:, i] @ Bs[:, j] / r[j]
            Bs[:, i] -= mu[i, j] * Bs[:, j]
        r[i] = Bs[:, i] @ Bs[:, i]
    return r, mu


def is_lll_reduced(B: LatticeBasis | np.ndarray, delta: float = 0.75, tol: float = 1e-9) -> bool:
    M = B.basis if isinstance(B, LatticeBasis) else np.asarray(B, dtype=float)
    r, mu = gram_schmidt(M)
    d = M.shape[1]
    for i in range(d):
        for j in range(i):
            if abs(mu[i, j]) > 0.5 + tol:
                return False
    for k in range(1, d):
        if r[k] < (delta - mu[k, k - 1] ** 2) * r[k - 1] * (1 - tol) - tol:
            return False
    return True


def lll_reduce(B: LatticeBasis, params: LLLParams = LLLParams(), return_transform: bool = False):
    """LLL-reduce the columns of ``B``.

    The reduced basis is ``B.basis @ U`` for an integer unimodular ``U``;
    the transform is checked before returning and optionally returned.
    """
    M = np.array(B.basis, dtype=float)
    d = M.shape[1]
    U = np.eye(d, dtype=np.int64)
    r, mu = gram_schmidt(M)
    norms = np.sum(M * M, axis=0)
    spread = max(norms.max() / max(r.min(), 1e-300), 2.0)
    cap = 100 + 50 * d * d * int(math.ceil(math.log2(spread) + 1))
    steps = 0
    k = 1
    while k < d:
        steps += 1
        if steps > cap:
            raise NumericalFailure(f"LLL exceeded {cap} iterations")
        for j in range(k - 1, -1, -1):
            if abs(mu[k, j]) > 0.5 + 1e-12:
                q = math.floor(mu[k, j] + 0.5)
                M[:, k] -= q * M[:, j]
                U[:, k] -= q * U[:, j]
                mu[k, : j + 1] -= q * mu[j, : j + 1]
                mu[k, k] = 1.0
        if r[k] >= (params.delta - mu[k, k - 1] ** 2) * r[k - 1]:
            k += 1
        else:
            M[:, [k - 1, k]] = M[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            r, mu = gram_schmidt(M)
            k = max(k - 1, 1)
    det_u = float(np.linalg.det(U.astype(float)))
    if abs(abs(det_u) - 1.0) > 1e-6:
        raise NumericalFailure("change of basis is not unimodular")
    reduced = B.basis @ U
    out = type(B)(reduced) if type(B) is LatticeBasis else LatticeBasis(reduced)
    return (out, U) if return_transform else out


# shortest vectors


def _enumerate_short(R: np.ndarray, radius_sq: float) -> list[np.ndarray]:
    """Integer coefficient vectors ``c != 0`` with ``|R c|^2 <= radius_sq``."""
    d = R.shape[1]
    r, mu = gram_schmidt(R)
    out: list[np.ndarray] = []
    c = np.zeros(d, dtype=np.int64)

    def visit(i: int, partial: float):
        center = -float(np.dot(mu[i + 1 :, i], c[i + 1 :])) if i + 1 < d else 0.0
        span = math.sqrt(max(radius_sq - partial, 0.0) / r[i])
        for ci in range(math.ceil(center - span - 1e-12), math.floor(center + span + 1e-12) + 1):
            t = partial + r[i] * (ci - center) ** 2
            if t > radius_sq:
                continue
            c[i] = ci
            if i == 0:
                if np.any(c):
                    out.append(c.copy())
            else:
                visit(i - 1, t)
        c[i] = 0

    visit(d - 1, 0.0)
    return out


def shortest_vector(B: LatticeBasis, certified: bool = True) -> DualShortest:
    """Exact shortest nonzero vector of the lattice spanned by ``B``.

    Among equally short vectors the lexicographically largest is returned, so
    ``h`` and ``-h`` resolve to the one whose first nonzero entry is positive.
    """
    d = B.dim
    R = lll_reduce(B).basis
    if not certified:
        v = R[:, 0]
        return DualShortest(v, float(np.linalg.norm(v)), False)
    if d > MAX_CERTIFIED_DIM:
        raise DimensionTooLarge(f"certified enumeration is capped at dim {MAX_CERTIFIED_DIM}")
    b1_sq = float(R[:, 0] @ R[:, 0])
    coeffs = _enumerate_short(R, b1_sq * (1 + 1e-9))
    integral = np.allclose(R, np.round(R), rtol=0, atol=INTEGRALITY_TOL)
    vectors = [R @ c for c in coeffs]
    if integral:
        vectors = [np.round(v) for v in vectors]
    sq = np.array([float(v @ v) for v in vectors])
    best = sq.min()
    ties = [tuple(v) for v, s in zip(vectors, sq) if s <= best * (1 + 1e-9)]
    vec = np.array(max(ties))
    return DualShortest(vec, float(np.linalg.norm(vec)), True)


def dual_shortest(L: IntegrationLattice) -> DualShortest:
    """Shortest nonzero dual vector, checked to pair integrally with the basis."""
    h = shortest_vector(dual_basis(L))
    pairing = L.basis.T @ h.vector
    if np.max(np.abs(pairing - np.round(pairing))) > INTEGRALITY_TOL * max(1.0, np.abs(pairing).max()):
        raise NumericalFailure("dual vector does not pair integrally with the lattice")
    return h


def spectral_test(L: IntegrationLattice) -> float:
    return 1.0 / dual_shortest(L).norm


def fundamental_domain_diameter(B: LatticeBasis) -> float:
    """Diameter of the parallelepiped spanned by the basis columns.

    The diameter is the largest ``|B e|`` over vertex differences
    ``e in {-1,0,1}^d``; as a convex function of ``e`` its maximum over that
    cube sits at a sign vector, and ``e`` and ``-e`` agree, so only sign vectors
    with a leading ``+1`` are scanned.
    """
    d = B.dim
    if d > MAX_DIAMETER_DIM:
        raise DimensionTooLarge(f"diameter enumeration is capped at dim {MAX_DIAMETER_DIM}")
    M = B.basis
    best = 0.0
    total = 1 << (d - 1)
    bits = np.arange(d - 1)
    for start in range(0, total, 1 << 15):
        idx = np.arange(start, min(total, start + (1 << 15)))
        signs = np.ones((len(idx), d))
        if d > 1:
            signs[:, 1:] = np.where((idx[:, None] >> bits) & 1, -1.0, 1.0)
        best = max(best, float(np.sqrt(np.max(np.sum((signs @ M.T) ** 2, axis=1)))))
    return best


def minkowski_lower_bound(d: int, n: int) -> float:
    """Smallest spectral test any ``n``-point lattice in dimension ``d`` can have."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    return 0.5 * math.sqrt(math.pi) * math.exp(-math.lgamma(d / 2 + 1) / d) * n ** (-1.0 / d)


def hyperplane_section_witness(L: IntegrationLattice) -> HyperplaneWitness:
    """Most populated hyperplane ``<h, x> = k`` through lattice points.

    ``h`` is the shortest dual vector; the hyperplane has zero volume, so the
    fraction of points on it bounds the isotropic discrepancy from below.
    """
    h = dual_shortest(L).vector
    levels = L.point_set().points @ h
    rounded = np.round(levels)
    if np.max(np.abs(levels - rounded), initial=0.0) > INTEGRALITY_TOL * max(1.0, float(np.abs(h).sum())):
        raise NumericalFailure("lattice points do not sit on integer levels")
    values, counts = np.unique(rounded.astype(np.int64), return_counts=True)
    top = int(np.argmax(counts))
    return HyperplaneWitness(counts[top] / L.n, int(values[top]), h)


def iso_discrepancy_sandwich(L: IntegrationLattice) -> tuple[float, float]:
    return sandwich_bounds(spectral_test(L), L.dim)


def sandwich_bounds(sigma: float, d: int) -> tuple[float, float]:
    lower = sigma / (math.sqrt(d) + sigma)
    upper = min(1.0, d * 2.0 ** (2 * (d + 1)) * sigma)
    return lower, upper


# file formats


def parse_rank1_file(text: str) -> list[tuple[int, list[int]]]:
    """Read ``n z1 ... zd`` lines; blank lines and ``#`` comments are skipped."""
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [int(tok) for tok in line.split()]
        if len(fields) < 2:
            raise ValueError(f"malformed generator line: {line!r}")
        out.append((fields[0], fields[1:]))
    return out


def format_rank1_file(entries: Sequence[tuple[int, Sequence[int]]]) -> str:
    return "".join(" ".join(str(v) for v in (n, *z)) + "\n" for n, z in entries)


def scaled_integer_lattice(m: int, d: int) -> IntegrationLattice:
    """``(1/m) Z^d``."""
    return IntegrationLattice(np.eye(d) / m)


def stretched_lattice(m: int, d: int) -> IntegrationLattice:
    """``Z x (1/m) Z^(d-1)``: fine in all but the first coordinate."""
    return IntegrationLattice(np.diag([1.0] + [1.0 / m] * (d - 1)))


def random_rank1_lattice(rng, max_dim: int = 4, max_n: int = 10_000, min_dim: int = 2) -> tuple[IntegrationLattice, PointSet]:
    """Rank-1 lattice with random size, dimension and unit-leading generator coprime to ``n``."""
    gen = as_generator(rng)
    d = int(gen.integers(min_dim, max_dim + 1))
    n = int(gen.integers(2, max_n + 1))
    units = np.flatnonzero(np.gcd(np.arange(n), n) == 1)
    z = [1] + [int(v) for v in gen.choice(units, size=d - 1)]
    return rank1_lattice(n, z)
