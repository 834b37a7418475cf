"""Geometry of lp-ellipsoids ``{x : ||(x_j / sigma_j)_j||_p <= 1}``.

Quasi-norms (``p < 1``) are accepted wherever the formula makes sense; the
support function and the mean width need convexity and reject them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionMismatch, NonConvex, ParameterOutOfRange, UnsupportedRegime
from .pointset import MCEstimate
from .rng import as_generator

MEMBERSHIP_TOL = 1e-12


def _parse_p(p) -> float:
    p = float(p)
    if not p > 0:
        raise ValueError("exponent must be positive")
    return p


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def lp_norm(v, p: float) -> float:
    """``(sum |v_i|^p)^(1/p)``, the max for ``p = inf``, scaled to avoid overflow."""
    v = np.abs(np.asarray(v, dtype=float)).ravel()
    if v.size == 0:
        return 0.0
    top = float(v.max())
    if math.isinf(p) or top == 0.0:
        return top
    return top * float(np.sum((v / top) ** p)) ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class LpEllipsoid:
    """Exponent ``p`` in (0, inf] and non-increasing positive semiaxes.

    ``decay`` records ``lambda`` when the semiaxes are ``j**-lambda``.
    """

    p: float
    semiaxes: np.ndarray
    decay: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", _parse_p(self.p))
        s = np.atleast_1d(np.asarray(self.semiaxes, dtype=float)).copy()
        if s.ndim != 1 or s.size == 0:
            raise ValueError("semiaxes must be a non-empty vector")
        if not np.all(s > 0) or not np.all(np.isfinite(s)):
            raise ValueError("semiaxes must be finite and positive")
        if np.any(np.diff(s) > 0):
            raise ValueError("semiaxes must be non-increasing")
        s.setflags(write=False)
        object.__setattr__(self, "semiaxes", s)

    @property
    def m(self) -> int:
        return self.semiaxes.size

    def contains(self, x) -> bool:
        return norm_p_sigma(x, self) <= 1 + MEMBERSHIP_TOL

    def to_json(self) -> str:
        p = "inf" if math.isinf(self.p) else self.p
        return json.dumps({"p": p, "semiaxes": self.semiaxes.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "LpEllipsoid":
        data = json.loads(text)
        return cls(float(data["p"]), data["semiaxes"])


@dataclass(frozen=True)
class PolySemiaxes:
    """Semiaxes ``sigma_j = j**-lam`` for ``j = 1..m``."""

    lam: float
    m: int

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.m < 1:
            raise ValueError("m must be positive")

    def semiaxes(self) -> np.ndarray:
        return np.arange(1, self.m + 1, dtype=float) ** (-self.lam)

    def ellipsoid(self, p: float) -> LpEllipsoid:
        return LpEllipsoid(p, self.semiaxes(), decay=self.lam)

    def to_json(self) -> str:
        return json.dumps({"lambda": self.lam, "m": self.m})


def _check_dim(x: np.ndarray, E: LpEllipsoid) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != E.m:
        raise DimensionMismatch(f"vector has {x.size} entries, ellipsoid has {E.m}")
    return x


def norm_p_sigma(x, E: LpEllipsoid) -> float:
    x = _check_dim(x, E)
    return lp_norm(x / E.semiaxes, E.p)


def decreasing_rearrangement(x) -> np.ndarray:
    a = np.abs(np.asarray(x, dtype=float).ravel())
    # stable sort keeps equal entries in index order
    return a[np.argsort(-a, kind="stable")]


def lorentz_norm(x, p: float, q: float) -> float:
    p, q = _parse_p(p), _parse_p(q)
    xs = decreasing_rearrangement(x)
    i = np.arange(1, xs.size + 1, dtype=float)
    return lp_norm(i ** (1.0 / p - 1.0 / q) * xs, q)


def support_function(E: LpEllipsoid, u) -> float:
    if E.p < 1:
        raise NonConvex("support function needs p >= 1")
    u = _check_dim(u, E)
    return lp_norm(E.semiaxes * u, conjugate_exponent(E.p))


def best_s_term_error(x, s: int, q: float) -> float:
    """lq distance from ``x`` to the s-sparse vectors."""
    x = np.asarray(x, dtype=float).ravel()
    if not 0 <= s <= x.size:
        raise ValueError("s must lie in [0, len(x)]")
    order = np.argsort(-np.abs(x), kind="stable")
    return lp_norm(x[order[s:]], _parse_p(q))


def worst_s_term_witness(E: LpEllipsoid, s: int, q: float) -> tuple[np.ndarray, float]:
    """Boundary point of ``E`` that is hard to approximate by s-sparse vectors.

    The first ``2s`` coordinates share the value
    ``(sum_{i<=2s} sigma_i^-p)^(-1/p)``; removing any ``s`` of them leaves an
    error of ``s^(1/q)`` times that value.
    """
    q = _parse_p(q)
    if not 1 <= s <= E.m / 2:
        raise ParameterOutOfRange(f"s={s} must lie in [1, m/2] for m={E.m}")
    if E.decay is not None:
        need = max(1.0 / q - 1.0 / E.p, 0.0)
        if not E.decay > need:
            raise ParameterOutOfRange(f"decay {E.decay} must exceed {need}")
    head = E.semiaxes[: 2 * s]
    if math.isinf(E.p):
        level = float(head.min())
    else:
        level = lp_norm(1.0 / head, E.p) ** -1.0
    x = np.zeros(E.m)
    x[: 2 * s] = level
    return x, best_s_term_error(x, s, q)


def gelfand_diag(sigma: Sequence[float], p: float, q: float, n: int) -> float:
    """n-th Gelfand number of ``diag(sigma)`` from lp to lq, for ``q <= p``."""
    sigma = np.asarray(sigma, dtype=float).ravel()
    p, q = _parse_p(p), _parse_p(q)
    if q > p:
        raise UnsupportedRegime("exact values are only available for q <= p")
    if not 1 <= n <= sigma.size:
        raise ValueError(f"n={n} must lie in [1, {sigma.size}]")
    inv_r = 1.0 / q - (0.0 if math.isinf(p) else 1.0 / p)
    tail = np.abs(sigma[n - 1 :])
    if inv_r <= 0:
        return float(tail.max())
    return lp_norm(tail, 1.0 / inv_r)


def minimal_radius(E: LpEllipsoid, n: int) -> float:
    """Smallest worst-case l2 error of any ``n`` linear measurements on ``E`` (p >= 2)."""
    if E.p < 2:
        raise UnsupportedRegime("exact minimal radius needs p >= 2")
    if n < 0:
        raise ValueError("n must be non-negative")
    if n >= E.m:
        return 0.0
    return gelfand_diag(E.semiaxes, E.p, 2.0, n + 1)


def minimal_radius_order(lam: float, p: float) -> float:
    """Decay exponent of the minimal radius for semiaxes ``j**-lam``."""
    p = _parse_p(p)
    if p < 1:
        raise UnsupportedRegime("order formula needs p >= 1")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    if not lam > max(0.5 - inv_p, 0.0):
        raise ParameterOutOfRange(f"lambda must exceed {max(0.5 - inv_p, 0.0)}")
    p_star = conjugate_exponent(p)
    if 1 <= p < 2 and lam < 1.0 / p_star:
        return lam * p_star / 2.0
    return lam + inv_p - 0.5


def gaussian_tail_factor(k: int) -> float:
    """``E ||g||_2`` for a standard Gaussian vector in ``R^k``."""
    if k < 1:
        raise ValueError("k must be positive")
    return math.sqrt(2.0) * math.exp(math.lgamma((k + 1) / 2) - math.lgamma(k / 2))


# Euclidean projection onto E, used for the rounded-body supremum


def _solve_coordinate(y: np.ndarray, c: np.ndarray, p: float) -> np.ndarray:
    """Root ``t in [0, y]`` of ``t + c * t^(p-1) = y`` (coordinatewise, p > 1)."""
    if p >= 2:
        # convex increasing left side: Newton from t = y decreases monotonically
        t = y.copy()
        for _ in range(100):
            f = t + c * t ** (p - 1) - y
            step = f / (1.0 + c * (p - 1) * t ** (p - 2))
            t = np.maximum(t - step, 0.0)
            if np.all(np.abs(step) <= 1e-15 * np.maximum(y, 1e-300)):
                break
        return t
    lo = np.zeros_like(y)
    hi = y.copy()
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        too_big = mid + c * mid ** (p - 1) > y
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_big, lo, mid)
    return 0.5 * (lo + hi)


def _shrink(y: np.ndarray, sigma: np.ndarray, p: float, nu: float) -> np.ndarray:
    """Minimiser of ``|t - y|^2/2 + nu * ||t/sigma||_p^p`` for ``y >= 0``."""
    if p == 1:
        return np.maximum(y - nu / sigma, 0.0)
    if p == 2:
        return y / (1.0 + 2.0 * nu / sigma**2)
    return _solve_coordinate(y, nu * p / sigma**p, p)


def project_onto(E: LpEllipsoid, y) -> np.ndarray:
    """Nearest point of ``E`` to ``y`` in the Euclidean metric (p >= 1)."""
    if E.p < 1:
        raise NonConvex("projection needs p >= 1")
    y = _check_dim(y, E)
    if norm_p_sigma(y, E) <= 1:
        return y.copy()
    sign, a = np.sign(y), np.abs(y)
    if math.isinf(E.p):
        return sign * np.minimum(a, E.semiaxes)
    p = E.p

    def excess(nu):
        return lp_norm(_shrink(a, E.semiaxes, p, nu) / E.semiaxes, p) - 1.0

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    nu = brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    t = _shrink(a, E.semiaxes, p, nu)
    # pull the last rounding error back inside
    t = t / max(1.0, lp_norm(t / E.semiaxes, p))
    return sign * t


def support_maximizer(E: LpEllipsoid, g) -> np.ndarray:
    """A point of ``E`` attaining ``support_function(E, g)`` (p >= 1)."""
    if E.p < 1:
        raise NonConvex("support maximizer needs p >= 1")
    g = _check_dim(g, E)
    sg = E.semiaxes * g
    if math.isinf(E.p):
        return E.semiaxes * np.sign(g)
    if E.p == 1:
        j = int(np.argmax(np.abs(sg)))
        t = np.zeros(E.m)
        t[j] = E.semiaxes[j] * np.sign(g[j])
        return t
    q = conjugate_exponent(E.p)
    scale = lp_norm(sg, q)
    if scale == 0.0:
        return np.zeros(E.m)
    u = sg / scale
    return E.semiaxes * np.sign(u) * np.abs(u) ** (q - 1)


def rounded_support(E: LpEllipsoid, g, rho: float) -> float:
    """``sup <g, t>`` over ``E ∩ rho B_2``.

    If a maximiser of ``<g, .>`` over ``E`` is short enough the ball is
    inactive.  Otherwise the maximiser is the projection of ``g / mu`` onto
    ``E`` for the multiplier ``mu > 0`` at which that projection has length
    ``rho``; ``mu`` is bracketed on a log scale starting from ``|g| / rho`` and
    found by a root search.  The returned value is attained by a feasible point.
    """
    g = _check_dim(g, E)
    if math.isinf(rho):
        return support_function(E, g)
    if not np.any(g):
        return 0.0
    t = support_maximizer(E, g)
    if np.linalg.norm(t) <= rho:
        return float(g @ t)
    gn = float(np.linalg.norm(g))

    def point(log_mu):
        return project_onto(E, g / math.exp(log_mu))

    # at mu = |g|/rho the point g/mu itself has length rho
    hi = math.log(gn / rho)
    t = point(hi)
    if np.linalg.norm(t) >= rho:
        # g / mu already lies in E, so the ball constraint alone is active
        return float(g @ t) * rho / float(np.linalg.norm(t))
    lo = hi
    for _ in range(200):
        lo -= 1.0
        t = point(lo)
        if np.linalg.norm(t) > rho:
            break
    else:
        # a face of maximisers reaches inside the ball
        return float(g @ t)
    root = brentq(lambda u: float(np.linalg.norm(point(u))) - rho, lo, hi, xtol=1e-14, maxiter=500)
    t = point(root)
    t = t * min(1.0, rho / float(np.linalg.norm(t)))
    return float(g @ t)


def mean_width_mc(E: LpEllipsoid, rho: float, trials: int, rng) -> MCEstimate:
    """Gaussian estimate of the mean width of ``E ∩ rho B_2``."""
    if E.p < 1:
        raise NonConvex("mean width needs p >= 1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if trials < 2:
        raise ValueError("need at least two trials")
    G = as_generator(rng).standard_normal((trials, E.m))
    values = np.array([rounded_support(E, g, rho) for g in G])
    a_m = gaussian_tail_factor(E.m)
    return MCEstimate(float(values.mean()) / a_m, float(values.std(ddof=1)) / math.sqrt(trials) / a_m)
