"""Gaussian information and recovery of ellipsoid vectors from it.

The kernel of a Gaussian ``n x m`` matrix is a uniformly random subspace of
codimension ``n``; the radius of the ellipsoid's section with it is the
worst-case error of the best algorithm using that information.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import linprog, minimize

from .ellipsoid import LpEllipsoid, lp_norm, norm_p_sigma, worst_s_term_witness
from .errors import EmptyKernel, Infeasible, TooManySubsets
from .rng import RngStream, as_generator

RIP_SUBSET_CAP = 200_000
EPS_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianInfo:
    """``n x m`` matrix of i.i.d. N(0,1) entries, reproducible from its stream."""

    n: int
    m: int
    seed: int
    stream_id: int = 0
    entries: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 0 or self.m < 1:
            raise ValueError("need n >= 0 and m >= 1")
        if self.entries is None:
            gen = RngStream(self.seed, self.stream_id).generator()
            G = gen.standard_normal((self.n, self.m))
        else:
            G = np.array(self.entries, dtype=float).reshape(self.n, self.m)
        G.setflags(write=False)
        object.__setattr__(self, "entries", G)

    def scaled(self) -> np.ndarray:
        """Entries divided by ``sqrt(n)``, the normalization used for decoding."""
        return self.entries / math.sqrt(max(self.n, 1))


def sample_gaussian_info(n: int, m: int, rng) -> GaussianInfo:
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    return GaussianInfo(n, m, stream.seed, stream.stream_id)


def _matrix(G) -> np.ndarray:
    return G.entries if isinstance(G, GaussianInfo) else np.atleast_2d(np.asarray(G, dtype=float))


@dataclass(frozen=True, eq=False)
class KernelBasis:
    matrix: np.ndarray

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def kernel_basis(G) -> KernelBasis:
    """Orthonormal basis of ``ker G`` from the singular value decomposition."""
    A = _matrix(G)
    n, m = A.shape
    if n == 0:
        return KernelBasis(np.eye(m))
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    tol = max(n, m) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return KernelBasis(Vt[rank:].T.copy())


def kernel_coordinate_mass(G, i: int) -> float:
    """Largest ``x_i^2`` over unit vectors in ``ker G`` (``i`` is 0-based)."""
    V = G.matrix if isinstance(G, KernelBasis) else kernel_basis(G).matrix
    if V.shape[1] == 0:
        raise EmptyKernel("information map is injective")
    if not 0 <= i < V.shape[0]:
        raise IndexError(f"coordinate {i} out of range")
    return float(V[i] @ V[i])


def section_radius_exact_p2(E: LpEllipsoid, V: KernelBasis) -> float:
    """Largest l2 norm on ``E ∩ range(V)`` for an l2-ellipsoid."""
    if E.p != 2:
        raise ValueError("exact section radius needs p = 2")
    M = V.matrix
    if M.shape[1] == 0:
        raise EmptyKernel("kernel is trivial")
    if M.shape[0] != E.m:
        raise ValueError("kernel basis and ellipsoid dimensions differ")
    W = M / E.semiaxes[:, None]
    lam = np.linalg.eigvalsh(W.T @ W)[0]
    return float(lam ** -0.5)


def _smooth_norm_and_grad(x: np.ndarray, sigma: np.ndarray, p: float) -> tuple[float, np.ndarray]:
    """``||x / sigma||_p`` with its gradient; ``|t|`` is smoothed for ``p <= 1``."""
    y = x / sigma
    if math.isinf(p):
        j = int(np.argmax(np.abs(y)))
        g = np.zeros_like(x)
        g[j] = np.sign(y[j]) / sigma[j]
        return float(abs(y[j])), g
    top = float(np.abs(y).max())
    if top == 0.0:
        return 0.0, np.zeros_like(x)
    u = y / top
    if p <= 1:
        eps = 1e-6
        a = np.sqrt(u * u + eps * eps)
        da = u / a
    else:
        a = np.abs(u)
        da = np.sign(u)
    S = float(np.sum(a**p))
    N = top * S ** (1.0 / p)
    grad_u = S ** (1.0 / p - 1.0) * a ** (p - 1) * da
    return N, grad_u / sigma


def section_radius_lower(E: LpEllipsoid, V: KernelBasis, restarts: int = 20, steps: int = 500, rng=0) -> float:
    """Best ``||x||_2`` over ``E ∩ range(V)`` found by multi-start ascent.

    Writing ``x = V c``, the ratio ``|c| / ||Vc||_{p,sigma}`` is scale
    invariant; each start climbs it with a quasi-Newton method and the end
    point is rescaled onto the boundary of ``E``, so every candidate is
    feasible and the result is a valid lower bound.
    """
    M = V.matrix
    if M.shape[1] == 0:
        return 0.0
    sigma = E.semiaxes
    gen = as_generator(rng)

    def objective(c):
        x = M @ c
        N, gN = _smooth_norm_and_grad(x, sigma, E.p)
        cc = float(c @ c)
        if N <= 0 or cc <= 0:
            return 0.0, np.zeros_like(c)
        # minimise log N - log |c|
        return math.log(N) - 0.5 * math.log(cc), M.T @ gN / N - c / cc

    best = 0.0
    for _ in range(max(1, restarts)):
        c0 = gen.standard_normal(M.shape[1])
        res = minimize(objective, c0, jac=True, method="L-BFGS-B", options={"maxiter": steps, "gtol": 1e-14, "ftol": 1e-16})
        for c in (res.x, c0):
            x = M @ c
            N = norm_p_sigma(x, E)
            if N > 0:
                best = max(best, float(np.linalg.norm(x)) / N)
    return best


# decoders


def decode_l1(G, y, tol: float = 1e-9) -> np.ndarray:
    """Minimum-l1 solution of ``G z = y`` by linear programming.

    The LP solution is polished by re-solving the equations on its support,
    which removes the solver's feasibility slack without changing the support.
    """
    A = _matrix(G)
    y = np.asarray(y, dtype=float).ravel()
    n, m = A.shape
    if not np.any(y):
        return np.zeros(m)
    scale = max(1.0, float(np.linalg.norm(y)))
    res = linprog(
        np.ones(2 * m),
        A_eq=np.hstack([A, -A]),
        b_eq=y,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.x is None:
        raise Infeasible(f"linear program failed: {res.message}")
    z = res.x[:m] - res.x[m:]
    support = np.abs(z) > 1e-9 * max(1.0, float(np.abs(z).max()))
    if 0 < support.sum() <= n:
        polished = np.zeros(m)
        polished[support] = np.linalg.lstsq(A[:, support], y, rcond=None)[0]
        if np.linalg.norm(A @ polished - y) <= np.linalg.norm(A @ z - y) and np.abs(polished).sum() <= np.abs(z).sum() + tol:
            z = polished
    if np.linalg.norm(A @ z - y) > tol * scale:
        raise Infeasible("no solution within the residual tolerance")
    return z


class IRLSResult(NamedTuple):
    z: np.ndarray
    objective: list
    eps: float


def irls(G, y, r: float = 1.0, iters: int = 500) -> IRLSResult:
    """Iteratively reweighted least squares for ``min ||z||_r`` with ``G z = y``.

    Minimises the smoothed objective ``sum (z_i^2 + eps)^(r/2)``; each step is a
    majorize-minimize update, so the objective never increases for fixed
    ``eps``, and halving ``eps`` when progress stalls only lowers it further.
    """
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    A = _matrix(G)
    y = np.asarray(y, dtype=float).ravel()
    m = A.shape[1]
    if not np.any(y):
        return IRLSResult(np.zeros(m), [0.0], 0.0)
    z = np.linalg.lstsq(A, y, rcond=None)[0]
    eps = max(1.0, float(np.max(z * z)))

    def J(v, e):
        return float(np.sum((v * v + e) ** (r / 2)))

    history = [J(z, eps)]
    for _ in range(iters):
        w = np.sqrt((z * z + eps) ** (1 - r / 2))
        u = np.linalg.lstsq(A * w, y, rcond=None)[0]
        z_new = w * u
        current = J(z, eps)
        value = J(z_new, eps)
        if value > current * (1 + 1e-12):
            break
        z = z_new
        if eps <= EPS_FLOOR:
            history.append(value)
            if current - value <= 1e-13 * current:
                break
            continue
        if current - value <= 1e-3 * current:
            eps = max(eps / 2, EPS_FLOOR)
            value = J(z, eps)
        history.append(value)
    z = _polish_support(A, y, z, r)
    return IRLSResult(z, history, eps)


def _polish_support(A: np.ndarray, y: np.ndarray, z: np.ndarray, r: float) -> np.ndarray:
    """Snap entries that IRLS drove to the smoothing floor to exact zeros.

    The equations are re-solved on the remaining support; the result is kept
    only when it stays feasible and does not raise the unsmoothed objective.
    """
    top = float(np.abs(z).max())
    support = np.abs(z) > 1e-4 * top
    if not 0 < support.sum() <= A.shape[0]:
        return z
    polished = np.zeros_like(z)
    polished[support] = np.linalg.lstsq(A[:, support], y, rcond=None)[0]
    scale = max(1.0, float(np.linalg.norm(y)))
    cost = lambda v: float(np.sum(np.abs(v) ** r))
    if np.linalg.norm(A @ polished - y) <= 1e-10 * scale and cost(polished) <= cost(z) * (1 + 1e-12):
        return polished
    return z


def decode_lr(G, y, r: float = 1.0, iters: int = 500) -> np.ndarray:
    A = _matrix(G)
    y = np.asarray(y, dtype=float).ravel()
    result = irls(A, y, r, iters)
    if np.linalg.norm(A @ result.z - y) > 1e-8 * max(1.0, float(np.linalg.norm(y))):
        raise Infeasible("reweighted least squares lost feasibility")
    return result.z


def rip_bruteforce(A, s: int, cap: int = RIP_SUBSET_CAP) -> float:
    """Restricted isometry constant of order ``s`` by scanning all column subsets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[1]
    if not 1 <= s <= m:
        raise ValueError("s must lie in [1, m]")
    if math.comb(m, s) > cap:
        raise TooManySubsets(f"C({m},{s}) exceeds the cap {cap}")
    gram = A.T @ A
    delta = 0.0
    subsets = itertools.combinations(range(m), s)
    while True:
        chunk = list(itertools.islice(subsets, 4096))
        if not chunk:
            return delta
        idx = np.array(chunk)
        blocks = gram[idx[:, :, None], idx[:, None, :]]
        ev = np.linalg.eigvalsh(blocks)
        delta = max(delta, float(np.max(ev[:, -1] - 1)), float(np.max(1 - ev[:, 0])))


# experiments


class RecoveryStats(NamedTuple):
    errors: np.ndarray
    max: float
    mean: float
    quantiles: dict
    rows: list


def boundary_signals(E: LpEllipsoid, count: int, rng) -> list[np.ndarray]:
    """Points on the boundary of ``E``: s-term witnesses first, then random ones."""
    gen = as_generator(rng)
    out = []
    s = 1
    while s <= E.m // 2 and len(out) < count // 2:
        try:
            out.append(worst_s_term_witness(E, s, 2.0)[0])
        except ValueError:
            break
        s *= 2
    while len(out) < count:
        u = gen.standard_normal(E.m) * E.semiaxes
        out.append(u / norm_p_sigma(u, E))
    return out[:count]


def recovery_error_experiment(E: LpEllipsoid, n: int, trials: int, decoder: str, rng, r: float | None = None) -> RecoveryStats:
    """Measure boundary signals with fresh scaled Gaussian information and decode.

    Returns l2 errors with their max, mean and quartiles; ``rows`` holds one
    ``(m, n, trial, decoder, error, seed)`` record per trial.
    """
    if decoder not in ("l1", "lr"):
        raise ValueError("decoder must be 'l1' or 'lr'")
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    signals = boundary_signals(E, trials, stream.child(0))
    r = min(1.0, E.p) if r is None else r
    decode: Callable = decode_l1 if decoder == "l1" else (lambda A, y: decode_lr(A, y, r))
    errors = []
    rows = []
    for t, x in enumerate(signals):
        info_stream = stream.child(t + 1)
        info = GaussianInfo(n, E.m, info_stream.seed, info_stream.stream_id)
        A = info.scaled()
        z = decode(A, A @ x)
        err = float(np.linalg.norm(x - z))
        errors.append(err)
        rows.append({"m": E.m, "n": n, "trial": t, "decoder": decoder, "error": err, "seed": info_stream.stream_id})
    errors = np.array(errors)
    q = np.quantile(errors, [0.25, 0.5, 0.75])
    return RecoveryStats(errors, float(errors.max()), float(errors.mean()), {"q25": q[0], "q50": q[1], "q75": q[2]}, rows)


def success_rate(m: int, n: int, s: int, trials: int, rng, tol: float = 1e-6) -> float:
    """Fraction of planted s-sparse signals that l1 decoding recovers to ``tol``."""
    stream = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    hits = 0
    for t in range(trials):
        gen = stream.child(t).generator()
        A = gen.standard_normal((n, m)) / math.sqrt(n)
        x = np.zeros(m)
        x[gen.choice(m, size=s, replace=False)] = gen.standard_normal(s)
        try:
            z = decode_l1(A, A @ x)
        except Infeasible:
            continue
        hits += np.linalg.norm(z - x) <= tol * np.linalg.norm(x)
    return hits / trials


def section_radius_shape(sigma: np.ndarray, n: int) -> float:
    """``n^(-1/2) (sum_{j >= floor(n/4)} sigma_j^2)^(1/2)`` with 1-based ``j``."""
    start = max(n // 4, 1)
    return n**-0.5 * lp_norm(sigma[start - 1 :], 2.0)
