"""Independent numerical oracles shared by the unit and acceptance tests."""

import math

import numpy as np


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    k = idx[u - css / idx > 0][-1]
    return np.maximum(v - css[k - 1] / k, 0.0)


def section_ascent(sigma, p, q, n, starts=8, iters=300, polish=20000, seed=0):
    """max ||D_sigma x||_q over ||x||_p <= 1 with x_1 = ... = x_{n-1} = 0, by ascent.

    For finite p the substitution w_j = |x_j|^p turns the problem into maximizing
    f(w) = sum sigma_j^q w_j^(q/p) over the simplex, which is concave for q <= p.
    A few projected-gradient steps are followed by the multiplicative update
    w_j <- w_j df/dw_j / <w, grad f>, whose fixed points are the stationary
    points with equal partial derivatives on the support.  For p = inf the
    feasible set is the box [0, 1]^k and each coordinate is maximized exactly
    in turn.  Every iterate is feasible, so the best value seen is a lower bound.
    """
    tail = np.asarray(sigma, dtype=float)[n - 1 :]
    k = tail.size
    gen = np.random.default_rng(seed)
    weights = tail**q
    if math.isinf(p):
        return _box_coordinate_ascent(weights, q) ** (1 / q)
    a = q / p
    f = lambda w: float(np.sum(weights * w**a))
    best = max(float(weights.max()), 0.0)
    for _ in range(starts):
        w = project_simplex(gen.random(k) + 1e-3)
        step = 1.0
        for _ in range(iters):
            grad = np.minimum(a * weights * np.maximum(w, 1e-300) ** (a - 1), 1e4 * weights.max())
            trial = project_simplex(w + step * grad)
            if f(trial) > f(w):
                w = trial
                step *= 2.0
            else:
                step *= 0.5
        w = np.maximum(w, 1e-12)
        w /= w.sum()
        value = f(w)
        for _ in range(polish):
            nxt = weights * w**a
            nxt /= nxt.sum()
            nv = f(nxt)
            done = np.max(np.abs(nxt - w)) <= 1e-16
            w = nxt
            value = max(value, nv)
            if done:
                break
        best = max(best, value)
    return best ** (1 / q)


def _box_coordinate_ascent(weights, q):
    """max sum weights_j x_j^q over [0, 1]^k by exact coordinate maximization.

    The objective is separable, so one sweep over the coordinates, each
    maximized over a grid containing both endpoints, is optimal.
    """
    grid = np.linspace(0.0, 1.0, 1001)
    x = np.array([grid[int(np.argmax(w * grid**q))] for w in weights])
    return float(np.sum(weights * x**q))
