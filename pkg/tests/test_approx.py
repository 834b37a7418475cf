import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randinfo.approx import (
    MLSConfig,
    local_scale,
    lq_error,
    mls_evaluate,
    mls_shape_functions,
    monomial_exponents,
    polynomial_dimension,
    read_values_csv,
    wendland,
    write_values_csv,
)
from randinfo.errors import NotEnoughPoints, SingularMoments
from randinfo.experiments import rate_fit
from randinfo.pointset import PointSet, distortion_integral, grid_points, sample_uniform, uniform_samples


def random_polynomial(gen, degree, dim):
    exps = monomial_exponents(degree, dim)
    coef = gen.standard_normal(len(exps))

    def f(X):
        X = np.atleast_2d(X)
        return np.prod(X[:, None, :] ** exps[None], axis=2) @ coef

    return f, float(np.abs(coef).sum())


# weight and basis


def test_wendland_bump():
    r = np.linspace(0, 1.5, 301)
    w = wendland(r)
    assert wendland(0.0) == 1.0
    assert np.all(w >= 0)
    assert np.all(w[r >= 1] == 0)
    assert np.all(np.diff(w[r <= 1]) <= 0)
    # C^2 at the support edge: value, slope and curvature vanish
    h = 1e-4
    assert wendland(1 - h) < 1e-14
    assert abs(wendland(1 - h) - wendland(1 - 2 * h)) / h < 1e-10


def test_monomial_count():
    for degree in range(4):
        for dim in range(1, 4):
            exps = monomial_exponents(degree, dim)
            assert len(exps) == polynomial_dimension(degree, dim)
            assert len({tuple(e) for e in exps}) == len(exps)
            assert exps.sum(axis=1).max() == degree


def test_config_validation():
    with pytest.raises(ValueError):
        MLSConfig(degree=-1)
    with pytest.raises(ValueError):
        MLSConfig(scale_multiplier=0)


# local scale


def test_scale_single_point():
    P = PointSet([[0.2, 0.3]])
    y = np.array([0.5, 0.7])
    cfg = MLSConfig(degree=0, scale_multiplier=1.5)
    assert local_scale(P, y, cfg) == pytest.approx(1.5 * np.linalg.norm(y - [0.2, 0.3]))


def test_scale_needs_enough_points():
    with pytest.raises(NotEnoughPoints):
        local_scale(PointSet(np.random.default_rng(0).random((5, 2))), [0.5, 0.5], MLSConfig(degree=2))


@given(st.integers(0, 10_000), st.sampled_from([8, 16, 32]))
def test_scale_on_grid_exact_band(seed, m):
    # on a unit-spaced grid the sixth nearest node lies between sqrt(5)/2 and sqrt(5/2) away
    cfg = MLSConfig()
    P = grid_points(m, 2, centered=True)
    y = np.random.default_rng(seed).uniform(0.25, 0.75, 2)
    delta = local_scale(P, y, cfg) / (cfg.scale_multiplier / m)
    assert math.sqrt(5) / 2 - 1e-12 <= delta <= math.sqrt(5 / 2) + 1e-12


def test_scale_band_oracle():
    # brute-force sixth-nearest distances on the infinite unit grid
    axis = np.arange(-4, 5, dtype=float)
    nodes = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
    u = np.linspace(0, 1, 41)
    Y = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
    d6 = np.sort(np.linalg.norm(Y[:, None] - nodes[None], axis=2), axis=1)[:, 5]
    assert d6.min() == pytest.approx(math.sqrt(5) / 2)
    assert d6.max() == pytest.approx(math.sqrt(5 / 2))


@pytest.mark.parametrize("m", [8, 16, 32])
def test_scale_on_grid_within_factor_two_at_nodes_and_centers(m):
    cfg = MLSConfig()
    P = grid_points(m, 2, centered=True)
    k = polynomial_dimension(cfg.degree, 2)
    target = cfg.scale_multiplier * math.sqrt(k) / m
    node = P.points[(m // 2) * m + m // 2]
    for y in (node, node + 0.5 / m):
        assert target / 2 <= local_scale(P, y, cfg) <= 2 * target


def test_scale_positive_at_a_site():
    P = PointSet([[0.5]])
    assert local_scale(P, [0.5], MLSConfig(degree=0)) > 0


# shape functions


def test_degree_zero_is_normalized_weights():
    gen = np.random.default_rng(1)
    P = PointSet(gen.random((40, 2)))
    cfg = MLSConfig(degree=0)
    y = np.array([0.4, 0.6])
    sf = mls_shape_functions(y, P, cfg)
    w = wendland(np.linalg.norm(P.points - y, axis=1) / sf.scale)
    assert sf.coefficients.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(sf.coefficients, w / w.sum(), atol=1e-15)


def test_two_point_barycentric_example():
    P = np.array([[0.0], [1.0]])
    sf = mls_shape_functions([0.25], P, MLSConfig(degree=1, scale_multiplier=3.0))
    assert np.allclose(sf.coefficients, [0.75, 0.25], atol=1e-14)
    assert sf.abs_sum == pytest.approx(1.0)


@given(st.integers(0, 10_000), st.integers(0, 3), st.integers(1, 3))
def test_polynomial_reproduction(seed, degree, dim):
    gen = np.random.default_rng(seed)
    P = PointSet(gen.random((60 * dim, dim)))
    cfg = MLSConfig(degree=degree)
    f, size = random_polynomial(gen, degree, dim)
    fx = f(P.points)
    for y in gen.random((5, dim)):
        sf = mls_shape_functions(y, P, cfg)
        assert abs(sf.coefficients @ fx - f(y)[0]) <= 1e-8 * size


@given(st.integers(0, 10_000))
def test_locality(seed):
    gen = np.random.default_rng(seed)
    P = PointSet(gen.random((80, 2)))
    y = gen.random(2)
    sf = mls_shape_functions(y, P, MLSConfig())
    far = np.linalg.norm(P.points - y, axis=1) >= sf.scale
    assert np.all(sf.coefficients[far] == 0)


def test_bounded_coefficients_on_quasi_uniform_points():
    cfg = MLSConfig()
    P = grid_points(16, 2, centered=True)
    jitter = np.random.default_rng(2).uniform(-0.2, 0.2, P.points.shape) / 16
    Q = PointSet(P.points + jitter)
    sums = [mls_shape_functions(y, Q, cfg).abs_sum for y in uniform_samples(2, 300, 3)]
    assert max(sums) <= 100


def test_singular_geometry_raises():
    # collinear points cannot determine a quadratic in two variables
    t = np.linspace(0, 1, 30)
    P = np.column_stack([t, t])
    with pytest.raises(SingularMoments):
        mls_shape_functions([0.5, 0.5], P, MLSConfig(degree=2))


def test_wrong_evaluation_dimension():
    with pytest.raises(ValueError):
        mls_shape_functions([0.5], PointSet(np.random.default_rng(0).random((20, 2))), MLSConfig(degree=1))


# evaluation


def test_constant_function():
    P = sample_uniform(2, 100, 4)
    Y = uniform_samples(2, 50, 5)
    assert np.allclose(mls_evaluate(np.ones(100), P, Y, MLSConfig()), 1.0, atol=1e-10)


def test_polynomial_is_exact_in_lq():
    gen = np.random.default_rng(6)
    P = sample_uniform(2, 150, 7)
    f, _ = random_polynomial(gen, 2, 2)
    assert lq_error(f, f(P.points), P, 2, MLSConfig(), 500, 8) <= 1e-7
    assert lq_error(f, f(P.points), P, math.inf, MLSConfig(), 500, 8) <= 1e-7


def test_lq_norms_increase_with_q():
    f = lambda X: np.sin(2 * np.pi * X[:, 0]) * np.cos(2 * np.pi * X[:, 1])
    P = sample_uniform(2, 200, 9)
    errs = [lq_error(f, f(P.points), P, q, MLSConfig(), 800, 10) for q in (1, 2, math.inf)]
    assert errs[0] <= errs[1] <= errs[2]


def test_lq_error_rejects_bad_q():
    with pytest.raises(ValueError):
        lq_error(lambda X: X[:, 0], np.zeros(10), sample_uniform(1, 10, 0), 0, MLSConfig(degree=1), 10, 0)


@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    gen = np.random.default_rng(seed)
    P = PointSet(gen.random((50, 2)))
    Y = gen.random((10, 2))
    f, g = gen.standard_normal(50), gen.standard_normal(50)
    cfg = MLSConfig()
    lhs = mls_evaluate(a * f + b * g, P, Y, cfg)
    rhs = a * mls_evaluate(f, P, Y, cfg) + b * mls_evaluate(g, P, Y, cfg)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_grid_rate():
    f = lambda X: np.sin(2 * np.pi * X[:, 0]) * np.cos(2 * np.pi * X[:, 1])
    Y = uniform_samples(2, 1500, 11)
    pairs = []
    for m in (8, 16, 32):
        axis = np.arange(m) / (m - 1)
        X = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
        err = np.abs(mls_evaluate(f(X), X, Y, MLSConfig()) - f(Y)).max()
        pairs.append((m * m, err))
    assert -1.75 <= rate_fit(pairs, True, True).slope <= -1.25


def test_random_point_rate_tracks_distortion():
    # degree 2 on a smooth function: L1 error and the integral of dist^3 decay alike
    f = lambda X: np.sin(2 * np.pi * X[:, 0]) * np.cos(2 * np.pi * X[:, 1])
    err_pairs, dist_pairs = [], []
    for n in (128, 256, 512, 1024, 2048):
        errs, dists = [], []
        for r in range(4):
            P = sample_uniform(2, n, 100 * n + r)
            errs.append(lq_error(f, f(P.points), P, 1, MLSConfig(), 2000, r))
            dists.append(distortion_integral(P, 3, uniform_samples(2, 20000, r + 7)).value)
        err_pairs.append((n, np.mean(errs)))
        dist_pairs.append((n, np.mean(dists)))
    gap = rate_fit(err_pairs, True, True).slope - rate_fit(dist_pairs, True, True).slope
    assert abs(gap) <= 0.2


# serialization


def test_values_csv_round_trip():
    gen = np.random.default_rng(12)
    X = gen.random((7, 3))
    X[0, 0] = 1.0
    v = gen.standard_normal(7)
    text = write_values_csv(X, v)
    assert text.splitlines()[0] == "x1,x2,x3,value"
    X2, v2 = read_values_csv(text)
    assert np.array_equal(X, X2) and np.array_equal(v, v2)
