import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randinfo.cubature import (
    CubatureRule,
    apply_rule,
    equal_weight_rule,
    fooling_gap,
    holder_wce,
    mc_integrate,
    normalize_weights,
    voronoi_rule,
)
from randinfo.errors import ZeroSum
from randinfo.lattice import fibonacci_lattice, rank1_lattice
from randinfo.pointset import PointSet, distortion_integral, exact_distortion_1d, grid_points, sample_uniform, uniform_samples


# rules


def test_rule_validation():
    P = PointSet([[0.1], [0.9]])
    with pytest.raises(ValueError):
        CubatureRule(P, [1.0])
    with pytest.raises(ValueError):
        CubatureRule(P, [1.0, math.nan])


def test_rule_json_round_trip():
    rule = CubatureRule(PointSet([[0.1, 0.2], [0.3, 0.4]]), [0.25, 0.75])
    data = json.loads(rule.to_json())
    assert set(data) == {"points", "weights"}
    back = CubatureRule.from_json(rule.to_json())
    assert np.array_equal(back.points.points, rule.points.points)
    assert np.array_equal(back.weights, rule.weights)


def test_equal_weights():
    assert equal_weight_rule(PointSet([[0.3]])).weights.tolist() == [1.0]
    for n in (3, 7, 21, 1000):
        rule = equal_weight_rule(sample_uniform(2, n, n))
        assert abs(rule.weights.sum() - 1) <= 1e-15 * max(1, n / 100)
        assert apply_rule(rule, lambda X: np.full(len(X), 2.5)) == pytest.approx(2.5, abs=1e-14)


def test_fibonacci_mean_of_first_coordinate():
    _, P = fibonacci_lattice(8)
    assert len(P) == 21
    value = apply_rule(equal_weight_rule(P), lambda X: X[:, 0])
    # oracle: the first coordinates are i/21 for i = 0..20
    assert value == pytest.approx(sum(i / 21 for i in range(21)) / 21, abs=1e-15)
    assert value == pytest.approx(10 / 21, abs=1e-15)


@given(st.integers(0, 10_000))
def test_apply_rule_linearity(seed):
    gen = np.random.default_rng(seed)
    rule = CubatureRule(PointSet(gen.random((12, 2))), gen.standard_normal(12))
    f = lambda X: np.sin(X[:, 0]) + X[:, 1]
    g = lambda X: X[:, 0] * X[:, 1]
    both = apply_rule(rule, lambda X: f(X) + g(X))
    assert both == pytest.approx(apply_rule(rule, f) + apply_rule(rule, g), abs=1e-12)
    assert apply_rule(rule, lambda X: np.zeros(len(X))) == 0.0


# normalization


def test_normalize_examples():
    P = PointSet([[0.2], [0.7]])
    assert normalize_weights(CubatureRule(P, [2.0, 2.0])).weights.tolist() == [0.5, 0.5]
    fixed = CubatureRule(P, [0.25, 0.75])
    assert np.array_equal(normalize_weights(fixed).weights, fixed.weights)
    with pytest.raises(ZeroSum):
        normalize_weights(CubatureRule(P, [1.0, -1.0]))


@given(st.integers(0, 10_000), st.floats(-5, 5))
def test_normalization_properties(seed, c):
    gen = np.random.default_rng(seed)
    w = gen.uniform(0.1, 3.0, 9)
    rule = normalize_weights(CubatureRule(PointSet(gen.random((9, 2))), w))
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert int(np.argmax(rule.weights)) == int(np.argmax(w))
    assert apply_rule(rule, lambda X: np.full(len(X), c)) == pytest.approx(c, abs=1e-13)


# Voronoi weights


def test_symmetric_pair_voronoi():
    rule = voronoi_rule(PointSet([[0.25], [0.75]]), 100_000, 1)
    assert rule.weights.sum() == 1.0
    se = math.sqrt(0.25 / 100_000)
    assert np.all(np.abs(rule.weights - 0.5) <= 4 * se)


@given(st.integers(0, 10_000))
def test_voronoi_weights_in_unit_interval(seed):
    rule = voronoi_rule(sample_uniform(2, 20, seed), 5000, seed + 1)
    assert np.all((rule.weights >= 0) & (rule.weights <= 1))
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_torus_lattice_voronoi_cells_are_equal():
    L, P = rank1_lattice(34, [1, 21])
    torus = PointSet(P.points, torus=True)
    samples = 200_000
    rule = voronoi_rule(torus, samples, 3)
    w = 1 / 34
    se = math.sqrt(w * (1 - w) / samples)
    # a Bonferroni-style allowance over 34 cells
    assert np.all(np.abs(rule.weights - w) <= 4 * se)


# Hölder worst-case error


def test_holder_wce_single_midpoint():
    P = PointSet([[0.5]])
    assert holder_wce(P, 1.0, 200_000, 2) == pytest.approx(0.25, abs=3e-3)
    assert exact_distortion_1d(P, 1.0) == pytest.approx(0.25)


def test_holder_wce_validation():
    with pytest.raises(ValueError):
        holder_wce(PointSet([[0.5]]), 0.0, 10, 0)
    with pytest.raises(ValueError):
        fooling_gap(equal_weight_rule(PointSet([[0.5]])), 1.5, 10, 0)


@given(st.integers(0, 10_000), st.sampled_from([0.3, 0.7, 1.0]))
def test_holder_wce_decreases_under_insertion(seed, s):
    gen = np.random.default_rng(seed)
    X = gen.random((10, 2))
    small = PointSet(X[:5])
    large = PointSet(X)
    assert holder_wce(large, s, 4000, seed) <= holder_wce(small, s, 4000, seed)


def test_grid_holder_wce_band():
    s = 1.0
    scaled = []
    for m in (4, 8, 16, 32):
        P = grid_points(m, 2)
        scaled.append(holder_wce(P, s, 100_000, m) * (m * m) ** (s / 2))
    assert max(scaled) / min(scaled) <= 1.5


# fooling function


@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0]))
def test_fooling_rule_term_vanishes(seed, s):
    P = sample_uniform(2, 16, seed)
    f_star = lambda X: P.distances(X) ** s
    for rule in (equal_weight_rule(P), voronoi_rule(P, 2000, seed)):
        assert apply_rule(rule, f_star) == 0.0


def test_gap_equals_distortion_power():
    P = sample_uniform(2, 32, 5)
    for s in (0.5, 1.0):
        gap = fooling_gap(equal_weight_rule(P), s, 50_000, 6)
        dist = distortion_integral(P, s, uniform_samples(2, 50_000, 6)).value
        assert gap == dist
        assert gap == pytest.approx(holder_wce(P, s, 50_000, 6))


def test_sandwich_on_shared_samples():
    for seed in range(20):
        P = sample_uniform(2, 64, seed)
        s = 1.0
        dist = holder_wce(P, s, 20_000, 1000 + seed)
        gap = fooling_gap(voronoi_rule(P, 20_000, seed), s, 20_000, 1000 + seed)
        diam_factor = 1 + max(1.0, math.sqrt(2)) ** s
        assert dist / diam_factor <= gap <= dist


# Monte Carlo


def test_mc_constant():
    assert mc_integrate(lambda X: np.full(len(X), 3.0), 100, 0) == (3.0, 0.0)


def test_mc_linear():
    mean, se = mc_integrate(lambda X: X[:, 0], 10_000, 1, dim=3)
    assert abs(mean - 0.5) <= 4 * se


def test_mc_requires_two_samples():
    with pytest.raises(ValueError):
        mc_integrate(lambda X: X[:, 0], 1, 0)


def test_mc_error_halves_at_four_times_n():
    f = lambda X: X[:, 0] ** 2
    ratios = []
    for rep in range(20):
        _, se_n = mc_integrate(f, 1000, 2 * rep)
        _, se_4n = mc_integrate(f, 4000, 2 * rep + 1)
        ratios.append(se_4n / se_n)
    assert 0.4 <= np.mean(ratios) <= 0.6
    assert all(0.4 <= r <= 0.6 for r in ratios)
