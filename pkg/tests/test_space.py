"""Tests for finite metric spaces, subsets, and Lipschitz functions."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qloc import (
    AnchorError,
    FiniteMetricSpace,
    MetricError,
    ScalarFunction,
    build_grid_space,
    indicator,
    lipschitz_constant,
    mcshane_extend,
    neighborhood,
    ramp_function,
    set_distance,
    subset_diameter,
)


def path(n):
    return build_grid_space([n])


def random_planar_space(rng, n, weights=False):
    """Generic metric space: Euclidean distances of separated plane points."""
    pts = rng.random((n, 2)) * 10
    # enforce a minimum gap so min_gap-based code has something to chew on
    pts += np.arange(n)[:, None] * 0.3
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    w = 0.5 + rng.random(n) if weights else np.ones(n)
    return FiniteMetricSpace(points=tuple(range(n)), dist=d, weights=w)


class TestMetricValidation:
    def test_grid_space_basic(self):
        sp = path(10)
        assert sp.n == 10
        assert sp.diameter() == 9.0
        assert sp.min_gap() == 1.0

    def test_rejects_asymmetric(self):
        d = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(MetricError):
            FiniteMetricSpace(points=(0, 1), dist=d, weights=np.ones(2))

    def test_rejects_triangle_violation(self):
        d = np.array([[0, 1, 5.0], [1, 0, 1], [5.0, 1, 0]])
        with pytest.raises(MetricError):
            FiniteMetricSpace(points=(0, 1, 2), dist=d, weights=np.ones(3))

    def test_rejects_nonpositive_weights(self):
        sp = path(3)
        with pytest.raises(MetricError):
            FiniteMetricSpace(points=sp.points, dist=sp.dist,
                              weights=np.array([1.0, 0.0, 1.0]))

    def test_rejects_zero_offdiagonal(self):
        d = np.zeros((2, 2))
        with pytest.raises(MetricError):
            FiniteMetricSpace(points=(0, 1), dist=d, weights=np.ones(2))

    def test_grid_metrics(self):
        l1 = build_grid_space([3, 3], "l1")
        linf = build_grid_space([3, 3], "linf")
        eu = build_grid_space([3, 3], "euclidean")
        # corner to corner
        assert l1.diameter() == 4.0
        assert linf.diameter() == 2.0
        assert eu.diameter() == pytest.approx(2 * np.sqrt(2))


class TestSubsets:
    def test_set_distance_path(self):
        sp = path(10)
        assert set_distance(sp, {0, 1, 2}, {7, 8, 9}) == 5.0

    def test_set_distance_empty_raises(self):
        with pytest.raises(ValueError):
            set_distance(path(4), set(), {1})

    def test_neighborhood_path(self):
        sp = path(10)
        assert neighborhood(sp, {3}, 2) == frozenset({1, 2, 3, 4, 5})
        assert neighborhood(sp, set(), 2) == frozenset()

    def test_subset_diameter(self):
        sp = path(10)
        assert subset_diameter(sp, {2, 5, 7}) == 5.0
        assert subset_diameter(sp, {4}) == 0.0

    @given(st.integers(2, 12), st.floats(0, 5), st.floats(0, 5))
    @settings(max_examples=40, deadline=None)
    def test_neighborhood_monotone_in_radius(self, n, r1, r2):
        sp = path(n)
        lo, hi = sorted((r1, r2))
        assert neighborhood(sp, {0}, lo) <= neighborhood(sp, {0}, hi)

    @given(st.integers(2, 12), st.floats(0, 4), st.floats(0, 4))
    @settings(max_examples=40, deadline=None)
    def test_neighborhood_additive_bound(self, n, r1, r2):
        sp = path(n)
        inner = neighborhood(sp, {0}, r1)
        assert neighborhood(sp, inner, r2) <= neighborhood(sp, {0}, r1 + r2)


class TestFunctions:
    def test_ramp_values_and_lipschitz(self):
        sp = path(10)
        f = ramp_function(sp, {0, 1}, 1.0, 3.0)
        # 1 on the 1-neighborhood, 0 at distance >= 3, linear between
        assert f.values[0] == 1.0 and f.values[2] == 1.0
        assert f.values[3] == pytest.approx(0.5)
        assert f.values[4] == 0.0
        assert lipschitz_constant(sp, f) <= 0.5 + 1e-12

    def test_ramp_invalid_margins(self):
        sp = path(5)
        with pytest.raises(ValueError):
            ramp_function(sp, {0}, 2.0, 2.0)
        with pytest.raises(ValueError):
            ramp_function(sp, set(), 0.0, 1.0)

    @given(st.integers(3, 10), st.floats(0.2, 3.0), st.floats(0.1, 3.0))
    @settings(max_examples=40, deadline=None)
    def test_ramp_is_contraction_with_budgeted_lipschitz(self, n, inner, width):
        sp = path(n)
        f = ramp_function(sp, {0}, inner, inner + width)
        assert f.is_contraction(tol=1e-12)
        assert np.all(f.values.real >= 0)
        assert lipschitz_constant(sp, f) <= 1.0 / width + 1e-9

    def test_lipschitz_constant_exact(self):
        sp = path(4)
        f = ScalarFunction(space=sp, values=np.array([0, 2, 2, 3], dtype=complex))
        assert lipschitz_constant(sp, f) == 2.0

    def test_indicator_support(self):
        sp = path(6)
        f = indicator(sp, {1, 4})
        assert f.support() == frozenset({1, 4})


class TestMcShane:
    def test_interpolates_anchors(self):
        sp = path(10)
        f = mcshane_extend(sp, {0: -1.0, 9: 1.0}, L=0.25)
        assert f.values[0] == pytest.approx(-1.0)
        assert f.values[9] == pytest.approx(1.0)
        assert lipschitz_constant(sp, f) <= 0.25 + 1e-12
        assert f.is_contraction(tol=1e-12)

    def test_incompatible_anchors_name_the_pair(self):
        sp = path(4)
        with pytest.raises(AnchorError) as exc:
            mcshane_extend(sp, {0: -1.0, 1: 1.0}, L=0.5)
        assert exc.value.pair == (0, 1)

    @given(st.integers(4, 12), st.floats(0.3, 2.0))
    @settings(max_examples=40, deadline=None)
    def test_extension_respects_budget(self, n, L):
        sp = path(n)
        anchors = {0: 0.0, n - 1: min(1.0, L * (n - 1))}
        f = mcshane_extend(sp, anchors, L)
        assert lipschitz_constant(sp, f) <= L + 1e-9
        assert f.is_contraction(tol=1e-9)


class TestRandomSpaces:
    def test_planar_space_is_valid_metric(self):
        rng = np.random.default_rng(0)
        sp = random_planar_space(rng, 9, weights=True)
        assert sp.n == 9
        assert sp.min_gap() > 0
