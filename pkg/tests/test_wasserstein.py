import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from etalearn.distributions import EmpiricalDistribution, QuantileSet
from etalearn.wasserstein import (
    check_w1_sandwich,
    check_wp_bounds,
    subexponential_moment_lower,
    w1_bruteforce_oracle,
    w1_empirical,
    w1_lower_bound_mean_diff,
    w1_quantile_mc,
    w1_tail,
    w1_upper_bound_coupled,
    wp_empirical,
)

finite = st.floats(-10, 10, allow_nan=False)


def E(xs):
    return EmpiricalDistribution.from_samples(xs)


class TestW1Empirical:
    def test_identity(self):
        d = E([3.0, -1.0, 2.0])
        assert w1_empirical(d, d) == 0.0

    def test_dirac_pair(self):
        assert w1_empirical(E([1.5]), E([-2.0])) == 3.5

    def test_two_point(self):
        # matchings: (0->0.5, 1->2) costs 0.75, the crossed one 1.25
        assert w1_empirical(E([0, 1]), E([0.5, 2])) == pytest.approx(0.75, abs=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            w1_empirical([], [1.0])

    def test_unequal_sizes_against_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = rng.normal(size=rng.integers(1, 30))
            b = rng.exponential(size=rng.integers(1, 30))
            assert w1_empirical(a, b) == pytest.approx(stats.wasserstein_distance(a, b), rel=1e-12, abs=1e-12)

    def test_unequal_sizes_by_hand(self):
        # F1^-1 = 0 on (0, 1]; F2^-1 = 0 on (0, 1/2], 3 on (1/2, 1]  -> 1.5
        assert w1_empirical([0.0], [0.0, 3.0]) == pytest.approx(1.5)
        # F1^-1: 0 on (0,1/2], 1 on (1/2,1]; F2^-1: 0 on (0,1/3], 3 on (1/3,2/3], 6 on (2/3,1]
        # pieces: (1/3,1/2]: 3*(1/6); (1/2,2/3]: 2*(1/6); (2/3,1]: 5*(1/3)
        assert w1_empirical([0.0, 1.0], [0.0, 3.0, 6.0]) == pytest.approx(0.5 + 1 / 3 + 5 / 3)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=7).flatmap(
        lambda xs: st.tuples(st.just(xs), st.lists(finite, min_size=len(xs), max_size=len(xs)))))
    def test_matches_bruteforce(self, pair):
        a, b = pair
        assert abs(w1_empirical(a, b) - w1_bruteforce_oracle(a, b)) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=12), st.lists(finite, min_size=1, max_size=12),
           st.lists(finite, min_size=1, max_size=12))
    def test_metric(self, a, b, c):
        assert w1_empirical(a, b) == w1_empirical(b, a)
        assert w1_empirical(a, c) <= w1_empirical(a, b) + w1_empirical(b, c) + 1e-9

    def test_quantile_grid_converges(self):
        rng = np.random.default_rng(4)
        a = E(rng.normal(size=4000))
        b = E(rng.normal(0.5, 1.3, size=4000))
        exact = w1_empirical(a, b)
        m = 10_000
        grid = (np.arange(m) + 0.5) / m
        approx = w1_quantile_mc(a.quantile, b.quantile, grid)
        assert approx == pytest.approx(exact, rel=1e-2)


class TestOracle:
    def test_two_point(self):
        assert w1_bruteforce_oracle([0, 1], [0.5, 2]) == pytest.approx(0.75)

    def test_identical(self):
        assert w1_bruteforce_oracle([1, 5, 2], [5, 2, 1]) == 0

    def test_size_limit(self):
        with pytest.raises(ValueError, match="oracle size limit"):
            w1_bruteforce_oracle(range(8), range(8))


class TestQuantileAverages:
    def test_identical_functions(self):
        f = lambda q: q ** 2
        assert w1_quantile_mc(f, f, [0.1, 0.5, 0.9]) == 0.0

    def test_constants(self):
        Q = QuantileSet(np.array([0.2, 0.4, 0.99]))
        assert w1_quantile_mc(lambda q: 0.0, lambda q: -2.5, Q) == 2.5

    def test_linear(self):
        assert w1_quantile_mc(lambda q: q, lambda q: 0 * q, [0.25, 0.5, 0.75]) == pytest.approx(0.5)

    def test_tail(self):
        Q = QuantileSet(np.array([0.96, 0.98, 1.0]), tau=0.95)
        assert w1_tail(lambda q: q, lambda q: 2 * q, Q) == pytest.approx(0.98)
        assert w1_tail(lambda q: q + 3, lambda q: q, Q) == pytest.approx(3.0)
        assert w1_tail(np.sqrt, np.sqrt, Q) == 0.0

    def test_tail_needs_cutoff(self):
        with pytest.raises(ValueError):
            w1_tail(np.sqrt, np.sqrt, QuantileSet(np.array([0.5, 0.9])))


class TestPairedBounds:
    def test_lower(self):
        assert w1_lower_bound_mean_diff([1, 2], [1, 2]) == 0
        assert w1_lower_bound_mean_diff([0, 2], [1, 1]) == 0
        assert w1_lower_bound_mean_diff([0, 2, 5], [1.5, 3.5, 6.5]) == pytest.approx(1.5)

    def test_upper(self):
        assert w1_upper_bound_coupled([1, 2], [1, 2]) == 0
        assert w1_upper_bound_coupled([0, 2], [1, 1]) == 1
        assert w1_upper_bound_coupled([0, 2, 5], [-1, 1, 4]) == pytest.approx(1.0)

    def test_two_point_sandwich(self):
        r = check_w1_sandwich([0, 2], [1, 1])
        assert (r.lower_mean_diff, r.w1, r.upper_coupled_mean_abs) == (0.0, 1.0, 1.0)
        assert r.satisfied

    def test_empty_and_mismatched(self):
        with pytest.raises(ValueError):
            w1_lower_bound_mean_diff([], [])
        with pytest.raises(ValueError):
            w1_upper_bound_coupled([1.0], [1.0, 2.0])

    def test_faulty_distance_is_caught(self):
        r = check_w1_sandwich([0, 2], [1, 1], w1_fn=lambda a, b: 5.0)
        assert not r.satisfied


class TestWp:
    def test_p1_consistency(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=9), rng.normal(size=9)
        assert wp_empirical(a, b, 1) == pytest.approx(w1_empirical(a, b), rel=1e-15)

    @pytest.mark.parametrize("p", [1, 2, 3.5])
    def test_dirac(self, p):
        assert wp_empirical([2.0], [-1.0], p) == pytest.approx(3.0)

    def test_two_point_p2(self):
        # sorted matching (0,0.5), (1,2): sqrt((0.25 + 1) / 2); crossed: sqrt((4 + 0.25) / 2)
        assert wp_empirical([0, 1], [0.5, 2], 2) == pytest.approx(math.sqrt(0.625), rel=1e-15)
        assert wp_empirical([0, 1], [0.5, 2], 2) == pytest.approx(0.7906, abs=1e-4)

    def test_order_check(self):
        with pytest.raises(ValueError):
            wp_empirical([1.0], [2.0], 0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=20), st.lists(finite, min_size=1, max_size=20))
    def test_monotone_in_p(self, a, b):
        vals = [wp_empirical(a, b, p) for p in (1, 1.5, 2, 3, 5)]
        assert all(x <= y + 1e-9 * (1 + abs(y)) for x, y in zip(vals, vals[1:]))

    def test_bounds_identical(self):
        r = check_wp_bounds([1, 2, 3], [1, 2, 3], 2)
        assert r.wp == 0 and r.mean_diff_lower == 0 and r.moment_lower == 0 and r.coupled_upper == 0
        assert r.satisfied

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_constant_maps_tight(self, p):
        r = check_wp_bounds(np.full(5, 1.5), np.full(5, -0.5), p)
        assert r.wp == pytest.approx(2.0)
        assert r.coupled_upper == pytest.approx(2.0 ** p)
        assert r.mean_diff_lower == pytest.approx(2.0)

    def test_random_bounds(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            y1 = rng.uniform(-10, 10, n)
            y2 = y1 * rng.uniform(-2, 2) + rng.normal(size=n)
            for p in (1, 2, 3):
                assert check_wp_bounds(y1, y2, p).satisfied

    def test_first_moment_root_form_is_not_a_lower_bound(self):
        # |E|y1|^(1/p) - E|y2|^(1/p)| can exceed W_p: y1 = 0, y2 = 0.01, p = 2
        y1, y2 = np.zeros(3), np.full(3, 0.01)
        wp = wp_empirical(y1, y2, 2)
        assert abs(np.mean(np.abs(y1)) ** 0.5 - np.mean(np.abs(y2)) ** 0.5) > wp
        assert check_wp_bounds(y1, y2, 2).satisfied

    def test_subexponential_bound_not_violated(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            n = int(rng.integers(2, 50))
            y1 = rng.uniform(-10, 10, n)
            y2 = rng.uniform(-10, 10, n)
            assert subexponential_moment_lower(y1, y2, 2) <= wp_empirical(y1, y2, 2) + 1e-9
