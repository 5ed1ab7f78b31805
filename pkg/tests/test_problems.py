import math

import numpy as np
import pytest

from etalearn.problems import (
    DEFAULT_BUMPS,
    TOY1D,
    TOY2D,
    Dataset,
    GaussianBump,
    build_training_set,
    read_inputs_csv,
    reference_distribution,
    sample_inputs,
    toy1d_y,
    toy2d_g,
    toy2d_u,
    write_inputs_csv,
)


def bump_by_hand(x1, x2):
    total = 0.0
    for a, (c1, c2), s in [(1.5, (2, 2), 0.5), (1.5, (-1, -1), 0.7), (1.0, (2, -2), 0.3),
                           (0.5, (0, 1), 0.9), (1.25, (0.5, -0.5), 0.6)]:
        total += a / (2 * math.pi * math.sqrt(s)) * math.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * s))
    return total


class TestMaps:
    def test_far_field(self):
        assert toy1d_y(100.0, 100.0) == pytest.approx(0.0, abs=1e-300)

    @pytest.mark.parametrize("x", [(2.0, 2.0), (2.0, -2.0), (0.0, 0.0), (-1.3, 0.4)])
    def test_term_by_term(self, x):
        assert toy1d_y(*x) == pytest.approx(bump_by_hand(*x), rel=1e-14)

    def test_positive(self):
        X = np.random.default_rng(0).normal(0, 3, size=(1000, 2))
        assert np.all(toy1d_y(X[:, 0], X[:, 1]) > 0)

    def test_finite_far_out(self):
        X = np.random.default_rng(1).uniform(-70, 70, size=(100_000, 2))
        assert np.all(np.isfinite(TOY2D.state(X)))

    def test_u2(self):
        assert toy2d_u(0.0, 0.0)[1] == 0.0
        assert toy2d_u(1.5, 2.0)[1] == pytest.approx(-0.1, rel=1e-15)

    def test_u1_is_toy1d(self):
        X = np.random.default_rng(2).normal(0, 3, size=(1000, 2))
        assert np.array_equal(TOY2D.state(X)[:, 0], TOY1D.state(X)[:, 0])

    def test_g(self):
        assert toy2d_g(0.0, 0.0) == 0.0
        assert toy2d_g(1.0, -2.0) == 3.0
        assert toy2d_g(-3.0, 0.0) == 6.0

    def test_bump_validation(self):
        with pytest.raises(ValueError):
            GaussianBump(1.0, (0.0, 0.0), 0.0)
        assert len(DEFAULT_BUMPS) == 5


class TestSampling:
    def test_moments(self):
        X = sample_inputs(100_000, 10.0, 0)
        assert np.all(np.abs(X.mean(axis=0)) < 4 * math.sqrt(10.0 / 1e5))
        assert np.allclose(X.var(axis=0), 10.0, rtol=0.05)

    def test_seeded(self):
        assert np.array_equal(sample_inputs(5, 2.0, 9), sample_inputs(5, 2.0, 9))

    def test_errors(self):
        with pytest.raises(ValueError):
            sample_inputs(0, 1.0, 0)
        with pytest.raises(ValueError):
            sample_inputs(5, 0.0, 0)


class TestTrainingSet:
    def test_exclusion(self):
        ds = build_training_set(500, (2.0, -2.0), 1.5, seed=3)
        assert np.all(np.linalg.norm(ds.x - np.array([2.0, -2.0]), axis=1) > 1.5)
        assert len(ds) == 500

    def test_radius_zero_is_iid(self):
        ds = build_training_set(50, exclusion_radius=0.0, seed=5)
        X = np.random.default_rng(5).normal(0, math.sqrt(10), size=(4096, 2))[:50]
        assert np.array_equal(ds.x, X)

    def test_observable_ceiling(self):
        ds = build_training_set(200, seed=1, max_observable=0.1)
        assert ds.y.max() < 0.1

    @staticmethod
    def ball_peak(center, radius=1.5):
        g = np.linspace(-radius, radius, 121)
        G1, G2 = np.meshgrid(center[0] + g, center[1] + g)
        inside = np.hypot(G1 - center[0], G2 - center[1]) <= radius
        return toy1d_y(G1[inside], G2[inside]).max()

    def test_ball_around_tallest_isolated_bump(self):
        ds = build_training_set(100, (2.0, 2.0), 1.5, seed=0)
        assert ds.y.max() < self.ball_peak((2.0, 2.0))

    def test_default_ball_holds_narrowest_bump(self):
        # the narrowest bump is not the tallest, so data elsewhere can exceed it
        assert min(DEFAULT_BUMPS, key=lambda b: b.s).center == (2.0, -2.0)
        ds = build_training_set(100, seed=0)
        assert not np.any(np.hypot(ds.x[:, 0] - 2.0, ds.x[:, 1] + 2.0) <= 1.5)
        assert self.ball_peak((2.0, -2.0)) == pytest.approx(1 / (2 * math.pi * math.sqrt(0.3)), rel=0.03)

    def test_too_large_region(self):
        with pytest.raises(ValueError, match="exclusion region too large"):
            build_training_set(10, (0.0, 0.0), 50.0)

    def test_toy2d_shapes(self):
        ds = build_training_set(20, seed=0, problem=TOY2D)
        assert ds.u.shape == (20, 2)
        assert np.array_equal(ds.y, toy2d_g(ds.u[:, 0], ds.u[:, 1]))


class TestReference:
    def test_minimum_size(self):
        with pytest.raises(ValueError):
            reference_distribution(TOY1D, 100, 0)

    def test_basic(self):
        d = reference_distribution(TOY1D, 50_000, 0)
        assert d.samples.min() >= 0
        assert d.quantile(0.999) >= d.quantile(0.9)
        assert np.all(np.diff(d.quantile(np.linspace(0, 1, 101))) >= 0)

    def test_median_stable(self):
        da = reference_distribution(TOY1D, 1_000_000, 1)
        a = da.quantile(0.5)
        b = reference_distribution(TOY1D, 1_000_000, 2).quantile(0.5)
        # standard error of a sample median: sqrt(p (1 - p) / n) / f(m)
        h = 0.02 * a
        dens = np.mean(np.abs(da.samples - a) < h) / (2 * h)
        se = math.sqrt(0.25 / da.n) / dens
        assert abs(a - b) <= 4 * math.sqrt(2) * se
        assert se / a < 0.02

    def test_training_set_below_tail(self):
        # shipped seed keeps every training observable below the 0.99 reference quantile
        nu0 = reference_distribution(TOY1D, 1_000_000, 1)
        ds = build_training_set(100, seed=0)
        assert ds.y.max() < nu0.quantile(0.99)


def test_csv_round_trip(tmp_path):
    ds = build_training_set(15, seed=2, problem=TOY2D)
    ds.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv")
    assert np.array_equal(back.x, ds.x) and np.array_equal(back.u, ds.u) and np.array_equal(back.y, ds.y)
    X = sample_inputs(7, 1.0, 0)
    write_inputs_csv(tmp_path / "p.csv", X)
    assert np.array_equal(read_inputs_csv(tmp_path / "p.csv"), X)
    (tmp_path / "bad.csv").write_text("x1,x2,y\n1,2\n")
    with pytest.raises(ValueError):
        Dataset.from_csv(tmp_path / "bad.csv")
