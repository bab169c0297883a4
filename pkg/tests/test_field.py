"""Tests for the spectral field substrate."""

import math

import numpy as np
import pytest

from ktcy.field import (
    GridMismatchError,
    GridSpec,
    ScalarField,
    derivative,
    evaluate,
    gradient,
    integrate,
    mean,
    norms,
    project_mean_zero,
    random_band_limited,
    read_field,
    resample,
    sample,
    write_field,
)

TAU = 2.0 * np.pi


class TestGridSpec:
    def test_valid(self):
        g = GridSpec(8, 16, 4, 1.0, 2.0, 0.5)
        assert g.shape == (8, 16, 4)
        assert g.volume() == pytest.approx(1.0)

    @pytest.mark.parametrize("bad", [3, 2, 7, 0, -8])
    def test_rejects_bad_sample_counts(self, bad):
        with pytest.raises(ValueError, match="even integer"):
            GridSpec(bad, 8, 8)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_periods(self, bad):
        with pytest.raises(ValueError, match="positive finite"):
            GridSpec(8, 8, 8, 1.0, bad, 1.0)

    def test_coordinates(self):
        g = GridSpec(4, 4, 4, L_x=2.0)
        assert np.allclose(g.coordinates("x"), [0.0, 0.5, 1.0, 1.5])
        assert np.allclose(g.coordinates("y"), [0.0, 0.25, 0.5, 0.75])


class TestSample:
    def test_constant(self, grid8):
        u = sample(lambda x, y, t: np.ones_like(x), grid8)
        assert np.all(u.values == 1.0)

    def test_single_mode(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x), grid8)
        expected = np.sin(TAU * np.arange(8) / 8)
        assert np.allclose(u.values, expected[:, None, None], atol=1e-15)
        # independent of j, k
        assert np.ptp(u.values, axis=1).max() == 0.0
        assert np.ptp(u.values, axis=2).max() == 0.0

    def test_irrational_period(self):
        g = GridSpec(8, 8, 8, L_x=math.sqrt(2.0))
        u = sample(lambda x, y, t: np.sin(TAU * x / math.sqrt(2.0)), g)
        expected = np.sin(TAU * np.arange(8) / 8)
        assert np.allclose(u.values[:, 0, 0], expected, atol=1e-15)

    def test_rejects_non_finite_with_index(self, grid8):
        def bad(x, y, t):
            out = np.ones_like(x)
            out[2, 3, 1] = np.inf
            return out

        with pytest.raises(ValueError, match=r"\(2, 3, 1\)"):
            sample(bad, grid8)


class TestDerivative:
    def test_sin_x_first(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x), grid8)
        d = derivative(u, "x", 1)
        exact = sample(lambda x, y, t: TAU * np.cos(TAU * x), grid8)
        assert np.allclose(d.values, exact.values, atol=1e-13)

    def test_cross_axis_is_zero(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x), grid8)
        assert np.max(np.abs(derivative(u, "y", 1).values)) < 1e-15

    def test_cos_t_second(self, grid8):
        u = sample(lambda x, y, t: np.cos(TAU * t), grid8)
        d = derivative(u, "t", 2)
        exact = sample(lambda x, y, t: -TAU**2 * np.cos(TAU * t), grid8)
        assert np.allclose(d.values, exact.values, atol=1e-12)

    def test_constant_derivative_is_zero(self, grid8):
        u = ScalarField.constant(grid8, 3.7)
        for axis in ("x", "y", "t"):
            for order in (1, 2):
                assert np.max(np.abs(derivative(u, axis, order).values)) < 1e-14

    def test_period_scaling(self):
        g = GridSpec(16, 8, 8, L_x=2.0)
        u = sample(lambda x, y, t: np.sin(TAU * x / 2.0), g)
        d = derivative(u, "x", 1)
        exact = sample(lambda x, y, t: (TAU / 2.0) * np.cos(TAU * x / 2.0), g)
        assert np.allclose(d.values, exact.values, atol=1e-13)

    def test_rejects_bad_args(self, grid8):
        u = ScalarField.zeros(grid8)
        with pytest.raises(ValueError):
            derivative(u, "z", 1)
        with pytest.raises(ValueError):
            derivative(u, "x", 3)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_mean_of_derivative_vanishes(self, grid8, seed):
        u = random_band_limited(grid8, np.random.default_rng(seed), max_mode=3)
        for axis in ("x", "y", "t"):
            assert abs(mean(derivative(u, axis, 1))) < 1e-14


class TestQuadrature:
    def test_constant_unit_box(self, grid8):
        assert integrate(ScalarField.constant(grid8, 1.0)) == pytest.approx(1.0)

    def test_oscillatory_mean_zero(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x), grid8)
        assert abs(mean(u)) < 1e-16

    def test_volume_scaling(self):
        g = GridSpec(8, 8, 8, L_x=math.sqrt(2.0))
        assert integrate(ScalarField.constant(g, 1.0)) == pytest.approx(math.sqrt(2.0))


class TestProjectMeanZero:
    def test_constant(self, grid8):
        assert np.max(np.abs(project_mean_zero(ScalarField.constant(grid8, 5.0)).values)) == 0.0

    def test_shifted_mode(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x) + 3.0, grid8)
        v = project_mean_zero(u)
        exact = sample(lambda x, y, t: np.sin(TAU * x), grid8)
        assert np.allclose(v.values, exact.values, atol=1e-14)

    def test_idempotent(self, grid8, rng):
        u = random_band_limited(grid8, rng)
        v = project_mean_zero(u)
        w = project_mean_zero(v)
        assert np.allclose(v.values, w.values, atol=1e-16)


class TestNorms:
    def test_constant(self, grid8):
        n = norms(ScalarField.constant(grid8, 2.0))
        assert n["sup"] == pytest.approx(2.0)
        assert n["l2"] == pytest.approx(2.0)
        assert n["grad_sup"] == pytest.approx(0.0, abs=1e-14)

    def test_single_mode_parseval(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x), grid8)
        n = norms(u)
        assert n["l2"] == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-13)
        assert n["grad_l2"] == pytest.approx(TAU / math.sqrt(2.0), rel=1e-13)

    def test_zero(self, grid8):
        n = norms(ScalarField.zeros(grid8))
        assert all(v == 0.0 for v in n.values())


class TestDiscreteIdentities:
    @pytest.mark.parametrize("seed", [3, 4, 5])
    def test_parseval(self, grid16, seed):
        u = random_band_limited(grid16, np.random.default_rng(seed), max_mode=5)
        l2_grid = norms(u)["l2"]
        spec = np.fft.fftn(u.values)
        l2_fourier = math.sqrt(
            float(np.sum(np.abs(spec) ** 2)) / u.values.size**2 * u.grid.volume()
        )
        assert abs(l2_grid - l2_fourier) <= 1e-12 * l2_fourier

    @pytest.mark.parametrize("seed", [6, 7, 8])
    def test_poincare_unit_box(self, grid16, seed):
        u = random_band_limited(grid16, np.random.default_rng(seed), max_mode=5)
        n = norms(u)
        assert 4.0 * np.pi**2 * n["l2"] ** 2 <= n["grad_l2"] ** 2 * (1.0 + 1e-12)

    @pytest.mark.parametrize("seed", [9, 10, 11])
    def test_ut_moment_vanishes(self, grid16, seed):
        # holds for arbitrary periodic fields, full white-noise spectrum
        rng = np.random.default_rng(seed)
        u = ScalarField(grid16, rng.standard_normal(grid16.shape))
        ut = derivative(u, "t", 1)
        bound = 1e-12 * norms(u)["l2"] * max(norms(ut)["l2"], 1e-30)
        assert abs(integrate(u * ut)) <= max(bound, 1e-15)


class TestArithmeticAndCompatibility:
    def test_grid_mismatch_raises(self, grid8, grid16):
        a = ScalarField.zeros(grid8)
        b = ScalarField.zeros(grid16)
        with pytest.raises(GridMismatchError):
            _ = a + b

    def test_period_difference_is_a_mismatch(self):
        a = ScalarField.zeros(GridSpec(8, 8, 8, L_x=1.0))
        b = ScalarField.zeros(GridSpec(8, 8, 8, L_x=2.0))
        with pytest.raises(GridMismatchError):
            _ = a * b

    def test_immutability(self, grid8):
        u = ScalarField.zeros(grid8)
        with pytest.raises(AttributeError):
            u.values = np.ones(grid8.shape)
        with pytest.raises(ValueError):
            u.values[0, 0, 0] = 1.0


class TestDumpFormat:
    def test_round_trip_bitwise(self, grid8, rng, tmp_path):
        u = ScalarField(grid8, rng.standard_normal(grid8.shape))
        path = tmp_path / "u.field"
        write_field(u, path)
        v = read_field(path)
        assert v.grid == u.grid
        assert np.array_equal(v.values, u.values)

    def test_header_and_order(self, tmp_path):
        g = GridSpec(4, 4, 4, L_x=math.sqrt(2.0))
        X, _, _ = g.meshgrid()
        u = ScalarField(g, X)  # value = x coordinate
        path = tmp_path / "u.field"
        write_field(u, path)
        lines = path.read_text().splitlines()
        assert lines[0].split()[:3] == ["4", "4", "4"]
        assert float(lines[0].split()[3]) == math.sqrt(2.0)
        # x varies fastest: first four values run through the x coordinates
        step = math.sqrt(2.0) / 4
        assert [float(v) for v in lines[1:5]] == pytest.approx(
            [0.0, step, 2 * step, 3 * step]
        )
        assert float(lines[5]) == 0.0  # then y increments, x resets

    def test_rejects_malformed(self, tmp_path):
        path = tmp_path / "bad.field"
        path.write_text("4 4\n")
        with pytest.raises(ValueError, match="header"):
            read_field(path)

    def test_rejects_wrong_count(self, tmp_path):
        path = tmp_path / "short.field"
        path.write_text("4 4 4 1 1 1\n" + "0.0\n" * 10)
        with pytest.raises(ValueError, match="expected 64 values"):
            read_field(path)


class TestResample:
    def test_upsample_band_limited_exact(self, rng):
        g1 = GridSpec(8, 8, 8)
        g2 = GridSpec(16, 16, 16)
        u = random_band_limited(g1, rng, max_mode=3)
        v = resample(u, g2)
        exact = evaluate(u, *g2.meshgrid())
        assert np.allclose(v.values, exact, atol=1e-13)

    def test_up_down_round_trip(self, rng):
        g1 = GridSpec(8, 8, 8)
        g2 = GridSpec(16, 12, 20)
        u = random_band_limited(g1, rng, max_mode=3)
        v = resample(resample(u, g2), g1)
        assert np.allclose(v.values, u.values, atol=1e-13)

    def test_period_mismatch_rejected(self, grid8, rng):
        u = random_band_limited(grid8, rng)
        with pytest.raises(GridMismatchError):
            resample(u, GridSpec(16, 16, 16, L_x=2.0))


class TestEvaluate:
    def test_on_grid_points_reproduce_samples(self, grid8, rng):
        u = ScalarField(grid8, rng.standard_normal(grid8.shape))
        X, Y, T = grid8.meshgrid()
        vals = evaluate(u, X, Y, T)
        assert np.allclose(vals, u.values, atol=1e-12)

    def test_off_grid_single_mode(self, grid8):
        u = sample(lambda x, y, t: np.sin(TAU * x) * np.cos(TAU * t), grid8)
        pts = np.array([0.1234, 0.777, 0.5])
        got = evaluate(u, pts[0], pts[1], pts[2])
        assert got == pytest.approx(np.sin(TAU * 0.1234) * np.cos(TAU * 0.5), abs=1e-13)

    def test_periodic_wrap(self, grid8, rng):
        u = random_band_limited(grid8, rng, max_mode=3)
        x = np.array([0.3, 0.3 + 1.0, 0.3 - 2.0])
        got = evaluate(u, x, np.full(3, 0.2), np.full(3, 0.9))
        assert np.allclose(got, got[0], atol=1e-12)


class TestGradientHelper:
    def test_matches_componentwise(self, grid8, rng):
        u = random_band_limited(grid8, rng, max_mode=3)
        ux, uy, ut = gradient(u)
        assert np.array_equal(ux.values, derivative(u, "x", 1).values)
        assert np.array_equal(uy.values, derivative(u, "y", 1).values)
        assert np.array_equal(ut.values, derivative(u, "t", 1).values)
