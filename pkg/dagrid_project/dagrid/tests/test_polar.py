import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from dagrid.accumulate import SamplingGrid, accumulate, accumulate_homogeneous
from dagrid.exceptions import InvalidArgument
from dagrid.gradcheck import inner
from dagrid.io import synth
from dagrid.kernels import KernelKind
from dagrid.polar import (
    GridFilter, ParametricSlicer, PolarConfig, center_of_mass, coverage_mask,
    fit_parametric_slicer, inverse_polar_grid, parametric_roundtrip, parametric_slice,
    parametric_slice_backward, polar_accumulate, polar_grid, polar_presets,
    polar_roundtrip_filter, polar_sample, polar_slice, preset_config, roundtrip_metrics)
from dagrid.tests import oracles


class PolarConfigTests(SimpleTestCase):

    def test_defaults_for_image(self):
        cfg = PolarConfig.for_image(33, 41)
        self.assertEqual((cfg.h_r, cfg.w_psi), (64, 64))
        self.assertEqual(cfg.center, (16.0, 20.0))
        self.assertAlmostEqual(cfg.s_r, 33 / 126)
        self.assertAlmostEqual(cfg.s_theta * cfg.w_psi, 2 * math.pi)
        self.assertTrue(cfg.angular_wrap)

    def test_cover_corners(self):
        cfg = PolarConfig.for_image(30, 40, h_r=11, w_psi=8, cover_corners=True)
        self.assertAlmostEqual(cfg.s_r, 50 / 20)

    def test_explicit_rates(self):
        cfg = PolarConfig.for_image(30, 40, h_r=11, w_psi=8, s_r=0.5,
                                    s_theta=math.pi / 8, angular_wrap=False)
        self.assertEqual((cfg.s_r, cfg.s_theta), (0.5, math.pi / 8))
        with self.assertRaises(InvalidArgument):
            PolarConfig.for_image(30, 40, w_psi=8, s_theta=math.pi / 8)

    def test_center_of_mass(self):
        image = synth('disk', 48, 64, center=(20, 30), radius=5)
        cfg = PolarConfig.for_image(48, 64, center='mass', image=image)
        assert_allclose(cfg.center, (20.0, 30.0), atol=1e-12)
        self.assertEqual(center_of_mass(np.zeros((1, 5, 7))), (2.0, 3.0))

    def test_mass_center_needs_image(self):
        with self.assertRaises(InvalidArgument):
            PolarConfig.for_image(8, 8, center='mass')

    def test_wrapped_bins_must_tile_the_circle(self):
        with self.assertRaises(InvalidArgument):
            PolarConfig(s_r=1.0, s_theta=0.1, h_r=4, w_psi=8, center=(0, 0))
        cfg = PolarConfig(s_r=1.0, s_theta=0.1, h_r=4, w_psi=8, center=(0, 0), angular_wrap=False)
        self.assertFalse(cfg.angular_wrap)

    def test_rates_must_be_positive(self):
        with self.assertRaises(InvalidArgument):
            PolarConfig(s_r=0.0, s_theta=1.0, h_r=4, w_psi=8, center=(0, 0))

    def test_presets(self):
        self.assertEqual(polar_presets(), (32, 64, 128, 224))
        cfg = preset_config(100, 100, 128)
        self.assertEqual((cfg.h_r, cfg.w_psi), (128, 128))


class PolarGridTests(SimpleTestCase):

    def setUp(self):
        self.cfg = PolarConfig.for_image(5, 5, h_r=4, w_psi=8)

    def test_center_pixel(self):
        grid = polar_grid(5, 5, self.cfg)
        self.assertEqual(grid.gx[2, 2], 0.0)
        self.assertAlmostEqual(grid.gy[2, 2], math.pi / self.cfg.s_theta, places=12)

    def test_one_row_below_center(self):
        grid = polar_grid(5, 5, self.cfg)
        self.assertAlmostEqual(grid.gx[3, 2], 1 / self.cfg.s_r, places=12)
        self.assertAlmostEqual(grid.gy[3, 2], math.pi / self.cfg.s_theta, places=12)

    def test_corner(self):
        grid = polar_grid(5, 5, self.cfg)
        self.assertAlmostEqual(grid.gx[0, 0], math.sqrt(8) / self.cfg.s_r, places=12)
        self.assertAlmostEqual(grid.gy[0, 0], (math.pi / 4) / self.cfg.s_theta, places=12)

    def test_angles_cover_the_bins(self):
        grid = polar_grid(21, 21, PolarConfig.for_image(21, 21, h_r=8, w_psi=16))
        self.assertTrue(np.all((grid.gy >= 0) & (grid.gy < 16)))

    def test_ray_above_center_lands_in_bin_zero(self):
        cfg = PolarConfig.for_image(21, 21, h_r=11, w_psi=16, angular_wrap=False)
        grid = polar_grid(21, 21, cfg)
        self.assertLess(grid.gy.max(), cfg.w_psi)
        assert_array_equal(grid.gy[:10, 10], 0.0)

    def test_seam_survives_without_wrap(self):
        cfg = PolarConfig.for_image(21, 21, h_r=11, w_psi=16, angular_wrap=False)
        out = polar_roundtrip_filter(np.ones((1, 21, 21)), cfg, KernelKind.BILINEAR)
        assert_allclose(out[0, :10, 10], 1.0, rtol=1e-6)

    def test_coverage_mask(self):
        cfg = PolarConfig.for_image(21, 21, h_r=11, w_psi=16)
        mask = coverage_mask(21, 21, cfg)
        self.assertTrue(mask[10, 10])
        self.assertTrue(mask[10, 0])
        self.assertFalse(mask[0, 0])


class PolarAccumulateTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(21)

    def test_constant_input(self):
        cfg = PolarConfig.for_image(16, 16, h_r=8, w_psi=16)
        acc = polar_accumulate(np.full((1, 16, 16), 3.0), cfg, KernelKind.BILINEAR)
        heavy = acc.weights > 0.1
        assert_allclose(acc.values[heavy], 3.0, rtol=1e-6)
        assert_array_equal(acc.values[acc.weights == 0], 0.0)

    def test_single_pixel_nearest(self):
        cfg = PolarConfig(s_r=1.0, s_theta=2 * math.pi / 16, h_r=8, w_psi=16, center=(4, 4))
        u = np.zeros((1, 9, 9))
        u[0, 7, 4] = 1.0
        values = polar_accumulate(u, cfg, KernelKind.NEAREST).values
        self.assertEqual(np.count_nonzero(values), 1)
        self.assertEqual(np.argwhere(values)[0][1], 3)

    def rotated_pair(self, u, cfg, kind):
        grid = polar_grid(*u.shape[1:], cfg)
        rotated = np.rot90(u, axes=(1, 2))
        return [accumulate_homogeneous(t, grid, kind, cfg.shape, periodic_cols=True)
                for t in (u, rotated)]

    def test_rotation_shifts_angular_bins(self):
        # a quarter turn adds pi/2 to every angle: W_psi / 4 bins
        cfg = PolarConfig.for_image(33, 33, h_r=16, w_psi=64)
        for _ in range(10):
            u = self.rng.uniform(0, 1, size=(1, 33, 33))
            # the center pixel has no angle, its weight stays in one bin of radial row 0
            u[0, 16, 16] = 0.0
            before, after = self.rotated_pair(u, cfg, KernelKind.BILINEAR)
            assert_allclose(after.values, np.roll(before.values, 16, axis=2), atol=1e-12)
            assert_allclose(after.weights[:, 1:], np.roll(before.weights, 16, axis=2)[:, 1:], atol=1e-12)

            before = polar_accumulate(u, cfg, KernelKind.NEAREST).values
            after = polar_accumulate(np.rot90(u, axes=(1, 2)), cfg, KernelKind.NEAREST).values
            assert_allclose(after, np.roll(before, 16, axis=2), atol=1e-12)

    def test_rotation_even_size(self):
        cfg = PolarConfig.for_image(32, 32, h_r=16, w_psi=64)
        u = self.rng.uniform(0, 1, size=(2, 32, 32))
        before, after = self.rotated_pair(u, cfg, KernelKind.BILINEAR)
        assert_allclose(after.values, np.roll(before.values, 16, axis=2), atol=1e-12)
        assert_allclose(after.weights, np.roll(before.weights, 16, axis=2), atol=1e-12)
        before = polar_accumulate(u, cfg, KernelKind.NEAREST).values
        after = polar_accumulate(np.rot90(u, axes=(1, 2)), cfg, KernelKind.NEAREST).values
        assert_allclose(after, np.roll(before, 16, axis=2), atol=1e-12)

    def test_weights_sum_to_pixel_count(self):
        cfg = PolarConfig.for_image(24, 30, h_r=12, w_psi=20, cover_corners=True)
        acc = polar_accumulate(self.rng.uniform(size=(1, 24, 30)), cfg, KernelKind.BILINEAR)
        self.assertTrue(np.all(acc.weights >= 0))
        assert_allclose(acc.weights.sum(), 24 * 30, rtol=1e-9)

    def test_adjoint_with_slicing(self):
        cfg = PolarConfig.for_image(20, 17, h_r=9, w_psi=24)
        grid = polar_grid(20, 17, cfg)
        for kind in KernelKind.values:
            u = self.rng.normal(size=(1, 20, 17))
            p = self.rng.normal(size=(1, 9, 24))
            left = inner(accumulate(u, grid, kind, cfg.shape, periodic_cols=True), p)
            right = inner(u, polar_slice(p, cfg, kind, (20, 17)))
            scale = inner(np.abs(u), polar_slice(np.abs(p), cfg, kind, (20, 17)))
            self.assertLessEqual(abs(left - right), 1e-10 * scale)


class PolarSampleTests(SimpleTestCase):

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(22)
        for trial in range(20):
            kind = KernelKind.values[trial % 2]
            height, width = rng.integers(2, 9, size=2)
            h_r, w_psi = rng.integers(1, 9, size=2)
            cfg = PolarConfig(s_r=rng.uniform(0.3, 1.5), s_theta=2 * math.pi / w_psi, h_r=h_r,
                              w_psi=w_psi, center=rng.uniform(0, (height - 1, width - 1)))
            u = rng.normal(size=(1, height, width))
            gx = np.empty((h_r, w_psi))
            gy = np.empty((h_r, w_psi))
            for row in range(h_r):
                for col in range(w_psi):
                    theta = col * cfg.s_theta - math.pi
                    gx[row, col] = cfg.center[0] + row * cfg.s_r * math.cos(theta)
                    gy[row, col] = cfg.center[1] + row * cfg.s_r * math.sin(theta)
            expected = oracles.grid_sample(u, SamplingGrid(gx, gy), kind)
            assert_allclose(polar_sample(u, cfg, kind), expected, atol=1e-12)

    def test_radius_zero_reads_the_center(self):
        cfg = PolarConfig(s_r=1.0, s_theta=2 * math.pi / 8, h_r=4, w_psi=8, center=(4, 4))
        u = np.random.default_rng(23).normal(size=(1, 9, 9))
        assert_array_equal(polar_sample(u, cfg, KernelKind.BILINEAR)[0, 0], np.full(8, u[0, 4, 4]))

    def test_constant_input(self):
        cfg = PolarConfig.for_image(15, 15, h_r=10, w_psi=12, cover_corners=True)
        out = polar_sample(np.full((1, 15, 15), 2.0), cfg, KernelKind.BILINEAR)
        grid = inverse_polar_grid(cfg)
        inside = (grid.gx >= 0) & (grid.gx <= 14) & (grid.gy >= 0) & (grid.gy <= 14)
        self.assertTrue(inside.any() and not inside.all())
        assert_allclose(out[0][inside], 2.0, rtol=1e-12)


class PolarSliceTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(31)

    def test_constant_polar_grid(self):
        cfg = PolarConfig.for_image(20, 20, h_r=8, w_psi=16)
        out = polar_slice(np.full((1, 8, 16), 1.5), cfg, KernelKind.BILINEAR, (20, 20))
        mask = coverage_mask(20, 20, cfg)
        assert_allclose(out[0][mask], 1.5, rtol=1e-12)
        self.assertTrue(np.all(out[0][mask] > 0))

    def test_nearest_is_piecewise_constant(self):
        cfg = PolarConfig.for_image(64, 64, h_r=16, w_psi=16, cover_corners=True)
        out = polar_slice(self.rng.normal(size=(1, 16, 16)), cfg, KernelKind.NEAREST, (64, 64))
        self.assertLessEqual(np.unique(out).size, 256)

    def test_polar_shape_is_checked(self):
        cfg = PolarConfig.for_image(10, 10, h_r=8, w_psi=16)
        with self.assertRaises(InvalidArgument):
            polar_slice(np.zeros((1, 16, 8)), cfg, KernelKind.BILINEAR, (10, 10))


class ParametricSliceTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(41)
        self.cfg = PolarConfig.for_image(14, 14, h_r=7, w_psi=12)
        self.p = self.rng.normal(size=(2, 7, 12))

    def test_bilinear_initialization_matches_polar_slice(self):
        slicer = ParametricSlicer.bilinear((14, 14), self.cfg)
        assert_allclose(parametric_slice(self.p, slicer, self.cfg),
                        polar_slice(self.p, self.cfg, KernelKind.BILINEAR, (14, 14)), atol=1e-15)

    def test_one_hot_selects_lower_corner(self):
        l = np.zeros((14, 14, 2, 2))
        l[..., 0, 0] = 1.0
        out = parametric_slice(self.p, ParametricSlicer(l), self.cfg)
        grid = polar_grid(14, 14, self.cfg)
        rows = np.floor(grid.gx).astype(int)
        cols = np.floor(grid.gy).astype(int) % 12
        inside = rows < 7
        assert_array_equal(out[:, inside], self.p[:, rows[inside], cols[inside]])
        assert_array_equal(out[:, ~inside], 0.0)

    def test_matches_oracle(self):
        for trial in range(20):
            wrap = trial % 2 == 0
            size = int(self.rng.integers(2, 9))
            h_r, w_psi = (int(n) for n in self.rng.integers(2, 9, size=2))
            cfg = PolarConfig.for_image(size, size, h_r=h_r, w_psi=w_psi, angular_wrap=wrap)
            p = self.rng.normal(size=(2, h_r, w_psi))
            l = self.rng.uniform(-1, 1, size=(size, size, 2, 2))
            expected = oracles.parametric_slice(p, l, polar_grid(size, size, cfg), angular_wrap=wrap)
            assert_allclose(parametric_slice(p, ParametricSlicer(l), cfg), expected, atol=1e-12)

    def test_slicer_shape(self):
        with self.assertRaises(InvalidArgument):
            ParametricSlicer(np.zeros((4, 4, 2)))

    def test_backward_of_zero(self):
        slicer = ParametricSlicer(self.rng.uniform(size=(14, 14, 2, 2)))
        d_p, d_l = parametric_slice_backward(np.zeros((2, 14, 14)), self.p, slicer, self.cfg)
        assert_array_equal(d_p, 0.0)
        assert_array_equal(d_l, 0.0)

    def test_backward_single_pixel(self):
        p = self.p[:1]
        slicer = ParametricSlicer(self.rng.uniform(size=(14, 14, 2, 2)))
        d_u = np.zeros((1, 14, 14))
        d_u[0, 3, 5] = 1.0
        _, d_l = parametric_slice_backward(d_u, p, slicer, self.cfg)
        grid = polar_grid(14, 14, self.cfg)
        row, col = int(np.floor(grid.gx[3, 5])), int(np.floor(grid.gy[3, 5]))
        self.assertLess(row + 1, 7)
        expected = [[p[0, row + a, (col + b) % 12] for b in (0, 1)] for a in (0, 1)]
        assert_array_equal(d_l[3, 5], expected)
        self.assertEqual(np.count_nonzero(d_l[:3]), 0)

    def test_backward_is_adjoint_in_p(self):
        slicer = ParametricSlicer(self.rng.uniform(size=(14, 14, 2, 2)))
        d_u = self.rng.normal(size=(2, 14, 14))
        d_p, _ = parametric_slice_backward(d_u, self.p, slicer, self.cfg)
        assert_allclose(inner(parametric_slice(self.p, slicer, self.cfg), d_u), inner(self.p, d_p),
                        rtol=1e-10, atol=1e-10)


class SlicerFitTests(SimpleTestCase):

    def test_fit_lowers_the_loss(self):
        u = synth('smooth_blob', 32, 32, sigmas=(4.0, 9.0))
        cfg = PolarConfig.for_image(32, 32, h_r=12, w_psi=16)
        fit = fit_parametric_slicer(u, cfg, steps=10)
        self.assertEqual(len(fit.losses), 11)
        for before, after in zip(fit.losses, fit.losses[1:]):
            self.assertLessEqual(after, before + 1e-12)
        self.assertLess(fit.losses[-1], fit.losses[0])

        output = parametric_roundtrip(u, cfg, fit.slicer)
        metrics = roundtrip_metrics(u, output)
        assert_allclose(0.5 * metrics['mse'] * metrics['pixels'], fit.losses[-1], rtol=1e-9)

    def test_zero_steps(self):
        u = synth('disk', 16, 16, radius=5)
        cfg = PolarConfig.for_image(16, 16, h_r=8, w_psi=8)
        fit = fit_parametric_slicer(u, cfg, steps=0)
        self.assertEqual(len(fit.losses), 1)
        assert_array_equal(fit.slicer.l, ParametricSlicer.bilinear((16, 16), cfg).l)

    def test_learning_rate_must_be_positive(self):
        with self.assertRaises(InvalidArgument):
            fit_parametric_slicer(np.zeros((1, 4, 4)), PolarConfig.for_image(4, 4, 4, 4), learning_rate=0)


class RoundtripTests(SimpleTestCase):

    def test_constant_image(self):
        cfg = PolarConfig.for_image(24, 24, h_r=12, w_psi=24)
        out = polar_roundtrip_filter(np.full((1, 24, 24), 0.75), cfg, KernelKind.BILINEAR)
        mask = coverage_mask(24, 24, cfg)
        assert_allclose(out[0][mask], 0.75, rtol=1e-7)

    def test_metrics(self):
        u = np.full((1, 4, 4), 0.5)
        self.assertEqual(roundtrip_metrics(u, u), {'mse': 0.0, 'psnr': None, 'pixels': 16})
        metrics = roundtrip_metrics(u, u + 0.1)
        self.assertAlmostEqual(metrics['psnr'], 20.0, places=9)

    def test_error_decreases_with_grid_size(self):
        u = synth('smooth_blob', 224, 224, sigmas=(16.0, 40.0))
        mask = None
        errors = []
        for size in polar_presets():
            cfg = preset_config(224, 224, size)
            if mask is None:
                mask = coverage_mask(224, 224, cfg)
            assert_array_equal(coverage_mask(224, 224, cfg), mask)
            out = polar_roundtrip_filter(u, cfg, KernelKind.BILINEAR)
            errors.append(roundtrip_metrics(u, out, mask)['mse'])
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreater(coarse, fine)

    def test_grid_space_filter_follows_sectors(self):
        u = synth('ring', 64, 64, radius=16, thickness=8, noise_sigma=0.2, seed=3)
        cfg = PolarConfig.for_image(64, 64, h_r=16, w_psi=16)
        grid_space = polar_roundtrip_filter(u, cfg, KernelKind.NEAREST, GridFilter('box', radius=1))[0]
        image_space = GridFilter('box', radius=1)(u)[0]

        grid = polar_grid(64, 64, cfg)
        rows = np.floor(grid.gx + 0.5).astype(int)
        sectors = rows * 16 + np.floor(grid.gy + 0.5).astype(int) % 16
        covered = rows < 16

        def within_sector_variance(out):
            return np.mean([out[covered & (sectors == s)].var()
                            for s in np.unique(sectors[covered])])

        grid_var = within_sector_variance(grid_space)
        image_var = within_sector_variance(image_space)
        self.assertLess(grid_var, 1e-20)
        self.assertGreater(image_var, 1e-3)
        self.assertLess(grid_var / image_var, 1)

    def test_filters(self):
        t = np.random.default_rng(5).normal(size=(1, 6, 6))
        assert_array_equal(GridFilter()(t), t)
        self.assertEqual(GridFilter('gaussian', sigma=1.0)(t).shape, t.shape)
