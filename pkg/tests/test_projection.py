"""Radon transform, weighted transform, adjoint, and sinogram builders."""

import math

import numpy as np
import pytest
from scipy.ndimage import rotate as nd_rotate

from fflmpi import (Disk, GeometryError, ModeError, ScanConfig, Sinogram,
                    build_full_sinogram, build_sequential_sinogram,
                    build_simultaneous_sinogram, make_grid, make_phantom,
                    radon_adjoint, radon_apply, sequential_geometry,
                    simultaneous_dashed_geometry, simultaneous_full_geometry,
                    weighted_radon_apply)
from fflmpi.projection import (column_of_sample, drive_s_grid, radon_matrix,
                               trapezoid_weights)
from helpers import centered_disk_phantom, disk_mask, two_shape_phantom


class TestDriveSGrid:
    def test_endpoints_and_monotone(self, sim_config):
        s = drive_s_grid(sim_config)
        assert s[0] == -sim_config.r_fov
        assert s[-1] == sim_config.r_fov
        assert np.all(np.diff(s) > 0)

    def test_size_from_sampling(self, sim_config):
        # f_s/(2 f_d) = 160 time samples per sweep -> 161 distinct displacements
        assert drive_s_grid(sim_config).size == 161

    def test_non_equidistant(self, sim_config):
        d = np.diff(drive_s_grid(sim_config))
        assert d.max() / d.min() > 10  # dense at the rim, coarse at the center

    def test_trapezoid_weights_sum(self, sim_config):
        s = drive_s_grid(sim_config)
        w = trapezoid_weights(s)
        assert w.sum() == pytest.approx(s[-1] - s[0], rel=1e-12)


class TestRadon:
    def test_zero_image(self, sim_config):
        grid = make_grid(33, sim_config)
        sino = radon_apply(grid, sequential_geometry(sim_config, n_angles=5))
        assert not sino.values.any()

    def test_disk_chord_lengths(self, sim_config):
        # Rc(phi, s) = 2*sqrt(r0^2 - s^2) for a unit disk, any angle
        n = 65
        ph = centered_disk_phantom(n, sim_config)
        r0 = sim_config.r_fov / 2
        px = ph.pixel_size
        geom = sequential_geometry(sim_config, n_angles=4)
        sino = radon_apply(ph, geom)
        s = sino.s_grid
        keep = np.abs(s) <= 0.9 * r0
        chord = 2 * np.sqrt(r0**2 - s[keep] ** 2)
        for row in sino.values:
            rel = np.abs(row[keep] - chord) / chord
            assert rel.max() <= 2 * px / r0

    def test_mass_preservation(self, sim_config):
        ph = two_shape_phantom(65, sim_config)
        geom = sequential_geometry(sim_config)
        sino = radon_apply(ph, geom)
        w = trapezoid_weights(sino.s_grid)
        mass_pixels = ph.values.sum() * ph.pixel_size**2
        mass_lines = sino.values @ w
        assert np.all(np.abs(mass_lines - mass_pixels) <= 0.01 * mass_pixels)

    def test_linearity(self, sim_config):
        grid = make_grid(33, sim_config)
        rng = np.random.default_rng(3)
        mask = disk_mask(grid)
        c1 = grid.with_values(rng.random((33, 33)) * mask)
        c2 = grid.with_values(rng.random((33, 33)) * mask)
        geom = sequential_geometry(sim_config, n_angles=6)
        lhs = radon_apply(grid.with_values(2.5 * c1.values + c2.values), geom).values
        rhs = 2.5 * radon_apply(c1, geom).values + radon_apply(c2, geom).values
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-18)

    def test_rotation_consistency(self, sim_config):
        # rotating the phantom shifts the sinogram angle axis
        n = 129
        grid = make_grid(n, sim_config)
        xs, ys = grid.coords()
        r = sim_config.r_fov
        inside = np.hypot(xs[None, :], ys[:, None]) <= 0.8 * r
        blob = np.exp(-(((xs[None, :] - 0.25 * r) ** 2 + (ys[:, None] - 0.1 * r) ** 2)
                        / (0.15 * r) ** 2)) * inside
        c = grid.with_values(blob)
        dphi = math.pi / 8
        # ndimage rotates in array (row-down) orientation: negate the angle
        rotated = grid.with_values(
            np.clip(nd_rotate(blob, -math.degrees(dphi), reshape=False, order=3),
                    0, None) * inside)
        base_angles = np.linspace(0.3, 2.2, 5)
        geom_a = sequential_geometry(sim_config, n_angles=4)
        s = geom_a.s_grid
        from fflmpi.projection import ProjectionGeometry
        ga = ProjectionGeometry(base_angles, s, "sequential", r)
        gb = ProjectionGeometry(base_angles + dphi, s, "sequential", r)
        sino_a = radon_apply(c, ga).values
        sino_b = radon_apply(rotated, gb).values
        err = np.linalg.norm(sino_a - sino_b) / np.linalg.norm(sino_a)
        assert err < 0.05

    def test_fov_mismatch_rejected(self, sim_config):
        geom = sequential_geometry(sim_config, n_angles=4)
        other = ScanConfig(amplitude=0.012 / (4e-7 * math.pi))
        grid = make_grid(33, other)
        with pytest.raises(GeometryError):
            radon_apply(grid, geom)


class TestWeightedRadon:
    def test_radial_symmetry_vanishes(self, sim_config):
        ph = centered_disk_phantom(129, sim_config)
        geom = sequential_geometry(sim_config, n_angles=7)
        plain = radon_apply(ph, geom)
        weighted = weighted_radon_apply(ph, geom)
        assert np.abs(weighted.values).max() <= 1e-3 * plain.values.max()

    def test_pointwise_bound(self, sim_config):
        # |weighted| <= R * plain, pointwise up to one pixel of slack
        ph = two_shape_phantom(65, sim_config)
        geom = sequential_geometry(sim_config)
        plain = radon_apply(ph, geom).values
        weighted = weighted_radon_apply(ph, geom).values
        r = sim_config.r_fov
        assert np.all(np.abs(weighted) <= (r + ph.pixel_size) * plain + 1e-300)

    def test_single_pixel_weight(self, sim_config):
        # for a point-like phantom the ratio weighted/plain recovers r0 . e_perp
        n = 65
        grid = make_grid(n, sim_config)
        values = np.zeros((n, n))
        iy, ix = 40, 22
        values[iy, ix] = 1.0
        c = grid.with_values(values)
        xs, ys = grid.coords()
        r0 = np.array([xs[ix], ys[iy]])
        geom = sequential_geometry(sim_config, n_angles=5)
        plain = radon_apply(c, geom).values
        weighted = weighted_radon_apply(c, geom).values
        for i, phi in enumerate(geom.angles):
            e_perp = -np.array([math.cos(phi), math.sin(phi)])
            j = np.argmax(plain[i])
            ratio = weighted[i, j] / plain[i, j]
            assert ratio == pytest.approx(r0 @ e_perp, abs=2 * grid.pixel_size)

    def test_even_profile_cancels_columnwise(self, sim_config):
        # an even-in-v profile along every line: centered Gaussian ring
        n = 97
        grid = make_grid(n, sim_config)
        xs, ys = grid.coords()
        rad = np.hypot(xs[None, :], ys[:, None])
        r = sim_config.r_fov
        c = grid.with_values(np.exp(-((rad - 0.4 * r) / (0.1 * r)) ** 2) * (rad <= r))
        geom = sequential_geometry(sim_config, n_angles=5)
        plain = radon_apply(c, geom).values
        weighted = weighted_radon_apply(c, geom).values
        assert np.abs(weighted).max() <= 1e-3 * plain.max()


class TestAdjoint:
    def test_inner_product_identity(self, sim_config):
        n = 33
        grid = make_grid(n, sim_config)
        geom = sequential_geometry(sim_config, n_angles=9)
        rng = np.random.default_rng(11)
        mask = disk_mask(grid)
        worst = 0.0
        for _ in range(50):
            c = grid.with_values(rng.random((n, n)) * mask)
            sino_v = rng.random((9, geom.s_grid.size))
            rc = radon_apply(c, geom)
            vt = Sinogram(geom.angles, geom.s_grid, sino_v)
            lhs = float(np.sum(rc.values * sino_v))
            back = radon_adjoint(vt, grid, geom)
            rhs = float(np.sum(c.values * back.values))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
        assert worst <= 1e-12

    def test_zero_sinogram(self, sim_config):
        grid = make_grid(17, sim_config)
        geom = sequential_geometry(sim_config, n_angles=3)
        z = Sinogram(geom.angles, geom.s_grid, np.zeros((3, geom.s_grid.size)))
        assert not radon_adjoint(z, grid, geom).values.any()

    def test_single_angle_backprojection_smears(self, sim_config):
        # constant sinogram at one angle back-projects to an image constant
        # along that angle's lines
        n = 49
        grid = make_grid(n, sim_config)
        from fflmpi.projection import ProjectionGeometry
        phi = 0.0  # lines {y = s}: backprojection constant along x
        geom = ProjectionGeometry(np.array([phi]), drive_s_grid(sim_config),
                                  "sequential", sim_config.r_fov)
        ones = Sinogram(geom.angles, geom.s_grid,
                        np.ones((1, geom.s_grid.size)))
        img = radon_adjoint(ones, grid, geom).values
        interior = img[10:-10, 10:-10]
        row_var = np.ptp(interior, axis=1)   # variation along x should vanish
        assert row_var.max() <= 1e-10 * np.abs(interior).max()

    def test_dimension_mismatch(self, sim_config):
        grid = make_grid(17, sim_config)
        geom = sequential_geometry(sim_config, n_angles=3)
        bad = Sinogram(np.array([0.0]), geom.s_grid,
                       np.ones((1, geom.s_grid.size)))
        with pytest.raises(GeometryError):
            radon_adjoint(bad, grid, geom)

    def test_matrix_matches_direct_apply(self, sim_config):
        ph = two_shape_phantom(65, sim_config)
        geom = sequential_geometry(sim_config)
        direct = radon_apply(ph, geom).values.ravel()
        mat = radon_matrix(65, sim_config.r_fov, geom)
        assert np.allclose(direct, mat @ ph.values.ravel(), rtol=1e-13, atol=1e-18)


class TestSinogramBuilders:
    def test_sequential_column_count(self, seq_config):
        ph = two_shape_phantom(33, seq_config)
        sino = build_sequential_sinogram(ph, seq_config)
        assert sino.values.shape[0] == 25
        assert sino.angles[0] == 0.0

    def test_sequential_columns_match_radon(self, seq_config):
        ph = two_shape_phantom(33, seq_config)
        sino = build_sequential_sinogram(ph, seq_config)
        geom = sequential_geometry(seq_config)
        ref = radon_apply(ph, geom)
        assert np.array_equal(sino.values, ref.values)

    def test_sequential_needs_sequential_mode(self, sim_config):
        ph = two_shape_phantom(33, sim_config)
        with pytest.raises(ModeError):
            build_sequential_sinogram(ph, sim_config)

    def test_dashed_column_count_and_angles(self, sim_config):
        ph = two_shape_phantom(33, sim_config)
        sino = build_simultaneous_sinogram(ph, sim_config)
        assert sino.values.shape[0] == 25
        assert np.all(sino.angles >= 0) and np.all(sino.angles < math.pi)
        assert np.allclose(np.diff(sino.angles), math.pi / 25, rtol=1e-12)

    def test_dashed_frozen_rotation_limit(self):
        # with a negligible rotation frequency every half-sweep sees angle ~0,
        # so the dashed columns collapse onto the first sequential column
        slow = ScanConfig(f_rot=1e-6, total_time=25 / (2 * 25e3))
        ph = two_shape_phantom(33, slow)
        dashed = build_simultaneous_sinogram(ph, slow)
        assert dashed.values.shape[0] == 25
        seq = radon_apply(ph, sequential_geometry(slow, n_angles=25))
        for row in dashed.values:
            assert np.allclose(row, seq.values[0], rtol=1e-6, atol=1e-12)

    def test_full_geometry_one_column_per_sample(self, sim_config):
        geom = simultaneous_full_geometry(sim_config)
        assert geom.n_columns == sim_config.n_samples
        cols = column_of_sample(geom, sim_config)
        assert np.array_equal(cols, np.arange(sim_config.n_samples))

    def test_full_mode_requires_simultaneous(self, seq_config):
        with pytest.raises(ModeError):
            simultaneous_full_geometry(seq_config)
        with pytest.raises(ModeError):
            simultaneous_dashed_geometry(seq_config)

    def test_column_of_sample_sweep_mapping(self, seq_config):
        geom = sequential_geometry(seq_config)
        cols = column_of_sample(geom, seq_config)
        assert cols[0] == 0
        assert cols[159] == 0
        assert cols[160] == 1
        assert cols[-1] == 24

    def test_column_shortage_rejected(self, sim_config):
        geom = simultaneous_dashed_geometry(sim_config)
        from fflmpi.projection import ProjectionGeometry
        short = ProjectionGeometry(geom.angles[:10], geom.s_grid,
                                   geom.mode, geom.fov_half)
        with pytest.raises(GeometryError):
            column_of_sample(short, sim_config)
