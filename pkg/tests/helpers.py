"""Shared phantom builders for the test suite."""

from fflmpi import Disk, Square, make_grid, make_phantom


def two_shape_phantom(n, config):
    """Off-center disk plus square, both inside the sampling disk."""
    r = config.r_fov
    grid = make_grid(n, config)
    return make_phantom(grid, [Disk((-0.3 * r, 0.25 * r), 0.28 * r, 1.0),
                               Square((0.3 * r, -0.25 * r), 0.45 * r, 0.8)])


def centered_disk_phantom(n, config, radius_frac=0.5):
    grid = make_grid(n, config)
    return make_phantom(grid, Disk((0.0, 0.0), radius_frac * config.r_fov, 1.0))


def disk_mask(grid):
    """Indicator of the sampling disk (pixel centers inside fov_half)."""
    import numpy as np

    xs, ys = grid.coords()
    return (np.hypot(xs[None, :], ys[:, None]) <= grid.fov_half).astype(float)
