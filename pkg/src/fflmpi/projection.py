"""Discrete Radon and weighted Radon transforms with matched adjoints.

Lines are parametrized as r(v) = s*e_phi - v*e_phi_perp and sampled at
pixel-size steps with bilinear interpolation and trapezoid weights; the
sampling is clipped to the chord of the disk of radius fov_half, so every
along-line coordinate satisfies |v| <= sqrt(fov_half^2 - s^2).  The sparse
operator built from the same sampling provides the exact algebraic adjoint.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import GeometryError, ImageGrid, ModeError, Sinogram, check_support
from .physics import cospi, sample_phases

MODE_SEQUENTIAL = "sequential"
MODE_DASHED = "simultaneous_dashed"
MODE_FULL = "simultaneous_full"


@dataclass(frozen=True)
class ProjectionGeometry:
    """Sinogram sampling: one column per angle, displacements s_grid.

    mode records how columns map to scan time: one column per sweep
    (sequential), one representative column per half drive-period
    (simultaneous_dashed), or one column per time sample
    (simultaneous_full).
    """

    angles: np.ndarray
    s_grid: np.ndarray
    mode: str
    fov_half: float

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        s = np.asarray(self.s_grid, dtype=float)
        a.setflags(write=False)
        s.setflags(write=False)
        if self.mode not in (MODE_SEQUENTIAL, MODE_DASHED, MODE_FULL):
            raise GeometryError(f"unknown geometry mode {self.mode!r}")
        if s.size < 2 or not np.all(np.diff(s) > 0):
            raise GeometryError("s_grid must be strictly increasing")
        if np.max(np.abs(s)) > self.fov_half * (1 + 1e-9):
            raise GeometryError("s_grid must lie within [-fov_half, fov_half]")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "s_grid", s)

    @property
    def n_columns(self):
        return self.angles.size


def trapezoid_weights(s_grid):
    """Composite trapezoid weights for a (possibly non-uniform) grid."""
    s = np.asarray(s_grid, dtype=float)
    w = np.empty_like(s)
    w[0] = (s[1] - s[0]) / 2.0
    w[-1] = (s[-1] - s[-2]) / 2.0
    w[1:-1] = (s[2:] - s[:-2]) / 2.0
    return w


def drive_s_grid(config, oversample=1):
    """Displacement samples induced by time sampling of one FFL sweep.

    The cosine excitation sampled at f_s gives s_k = -R*cos(pi*k/n) for
    k = 0..n with n = f_s/(2*f_d) samples per half drive-period; the grid
    is strictly increasing, non-uniform (dense at the rim), and covers
    [-R, R] inclusive.
    """
    n = config.samples_per_sweep * int(oversample)
    k = np.arange(n + 1)
    return -config.r_fov * np.asarray(cospi(k / n), dtype=float)


def sequential_geometry(config, n_angles=None, oversample=1):
    """Columns at the fixed sweep angles j*pi/n, j = 0..n-1."""
    n = config.n_angles if n_angles is None else int(n_angles)
    angles = np.arange(n) * math.pi / n
    return ProjectionGeometry(angles, drive_s_grid(config, oversample),
                              MODE_SEQUENTIAL, config.r_fov)


def simultaneous_dashed_geometry(config, oversample=1):
    """One column per half drive-period, anchored at its temporal midpoint.

    The representative angle of column j is phi at the midpoint of the
    j-th half-sweep; adjacent columns differ by pi*f_rot/f_d.
    """
    if config.rotation_mode != "simultaneous":
        raise ModeError("dashed sinogram geometry requires simultaneous rotation")
    n_cols = int(round(config.duration * 2.0 * config.f_drive))
    mid_t = (np.arange(n_cols) + 0.5) / (2.0 * config.f_drive)
    angles = 2.0 * math.pi * config.f_rot * mid_t
    return ProjectionGeometry(angles, drive_s_grid(config, oversample),
                              MODE_DASHED, config.r_fov)


def simultaneous_full_geometry(config, oversample=1):
    """One column per time sample at the exact instantaneous angle."""
    if config.rotation_mode != "simultaneous":
        raise ModeError("full sinogram geometry requires simultaneous rotation")
    angles = math.pi * sample_phases(config)[1]
    return ProjectionGeometry(angles, drive_s_grid(config, oversample),
                              MODE_FULL, config.r_fov)


# ---------------------------------------------------------------------------
# Line sampling and bilinear interpolation
# ---------------------------------------------------------------------------

def _line_sampling(angles, s_grid, fov_half, pixel):
    """Sample points of the chord-clipped lines for a batch of angles.

    Returns x, y of shape (n_ang, n_s, n_v), the shared along-line
    coordinates v (n_v,), and trapezoid weights (n_s, n_v) that are zero
    outside each chord.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    s = np.asarray(s_grid, dtype=float)
    v, w = _chord_weights(s, fov_half, pixel)
    sin_a = np.sin(angles)[:, None, None]
    cos_a = np.cos(angles)[:, None, None]
    sv = s[None, :, None]
    vv = v[None, None, :]
    x = -sv * sin_a + vv * cos_a
    y = sv * cos_a + vv * sin_a
    return x, y, v, w


def _bilinear(x, y, n, fov_half):
    """Flat pixel indices and weights of the 4-point bilinear stencil.

    Points outside the grid contribute weight zero.  Returns (idx4, w4)
    with a leading axis of length 4.
    """
    px = 2.0 * fov_half / n
    fx = x / px + (n - 1) / 2.0
    fy = y / px + (n - 1) / 2.0
    ix0 = np.floor(fx).astype(np.int64)
    iy0 = np.floor(fy).astype(np.int64)
    dx = fx - ix0
    dy = fy - iy0
    idx4 = np.empty((4,) + x.shape, dtype=np.int64)
    w4 = np.empty((4,) + x.shape)
    for q, (ox, oy, wq) in enumerate((
            (0, 0, (1 - dx) * (1 - dy)), (1, 0, dx * (1 - dy)),
            (0, 1, (1 - dx) * dy), (1, 1, dx * dy))):
        ix = ix0 + ox
        iy = iy0 + oy
        ok = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
        idx4[q] = np.where(ok, iy * n + ix, 0)
        w4[q] = np.where(ok, wq, 0.0)
    return idx4, w4


def _chord_weights(s_grid, fov_half, pixel):
    """Along-line sample coordinates and chord-clipped trapezoid weights."""
    s = np.asarray(s_grid, dtype=float)
    h = pixel
    m_max = int(math.floor(fov_half / h + 1e-9))
    v = np.arange(-m_max, m_max + 1) * h
    chord = np.sqrt(np.maximum(fov_half**2 - s**2, 0.0))
    m_s = np.floor(chord / h + 1e-9).astype(int)
    j = np.abs(np.arange(-m_max, m_max + 1))
    w = np.where(j[None, :] < m_s[:, None], h,
                 np.where(j[None, :] == m_s[:, None],
                          np.where(m_s[:, None] == 0, h, h / 2.0), 0.0))
    return v, w


def radon_profiles(values, fov_half, angles, s_grid, weighted=False, both=False):
    """Line integrals of a pixel image over a set of angles.

    values is the (n, n) image, angles/s_grid define the sampling.  With
    weighted, each line integral carries the along-line weight
    r . e_phi_perp = -v; with both, the pair (plain, weighted) is returned
    from a single interpolation pass.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    pixel = 2.0 * fov_half / n
    # one-pixel zero border absorbs the bilinear stencil at the rim, so no
    # bounds masking is needed (all sample points lie inside the disk)
    padded = np.zeros((n + 2, n + 2))
    padded[1:-1, 1:-1] = values
    pflat = padded.ravel()
    stride = n + 2
    v, w = _chord_weights(s_grid, fov_half, pixel)
    n_s, n_v = w.shape
    out_p = np.empty((angles.size, n_s))
    out_w = np.empty((angles.size, n_s)) if (weighted or both) else None
    offset = (n - 1) / 2.0 + 1.0
    neg_v = -v
    chunk = max(1, int(6e6 / (n_s * n_v)))
    shape = (chunk, n_s, n_v)
    fx, fy, dx, dy, interp, tmp = (np.empty(shape) for _ in range(6))
    ix0 = np.empty(shape, dtype=np.intp)
    base = np.empty(shape, dtype=np.intp)
    gath = np.empty(shape)
    sv = np.asarray(s_grid)[None, :, None]
    vv = v[None, None, :]
    for lo in range(0, angles.size, chunk):
        a = angles[lo:lo + chunk]
        if a.size != chunk:     # final short chunk
            shape = (a.size, n_s, n_v)
            fx, fy, dx, dy, interp, tmp = (np.empty(shape) for _ in range(6))
            ix0 = np.empty(shape, dtype=np.intp)
            base = np.empty(shape, dtype=np.intp)
            gath = np.empty(shape)
        sin_a = (np.sin(a) / pixel)[:, None, None]
        cos_a = (np.cos(a) / pixel)[:, None, None]
        # in-disk points land in the padded frame at [0.5, n+0.5]; points
        # beyond the chord carry zero weight and are clamped to stay in
        # bounds without touching genuine rim samples
        np.multiply(vv, cos_a, out=fx)
        fx -= sv * sin_a
        fx += offset
        np.clip(fx, 0.0, n + 0.75, out=fx)
        np.multiply(vv, sin_a, out=fy)
        fy += sv * cos_a
        fy += offset
        np.clip(fy, 0.0, n + 0.75, out=fy)
        ix0[...] = fx             # floor: fx >= 0 inside the padded frame
        np.subtract(fx, ix0, out=dx)
        base[...] = fy
        np.subtract(fy, base, out=dy)
        base *= stride
        base += ix0
        # accumulate the four bilinear corners
        np.take(pflat, base, out=gath)
        np.subtract(1.0, dx, out=tmp)
        np.multiply(tmp, gath, out=interp)
        base += 1
        np.take(pflat, base, out=gath)
        gath *= dx
        interp += gath
        np.subtract(1.0, dy, out=tmp)
        interp *= tmp
        base += stride
        np.take(pflat, base, out=gath)
        gath *= dx
        np.subtract(base, 1, out=base)
        np.take(pflat, base, out=tmp)
        tmp -= tmp * dx
        gath += tmp
        gath *= dy
        interp += gath
        interp *= w[None, :, :]
        if not weighted or both:
            out_p[lo:lo + chunk] = interp.sum(axis=2)
        if weighted or both:
            out_w[lo:lo + chunk] = interp @ neg_v
    if both:
        return out_p, out_w
    return out_w if weighted else out_p


def _check_grid_geometry(grid, geom):
    if abs(grid.fov_half - geom.fov_half) > 1e-9 * geom.fov_half:
        raise GeometryError(
            f"grid FOV {grid.fov_half:g} does not match geometry FOV {geom.fov_half:g}")


def radon_apply(c, geom):
    """Radon transform of a concentration image on the given geometry."""
    _check_grid_geometry(c, geom)
    if np.any(c.values < 0):
        raise ValueError("concentration must be nonnegative")
    check_support(c)
    vals = radon_profiles(c.values, c.fov_half, geom.angles, geom.s_grid)
    return Sinogram(geom.angles, geom.s_grid, vals)


def weighted_radon_apply(c, geom):
    """Radon transform weighted by r . e_phi_perp along each line."""
    _check_grid_geometry(c, geom)
    if np.any(c.values < 0):
        raise ValueError("concentration must be nonnegative")
    check_support(c)
    vals = radon_profiles(c.values, c.fov_half, geom.angles, geom.s_grid, weighted=True)
    return Sinogram(geom.angles, geom.s_grid, vals)


# ---------------------------------------------------------------------------
# Sparse operator (for adjoints and the reconstruction solver)
# ---------------------------------------------------------------------------

_MATRIX_CACHE = {}


def radon_matrix(n, fov_half, geom, weighted=False):
    """CSR matrix of the discrete (weighted) Radon transform.

    Rows follow the flattened sinogram (angle-major), columns the
    flattened image.  The matrix realizes exactly the same quadrature as
    radon_profiles, so its transpose is the exact adjoint.
    """
    key = (n, round(fov_half, 15), weighted,
           geom.angles.tobytes(), geom.s_grid.tobytes())
    hit = _MATRIX_CACHE.get(key)
    if hit is not None:
        return hit
    pixel = 2.0 * fov_half / n
    n_s = geom.s_grid.size
    rows, cols, data = [], [], []
    for a_idx in range(geom.n_columns):
        x, y, v, w = _line_sampling(geom.angles[a_idx], geom.s_grid, fov_half, pixel)
        idx4, w4 = _bilinear(x, y, n, fov_half)
        full_w = w4 * w[None, None, :, :]
        if weighted:
            full_w = full_w * (-v)[None, None, None, :]
        row = np.broadcast_to(
            a_idx * n_s + np.arange(n_s)[None, None, :, None], idx4.shape)
        keep = full_w.ravel() != 0.0
        rows.append(row.ravel()[keep])
        cols.append(idx4.ravel()[keep])
        data.append(full_w.ravel()[keep])
    mat = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(geom.n_columns * n_s, n * n))
    if len(_MATRIX_CACHE) > 16:
        _MATRIX_CACHE.clear()
    _MATRIX_CACHE[key] = mat
    return mat


def radon_adjoint(sino, grid_template, geom=None):
    """Exact algebraic adjoint (back-projection) of radon_apply.

    grid_template supplies the target grid shape and FOV; its values are
    ignored.  The geometry defaults to the sinogram's own angle/s grids in
    sequential mode.
    """
    if geom is None:
        geom = ProjectionGeometry(sino.angles, sino.s_grid, MODE_SEQUENTIAL,
                                  grid_template.fov_half)
    if sino.values.shape != (geom.n_columns, geom.s_grid.size):
        raise GeometryError("sinogram does not match geometry dimensions")
    _check_grid_geometry(grid_template, geom)
    n = grid_template.n_x
    mat = radon_matrix(n, grid_template.fov_half, geom)
    img = mat.T @ sino.values.ravel()
    return grid_template.with_values(img.reshape(n, n))


# ---------------------------------------------------------------------------
# Scan-pattern sinogram builders
# ---------------------------------------------------------------------------

def build_sequential_sinogram(c, config, n_angles=None, oversample=1):
    """Angle-by-angle sinogram of the sequential scan.

    Column j holds the Radon profile at the fixed sweep angle phi_j on the
    displacement grid induced by the time sampling of one sweep.
    """
    if config.rotation_mode != "sequential":
        raise ModeError("sequential sinogram requires sequential rotation mode")
    geom = sequential_geometry(config, n_angles, oversample)
    return radon_apply(c, geom)


def build_simultaneous_sinogram(c, config, oversample=1):
    """Half-sweep sinogram of the simultaneous scan.

    One column per half drive-period, evaluated at the representative
    (midpoint) angle of that half-sweep; columns cover [0, pi) for the
    default measurement time of a half line-rotation.
    """
    geom = simultaneous_dashed_geometry(config, oversample)
    return radon_apply(c, geom)


def build_full_sinogram(c, config, oversample=1):
    """Per-sample sinogram of the simultaneous scan (one column per angle
    the line attains; the exact-reference counterpart of the half-sweep
    version)."""
    geom = simultaneous_full_geometry(config, oversample)
    return radon_apply(c, geom)


def column_of_sample(geom, config, n_t=None):
    """Map each time-sample index to its sinogram column.

    Sequential and dashed geometries use the enclosing sweep/half-sweep;
    the full geometry is one column per sample.
    """
    n_t = config.n_samples if n_t is None else int(n_t)
    if geom.mode == MODE_FULL:
        if geom.n_columns != n_t:
            raise GeometryError(
                f"full geometry has {geom.n_columns} columns for {n_t} samples")
        return np.arange(n_t)
    x_drive = sample_phases(config, n_t)[0]
    idx = np.minimum(np.floor(x_drive).astype(int), geom.n_columns - 1)
    expected = int(round(config.duration * 2.0 * config.f_drive))
    if geom.mode == MODE_SEQUENTIAL:
        expected = min(expected, config.n_angles)
    if geom.n_columns < expected:
        raise GeometryError(
            f"geometry provides {geom.n_columns} columns, scan needs {expected}")
    return idx
