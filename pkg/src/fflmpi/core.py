"""Shared domain types for the FFL-MPI toolkit.

Scanner configuration, tracer model, image grids, phantoms, sinogram and
signal containers.  All types are immutable after construction and safe to
share across threads.
"""

import math
from dataclasses import dataclass, field

import numpy as np

MU0 = 4.0e-7 * math.pi          # magnetic permeability, T*m/A
KB = 1.380650424e-23            # Boltzmann constant, J/K
AVOGADRO = 6.02214076e23        # 1/mol


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


class GeometryError(ValueError):
    """Mismatched grids, geometries, or array dimensions."""


class OutOfSupportError(GeometryError):
    """Concentration support extends beyond the scanner's sampling disk."""


class ModeError(ValueError):
    """Operation not defined for the configured line-rotation mode."""


class SolverError(RuntimeError):
    """Reconstruction solve diverged or was mis-specified."""


class DegenerateScaleError(ValueError):
    """Normalization requested for identically zero data."""


def _readonly(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhysicsConstants:
    """Physical constants; temperature of the particle suspension in K."""

    mu0: float = MU0
    kb: float = KB
    temperature: float = 293.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class TracerModel:
    """Magnetite tracer description.

    core_diameter in m, saturation_magnetization in A/m,
    concentration_scale in mol/m^3 (reference molar concentration of the
    suspension; grid values themselves are areal densities).
    """

    core_diameter: float = 30e-9
    saturation_magnetization: float = 0.6 / MU0
    concentration_scale: float = 0.5
    constants: PhysicsConstants = field(default_factory=PhysicsConstants)

    def __post_init__(self):
        for name in ("core_diameter", "saturation_magnetization", "concentration_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def particle_moment(self):
        """Magnetic moment of a single particle, A*m^2: M_s * (pi/6) * d^3."""
        return self.saturation_magnetization * (math.pi / 6.0) * self.core_diameter**3

    @property
    def langevin_beta(self):
        """Scale factor mu0*m/(kB*T) of the Langevin argument, m/A."""
        c = self.constants
        return c.mu0 * self.particle_moment / (c.kb * c.temperature)


@dataclass(frozen=True)
class ScanConfig:
    """Ideal FFL scanner settings.

    gradient (A/m^2) and amplitude (A/m) are stored in field units; the
    tabulated tesla-based values G[T/(m*mu0)] and A[T/mu0] convert via
    division by mu0 (see from_table_units).  coil_sensitivities are
    dimensionless 2-vectors, one per receive coil.
    """

    gradient: float = 4.0 / MU0
    amplitude: float = 0.015 / MU0
    f_drive: float = 25e3
    f_rot: float = 1e3
    f_sample: float = 8e6
    coil_sensitivities: tuple = ((0.015 / 293.29, 0.0), (0.0, 0.015 / 379.71))
    rotation_mode: str = "simultaneous"
    n_angles: int = 25
    total_time: float = 0.0      # 0 selects the mode default

    def __post_init__(self):
        if self.rotation_mode not in ("sequential", "simultaneous"):
            raise ConfigError(f"unknown rotation_mode {self.rotation_mode!r}")
        if not (self.gradient > 0 and self.amplitude > 0):
            raise ConfigError("gradient and amplitude must be positive")
        if not self.f_sample > 2 * self.f_drive:
            raise ConfigError("f_sample must exceed 2*f_drive")
        if not self.f_drive > self.f_rot:
            raise ConfigError("f_drive must exceed f_rot")
        if self.n_angles < 1:
            raise ConfigError("n_angles must be at least 1")
        if self.total_time < 0:
            raise ConfigError("total_time must be nonnegative")
        object.__setattr__(self, "coil_sensitivities",
                           tuple(tuple(float(x) for x in p) for p in self.coil_sensitivities))

    @classmethod
    def from_table_units(cls, gradient_t=4.0, amplitude_t=0.015, **kw):
        """Build from tabulated units: gradient in T/(m*mu0), amplitude in T/mu0."""
        return cls(gradient=gradient_t / MU0, amplitude=amplitude_t / MU0, **kw)

    @property
    def r_fov(self):
        """Maximum FFL displacement A/G, m; radius of the sampling disk."""
        return self.amplitude / self.gradient

    @property
    def n_coils(self):
        return len(self.coil_sensitivities)

    @property
    def coil_array(self):
        return np.asarray(self.coil_sensitivities, dtype=float)

    @property
    def duration(self):
        """Effective total measurement time, s.

        Defaults: 1/(2*f_rot) for simultaneous rotation (a half turn of the
        line), n_angles/(2*f_drive) for sequential rotation (one full
        translation per angle).
        """
        if self.total_time > 0:
            return self.total_time
        if self.rotation_mode == "simultaneous":
            return 1.0 / (2.0 * self.f_rot)
        return self.n_angles / (2.0 * self.f_drive)

    @property
    def n_samples(self):
        return int(round(self.duration * self.f_sample))

    @property
    def samples_per_sweep(self):
        """Time samples per half drive-period (one full FFL translation)."""
        return int(round(self.f_sample / (2.0 * self.f_drive)))

    def sequential_angles(self):
        """Sweep angles j*pi/n_angles, j = 0..n_angles-1."""
        return np.arange(self.n_angles) * math.pi / self.n_angles

    def time_grid(self):
        return np.arange(self.n_samples) / self.f_sample


@dataclass(frozen=True)
class ImageGrid:
    """Square pixel grid centered at the origin on [-fov_half, fov_half]^2.

    values[iy, ix] is the concentration on the cell whose center is
    ((ix-(n-1)/2)*pixel_size, (iy-(n-1)/2)*pixel_size).  Values are areal
    densities, so a pixel carries values*pixel_size^2 particles.
    """

    n_x: int
    n_y: int
    fov_half: float
    values: np.ndarray

    def __post_init__(self):
        if self.n_x != self.n_y:
            raise GeometryError("grid must be square")
        if self.n_x < 2:
            raise ValueError("grid needs at least 2 pixels per axis")
        if not self.fov_half > 0:
            raise ValueError("fov_half must be positive")
        v = _readonly(self.values)
        if v.shape != (self.n_y, self.n_x):
            raise GeometryError(f"values shape {v.shape} != {(self.n_y, self.n_x)}")
        object.__setattr__(self, "values", v)

    @property
    def pixel_size(self):
        return 2.0 * self.fov_half / self.n_x

    def coords(self):
        """Pixel-center coordinates (xs, ys), each of length n."""
        n = self.n_x
        c = (np.arange(n) - (n - 1) / 2.0) * self.pixel_size
        return c, c.copy()

    def with_values(self, values):
        return ImageGrid(self.n_x, self.n_y, self.fov_half, np.asarray(values, float))


@dataclass(frozen=True)
class Sinogram:
    """Radon-domain data: values[i, j] at angle angles[i], displacement s_grid[j]."""

    angles: np.ndarray
    s_grid: np.ndarray
    values: np.ndarray
    uniform_s: bool = False

    def __post_init__(self):
        a = _readonly(self.angles)
        s = _readonly(self.s_grid)
        v = _readonly(self.values)
        if v.shape != (a.size, s.size):
            raise GeometryError(f"sinogram shape {v.shape} != {(a.size, s.size)}")
        if s.size > 1 and not np.all(np.diff(s) > 0):
            raise GeometryError("s_grid must be strictly increasing")
        for name, arr in (("angles", a), ("s_grid", s), ("values", v)):
            object.__setattr__(self, name, arr)

    def with_values(self, values):
        return Sinogram(self.angles, self.s_grid, np.asarray(values, float), self.uniform_s)


@dataclass(frozen=True)
class SignalTrace:
    """Per-coil voltage samples on an equidistant time grid."""

    t_grid: np.ndarray
    samples: np.ndarray          # (n_coils, n_t), volts

    def __post_init__(self):
        t = _readonly(self.t_grid)
        u = _readonly(np.atleast_2d(self.samples))
        if u.shape[1] != t.size:
            raise GeometryError("samples length does not match time grid")
        if t.size > 1:
            dt = np.diff(t)
            if not np.allclose(dt, dt[0], rtol=1e-6, atol=0.0):
                raise GeometryError("time grid must be equidistant")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "samples", u)

    @property
    def n_coils(self):
        return self.samples.shape[0]

    def with_samples(self, samples):
        return SignalTrace(self.t_grid, np.asarray(samples, float))


# ---------------------------------------------------------------------------
# Phantom shapes and rasterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float
    value: float = 1.0


@dataclass(frozen=True)
class Square:
    center: tuple
    side: float
    value: float = 1.0


def make_grid(n, config):
    """Zero-initialized n x n grid covering the scanner FOV [-A/G, A/G]^2."""
    if n < 2:
        raise ValueError("grid size must be at least 2")
    n = int(n)
    return ImageGrid(n, n, config.r_fov, np.zeros((n, n)))


def _shape_reach(shape):
    cx, cy = shape.center
    d = math.hypot(cx, cy)
    if isinstance(shape, Disk):
        if shape.radius < 0:
            raise ValueError("disk radius must be nonnegative")
        return d + shape.radius
    if isinstance(shape, Square):
        if shape.side < 0:
            raise ValueError("square side must be nonnegative")
        return d + shape.side * math.sqrt(0.5)
    raise TypeError(f"unsupported shape {type(shape).__name__}")


def _raster_disk(grid, shape, antialias):
    xs, ys = grid.coords()
    px = grid.pixel_size
    cx, cy = shape.center
    dist = np.hypot(xs[None, :] - cx, ys[:, None] - cy)
    if not antialias:
        return (dist <= shape.radius) * shape.value
    half_diag = px * math.sqrt(0.5)
    cov = np.zeros_like(dist)
    cov[dist <= shape.radius - half_diag] = 1.0
    edge = (dist > shape.radius - half_diag) & (dist < shape.radius + half_diag)
    if np.any(edge):
        # 32x32 subsampling of boundary pixels
        iy, ix = np.nonzero(edge)
        k = 32
        sub = (np.arange(k) + 0.5) / k - 0.5
        sx = xs[ix][:, None, None] + sub[None, :, None] * px
        sy = ys[iy][:, None, None] + sub[None, None, :] * px
        inside = (sx - cx) ** 2 + (sy - cy) ** 2 <= shape.radius**2
        cov[iy, ix] = inside.mean(axis=(1, 2))
    return cov * shape.value


def _raster_square(grid, shape, antialias):
    xs, ys = grid.coords()
    px = grid.pixel_size
    cx, cy = shape.center
    h = shape.side / 2.0
    if not antialias:
        inside = (np.abs(xs[None, :] - cx) <= h) & (np.abs(ys[:, None] - cy) <= h)
        return inside * shape.value
    # exact coverage: separable overlap of the pixel cell with the square
    ox = np.clip((np.minimum(xs + px / 2, cx + h) - np.maximum(xs - px / 2, cx - h)) / px, 0.0, 1.0)
    oy = np.clip((np.minimum(ys + px / 2, cy + h) - np.maximum(ys - px / 2, cy - h)) / px, 0.0, 1.0)
    return oy[:, None] * ox[None, :] * shape.value


def make_phantom(grid, shapes, normalized=False, antialias=True):
    """Rasterize one or more shapes onto the grid (values add where they overlap).

    Every shape must fit inside the sampling disk of radius fov_half;
    otherwise OutOfSupportError is raised.  With antialias, boundary pixels
    get their exact (disk: subsampled) area-coverage fraction.  With
    normalized, the result is scaled so its maximum equals one.
    """
    if isinstance(shapes, (Disk, Square)):
        shapes = [shapes]
    tol = 1.0 + 1e-12
    values = np.zeros((grid.n_y, grid.n_x))
    for shape in shapes:
        if _shape_reach(shape) > grid.fov_half * tol:
            raise OutOfSupportError(
                f"{type(shape).__name__} at {shape.center} exceeds the sampling disk "
                f"of radius {grid.fov_half:g}")
        if shape.value < 0:
            raise ValueError("shape value must be nonnegative")
        if isinstance(shape, Disk):
            values += _raster_disk(grid, shape, antialias)
        else:
            values += _raster_square(grid, shape, antialias)
    if normalized and values.max() > 0:
        values /= values.max()
    return grid.with_values(values)


def phantom_from_file(path, config, n=None):
    """Load a phantom from an image CSV onto the scanner FOV."""
    from . import io as _io
    values = _io.read_image_csv(path)
    if n is not None and values.shape != (n, n):
        raise GeometryError(f"file grid {values.shape} does not match requested {n}")
    if values.shape[0] != values.shape[1]:
        raise GeometryError("phantom file must be square")
    if np.any(values < 0):
        raise ValueError("phantom values must be nonnegative")
    grid = ImageGrid(values.shape[1], values.shape[0], config.r_fov, values)
    check_support(grid)
    return grid


def check_support(grid, slack_pixels=1.0):
    """Raise OutOfSupportError if mass sits outside the sampling disk.

    Nonzero pixels may reach at most slack_pixels*pixel_diagonal/2 beyond
    fov_half, which admits coverage-antialiased shapes touching the rim.
    """
    xs, ys = grid.coords()
    dist = np.hypot(xs[None, :], ys[:, None])
    limit = grid.fov_half + slack_pixels * grid.pixel_size * math.sqrt(0.5)
    if np.any((grid.values > 0) & (dist > limit)):
        raise OutOfSupportError("concentration support extends beyond the sampling disk")


class ParticleCount(tuple):
    """(n_p, bound): total particle count and the c_max*pi*R^2 upper bound."""

    def __new__(cls, n_p, bound):
        return super().__new__(cls, (n_p, bound))

    @property
    def n_p(self):
        return self[0]

    @property
    def bound(self):
        return self[1]


def total_particles(grid):
    """Integrate the areal density: N_p = sum(values) * pixel_area.

    Also returns the coarse bound c_max * pi * fov_half^2 obtained by
    replacing the concentration with its maximum on the sampling disk.
    """
    if np.any(grid.values < 0):
        raise ValueError("concentration values must be nonnegative")
    n_p = float(grid.values.sum() * grid.pixel_size**2)
    bound = float(grid.values.max() * math.pi * grid.fov_half**2)
    return ParticleCount(n_p, bound)
