"""The FFL-MPI forward operator.

Two routes produce the induced voltages: direct pixel-sum integration of
the signal equation (the brute-force oracle) and the factorized form

    u_l = K1_l(Rc) + K2_l(weighted Rc) + K3_l(Rc),

where the K terms are per-sample convolutions of sinogram columns with the
mean-moment kernels.  For sequential rotation the K2/K3 prefactors vanish
identically and only the drive term remains.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import (DegenerateScaleError, GeometryError, ModeError, SignalTrace,
                   check_support, total_particles)
from .physics import (mean_moment, mean_moment_derivative, scan_trajectory,
                      trajectory)
from .projection import (MODE_DASHED, MODE_FULL, MODE_SEQUENTIAL,
                         ProjectionGeometry, column_of_sample, radon_profiles,
                         sequential_geometry, simultaneous_dashed_geometry,
                         simultaneous_full_geometry, trapezoid_weights)

_TIME_CHUNK = 256


@dataclass(frozen=True)
class KernelOperators:
    """Per-sample tables of the factorized forward operator.

    a1/a2/a3 hold the scalar prefactors per coil and time sample; the
    kernel tables sample the mean-moment derivative and the mean moment at
    G*(s_t - s') on the sinogram displacement grid; col_index maps each
    sample to its sinogram column.
    """

    geometry: ProjectionGeometry
    t_grid: np.ndarray
    s_t: np.ndarray
    a1: np.ndarray               # (L, n_t)
    a2: np.ndarray
    a3: np.ndarray
    kern_deriv: np.ndarray       # (n_t, n_s), even, positive
    kern_moment: np.ndarray      # (n_t, n_s), odd
    s_weights: np.ndarray        # (n_s,)
    col_index: np.ndarray        # (n_t,)


def _coil_projections(config, tr):
    """e_phi . p_l and e_phi_perp . p_l for every coil and sample."""
    p = config.coil_array                      # (L, 2)
    e_dot = -np.outer(p[:, 0], tr["sin_phi"]) + np.outer(p[:, 1], tr["cos_phi"])
    eperp_dot = -np.outer(p[:, 0], tr["cos_phi"]) - np.outer(p[:, 1], tr["sin_phi"])
    return e_dot, eperp_dot


def default_geometry(config):
    """Reconstruction-side geometry for the configured rotation mode."""
    if config.rotation_mode == "sequential":
        return sequential_geometry(config)
    return simultaneous_dashed_geometry(config)


def geometry_for_sinogram(config, sino):
    """Recover the scan geometry a sinogram was built on.

    The column count distinguishes the sweep-angle, half-sweep, and
    per-sample layouts; angle grids are verified to match.
    """
    candidates = [default_geometry(config)]
    if config.rotation_mode == "simultaneous":
        candidates.append(simultaneous_full_geometry(config))
    for geom in candidates:
        if geom.n_columns == sino.angles.size and np.allclose(
                geom.angles, sino.angles, rtol=0, atol=1e-12):
            if sino.s_grid.size != geom.s_grid.size or not np.allclose(
                    geom.s_grid, sino.s_grid, rtol=1e-12, atol=0):
                raise GeometryError("sinogram displacement grid does not match the scan")
            return geom
    raise GeometryError(
        f"sinogram with {sino.angles.size} columns matches no {config.rotation_mode} layout")


def kernel_operators(config, tracer, geometry=None):
    """Assemble the prefactor and kernel tables for the factorized operator."""
    if geometry is None:
        geometry = default_geometry(config)
    t = config.time_grid()
    tr = scan_trajectory(config)
    e_dot, eperp_dot = _coil_projections(config, tr)
    mu0 = tracer.constants.mu0
    a1 = -mu0 * config.amplitude * tr["lam_rate"][None, :] * e_dot
    a2 = mu0 * config.gradient * tr["phi_rate"][None, :] * e_dot
    a3 = -mu0 * tr["phi_rate"][None, :] * eperp_dot
    delta = config.gradient * (tr["s"][:, None] - geometry.s_grid[None, :])
    kern_deriv = np.asarray(mean_moment_derivative(delta, tracer))
    kern_moment = np.asarray(mean_moment(delta, tracer))
    return KernelOperators(
        geometry=geometry,
        t_grid=t,
        s_t=tr["s"],
        a1=a1, a2=a2, a3=a3,
        kern_deriv=kern_deriv,
        kern_moment=kern_moment,
        s_weights=trapezoid_weights(geometry.s_grid),
        col_index=column_of_sample(geometry, config),
    )


def _convolve(ops, sino_values, kernel):
    """Per-sample quadrature sum_j kernel[k,j] * w_j * v[col(k), j]."""
    cols = np.asarray(sino_values)[ops.col_index]
    return np.einsum("kj,j,kj->k", kernel, ops.s_weights, cols, optimize=True)


def _resolve_ops(v, config, tracer, ops):
    if ops is None:
        ops = kernel_operators(config, tracer, geometry_for_sinogram(config, v))
    elif ops.geometry.n_columns != v.angles.size:
        raise GeometryError("sinogram does not match the prepared operator geometry")
    return ops


def k1_apply(v, config, tracer, coil, ops=None):
    """Drive term: a1_l(t) times the mean-moment-derivative convolution of v.

    Exactly zero at drive turning points, where the translation rate
    vanishes.
    """
    ops = _resolve_ops(v, config, tracer, ops)
    conv = _convolve(ops, v.values, ops.kern_deriv)
    return SignalTrace(ops.t_grid, (ops.a1[coil] * conv)[None, :])


def k2_apply(w, config, tracer, coil, ops=None):
    """Rotation coupling term acting on the weighted Radon data.

    Identically zero for sequential rotation (phi_rate = 0).
    """
    ops = _resolve_ops(w, config, tracer, ops)
    conv = _convolve(ops, w.values, ops.kern_deriv)
    return SignalTrace(ops.t_grid, (ops.a2[coil] * conv)[None, :])


def k3_apply(v, config, tracer, coil, ops=None):
    """Orientation term: mean-moment convolution, scaled by phi_rate.

    Identically zero for sequential rotation; largest near the drive
    turning points.
    """
    ops = _resolve_ops(v, config, tracer, ops)
    conv = _convolve(ops, v.values, ops.kern_moment)
    return SignalTrace(ops.t_grid, (ops.a3[coil] * conv)[None, :])


def forward_factorized(c, v, config, tracer, ops=None):
    """Factorized forward operator: K1 v + K2 (weighted Rc) + K3 v.

    v is the Radon data paired with c; the weighted transform of c is
    evaluated internally on the same geometry.  Feeding v = Rc reproduces
    the direct signal up to quadrature error.
    """
    if np.any(v.values < 0) or np.any(c.values < 0):
        raise ValueError("factorized operator requires c >= 0 and v >= 0")
    ops = _resolve_ops(v, config, tracer, ops)
    geom = ops.geometry
    weighted = radon_profiles(c.values, c.fov_half, geom.angles, geom.s_grid,
                              weighted=True)
    conv1 = _convolve(ops, v.values, ops.kern_deriv)
    conv2 = _convolve(ops, weighted, ops.kern_deriv)
    conv3 = _convolve(ops, v.values, ops.kern_moment)
    samples = ops.a1 * conv1 + ops.a2 * conv2 + ops.a3 * conv3
    return SignalTrace(ops.t_grid, samples)


# ---------------------------------------------------------------------------
# Direct integration (oracle)
# ---------------------------------------------------------------------------

def _support_arrays(c):
    iy, ix = np.nonzero(c.values)
    xs, ys = c.coords()
    return xs[ix], ys[iy], c.values[iy, ix]


def forward_direct(c, config, tracer):
    """Direct pixel-sum evaluation of the signal equation.

    The time derivative of the mean moment is expanded analytically into
    its translation, rotation-coupling, and orientation parts, so the
    result is free of differencing noise and serves as the reference for
    the factorized route.
    """
    check_support(c)
    t = config.time_grid()
    tr = scan_trajectory(config)
    e_dot, eperp_dot = _coil_projections(config, tr)
    xr, yr, cr = _support_arrays(c)
    mu0 = tracer.constants.mu0
    area = c.pixel_size**2
    s1 = np.empty(t.size)
    s2 = np.empty(t.size)
    s3 = np.empty(t.size)
    for lo in range(0, t.size, _TIME_CHUNK):
        sl = slice(lo, lo + _TIME_CHUNK)
        proj = np.outer(-tr["sin_phi"][sl], xr) + np.outer(tr["cos_phi"][sl], yr)
        perp = np.outer(-tr["cos_phi"][sl], xr) + np.outer(-tr["sin_phi"][sl], yr)
        h = -config.gradient * proj + (config.amplitude * tr["lam"][sl])[:, None]
        md = mean_moment_derivative(h, tracer)
        s1[sl] = md @ cr
        s2[sl] = (md * perp) @ cr
        s3[sl] = mean_moment(h, tracer) @ cr
    drive = config.amplitude * tr["lam_rate"] * s1 - config.gradient * tr["phi_rate"] * s2
    samples = -mu0 * area * (e_dot * drive[None, :]
                             + eperp_dot * (tr["phi_rate"] * s3)[None, :])
    return SignalTrace(t, samples)


def magnetization_projection(c, config, tracer, t):
    """Time antiderivative of the voltage: -mu0 * sum c * mbar(H) (e_phi . p_l).

    Useful as an independent check: a central difference of this quantity
    over t reproduces forward_direct.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tr = trajectory(config, t)
    e_dot, _ = _coil_projections(config, tr)
    xr, yr, cr = _support_arrays(c)
    proj = np.outer(-tr["sin_phi"], xr) + np.outer(tr["cos_phi"], yr)
    h = -config.gradient * proj + (config.amplitude * tr["lam"])[:, None]
    s3 = mean_moment(h, tracer) @ cr
    return -tracer.constants.mu0 * c.pixel_size**2 * e_dot * s3[None, :]


# ---------------------------------------------------------------------------
# Normalization and noise
# ---------------------------------------------------------------------------

def normalize(trace):
    """Scale by the maximum absolute sample over all coils.

    Returns (normalized trace, u_star); operators meant to act on
    normalized data should be divided by the same u_star.
    """
    u_star = float(np.max(np.abs(trace.samples)))
    if u_star == 0.0:
        raise DegenerateScaleError("cannot normalize identically zero data")
    return trace.with_samples(trace.samples / u_star), u_star


def add_noise(trace, std, seed):
    """Add i.i.d. zero-mean Gaussian noise per sample; deterministic per seed."""
    if std < 0:
        raise ValueError("noise standard deviation must be nonnegative")
    if std == 0:
        return trace
    rng = np.random.default_rng(seed)
    return trace.with_samples(trace.samples + std * rng.standard_normal(trace.samples.shape))


# ---------------------------------------------------------------------------
# Magnitude bounds of the rotation-induced terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoilBounds:
    """Observed magnitudes and a-priori bounds for one receive coil."""

    coil: int
    max_k1: float
    max_k2: float
    max_k3: float
    k3_saturation_bound: float        # mu0 * phi_rate * ||p_l|| * m * N_p
    k3_saturation_bound_cmax: float   # N_p replaced by c_max * pi * R^2
    k2_over_k1: float                 # max |K2 w| / max |K1 v|, normalized scale
    k3_over_k1: float
    speed_ratio_ok: bool              # |K1| + slack >= ratio * |K2| at every sample
    speed_ratio_margin: float         # min over samples of lhs - rhs, in units of max|K1|


@dataclass(frozen=True)
class BoundReport:
    """Scanner-level bound summary for a simultaneous scan."""

    ratio_envelope: float             # f_d / f_rot
    n_p: float
    n_p_bound: float
    slack_factor: float               # quadrature slack, one pixel over R
    coils: tuple


def bound_report(c, config, tracer, geometry=None):
    """Evaluate the rotation-term magnitudes against their a-priori bounds.

    Uses the per-sample (exact-angle) sinogram so the diagnostics reflect
    the continuous scan.  The speed-ratio inequality
    |K1 v| >= (|lam_rate|/phi_rate) |K2 w| is checked pointwise with a
    one-quadrature-step slack of (pixel/R) * |K1 v|.
    """
    if config.rotation_mode != "simultaneous":
        raise ModeError("bounds are trivial for sequential rotation: the "
                        "rotation-induced terms vanish identically")
    if geometry is None:
        geometry = simultaneous_full_geometry(config)
    ops = kernel_operators(config, tracer, geometry)
    plain, weighted = radon_profiles(c.values, c.fov_half, geometry.angles,
                                     geometry.s_grid, both=True)
    conv1 = _convolve(ops, plain, ops.kern_deriv)
    conv2 = _convolve(ops, weighted, ops.kern_deriv)
    conv3 = _convolve(ops, plain, ops.kern_moment)
    n_p, n_p_bound = total_particles(c)
    phi_rate = 2.0 * math.pi * config.f_rot
    mu0 = tracer.constants.mu0
    m = tracer.particle_moment
    ratio = np.abs(scan_trajectory(config)["lam_rate"]) / phi_rate
    slack_factor = c.pixel_size / config.r_fov
    coils = []
    for l in range(config.n_coils):
        k1 = ops.a1[l] * conv1
        k2 = ops.a2[l] * conv2
        k3 = ops.a3[l] * conv3
        max_k1 = float(np.max(np.abs(k1)))
        p_norm = float(np.hypot(*config.coil_sensitivities[l]))
        lhs = np.abs(k1) * (1.0 + slack_factor)
        rhs = ratio * np.abs(k2)
        margin = float(np.min(lhs - rhs) / max_k1) if max_k1 > 0 else 0.0
        coils.append(CoilBounds(
            coil=l,
            max_k1=max_k1,
            max_k2=float(np.max(np.abs(k2))),
            max_k3=float(np.max(np.abs(k3))),
            k3_saturation_bound=mu0 * phi_rate * p_norm * m * n_p,
            k3_saturation_bound_cmax=mu0 * phi_rate * p_norm * m * n_p_bound,
            k2_over_k1=float(np.max(np.abs(k2)) / max_k1) if max_k1 > 0 else 0.0,
            k3_over_k1=float(np.max(np.abs(k3)) / max_k1) if max_k1 > 0 else 0.0,
            speed_ratio_ok=bool(np.all(lhs >= rhs)),
            speed_ratio_margin=margin,
        ))
    return BoundReport(
        ratio_envelope=config.f_drive / config.f_rot,
        n_p=n_p,
        n_p_bound=n_p_bound,
        slack_factor=slack_factor,
        coils=tuple(coils),
    )


def normalized_terms(c, config, tracer, geometry=None):
    """Per-coil normalized term curves (each K scaled by max |K1 v|).

    Returns (t_grid, khat1, khat2, khat3) with the K arrays shaped
    (n_coils, n_t); the diagnostic view of how small the rotation-induced
    terms stay relative to the drive term.
    """
    if config.rotation_mode != "simultaneous":
        raise ModeError("normalized term curves require simultaneous rotation")
    if geometry is None:
        geometry = simultaneous_full_geometry(config)
    ops = kernel_operators(config, tracer, geometry)
    plain, weighted = radon_profiles(c.values, c.fov_half, geometry.angles,
                                     geometry.s_grid, both=True)
    conv1 = _convolve(ops, plain, ops.kern_deriv)
    conv2 = _convolve(ops, weighted, ops.kern_deriv)
    conv3 = _convolve(ops, plain, ops.kern_moment)
    k1 = ops.a1 * conv1
    k2 = ops.a2 * conv2
    k3 = ops.a3 * conv3
    scale = np.max(np.abs(k1), axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    return ops.t_grid, k1 / scale, k2 / scale, k3 / scale
