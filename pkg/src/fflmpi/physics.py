"""Langevin magnetization model and FFL trajectory geometry.

All functions are pure and accept scalars or arrays.  Angles use the
convention e_phi = (-sin phi, cos phi), e_phi_perp = -(cos phi, sin phi);
the field-free line at time t is {r : r . e_phi = s_t}.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import ModeError

_SERIES_CUTOFF = 1e-4       # switch to Taylor series below this |argument|
_OVERFLOW_CUTOFF = 33.0     # beyond this, 1/sinh^2 underflows the 1/x^2 term


def _quarter_phase(x):
    """Reduce x to q/2 + r with integer q and |r| <= 1/4."""
    x = np.asarray(x, dtype=float)
    q = np.round(2.0 * x)
    return np.mod(q, 4.0), x - q / 2.0


def sinpi(x):
    """sin(pi*x), exact at integer and half-integer x."""
    q, r = _quarter_phase(x)
    s, c = np.sin(np.pi * r), np.cos(np.pi * r)
    return np.choose(q.astype(int), [s, c, -s, -c])[()]


def cospi(x):
    """cos(pi*x), exact at integer and half-integer x."""
    q, r = _quarter_phase(x)
    s, c = np.sin(np.pi * r), np.cos(np.pi * r)
    return np.choose(q.astype(int), [c, -s, -c, s])[()]


def _check_finite(lam):
    if not np.all(np.isfinite(lam)):
        raise ValueError("argument must be finite")


def langevin(lam):
    """Langevin function coth(x) - 1/x, continued with 0 at x = 0.

    Odd, monotone increasing, range (-1, 1).  A 5th-order series is used
    for |x| < 1e-4 to avoid cancellation.
    """
    lam = np.asarray(lam, dtype=float)
    _check_finite(lam)
    out = np.empty_like(lam)
    small = np.abs(lam) < _SERIES_CUTOFF
    ls = lam[small]
    out[small] = ls / 3.0 - ls**3 / 45.0 + 2.0 * ls**5 / 945.0
    lb = lam[~small]
    out[~small] = 1.0 / np.tanh(lb) - 1.0 / lb
    return out[()]


def langevin_derivative(lam):
    """Derivative 1/x^2 - 1/sinh(x)^2 of the Langevin function.

    Even, positive, maximum 1/3 at x = 0 (series below 1e-4); for
    |x| > 33 the sinh term underflows and 1/x^2 is returned.
    """
    lam = np.asarray(lam, dtype=float)
    _check_finite(lam)
    out = np.empty_like(lam)
    a = np.abs(lam)
    small = a < _SERIES_CUTOFF
    big = a > _OVERFLOW_CUTOFF
    mid = ~(small | big)
    ls = lam[small]
    out[small] = 1.0 / 3.0 - ls**2 / 15.0 + 2.0 * ls**4 / 63.0
    lm = lam[mid]
    out[mid] = 1.0 / lm**2 - 1.0 / np.sinh(lm) ** 2
    out[big] = 1.0 / lam[big] ** 2
    return out[()]


def mean_moment(h, tracer):
    """Modulus of the mean magnetic moment m * L(beta * H), A*m^2; odd in H."""
    h = np.asarray(h, dtype=float)
    _check_finite(h)
    return tracer.particle_moment * langevin(tracer.langevin_beta * h)


def mean_moment_derivative(h, tracer):
    """Field derivative m * beta * L'(beta * H); even, positive, peak at H = 0."""
    h = np.asarray(h, dtype=float)
    _check_finite(h)
    m = tracer.particle_moment
    beta = tracer.langevin_beta
    return m * beta * langevin_derivative(beta * h)


def excitation(t, f_drive):
    """Cosine excitation: Lambda(t) = -cos(2 pi f_d t) and its derivative.

    Returns (Lambda, Lambda_rate).  Other periodic excitations may be used
    anywhere a (Lambda, Lambda_rate) pair is consumed, provided Lambda maps
    into [-1, 1].
    """
    x = 2.0 * f_drive * np.asarray(t, dtype=float)
    lam = -cospi(x)
    lam_rate = 2.0 * math.pi * f_drive * sinpi(x)
    return lam, lam_rate


@dataclass(frozen=True)
class FflState:
    """Instantaneous line geometry: angle, displacement, and their rates."""

    t: float
    phi: float
    phi_rate: float
    s: float                 # displacement (A/G) * Lambda(t), m
    lambda_rate: float
    e_phi: np.ndarray        # (-sin phi, cos phi)
    e_phi_perp: np.ndarray   # -(cos phi, sin phi)


def _sweep_index(t, config):
    """Index of the enclosing half drive-period (one full FFL translation)."""
    return np.minimum(np.floor(np.asarray(t) * 2.0 * config.f_drive).astype(int),
                      _n_sweeps(config) - 1)


def _n_sweeps(config):
    return int(round(config.duration * 2.0 * config.f_drive))


def phase_fraction(t, config):
    """Rotation phase phi_t / pi: 2*f_rot*t for simultaneous rotation,
    piecewise-constant j/n_angles for sequential sweeps."""
    t = np.asarray(t, dtype=float)
    if config.rotation_mode == "simultaneous":
        return 2.0 * config.f_rot * t
    return _sweep_index(t, config) / config.n_angles


def _phase_state(config, x_drive, x_rot):
    x_drive = np.asarray(x_drive, dtype=float)
    x_rot = np.asarray(x_rot, dtype=float)
    phi = np.pi * x_rot
    if config.rotation_mode == "simultaneous":
        phi_rate = np.full_like(phi, 2.0 * math.pi * config.f_rot)
    else:
        phi_rate = np.zeros_like(phi)
    lam = -cospi(x_drive)
    lam_rate = 2.0 * math.pi * config.f_drive * sinpi(x_drive)
    return {
        "phi": phi,
        "phi_rate": phi_rate,
        "s": config.r_fov * lam,
        "lam": lam,
        "lam_rate": lam_rate,
        "sin_phi": sinpi(x_rot),
        "cos_phi": cospi(x_rot),
    }


def trajectory(config, t):
    """Vectorized line state over an array of times.

    Returns a dict with phi, phi_rate, s, lam, lam_rate, and the frame
    vectors as cos_phi/sin_phi components.
    """
    t = np.asarray(t, dtype=float)
    return _phase_state(config, 2.0 * config.f_drive * t, phase_fraction(t, config))


def _index_phase(k, steps_per_unit):
    """k / steps with the divisor snapped to an integer when it is one;
    keeps phase landmarks (sweep ends, quarter turns) exactly on grid."""
    r = round(steps_per_unit)
    if abs(steps_per_unit - r) < 1e-9 * steps_per_unit:
        return k / r
    return k / steps_per_unit


def sample_phases(config, n=None):
    """Drive and rotation phase fractions of every time sample.

    Computed from sample indices rather than times, so that drive turning
    points (integer drive phase) and quarter line-turns are represented
    exactly; returns (x_drive, x_rot) with Lambda = -cos(pi*x_drive) and
    phi = pi*x_rot.
    """
    n = config.n_samples if n is None else int(n)
    k = np.arange(n, dtype=float)
    x_drive = _index_phase(k, config.f_sample / (2.0 * config.f_drive))
    if config.rotation_mode == "simultaneous":
        x_rot = _index_phase(k, config.f_sample / (2.0 * config.f_rot))
    else:
        x_rot = np.minimum(np.floor(x_drive), config.n_angles - 1) / config.n_angles
    return x_drive, x_rot


def scan_trajectory(config):
    """Line state at every sample of the configured scan (exact phases)."""
    x_drive, x_rot = sample_phases(config)
    return _phase_state(config, x_drive, x_rot)


def ffl_state(t, config):
    """Line state at a single time within the scan duration."""
    t = float(t)
    if t < 0 or t > config.duration * (1 + 1e-12):
        raise ValueError(f"t = {t:g} outside scan duration {config.duration:g}")
    tr = trajectory(config, t)
    sin_phi = float(tr["sin_phi"])
    cos_phi = float(tr["cos_phi"])
    return FflState(
        t=t,
        phi=float(tr["phi"]),
        phi_rate=float(tr["phi_rate"]),
        s=float(tr["s"]),
        lambda_rate=float(tr["lam_rate"]),
        e_phi=np.array([-sin_phi, cos_phi]),
        e_phi_perp=np.array([-cos_phi, -sin_phi]),
    )


def speed_ratio(t, config):
    """Translation-to-rotation speed ratio (f_d/f_rot)*|sin(2 pi f_d t)|."""
    if config.rotation_mode != "simultaneous":
        raise ModeError("speed ratio is infinite for sequential line rotation")
    t = np.asarray(t, dtype=float)
    return (config.f_drive / config.f_rot * np.abs(sinpi(2.0 * config.f_drive * t)))[()]


def speed_ratio_envelope(config):
    """Peak value f_d/f_rot of the speed ratio."""
    if config.rotation_mode != "simultaneous":
        raise ModeError("speed ratio is infinite for sequential line rotation")
    return config.f_drive / config.f_rot
