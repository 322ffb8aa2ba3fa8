"""File formats: image CSV, 16-bit PGM, sinogram CSV, signal CSV, configs.

All writers embed the run's config hash (when given) as a comment so every
output can be traced to the configuration and seed that produced it.
Floats are written with repr precision, making reruns byte-identical.
"""

import hashlib

import numpy as np

from .core import ConfigError, GeometryError

_FMT = "%.17g"


def fmt_float(x):
    return _FMT % float(x)


_fmt = fmt_float


def _join(values):
    return ",".join(_fmt(v) for v in np.asarray(values, dtype=float).ravel())


def config_hash(resolved):
    """Short hash of a resolved key -> value configuration mapping."""
    canon = "\n".join(f"{k} = {resolved[k]}" for k in sorted(resolved))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Image CSV / PGM
# ---------------------------------------------------------------------------

def write_image_csv(path, values, cfg_hash=None):
    values = np.asarray(values, dtype=float)
    with open(path, "w") as fh:
        if cfg_hash:
            fh.write(f"# config_hash: {cfg_hash}\n")
        fh.write(f"# rows: {values.shape[0]} cols: {values.shape[1]}\n")
        for row in values:
            fh.write(_join(row) + "\n")


def read_image_csv(path):
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return values


def write_pgm(path, values, cfg_hash=None):
    """16-bit binary portable graymap, linearly mapped to [0, 65535].

    The original min/max (needed to undo the mapping) goes to a sidecar
    text file '<path>.minmax.txt'.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((values - lo) / span * 65535.0).astype(">u2")
    with open(path, "wb") as fh:
        header = f"P5\n# config_hash: {cfg_hash or 'none'}\n{values.shape[1]} {values.shape[0]}\n65535\n"
        fh.write(header.encode())
        fh.write(scaled.tobytes())
    with open(str(path) + ".minmax.txt", "w") as fh:
        if cfg_hash:
            fh.write(f"# config_hash: {cfg_hash}\n")
        fh.write(f"min = {_fmt(lo)}\nmax = {_fmt(hi)}\n")


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise GeometryError("not a binary PGM file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    w, h, maxval = fields
    raw = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos)
    return raw.reshape(h, w).astype(float) / maxval


# ---------------------------------------------------------------------------
# Sinogram CSV
# ---------------------------------------------------------------------------

def write_sinogram_csv(path, sino, cfg_hash=None):
    with open(path, "w") as fh:
        if cfg_hash:
            fh.write(f"# config_hash: {cfg_hash}\n")
        fh.write(f"# angles: {_join(sino.angles)}\n")
        fh.write(f"# s_grid: {_join(sino.s_grid)}\n")
        for row in sino.values:
            fh.write(_join(row) + "\n")


def _parse_floats(text):
    return np.array([float(x) for x in text.split(",") if x.strip()])


def read_sinogram_csv(path):
    from .core import Sinogram
    angles = s_grid = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("angles:"):
                    angles = _parse_floats(body[len("angles:"):])
                elif body.startswith("s_grid:"):
                    s_grid = _parse_floats(body[len("s_grid:"):])
                continue
            rows.append(_parse_floats(line))
    if angles is None or s_grid is None:
        raise GeometryError("sinogram CSV is missing its angle or s_grid header")
    return Sinogram(angles, s_grid, np.vstack(rows))


# ---------------------------------------------------------------------------
# Signal CSV
# ---------------------------------------------------------------------------

def write_signal_csv(path, trace, cfg_hash=None, u_star=None, seed=None):
    with open(path, "w") as fh:
        if cfg_hash:
            fh.write(f"# config_hash: {cfg_hash}\n")
        if u_star is not None:
            fh.write(f"# u_star: {_fmt(u_star)}\n")
        if seed is not None:
            fh.write(f"# seed: {seed}\n")
        fh.write("# columns: t" + "".join(f",coil{l + 1}" for l in range(trace.n_coils)) + "\n")
        for k in range(trace.t_grid.size):
            fh.write(_fmt(trace.t_grid[k]) + ","
                     + ",".join(_fmt(trace.samples[l, k]) for l in range(trace.n_coils))
                     + "\n")


def read_signal_csv(path):
    from .core import SignalTrace
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                meta[key.strip()] = val.strip()
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    trace = SignalTrace(data[:, 0], data[:, 1:].T)
    return trace, meta


# ---------------------------------------------------------------------------
# key = value configuration files
# ---------------------------------------------------------------------------

def parse_config_text(text):
    """Parse 'key = value' lines; '#' starts a comment; values stay strings."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())
