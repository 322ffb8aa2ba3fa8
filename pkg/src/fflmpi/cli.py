"""Command-line pipeline: simulate, bounds, reconstruct.

All commands consume a plain-text 'key = value' configuration file whose
keys (with the documented defaults) are listed in DEFAULTS below.  Every
output file embeds the hash of the resolved configuration, so a run is
fully reproducible from its config file and seed.

Exit codes: 0 success, 2 configuration error, 3 geometry/support error,
4 solver failure, 5 I/O failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .core import (MU0, ConfigError, Disk, GeometryError, ModeError,
                   PhysicsConstants, ScanConfig, SolverError, Square, TracerModel,
                   make_grid, make_phantom, phantom_from_file)
from .forward import (add_noise, bound_report, forward_direct, normalize,
                      normalized_terms)
from .metrics import ssim
from .projection import build_sequential_sinogram, build_simultaneous_sinogram
from .solver import ReconProblem, parameter_sweep, solve_joint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_SOLVER = 4
EXIT_IO = 5

# Documented defaults: scanner and tracer rows follow the reference
# simulation parameters (tesla-based units where noted).
DEFAULTS = {
    "scanner.gradient": 4.0,                 # T/(m*mu0)
    "scanner.amplitude": 0.015,              # T/mu0
    "scanner.f_drive": 25e3,                 # Hz
    "scanner.f_rot": 1e3,                    # Hz
    "scanner.f_sample": 8e6,                 # Hz
    "scanner.coil1": (0.015 / 293.29, 0.0),  # dimensionless sensitivity
    "scanner.coil2": (0.0, 0.015 / 379.71),
    "scanner.n_angles": 25,
    "scanner.total_time": 0.0,               # s; 0 selects the mode default
    "tracer.core_diameter": 30e-9,           # m
    "tracer.saturation_magnetization": 0.6,  # T (stored as value/mu0 A/m)
    "tracer.concentration": 0.5,             # mol/m^3
    "tracer.temperature": 293.0,             # K
    "simulation.mode": "simultaneous",
    "simulation.grid_sim": 129,
    "simulation.grid_recon": 65,
    "simulation.noise_std": 0.0,             # V
    "simulation.noise_percent": 0.0,         # percent of u*
    "simulation.seed": 1234,
    "phantom.preset": "two_shapes",          # two_shapes|centered_disk|small_disk|file
    "phantom.file": "",
    "phantom.normalized": 0,
    "recon.method": "M3",
    "recon.alpha1": 2e4,
    "recon.alpha2": 1e-3,
    "recon.sweep": 0,
    "recon.sweep_alpha1": (1e4, 2e4, 4e4),
    "recon.sweep_alpha2": (3e-4, 1e-3, 3e-3),
    "recon.max_iters": 2000,
    "recon.tol": 1e-6,
}

PAPER_SCALE = {"simulation.grid_sim": 501, "simulation.grid_recon": 201}


def _coerce(key, raw):
    default = DEFAULTS[key]
    try:
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(","))
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}: {exc}") from None


class RunConfig:
    """Resolved configuration: file values over documented defaults."""

    def __init__(self, entries=None, seed=None, paper_scale=False):
        values = dict(DEFAULTS)
        for key, raw in (entries or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
        if paper_scale:
            values.update(PAPER_SCALE)
        if seed is not None:
            values["simulation.seed"] = int(seed)
        if values["recon.method"] not in ("M1", "M2", "M3"):
            raise ConfigError("recon.method must be M1, M2, or M3")
        if values["simulation.mode"] not in ("sequential", "simultaneous"):
            raise ConfigError("simulation.mode must be sequential or simultaneous")
        self.values = values
        self.hash = fio.config_hash({k: repr(v) for k, v in values.items()})

    @classmethod
    def from_file(cls, path, seed=None, paper_scale=False):
        return cls(fio.read_config(path), seed=seed, paper_scale=paper_scale)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self):
        return int(self.values["simulation.seed"])

    def scan_config(self):
        v = self.values
        return ScanConfig.from_table_units(
            gradient_t=v["scanner.gradient"],
            amplitude_t=v["scanner.amplitude"],
            f_drive=v["scanner.f_drive"],
            f_rot=v["scanner.f_rot"],
            f_sample=v["scanner.f_sample"],
            coil_sensitivities=(v["scanner.coil1"], v["scanner.coil2"]),
            rotation_mode=v["simulation.mode"],
            n_angles=v["scanner.n_angles"],
            total_time=v["scanner.total_time"],
        )

    def tracer(self):
        v = self.values
        return TracerModel(
            core_diameter=v["tracer.core_diameter"],
            saturation_magnetization=v["tracer.saturation_magnetization"] / MU0,
            concentration_scale=v["tracer.concentration"],
            constants=PhysicsConstants(temperature=v["tracer.temperature"]),
        )

    def phantom(self, n):
        config = self.scan_config()
        grid = make_grid(n, config)
        r = config.r_fov
        preset = self.values["phantom.preset"]
        if preset == "two_shapes":
            shapes = [Disk((-0.3 * r, 0.25 * r), 0.28 * r, 1.0),
                      Square((0.3 * r, -0.25 * r), 0.45 * r, 0.8)]
        elif preset == "centered_disk":
            shapes = [Disk((0.0, 0.0), 0.5 * r, 1.0)]
        elif preset == "small_disk":
            shapes = [Disk((0.0, 0.4 * r), 0.1 * r, 1.0)]
        elif preset == "file":
            return phantom_from_file(self.values["phantom.file"], config, n=None)
        else:
            raise ConfigError(f"unknown phantom.preset {preset!r}")
        return make_phantom(grid, shapes, normalized=bool(self.values["phantom.normalized"]))


def _simulate_arrays(run):
    """Shared simulation path: phantom, trace (+noise), normalization."""
    config = run.scan_config()
    tracer = run.tracer()
    phantom = run.phantom(run["simulation.grid_sim"])
    trace = forward_direct(phantom, config, tracer)
    _, u_star = normalize(trace)
    std = run["simulation.noise_std"]
    if run["simulation.noise_percent"] > 0:
        std = std + run["simulation.noise_percent"] / 100.0 * u_star
    trace = add_noise(trace, std, run.seed)
    return config, tracer, phantom, trace, u_star, std


def cmd_simulate(config_path, out_dir, seed=None, paper_scale=False):
    """Simulate a scan: phantom, sinogram, signal, and term-magnitude files."""
    run = RunConfig.from_file(config_path, seed=seed, paper_scale=paper_scale)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config, tracer, phantom, trace, u_star, std = _simulate_arrays(run)
    h = run.hash
    written = []

    def note(path):
        written.append(str(path))
        return path

    fio.write_image_csv(note(out / "phantom_sim.csv"), phantom.values, h)
    fio.write_pgm(note(out / "phantom_sim.pgm"), phantom.values, h)
    gt = run.phantom(run["simulation.grid_recon"])
    fio.write_image_csv(note(out / "phantom_recon.csv"), gt.values, h)
    if config.rotation_mode == "sequential":
        sino = build_sequential_sinogram(phantom, config)
        fio.write_sinogram_csv(note(out / "sinogram_sequential.csv"), sino, h)
    else:
        sino = build_simultaneous_sinogram(phantom, config)
        fio.write_sinogram_csv(note(out / "sinogram_simultaneous.csv"), sino, h)
        t, k1, k2, k3 = normalized_terms(phantom, config, tracer)
        with open(note(out / "terms.csv"), "w") as fh:
            fh.write(f"# config_hash: {h}\n")
            fh.write("# normalized term magnitudes per coil; drive_period = "
                     "index of the enclosing drive period\n")
            cols = ["t", "drive_period"]
            for l in range(config.n_coils):
                cols += [f"khat1_coil{l+1}", f"khat2_coil{l+1}", f"khat3_coil{l+1}"]
            fh.write("# columns: " + ",".join(cols) + "\n")
            period = np.floor(t * config.f_drive).astype(int)
            for k in range(t.size):
                row = [fio.fmt_float(t[k]), str(period[k])]
                for l in range(config.n_coils):
                    row += [fio.fmt_float(k1[l, k]), fio.fmt_float(k2[l, k]), fio.fmt_float(k3[l, k])]
                fh.write(",".join(row) + "\n")
    fio.write_signal_csv(note(out / "signal.csv"), trace, h, u_star=u_star, seed=run.seed)
    return written


def cmd_bounds(config_path, out_dir, seed=None, paper_scale=False):
    """Evaluate the rotation-term bounds and write the report table."""
    run = RunConfig.from_file(config_path, seed=seed, paper_scale=paper_scale)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = run.scan_config()
    tracer = run.tracer()
    path = out / "bounds_report.txt"
    lines = [f"config_hash: {run.hash}"]
    if config.rotation_mode == "sequential":
        lines += [
            "mode: sequential",
            "The rotation-induced terms vanish identically for sequential line",
            "rotation (the line angle is constant within a sweep), so their",
            "bounds are trivial; nothing to evaluate.",
        ]
    else:
        phantom = run.phantom(run["simulation.grid_sim"])
        rep = bound_report(phantom, config, tracer)
        n_p, n_p_bound = rep.n_p, rep.n_p_bound
        lines += [
            "mode: simultaneous",
            f"speed_ratio_envelope: {rep.ratio_envelope:.6g}",
            f"total_particles: {n_p:.6g}",
            f"total_particles_disk_bound: {n_p_bound:.6g}",
            f"quadrature_slack_factor: {rep.slack_factor:.6g}",
            "",
            "coil  max|K1|      max|K2|      max|K3|      K3_bound     "
            "K3_bound_cmax  K2/K1    K3/K1    ratio_ok",
        ]
        for cb in rep.coils:
            lines.append(
                f"{cb.coil + 1:4d}  {cb.max_k1:.5e}  {cb.max_k2:.5e}  "
                f"{cb.max_k3:.5e}  {cb.k3_saturation_bound:.5e}  "
                f"{cb.k3_saturation_bound_cmax:.5e}    {cb.k2_over_k1:.4f}   "
                f"{cb.k3_over_k1:.4f}   {'pass' if cb.speed_ratio_ok else 'FAIL'}")
    path.write_text("\n".join(lines) + "\n")
    return [str(path)]


def _contour_overlay(recon_values, gt_values):
    """Recon image with groundtruth boundary pixels pushed to the max level."""
    mask = gt_values > 0.5 * gt_values.max()
    edge = np.zeros_like(mask)
    edge[:-1, :] |= mask[:-1, :] != mask[1:, :]
    edge[:, :-1] |= mask[:, :-1] != mask[:, 1:]
    overlay = recon_values.copy()
    overlay[edge] = recon_values.max()
    return overlay


def cmd_reconstruct(config_path, out_dir, seed=None, paper_scale=False, jobs=1):
    """Reconstruct concentration and Radon data from (inline) simulated data."""
    run = RunConfig.from_file(config_path, seed=seed, paper_scale=paper_scale)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config, tracer, phantom, trace, _, std = _simulate_arrays(run)
    _, u_star = normalize(trace)
    uhat = trace.with_samples(trace.samples / u_star)
    gt = run.phantom(run["simulation.grid_recon"])
    problem = ReconProblem(
        method=run["recon.method"],
        data=uhat.samples,
        u_star=u_star,
        config=config,
        tracer=tracer,
        grid_n=run["simulation.grid_recon"],
        alpha1=run["recon.alpha1"],
        alpha2=run["recon.alpha2"],
        max_iters=run["recon.max_iters"],
        tol=run["recon.tol"],
    )
    if run["recon.sweep"]:
        sweep = parameter_sweep(problem, run["recon.sweep_alpha1"],
                                run["recon.sweep_alpha2"], gt, jobs=jobs)
        result = sweep.result
        alpha1, alpha2 = sweep.alpha1, sweep.alpha2
        table = sweep.table
    else:
        result = solve_joint(problem)
        alpha1, alpha2 = problem.alpha1, problem.alpha2
        table = None
    h = run.hash
    written = []

    def note(path):
        written.append(str(path))
        return path

    fio.write_image_csv(note(out / "recon_c.csv"), result.c.values, h)
    fio.write_pgm(note(out / "recon_c.pgm"), result.c.values, h)
    fio.write_sinogram_csv(note(out / "recon_v.csv"), result.v, h)
    fio.write_pgm(note(out / "recon_overlay.pgm"),
                  _contour_overlay(result.c.values, gt.values), h)
    score = ssim(result.c.values, gt.values)
    lines = [
        f"config_hash: {h}",
        f"method: {run['recon.method']}",
        f"alpha1: {alpha1:.6g}",
        f"alpha2: {alpha2:.6g}",
        f"u_star: {u_star:.6e}",
        f"noise_std: {std:.6e}" + (f" ({100 * std / u_star:.3g}% of u_star)" if std else ""),
        f"iterations: {result.iterations}",
        f"termination: {result.termination}",
        f"ssim: {score:.6f}",
        f"model_data_mismatch: {'yes (sweep-angle model on simultaneous data)' if result.model_data_mismatch else 'no'}",
        "residual_norms: " + ", ".join(f"{k}={val:.4e}" for k, val in result.residual_norms.items()),
        "objective_history: " + ",".join(fio.fmt_float(x) for x in result.objective_history),
    ]
    if table is not None:
        lines.append("")
        lines.append("sweep: alpha1, alpha2, ssim, objective, iterations")
        for entry in table:
            lines.append(f"  {entry.alpha1:.6g}, {entry.alpha2:.6g}, "
                         f"{entry.ssim:.6f}, {entry.objective:.6e}, {entry.iterations}")
    note(out / "report.txt").write_text("\n".join(lines) + "\n")
    return written


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fflmpi",
        description="Field-free-line MPI simulation and joint TV reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("bounds", cmd_bounds),
                     ("reconstruct", cmd_reconstruct)):
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override simulation.seed")
        p.add_argument("--paper-scale", action="store_true",
                       help="full-scale grids (501 simulate / 201 reconstruct)")
        if name == "reconstruct":
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel sweep workers")
    args = parser.parse_args(argv)
    kwargs = dict(seed=args.seed, paper_scale=args.paper_scale)
    if args.command == "reconstruct":
        kwargs["jobs"] = args.jobs
    fn = {"simulate": cmd_simulate, "bounds": cmd_bounds,
          "reconstruct": cmd_reconstruct}[args.command]
    try:
        written = fn(args.config, args.out, **kwargs)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, ModeError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
