"""Command-line pipeline: outputs, determinism, exit codes."""

import numpy as np
import pytest

from fflmpi import io as fio
from fflmpi.cli import (EXIT_CONFIG, EXIT_GEOMETRY, EXIT_OK, RunConfig,
                        cmd_bounds, cmd_simulate, main)

DESK = """
simulation.grid_sim = 33
simulation.grid_recon = 17
simulation.mode = {mode}
recon.method = {method}
recon.alpha1 = 2e4
recon.alpha2 = 1e-3
recon.max_iters = 120
"""


def write_cfg(tmp_path, name="run.cfg", mode="simultaneous", method="M3", extra=""):
    path = tmp_path / name
    path.write_text(DESK.format(mode=mode, method=method) + extra)
    return path


class TestRunConfig:
    def test_defaults_applied(self, tmp_path):
        run = RunConfig.from_file(write_cfg(tmp_path))
        assert run["scanner.f_drive"] == 25e3
        assert run["simulation.grid_sim"] == 33
        cfg = run.scan_config()
        assert cfg.r_fov == pytest.approx(3.75e-3)
        assert cfg.n_samples == 4000

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("scanner.f_driv = 25e3\n")
        with pytest.raises(Exception) as err:
            RunConfig.from_file(path)
        assert "unknown configuration key" in str(err.value)

    def test_seed_override_changes_hash(self, tmp_path):
        p = write_cfg(tmp_path)
        a = RunConfig.from_file(p)
        b = RunConfig.from_file(p, seed=999)
        assert a.hash != b.hash

    def test_paper_scale(self, tmp_path):
        run = RunConfig.from_file(write_cfg(tmp_path), paper_scale=True)
        assert run["simulation.grid_sim"] == 501
        assert run["simulation.grid_recon"] == 201


class TestSimulate:
    def test_simultaneous_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path)
        files = cmd_simulate(cfg, tmp_path / "out")
        names = {p.rsplit("/", 1)[-1] for p in files}
        assert names == {"phantom_sim.csv", "phantom_sim.pgm", "phantom_recon.csv",
                         "sinogram_simultaneous.csv", "terms.csv", "signal.csv"}
        trace, meta = fio.read_signal_csv(tmp_path / "out" / "signal.csv")
        assert trace.samples.shape == (2, 4000)   # total_time * f_s samples
        assert float(meta["u_star"]) > 0

    def test_sequential_sinogram_columns(self, tmp_path):
        cfg = write_cfg(tmp_path, mode="sequential", method="M1")
        cmd_simulate(cfg, tmp_path / "out")
        sino = fio.read_sinogram_csv(tmp_path / "out" / "sinogram_sequential.csv")
        assert sino.values.shape[0] == 25

    def test_deterministic_reruns(self, tmp_path):
        extra = "simulation.noise_percent = 0.79\n"
        cfg = write_cfg(tmp_path, extra=extra)
        cmd_simulate(cfg, tmp_path / "a")
        cmd_simulate(cfg, tmp_path / "b")
        for name in ("signal.csv", "phantom_sim.csv", "sinogram_simultaneous.csv",
                     "terms.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_noise(self, tmp_path):
        extra = "simulation.noise_percent = 0.79\n"
        cfg = write_cfg(tmp_path, extra=extra)
        cmd_simulate(cfg, tmp_path / "a", seed=1)
        cmd_simulate(cfg, tmp_path / "b", seed=2)
        a, _ = fio.read_signal_csv(tmp_path / "a" / "signal.csv")
        b, _ = fio.read_signal_csv(tmp_path / "b" / "signal.csv")
        assert not np.array_equal(a.samples, b.samples)

    def test_config_hash_embedded_everywhere(self, tmp_path):
        cfg = write_cfg(tmp_path)
        run = RunConfig.from_file(cfg)
        files = cmd_simulate(cfg, tmp_path / "out")
        for path in files:
            if path.endswith(".pgm"):
                head = open(path, "rb").read(120).decode("latin1")
            else:
                head = open(path).read(200)
            assert run.hash in head


class TestBounds:
    def test_simultaneous_report(self, tmp_path):
        cfg = write_cfg(tmp_path)
        (path,) = cmd_bounds(cfg, tmp_path / "out")
        text = open(path).read()
        assert "speed_ratio_envelope: 25" in text
        assert "pass" in text

    def test_sequential_explains_trivial(self, tmp_path):
        cfg = write_cfg(tmp_path, mode="sequential", method="M1")
        (path,) = cmd_bounds(cfg, tmp_path / "out")
        text = open(path).read()
        assert "vanish identically" in text


class TestReconstructCommand:
    def test_end_to_end_and_determinism(self, tmp_path):
        cfg = write_cfg(tmp_path)
        rc = main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path / "a")])
        assert rc == EXIT_OK
        rc = main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path / "b")])
        assert rc == EXIT_OK
        for name in ("recon_c.csv", "recon_v.csv", "report.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        report = (tmp_path / "a" / "report.txt").read_text()
        assert "ssim:" in report and "method: M3" in report
        assert "model_data_mismatch: no" in report

    def test_mismatch_flagged(self, tmp_path):
        cfg = write_cfg(tmp_path, mode="simultaneous", method="M1")
        rc = main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path / "m")])
        assert rc == EXIT_OK
        report = (tmp_path / "m" / "report.txt").read_text()
        assert "model_data_mismatch: yes" in report

    def test_sweep_report(self, tmp_path):
        extra = ("recon.sweep = 1\n"
                 "recon.sweep_alpha1 = 2e4\n"
                 "recon.sweep_alpha2 = 5e-4,2e-3\n")
        cfg = write_cfg(tmp_path, extra=extra)
        rc = main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path / "s")])
        assert rc == EXIT_OK
        report = (tmp_path / "s" / "report.txt").read_text()
        assert "sweep: alpha1, alpha2, ssim, objective, iterations" in report
        assert len([ln for ln in report.splitlines() if ln.startswith("  2")]) == 2


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                   "--out", str(tmp_path)])
        assert rc == 5

    def test_bad_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("nonsense.key = 3\n")
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path)])
        assert rc == EXIT_CONFIG

    def test_bad_value(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("simulation.grid_sim = tiny\n")
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path)])
        assert rc == EXIT_CONFIG

    def test_geometry_error(self, tmp_path):
        # a phantom file on the wrong grid triggers a geometry failure
        img = tmp_path / "ph.csv"
        fio.write_image_csv(img, np.ones((4, 5)))
        path = tmp_path / "geo.cfg"
        path.write_text(f"phantom.preset = file\nphantom.file = {img}\n"
                        "simulation.grid_sim = 33\nsimulation.grid_recon = 17\n")
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path)])
        assert rc == EXIT_GEOMETRY
