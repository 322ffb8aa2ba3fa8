"""File-format round trips and config parsing."""

import numpy as np
import pytest

from fflmpi import ConfigError, ScanConfig, SignalTrace, Sinogram
from fflmpi import io as fio


class TestImageFiles:
    def test_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((9, 9))
        path = tmp_path / "img.csv"
        fio.write_image_csv(path, img, cfg_hash="abc123")
        back = fio.read_image_csv(path)
        assert np.array_equal(back, img)
        assert "# config_hash: abc123" in path.read_text().splitlines()[0]

    def test_pgm_roundtrip_scaling(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.random((7, 11)) * 4 - 1
        path = tmp_path / "img.pgm"
        fio.write_pgm(path, img, cfg_hash="beef")
        back = fio.read_pgm(path)
        lo, hi = img.min(), img.max()
        assert np.allclose(back * (hi - lo) + lo, img, atol=(hi - lo) / 65535)
        sidecar = (str(path) + ".minmax.txt")
        txt = open(sidecar).read()
        assert f"min = {fio.fmt_float(lo)}" in txt
        assert f"max = {fio.fmt_float(hi)}" in txt


class TestSinogramCsv:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        sino = Sinogram(np.array([0.0, 0.3, 1.1]),
                        np.array([-2e-3, 0.0, 1e-3, 2e-3]),
                        rng.random((3, 4)))
        path = tmp_path / "sino.csv"
        fio.write_sinogram_csv(path, sino, cfg_hash="77")
        back = fio.read_sinogram_csv(path)
        assert np.array_equal(back.values, sino.values)
        assert np.array_equal(back.angles, sino.angles)
        assert np.array_equal(back.s_grid, sino.s_grid)


class TestSignalCsv:
    def test_roundtrip_with_metadata(self, tmp_path):
        t = np.arange(6) / 8e6
        samples = np.vstack([np.sin(t * 1e5), np.cos(t * 1e5)])
        trace = SignalTrace(t, samples)
        path = tmp_path / "sig.csv"
        fio.write_signal_csv(path, trace, cfg_hash="aa", u_star=2.5e-8, seed=7)
        back, meta = fio.read_signal_csv(path)
        assert np.array_equal(back.samples, samples)
        assert np.array_equal(back.t_grid, t)
        assert meta["config_hash"] == "aa"
        assert float(meta["u_star"]) == 2.5e-8
        assert int(meta["seed"]) == 7


class TestConfigParsing:
    def test_basic(self):
        text = """
        # comment
        simulation.grid_sim = 65   # inline comment
        recon.method = M2
        """
        out = fio.parse_config_text(text)
        assert out == {"simulation.grid_sim": "65", "recon.method": "M2"}

    def test_malformed_line(self):
        with pytest.raises(ConfigError):
            fio.parse_config_text("just a token\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            fio.parse_config_text("a.b = 1\na.b = 2\n")

    def test_hash_stable_under_reordering(self):
        h1 = fio.config_hash({"a": "1", "b": "2"})
        h2 = fio.config_hash({"b": "2", "a": "1"})
        assert h1 == h2
        assert h1 != fio.config_hash({"a": "1", "b": "3"})
