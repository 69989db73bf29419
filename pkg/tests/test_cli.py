import math
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from optospring import cli


@pytest.fixture(scope="module")
def bundled():
    return str(resources.files("optospring").joinpath("data", "table1.cfg"))


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    lines = text.splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, data


def derive_values(text):
    out = {}
    for line in text.splitlines():
        name, _, rest = line.partition("=")
        out[name.strip()] = rest.split()[0]
    return out


class TestDerive:
    def test_bundled_config(self, capsys, bundled):
        code, out, _ = run(capsys, "derive", "--config", bundled)
        assert code == cli.EXIT_OK
        v = derive_values(out)
        assert float(v["g"]) == pytest.approx(0.01, rel=1e-9)
        assert float(v["x0"]) == pytest.approx(0.05, rel=0.02)
        assert float(v["gamma0"]) == pytest.approx(1.5e4, rel=1e-3)
        assert v["class"] == "unstable_spring"

    def test_no_spring(self, capsys):
        code, out, _ = run(capsys, "derive", "--set", "coupling.mode=direct",
                           "--set", "coupling.xi_per_m=0", "--set", "coupling.eta_per_m=1e9",
                           "--set", "coupling.gamma0_per_s=15000")
        assert code == cli.EXIT_OK
        v = derive_values(out)
        assert float(v["x0"]) == 0.0
        assert v["class"] == "no_spring"
        assert not v["kappa"].startswith("-")

    def test_ratio_mode(self, capsys):
        code, out, _ = run(capsys, "derive", "--set", "coupling.mode=ratio",
                           "--set", "coupling.x0=0.05", "--set", "coupling.g=20")
        assert code == cli.EXIT_OK
        assert float(derive_values(out)["g"]) == pytest.approx(20.0)


class TestConfigErrors:
    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[cavity]\nt00 = 0.01\n")
        code, _, err = run(capsys, "derive", "--config", str(cfg))
        assert code == cli.EXIT_CONFIG
        assert "t00" in err

    def test_bad_value(self, capsys):
        code, _, err = run(capsys, "derive", "--set", "cavity.t0=abc")
        assert code == cli.EXIT_CONFIG

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "derive", "--config", str(tmp_path / "none.cfg"))
        assert code == cli.EXIT_CONFIG

    def test_domain_error(self, capsys):
        code, _, err = run(capsys, "derive", "--set", "cavity.t0=0.5")
        assert code == cli.EXIT_DOMAIN
        assert err.startswith("error:")


class TestSpectrum:
    def test_minimum_at_resonance(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--set", "coupling.mode=ratio",
                           "--set", "coupling.x0=0.05", "--set", "coupling.g=20")
        assert code == cli.EXIT_OK
        header, data = read_csv(out)
        assert tuple(header) == cli.SPECTRUM_HEADER
        i = int(np.argmin(data[:, 2]))
        assert data[i, 0] == pytest.approx(0.05, rel=0.01)
        assert math.sqrt(data[i, 2]) == pytest.approx(math.sqrt(0.05), rel=0.01)
        np.testing.assert_allclose(data[:, 2], data[:, 3] + data[:, 4], rtol=1e-11)

    def test_csv_format(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        code, _, _ = run(capsys, "spectrum", "--out", str(path), "--set", "sweep.points=5")
        assert code == cli.EXIT_OK
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        row = raw.decode().splitlines()[1].split(",")
        assert len(row) == len(cli.SPECTRUM_HEADER)
        for cell in row:
            mantissa, _, exponent = cell.partition("e")
            assert len(mantissa.lstrip("-").split(".")[1]) == 12
            assert exponent[0] in "+-"


class TestSqueeze:
    def test_plateau_and_product(self, capsys):
        code, out, _ = run(capsys, "squeeze", "--set", "coupling.mode=ratio",
                           "--set", "coupling.x0=0.05", "--set", "coupling.g=0.2",
                           "--set", "sweep.x_min=5e-5", "--set", "sweep.x_max=1.5")
        assert code == cli.EXIT_OK
        header, data = read_csv(out)
        assert tuple(header) == cli.SQUEEZE_HEADER
        assert data[0, 2] == pytest.approx(9.80e-3, rel=2e-3)
        np.testing.assert_allclose(data[:, 2] * data[:, 3], 1.0, atol=1e-9)
        assert np.all(data[:, 1] >= data[:, 2] * (1 - 1e-9))


class TestFigures:
    def test_six_tables(self, capsys, tmp_path):
        code, out, _ = run(capsys, "figures", "--out", str(tmp_path))
        assert code == cli.EXIT_OK
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == sorted(["fig2_g0.1.csv", "fig2_g20.csv", "fig2_g400.csv",
                                "fig3_g0.2.csv", "fig3_g20.csv", "fig3_g2000.csv"])
        header, data = read_csv((tmp_path / "fig2_g20.csv").read_text())
        assert np.all(data[:, header.index("s_f_optimal")] <= data[:, header.index("s_f_theta0")] * (1 + 1e-12))


class TestValidate:
    def test_passes(self, capsys):
        code, out, _ = run(capsys, "validate")
        assert code == cli.EXIT_OK
        assert "all checks passed" in out

    def test_wrong_constant_fails(self, capsys):
        code, out, _ = run(capsys, "validate", "--perturb", "constants.SPEED_OF_LIGHT=3.1e8")
        assert code == cli.EXIT_VALIDATION
        assert "FAIL lab_coupling" in out


class TestSimulate:
    def test_antidamped_refused(self, capsys):
        code, _, err = run(capsys, "simulate", "--set", "oracle.gamma_m_rel=0")
        assert code == cli.EXIT_DOMAIN
        assert "gamma_m_rel" in err

    def test_small_run(self, capsys, tmp_path):
        trace = tmp_path / "trace.csv"
        code, out, _ = run(capsys, "simulate", "--set", "coupling.mode=ratio",
                           "--set", "coupling.x0=0.05", "--set", "coupling.g=0.2",
                           "--set", "oracle.duration=1000", "--set", "oracle.segments=16",
                           "--set", "oracle.gamma_m_rel=1.0", "--trace", str(trace))
        assert code == cli.EXIT_OK
        header, data = read_csv(out)
        assert header[0] == "x" and "s_theta_analytic" in header
        assert np.all(data[:, header.index("stderr_s_theta")] > 0)
        assert trace.read_text().startswith("t,a0a,a0phi,y,a1a,a1phi\n")


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "optospring.cli", "derive"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("gamma0")
