import subprocess
import sys

import numpy as np
import pytest

from plapsys import __version__, io
from plapsys.cli import EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_OK, EXIT_USAGE, main
from plapsys.config import KEYS, RunConfig
from plapsys.errors import ConfigError

REFERENCE_TOML = """
[problem]
p = 2
q = 2
alpha1 = -0.5
beta1 = 0.5
alpha2 = 0.5
beta2 = -0.5
lambda = 1.0
gamma = 2.0

[mesh]
n = 256
"""

HOMOGENEOUS_TOML = REFERENCE_TOML.replace("beta1 = 0.5", "beta1 = 1.5").replace("alpha2 = 0.5", "alpha2 = 1.5")


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(tmp_path, command, text=REFERENCE_TOML, out="out"):
    cfg = write_config(tmp_path, text)
    return main([command, cfg, "--out", str(tmp_path / out)])


def report_value(path, key):
    for line in path.read_text().splitlines():
        if line.startswith(key + ":"):
            return line.split(":", 1)[1].strip()
    raise KeyError(key)


class TestCommands:
    def test_classify(self, tmp_path, capsys):
        assert run(tmp_path, "classify") == EXIT_OK
        text = (tmp_path / "out" / "classify.txt").read_text()
        assert "theta: 2.0, sigma: -1" in text
        assert "theta: 2.0, sigma: -1" in capsys.readouterr().out

    def test_solve_reference(self, tmp_path):
        assert run(tmp_path, "solve") == EXIT_OK
        out = tmp_path / "out"
        rep = out / "solve_report.txt"
        assert max(float(report_value(rep, "final_residual_u")), float(report_value(rep, "final_residual_v"))) <= 1e-6
        u = io.read_field(out / "solution.csv", "u")
        assert u.shape == (257,) and np.all(u[1:-1] > 0)
        meta, nodes = io.read_table(out / "mesh_nodes.csv")
        assert meta["artifact"] == f"plapsys {__version__}"
        assert nodes["boundary"].sum() == 2

    def test_eigen(self, tmp_path):
        text = REFERENCE_TOML.replace("n = 256", "n = 128")
        assert run(tmp_path, "eigen", text) == EXIT_OK
        lam = float(report_value(tmp_path / "out" / "eigen.txt", "lambda_p"))
        assert lam == pytest.approx(np.pi**2, rel=5e-3)
        assert (tmp_path / "out" / "eigen_q_tilde.csv").exists()

    def test_barriers(self, tmp_path):
        assert run(tmp_path, "barriers") == EXIT_OK
        cert = tmp_path / "out" / "certificate.txt"
        assert report_value(cert, "verdict") == "pass"
        assert float(report_value(cert, "constant.l1")) == pytest.approx(1.0, abs=1e-8)

    def test_barriers_fixed_C_too_small(self, tmp_path):
        text = REFERENCE_TOML + "\n[barrier]\nC = 2.0\n"
        assert run(tmp_path, "barriers", text) == EXIT_CERTIFICATE
        assert report_value(tmp_path / "out" / "certificate.txt", "verdict") == "fail"

    def test_sweep_reference(self, tmp_path):
        text = REFERENCE_TOML.replace("n = 256", "n = 64") + "\n[sweep]\nlambda_min = 1.0\nlambda_max = 4.0\ncount = 3\n"
        assert run(tmp_path, "sweep", text) == EXIT_OK
        _, cols = io.read_table(tmp_path / "out" / "sweep.csv")
        np.testing.assert_allclose(cols["lambda"], [1.0, 2.0, 4.0])
        assert set(cols["outcome"]) <= {"CONVERGED_POSITIVE", "NONCONVERGENCE", "CERTIFICATE_FAILED"}

    def test_sweep_homogeneous_reports_evidence_note(self, tmp_path):
        text = HOMOGENEOUS_TOML.replace("n = 256", "n = 64") + "\n[sweep]\nlambda_min = 1.0\nlambda_max = 2.0\ncount = 2\n"
        assert run(tmp_path, "sweep", text) == EXIT_OK
        assert "not proof" in (tmp_path / "out" / "sweep.txt").read_text()

    def test_verify_theta_positive(self, tmp_path):
        text = REFERENCE_TOML + "\n[verify]\nlevels = [32, 64, 128]\n"
        assert run(tmp_path, "verify", text) == EXIT_OK
        report = (tmp_path / "out" / "verify.txt").read_text()
        assert "energy_certificate: not applicable" in report
        _, cols = io.read_table(tmp_path / "out" / "manufactured.csv")
        assert len(cols["r"]) == 9

    def test_verify_homogeneous_without_threshold(self, tmp_path):
        text = HOMOGENEOUS_TOML.replace("lambda = 1.0", "lambda = 4.0") + "\n[verify]\nlevels = [32, 64, 128]\n"
        assert run(tmp_path, "verify", text) == EXIT_OK
        report = (tmp_path / "out" / "verify.txt").read_text()
        assert "lambda_star: " in report and "energy.verdict: " in report


class TestErrors:
    def test_misspelled_key(self, tmp_path, capsys):
        text = REFERENCE_TOML.replace("lambda = 1.0", "lamda = 1.0")
        assert run(tmp_path, "solve", text) == EXIT_CONFIG
        assert "problem.lamda" in capsys.readouterr().err

    def test_unknown_command(self, tmp_path):
        assert run(tmp_path, "frobnicate") == EXIT_USAGE

    def test_missing_arguments(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == EXIT_USAGE

    def test_hypothesis_violation(self, tmp_path, capsys):
        text = REFERENCE_TOML.replace("alpha1 = -0.5", "alpha1 = 0.5")
        assert run(tmp_path, "classify", text) == EXIT_CONFIG
        assert "alpha1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["classify", str(tmp_path / "nope.toml")]) == EXIT_CONFIG

    def test_bad_toml(self, tmp_path):
        assert run(tmp_path, "classify", "[problem\n") == EXIT_CONFIG


def test_solve_is_deterministic(tmp_path):
    assert run(tmp_path, "solve", out="a") == EXIT_OK
    assert run(tmp_path, "solve", out="b") == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, REFERENCE_TOML)
    proc = subprocess.run(
        [sys.executable, "-m", "plapsys.cli", "classify", cfg, "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "sigma: -1" in proc.stdout


class TestConfig:
    def test_defaults_are_reference_instance(self):
        c = RunConfig.from_mapping({})
        P = c.params()
        assert (P.p, P.q, P.alpha1, P.beta1, P.alpha2, P.beta2) == (2, 2, -0.5, 0.5, 0.5, -0.5)
        assert c["mesh.n"] == 256 and set(c.values) == set(KEYS)

    @pytest.mark.parametrize(
        "data",
        [
            {"mesh": {"n": 2.5}},
            {"mesh": {"n": True}},
            {"problem": {"p": "two"}},
            {"solve": {"clamp": 1}},
            {"verify": {"levels": []}},
            {"problem": {"lambda": -1.0}},
            {"mesh": {"n": 1}},
            {"domain": {"dimension": 3}},
            {"sweep": {"lambda_min": 5.0, "lambda_max": 1.0}},
        ],
    )
    def test_rejected(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping(data)

    def test_digest_ignores_output_dir(self):
        a = RunConfig.from_mapping({"output": {"dir": "x"}})
        b = RunConfig.from_mapping({"output": {"dir": "y"}})
        assert a.digest == b.digest
        assert a.digest != RunConfig.from_mapping({"mesh": {"n": 128}}).digest

    def test_ints_accepted_for_floats(self):
        assert RunConfig.from_text("[problem]\nlambda = 3\n")["problem.lambda"] == 3.0


class TestIO:
    def test_table_round_trip(self, tmp_path):
        prov = io.Provenance("9.9", "abc")
        cols = {"a": [0.1, 1 / 3, 2e-300], "tag": ["x", "y", "z"]}
        path = io.write_table(tmp_path / "t.csv", cols, prov)
        meta, back = io.read_table(path)
        assert meta == {"artifact": "plapsys 9.9", "config_sha256": "abc"}
        np.testing.assert_array_equal(back["a"], cols["a"])
        assert list(back["tag"]) == cols["tag"]

    def test_fields_2d_columns(self, tmp_path):
        from plapsys.mesh import DomainSpec, build_mesh

        m = build_mesh(DomainSpec.rectangle((0, 1), (0, 1)), 3)
        path = io.write_fields(tmp_path / "f.csv", m, {"w": m.points[:, 0] + m.points[:, 1]}, io.Provenance("0", "0"))
        _, cols = io.read_table(path)
        assert set(cols) == {"node", "x", "y", "w"}
        np.testing.assert_allclose(cols["w"], cols["x"] + cols["y"])

    def test_missing_column(self, tmp_path):
        path = io.write_table(tmp_path / "t.csv", {"a": [1.0]}, io.Provenance("0", "0"))
        with pytest.raises(KeyError):
            io.read_field(path, "b")
