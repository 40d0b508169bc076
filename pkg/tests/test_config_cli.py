import csv
import io
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from resonant_lorenz import __version__
from resonant_lorenz.cli import run
from resonant_lorenz.config import config_hash, parse_config, serialize_config
from resonant_lorenz.errors import InvariantViolation, ParseError
from resonant_lorenz.model_family import GlobalCoeffs, ModelSpec, ResonantBase, default_model

DEFAULT_TEXT = serialize_config(default_model())


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


class TestConfig:
    def test_round_trip_default(self):
        assert parse_config(DEFAULT_TEXT) == default_model()

    @given(
        st.floats(0.1, 0.9),
        st.sampled_from([1, -1]),
        st.floats(0.5, 2.0),
        st.floats(-2, 2).filter(lambda v: abs(v) > 0.1),
    )
    def test_round_trip_any(self, lam, sign, ym, d):
        spec = ModelSpec(
            ResonantBase(lam, sign),
            GlobalCoeffs(1.0, 0.5, ym, 1.0, 0.0, 0.0, 1.0, 1.0, 2.0, 1.0, 1.0, d),
        )
        assert parse_config(serialize_config(spec)) == spec

    def test_comments_and_blank_lines(self):
        text = "# model\n\n" + DEFAULT_TEXT.replace("lambda = 0.5", "lambda = 0.5  # base")
        assert parse_config(text) == default_model()

    def test_d_zero(self):
        with pytest.raises(InvariantViolation, match="quadratic tangency"):
            parse_config(DEFAULT_TEXT.replace("d = 1.0", "d = 0.0"))

    def test_b2_zero(self):
        with pytest.raises(InvariantViolation, match="b1\\*c1\\*b2\\*c2 == 0"):
            parse_config(DEFAULT_TEXT.replace("b2 = 2.0", "b2 = 0.0"))

    def test_unknown_key(self):
        with pytest.raises(ParseError) as info:
            parse_config(DEFAULT_TEXT + "e = 1.0\n")
        assert info.value.line == len(DEFAULT_TEXT.splitlines()) + 1

    def test_unknown_section(self):
        with pytest.raises(ParseError):
            parse_config("[tails]\nq = 1\n")

    def test_duplicate_key(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_config(DEFAULT_TEXT + "d = 2.0\n")

    def test_bad_value(self):
        with pytest.raises(ParseError) as info:
            parse_config(DEFAULT_TEXT.replace("d = 1.0", "d = one"))
        assert "d" in str(info.value)

    def test_missing_key(self):
        with pytest.raises(ParseError, match="missing key 'd'"):
            parse_config(DEFAULT_TEXT.replace("d = 1.0\n", ""))

    def test_defaults_fill(self):
        spec = parse_config("[defaults]\nuse = true\n[global_map]\nd = 2.0\n")
        assert spec.coeffs.d == 2.0
        assert spec.coeffs.b2 == 2.0 and spec.base.lam == 0.5

    def test_gamma_sign(self):
        with pytest.raises(ParseError):
            parse_config(DEFAULT_TEXT.replace("gamma_sign = +1", "gamma_sign = 2"))

    def test_hash(self):
        assert config_hash(None) == "none"
        assert len(config_hash(DEFAULT_TEXT)) == 16
        assert config_hash(DEFAULT_TEXT) != config_hash(DEFAULT_TEXT + "\n")


class TestExitCodes:
    def test_iterate_ok(self, tmp_path):
        out = tmp_path / "orbit.csv"
        code, _, _ = invoke(
            "iterate", "--m1", "0", "--m2", "0.85", "--b", "0.7", "--x0", "0.1,0.1,0.1",
            "--transient", "10000", "--n", "100000", "--out", str(out),
        )  # fmt: skip
        assert code == 0
        text = out.read_text()
        lines = text.splitlines()
        assert lines[0] == f"# resonant-lorenz {__version__}"
        assert lines[1].startswith("# command: resonant-lorenz iterate")
        assert lines[2] == "# config_sha256: none"
        assert lines[3] == "n,x,y,z"
        assert len(lines) == 4 + 100_000
        assert lines[4].split(",")[0] == "10001"

    def test_seventeen_digits_round_trip(self):
        code, text, _ = invoke("iterate", "--m1", "0", "--m2", "0.85", "--b", "0.7",
                               "--transient", "10000", "--n", "50")
        assert code == 0
        from resonant_lorenz.henon3d import HenonParams

        orbit = HenonParams(0, 0.85, 0.7).as_map().iterate((0.1, 0.1, 0.1), 10_000, 50)
        rows = csv_rows(text)
        assert [float(r["z"]) for r in rows] == list(orbit.states[:, 2])

    def test_iterate_diverges(self):
        code, _, err = invoke("iterate", "--m1", "10", "--m2", "0", "--b", "0", "--x0", "0,0,10",
                              "--transient", "0", "--n", "10")
        assert code == 2
        assert "OrbitDiverged" in err

    def test_usage_error(self):
        code, _, err = invoke("iterate", "--m1", "0")
        assert code == 1 and err.startswith("error:")
        assert invoke("no-such-command")[0] == 1

    def test_config_error(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text(DEFAULT_TEXT.replace("b2 = 2.0", "b2 = 0.0"))
        code, _, err = invoke("delta-k", "--config", str(cfg), "--k", "11",
                              "--M1", "0", "--M2", "0.85", "--B", "0.7")
        assert code == 1 and "b1*c1*b2*c2" in err

    def test_parse_error_exit(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[base]\nlambda 0.5\n")
        code, _, err = invoke("delta-k", "--config", str(cfg), "--k", "11",
                              "--M1", "0", "--M2", "0.85", "--B", "0.7")
        assert code == 1 and "line 2" in err

    def test_delta_k(self, tmp_path):
        cfg = tmp_path / "model.ini"
        cfg.write_text(DEFAULT_TEXT)
        code, text, _ = invoke("delta-k", "--config", str(cfg), "--k", "11",
                               "--M1", "0", "--M2", "0.85", "--B", "0.7")
        assert code == 0
        assert f"# config_sha256: {config_hash(DEFAULT_TEXT)}" in text
        (row,) = csv_rows(text)
        assert float(row["mu2"]) == pytest.approx(0.1239, abs=1e-4)
        assert float(row["roundtrip_error"]) < float(row["tolerance"])

    def test_delta_k_even(self):
        code, _, err = invoke("delta-k", "--k", "10", "--M1", "0", "--M2", "0.85", "--B", "0.7")
        assert code == 2 and "IncompatibleParity" in err


class TestSubcommands:
    def test_lyapunov(self):
        code, text, _ = invoke("lyapunov", "--m1", "0", "--m2", "0.85", "--b", "0.7",
                               "--n", "100000", "--format", "json")
        assert code == 0
        (rec,) = json.loads(text)
        assert rec["l1"] > 0 and rec["converged"] in (True, False)
        assert set(rec) >= {"l1", "l2", "l3", "sum", "ln_abs_b", "stderr_max"}

    def test_fixed_points_resonant(self):
        code, text, _ = invoke("fixed-points", "--resonant", "--format", "json")
        assert code == 0
        (rec,) = json.loads(text)
        assert rec["z"] == 0.5 and rec["multiplicity"] == 2

    def test_classify(self):
        code, text, _ = invoke("classify", "--m1", "0", "--m2", "0.85", "--b", "0.7")
        assert code == 0
        assert csv_rows(text)[0]["class"] == "Chaotic"

    def test_sweep_columns_and_threads(self, monkeypatch):
        argv = ("sweep", "--p1", "m2=0.8:0.85:2", "--p2", "b=0.6:0.7:2", "--m1", "0",
                "--transient", "1000", "--n", "20000")
        monkeypatch.setenv("THREADS", "1")
        code, one, _ = invoke(*argv)
        monkeypatch.setenv("THREADS", "4")
        _, four, _ = invoke(*argv)
        assert code == 0 and one == four
        rows = csv_rows(one)
        assert list(rows[0]) == ["p1", "p2", "lmax", "class", "escape_step"]
        assert len(rows) == 4

    def test_return_map(self):
        code, text, _ = invoke("return-map", "--k", "9", "--M1", "0", "--M2", "0.85", "--B", "0.7",
                               "--transient", "100", "--n", "1000")
        assert code == 0
        rows = csv_rows(text)
        assert len(rows) == 1000
        assert max(abs(float(r["z"])) for r in rows) < 2

    def test_verify_rescaling(self):
        code, text, _ = invoke("verify-rescaling", "--M1", "0", "--M2", "0.85", "--B", "0.7",
                               "--k", "7,9")
        assert code == 0
        rows = csv_rows(text)
        assert list(rows[0]) == ["k", "c0", "c1", "M1", "M2", "B", "mu1", "mu2", "mu3"]
        assert float(rows[1]["c0"]) < float(rows[0]["c0"])

    def test_splitting(self):
        code, text, _ = invoke("splitting", "--m1", "0", "--m2", "0.85", "--b", "0.7",
                               "--n", "20000", "--transient", "1000", "--format", "json")
        assert code == 0
        (rec,) = json.loads(text)
        assert 0 < rec["sigma_est"] < 1

    def test_json_mirrors_csv(self):
        argv = ("iterate", "--m1", "0", "--m2", "0.85", "--b", "0.7", "--n", "20")
        _, csv_text, _ = invoke(*argv)
        _, json_text, _ = invoke(*argv, "--format", "json")
        rows = csv_rows(csv_text)
        recs = json.loads(json_text)
        assert [list(r) for r in recs] == [list(r) for r in rows]
        assert [[float(v) for v in r.values()] for r in rows] == [
            [float(v) for v in r.values()] for r in recs
        ]

    def test_deterministic_files(self, tmp_path):
        argv = ["iterate", "--m1", "0", "--m2", "0.85", "--b", "0.7", "--n", "5000"]
        out = tmp_path / "orbit.csv"
        invoke(*argv, "--out", str(out))
        first = out.read_bytes()
        invoke(*argv, "--out", str(out))
        assert out.read_bytes() == first

    def test_console_script_module(self):
        proc = subprocess.run(
            [sys.executable, "-m", "resonant_lorenz", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0 and __version__ in proc.stdout
