import json

import numpy as np
import pytest

from copreg.cli import cli_main


def run(capsys, *argv):
    code = cli_main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEval:
    def test_cbperm_regression_alternates_by_half(self, capsys):
        code, out, _ = run(capsys, "eval", "--family", "cbperm N=2 sigma=2,1",
                           "--what", "regression", "--grid", "8")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "x,value"
        vals = [float(line.split(",")[1]) for line in lines[1:]]
        assert vals == [0.75] * 4 + [0.25] * 4

    def test_quantile_needs_tau(self, capsys):
        code, _, err = run(capsys, "eval", "--family", "pi",
                           "--what", "quantile")
        assert code == 1
        assert "tau" in err

    def test_kernel_at_cut(self, capsys):
        code, out, _ = run(capsys, "eval", "--family", "pi", "--what", "kernel",
                           "--grid", "4", "--y", "0.3")
        assert code == 0
        vals = [float(line.split(",")[1])
                for line in out.strip().splitlines()[1:]]
        assert vals == [0.3] * 4

    def test_cube_adds_two_columns(self, capsys):
        code, out, _ = run(capsys, "eval", "--family", "cube",
                           "--what", "regression", "--grid", "2")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "x1,x2,value"
        assert len(lines) == 5

    def test_file_output(self, tmp_path, capsys):
        out_file = tmp_path / "vals.csv"
        code, _, _ = run(capsys, "eval", "--family", "clayton theta=2",
                         "--what", "quantile", "--tau", "0.2", "--grid", "16",
                         "-o", str(out_file))
        assert code == 0
        assert out_file.read_text().startswith("x,value")


class TestBounds:
    def test_mean_lp_equality(self, capsys):
        code, out, _ = run(capsys, "bounds", "--family", "cd h=id",
                           "--check", "mean_lp", "--p", "1")
        assert code == 0
        payload = json.loads(out)
        check = payload["checks"][0]
        assert abs(check["computed"] - 0.25) < 1e-6
        assert check["bound"] == 0.25
        assert abs(check["slack"]) < 1e-6
        assert check["pass"] is True

    def test_pair_check(self, capsys):
        code, out, _ = run(capsys, "bounds", "--family", "cd h=id",
                           "--family2", "cd h=flip", "--check", "diameter",
                           "--p", "1")
        assert code == 0
        payload = json.loads(out)
        assert all(c["pass"] for c in payload["checks"])

    def test_unknown_check_is_usage_error(self, capsys):
        code, _, err = run(capsys, "bounds", "--family", "pi",
                           "--check", "bogus")
        assert code == 1
        assert "bogus" in err


class TestMetric:
    def test_dmetric_json(self, capsys):
        code, out, _ = run(capsys, "metric", "--family1", "cd h=id",
                           "--family2", "cd h=flip", "--what", "dmetric")
        assert code == 0
        payload = json.loads(out)
        assert abs(payload["value"] - 0.5) < 1e-5

    def test_phi_csv(self, capsys):
        code, out, _ = run(capsys, "metric", "--family1", "pi",
                           "--family2", "clayton theta=2", "--what", "phi",
                           "--ygrid", "11", "--cells", "512")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "y,phi"
        assert len(lines) == 12
        assert float(lines[1].split(",")[1]) == 0.0

    def test_identity_json(self, capsys):
        code, out, _ = run(capsys, "metric", "--family1", "cube",
                           "--family2", "pi dim=3", "--what", "identity",
                           "--cells", "256")
        assert code == 0
        payload = json.loads(out)
        assert abs(payload["lhs"] - 0.25) < 1e-3
        assert abs(payload["rhs"] - 0.25) < 1e-6
        assert payload["bound"] == 0.5


class TestExitCodes:
    def test_unknown_family_is_usage(self, capsys):
        code, _, err = run(capsys, "eval", "--family", "warp",
                           "--what", "regression")
        assert code == 1

    def test_unknown_flag_is_usage(self, capsys):
        code, _, _ = run(capsys, "eval", "--family", "pi",
                         "--what", "regression", "--bogus", "1")
        assert code == 1

    def test_config_error_is_two(self, capsys, tmp_path):
        code, _, err = run(capsys, "convergence", "--family", "pi",
                           "--sizes", "100,100", "--reps", "2",
                           "--out", str(tmp_path))
        assert code == 2
        assert "config error" in err

    def test_io_error_is_three(self, capsys):
        code, _, err = run(capsys, "density", "--family", "pi", "--n", "50",
                           "--out", "/proc/nonexistent/unwritable")
        assert code == 3


class TestConvergenceCommand:
    def test_writes_both_csvs_deterministically(self, tmp_path, capsys):
        args = ["convergence", "--family", "clayton theta=2",
                "--sizes", "64,128", "--reps", "3", "--tau", "0.2",
                "--seed", "42", "--s", "0.4"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(capsys, *args, "--out", str(out1))[0] == 0
        assert run(capsys, *args, "--out", str(out2))[0] == 0
        assert (out1 / "errors.csv").read_bytes() \
            == (out2 / "errors.csv").read_bytes()
        assert (out1 / "boxplot.csv").read_bytes() \
            == (out2 / "boxplot.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path, capsys):
        base = ["convergence", "--family", "pi", "--sizes", "64", "--reps",
                "2", "--s", "0.4"]
        run(capsys, *base, "--seed", "1", "--out", str(tmp_path / "a"))
        run(capsys, *base, "--seed", "2", "--out", str(tmp_path / "b"))
        assert (tmp_path / "a/errors.csv").read_text() \
            != (tmp_path / "b/errors.csv").read_text()

    def test_config_file_and_flag_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"family": "pi", "sizes": "64", "reps": 2,
                                   "seed": 1, "out": str(tmp_path / "from_cfg")}))
        code, _, _ = run(capsys, "convergence", "--config", str(cfg))
        assert code == 0
        assert (tmp_path / "from_cfg/errors.csv").exists()
        # flag overrides the config file
        code, _, _ = run(capsys, "convergence", "--config", str(cfg),
                         "--out", str(tmp_path / "flagged"))
        assert code == 0
        assert (tmp_path / "flagged/errors.csv").exists()

    def test_env_seed_overrides_config(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"family": "pi", "sizes": "64", "reps": 2,
                                   "seed": 1}))
        monkeypatch.setenv("COPREG_SEED", "2")
        run(capsys, "convergence", "--config", str(cfg),
            "--out", str(tmp_path / "env"))
        monkeypatch.delenv("COPREG_SEED")
        run(capsys, "convergence", "--family", "pi", "--sizes", "64",
            "--reps", "2", "--seed", "2", "--out", str(tmp_path / "explicit"))
        assert (tmp_path / "env/errors.csv").read_text() \
            == (tmp_path / "explicit/errors.csv").read_text()

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"familly": "pi"}))
        code, _, err = run(capsys, "convergence", "--config", str(cfg))
        assert code == 2


class TestDensityCommand:
    def test_outputs(self, tmp_path, capsys):
        code, out, _ = run(capsys, "density", "--family",
                           "mo alpha=0.35 beta=0.65", "--n", "400",
                           "--s", "0.4", "--tau", "0.2", "--seed", "42",
                           "--out", str(tmp_path))
        assert code == 0
        for name in ("density_grid.csv", "density_grid.csv.json",
                     "est_mean.csv", "est_quantile.csv", "truth_mean.csv",
                     "truth_quantile.csv"):
            assert (tmp_path / name).exists(), name

    def test_byte_deterministic(self, tmp_path, capsys):
        args = ["density", "--family", "clayton theta=2", "--n", "300",
                "--s", "0.4", "--tau", "0.2", "--seed", "9"]
        run(capsys, *args, "--out", str(tmp_path / "a"))
        run(capsys, *args, "--out", str(tmp_path / "b"))
        for name in ("density_grid.csv", "est_mean.csv", "truth_quantile.csv"):
            assert (tmp_path / "a" / name).read_bytes() \
                == (tmp_path / "b" / name).read_bytes()

    def test_data_csv(self, tmp_path, capsys):
        data = tmp_path / "sample.csv"
        rng = np.random.default_rng(3)
        rows = "\n".join(f"{a},{b}" for a, b in rng.random((60, 2)))
        data.write_text(rows + "\n")
        code, _, _ = run(capsys, "density", "--family", "pi", "--data",
                         str(data), "--out", str(tmp_path / "out"))
        assert code == 0
        meta = json.loads((tmp_path / "out/density_grid.csv.json").read_text())
        assert meta["N"] == 5  # floor(60**0.4)


class TestHelp:
    def test_top_level_help(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == 0
        assert "copreg" in out

    @pytest.mark.parametrize("cmd", ["eval", "bounds", "metric",
                                     "convergence", "density"])
    def test_subcommand_help(self, capsys, cmd):
        code, out, _ = run(capsys, cmd, "--help")
        assert code == 0
        assert cmd in out or "usage" in out
