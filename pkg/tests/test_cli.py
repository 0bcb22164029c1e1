"""Tests for the command-line interface and fit serialization."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mvggm import EdgeSet
from mvggm.cli import load_fits, main, parse_edges, save_fits
from mvggm.errors import ConfigError, IoFailure, MalformedManifest, ShapeMismatch
from mvggm.spatial import fit_spatial
from mvggm.temporal import fit_temporal


def run_main(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def sim_args(out, seed=1, m=2, n="6", p=10, q=6):
    return [
        "simulate", "--out", str(out), "--graph", "random",
        "--m", str(m), "--n", str(n), "--p", str(p), "--q", str(q),
        "--seed", str(seed),
    ]


class TestParseEdges:
    def test_off_diagonal(self):
        assert parse_edges("off-diagonal", 4) == EdgeSet.off_diagonal(4)

    def test_cross_block_split(self):
        assert parse_edges("cross-block:2", 5) == EdgeSet.cross_block(0, 2, 2, 5)

    def test_cross_block_ranges(self):
        got = parse_edges("cross-block:0:1:2:4", 6)
        assert got == EdgeSet.cross_block(0, 1, 2, 4)

    def test_json_file(self, tmp_path):
        path = tmp_path / "edges.json"
        path.write_text("[[0, 3], [2, 1]]")
        assert parse_edges(str(path), 4).edges == ((0, 3), (1, 2))

    def test_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_edges("cross-block:a", 4)
        with pytest.raises(ConfigError):
            parse_edges("cross-block:1:2", 4)
        with pytest.raises(IoFailure):
            parse_edges(str(tmp_path / "missing.json"), 4)
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            parse_edges(str(bad), 4)
        notlist = tmp_path / "obj.json"
        notlist.write_text('{"a": 1}')
        with pytest.raises(ConfigError):
            parse_edges(str(notlist), 4)
        far = tmp_path / "far.json"
        far.write_text("[[0, 9]]")
        with pytest.raises(ShapeMismatch):
            parse_edges(str(far), 4)


class TestFitSerialization:
    def test_round_trip(self, small_dataset, tmp_path):
        sp = fit_spatial(small_dataset, gamma=0.05)
        tp = fit_temporal(small_dataset)
        out = tmp_path / "fits"
        save_fits(sp, tp, small_dataset.dims, str(out), config_hash="abc", seed=7)
        sp2, tp2, dims = load_fits(str(out))
        assert dims == small_dataset.dims
        assert np.array_equal(sp2.beta, sp.beta)
        assert np.array_equal(sp2.phi, sp.phi)
        assert np.array_equal(sp2.omega, sp.omega)
        assert np.array_equal(sp2.rho, sp.rho)
        assert np.array_equal(sp2.gamma, sp.gamma)
        assert sp2.converged == sp.converged
        assert sp2.kkt_residuals == sp.kkt_residuals
        assert sp2.residuals == ()
        assert tp2.h == tp.h and tp2.eta == tp.eta
        assert np.array_equal(tp2.beta, tp.beta)
        assert np.array_equal(tp2.phi, tp.phi)
        assert np.array_equal(tp2.sigma_hat, tp.sigma_hat)
        assert np.array_equal(tp2.omega_hat, tp.omega_hat)
        assert np.array_equal(tp2.frob_sq_over_p, tp.frob_sq_over_p)
        man = json.loads((out / "manifest.json").read_text())
        assert man["kind"] == "fits"
        assert man["config_hash"] == "abc"
        assert man["seed"] == 7

    def test_load_errors(self, small_dataset, tmp_path):
        with pytest.raises(IoFailure):
            load_fits(str(tmp_path / "nope"))
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "manifest.json").write_text('{"kind": "dataset"}')
        with pytest.raises(MalformedManifest):
            load_fits(str(bad))
        sp = fit_spatial(small_dataset, gamma=0.05)
        tp = fit_temporal(small_dataset)
        out = tmp_path / "fits"
        save_fits(sp, tp, small_dataset.dims, str(out))
        man = json.loads((out / "manifest.json").read_text())
        victim = out / man["sessions"][0]["rho"]
        victim.write_bytes(victim.read_bytes()[:-16])
        with pytest.raises(ShapeMismatch):
            load_fits(str(out))


class TestPipeline:
    def test_simulate_fit_test(self, tmp_path, capsys):
        data = tmp_path / "ds"
        code, out, _ = run_main(sim_args(data), capsys)
        assert code == 0
        summary = json.loads(out)
        assert summary["dims"] == {"m": 2, "n": [6, 6], "p": 10, "q": 6}
        assert (data / "manifest.json").exists()

        fits = tmp_path / "fits"
        code, out, _ = run_main(
            ["fit", "--data", str(data), "--out", str(fits), "--gamma", "0.05"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["gamma"] == [0.05] * 6  # one per node

        res = tmp_path / "res"
        code, out, _ = run_main(
            ["test", "--fits", str(fits), "--edges", "off-diagonal",
             "--b", "400", "--seed", "3", "--out", str(res)],
            capsys,
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["n_edges"] == 15
        assert json.loads((tmp_path / "res.json").read_text()) == payload
        with open(tmp_path / "res_edges.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["i", "j", "t_hat", "s_diag", "p_single"]
        assert len(rows) == 16
        assert float(rows[1][4]) <= 1.0

    def test_data_and_fits_paths_agree(self, tmp_path, capsys):
        data = tmp_path / "ds"
        assert run_main(sim_args(data), capsys)[0] == 0
        fits = tmp_path / "fits"
        assert run_main(
            ["fit", "--data", str(data), "--out", str(fits), "--gamma", "0.05"],
            capsys,
        )[0] == 0
        base = ["--edges", "off-diagonal", "--b", "400", "--seed", "3"]
        code, out_a, _ = run_main(
            ["test", "--data", str(data), "--gamma", "0.05"] + base, capsys
        )
        assert code == 0
        code, out_b, _ = run_main(["test", "--fits", str(fits)] + base, capsys)
        assert code == 0
        a, b = json.loads(out_a), json.loads(out_b)
        for key in ("sup_norm", "statistic", "q_hat", "p_value", "reject"):
            assert a[key] == b[key]

    def test_test_requires_one_source(self, tmp_path, capsys):
        code, _, err = run_main(["test", "--b", "400"], capsys)
        assert code == 1
        assert json.loads(err)["error"] == "ConfigError"
        code, _, err = run_main(
            ["test", "--data", "x", "--fits", "y"], capsys
        )
        assert code == 1


class TestConfigMerging:
    def test_config_fills_missing_flags(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps(
            {"m": 2, "n": "5", "p": 8, "q": 5, "seed": 4, "graph": "chain",
             "edge-prob": 0.3}
        ))
        out = tmp_path / "ds"
        code, stdout, _ = run_main(
            ["simulate", "--config", str(conf), "--out", str(out)], capsys
        )
        assert code == 0
        assert json.loads(stdout)["seed"] == 4

    def test_flags_override_config(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"m": 2, "n": "5", "p": 8, "q": 5, "seed": 4}))
        out = tmp_path / "ds"
        code, stdout, _ = run_main(
            ["simulate", "--config", str(conf), "--out", str(out), "--seed", "9"],
            capsys,
        )
        assert code == 0
        assert json.loads(stdout)["seed"] == 9

    def test_unknown_config_key(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"m": 2, "bogus": 1}))
        code, _, err = run_main(
            ["simulate", "--config", str(conf), "--out", str(tmp_path / "x")],
            capsys,
        )
        assert code == 1
        msg = json.loads(err)
        assert msg["error"] == "ConfigError"
        assert "bogus" in msg["message"]

    def test_config_must_be_object(self, tmp_path, capsys):
        conf = tmp_path / "conf.json"
        conf.write_text("[1, 2]")
        code, _, err = run_main(
            ["simulate", "--config", str(conf), "--out", str(tmp_path / "x")],
            capsys,
        )
        assert code == 1

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, err = run_main(
            ["simulate", "--config", str(tmp_path / "nope.json"),
             "--out", str(tmp_path / "x")],
            capsys,
        )
        assert code == 1
        assert json.loads(err)["error"] == "IoFailure"


class TestErrorsAndExitCodes:
    def test_usage_error_is_exit_1(self, capsys):
        code, _, err = run_main(["simulate", "--no-such-flag"], capsys)
        assert code == 1
        assert json.loads(err)["error"] == "ConfigError"

    def test_missing_required_dims(self, tmp_path, capsys):
        code, _, err = run_main(
            ["simulate", "--out", str(tmp_path / "x"), "--m", "2"], capsys
        )
        assert code == 1
        assert "missing required" in json.loads(err)["message"]

    def test_missing_data_is_exit_1(self, tmp_path, capsys):
        code, _, err = run_main(
            ["fit", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "f")],
            capsys,
        )
        assert code == 1
        assert json.loads(err)["error"] == "IoFailure"

    def test_internal_error_is_exit_2(self, tmp_path, capsys, monkeypatch):
        data = tmp_path / "ds"
        assert run_main(sim_args(data), capsys)[0] == 0
        import mvggm.cli as cli_mod

        def boom(*a, **k):
            raise RuntimeError("solver exploded")

        monkeypatch.setattr(cli_mod, "fit_spatial", boom)
        code, _, err = run_main(
            ["fit", "--data", str(data), "--out", str(tmp_path / "f")], capsys
        )
        assert code == 2
        msg = json.loads(err)
        assert msg["error"] == "InternalError"
        assert "RuntimeError" in msg["message"]

    def test_bad_graph_kind_is_exit_1(self, tmp_path, capsys):
        code, _, err = run_main(
            sim_args(tmp_path / "x") [:-4] + ["--graph", "bogus", "--seed", "1"],
            capsys,
        )
        assert code == 1
        assert json.loads(err)["error"] == "ConfigError"

    def test_workers_env_and_flag(self, tmp_path, capsys, monkeypatch):
        data = tmp_path / "ds"
        assert run_main(sim_args(data), capsys)[0] == 0
        monkeypatch.setenv("MVGGM_WORKERS", "not-a-number")
        code, _, err = run_main(
            ["fit", "--data", str(data), "--out", str(tmp_path / "f")], capsys
        )
        assert code == 1
        assert json.loads(err)["error"] == "ConfigError"
        # explicit flag bypasses the bad environment value
        code, _, _ = run_main(
            ["fit", "--data", str(data), "--out", str(tmp_path / "f"),
             "--workers", "1"],
            capsys,
        )
        assert code == 0
        monkeypatch.setenv("MVGGM_WORKERS", "0")
        code, _, err = run_main(
            ["fit", "--data", str(data), "--out", str(tmp_path / "g")], capsys
        )
        assert code == 1


class TestExperimentCommands:
    def test_coverage_command(self, tmp_path, capsys):
        out = tmp_path / "cov"
        code, stdout, _ = run_main(
            ["coverage", "--graph", "random", "--m", "2", "--n", "6",
             "--p", "8", "--q", "5", "--seed", "2", "--replications", "2",
             "--b", "150", "--levels", "0.9", "--out", str(out)],
            capsys,
        )
        assert code == 0
        payload = json.loads(stdout)
        assert {r["kind"] for r in payload["rows"]} == {"off", "zero"}
        assert json.loads((tmp_path / "cov.json").read_text()) == payload
        with open(tmp_path / "cov.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "kind"
        assert len(rows) == 3

    def test_roc_command(self, tmp_path, capsys):
        out = tmp_path / "roc"
        code, stdout, _ = run_main(
            ["roc", "--graph", "random", "--m", "2", "--n", "5",
             "--p", "8", "--q", "5", "--seed", "2", "--replications", "1",
             "--thresholds", "0,0.1,0.5,1", "--out", str(out)],
            capsys,
        )
        assert code == 0
        payload = json.loads(stdout)
        assert set(payload["auc"]) == {"multi", "per-session"}
        with open(tmp_path / "roc.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["method", "threshold", "fpr", "tpr"]
        assert len(rows) == 1 + 2 * 4


class TestSubprocessEntry:
    def test_module_entry_point(self, tmp_path):
        data = tmp_path / "ds"
        proc = subprocess.run(
            [sys.executable, "-m", "mvggm"] + sim_args(data)[0:1]
            + sim_args(data)[1:],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert json.loads(proc.stdout)["seed"] == 1

    def test_byte_reproducible_outputs(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            data = tmp_path / name / "ds"
            fits = tmp_path / name / "fits"
            res = tmp_path / name / "res"
            for argv in (
                sim_args(data, seed=5),
                ["fit", "--data", str(data), "--out", str(fits),
                 "--gamma", "0.05"],
                ["test", "--fits", str(fits), "--edges", "off-diagonal",
                 "--b", "300", "--seed", "2", "--out", str(res)],
            ):
                proc = subprocess.run(
                    [sys.executable, "-m", "mvggm"] + argv,
                    capture_output=True,
                    text=True,
                )
                assert proc.returncode == 0, proc.stderr
            outs.append(tmp_path / name)
        for rel in [p.relative_to(outs[0]) for p in sorted(outs[0].rglob("*"))]:
            a, b = outs[0] / rel, outs[1] / rel
            assert b.exists(), rel
            if a.is_file():
                assert a.read_bytes() == b.read_bytes(), rel

    def test_error_goes_to_stderr_as_json(self):
        proc = subprocess.run(
            [sys.executable, "-m", "mvggm", "fit", "--data", "/nonexistent",
             "--out", "/tmp/unused-fits"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert json.loads(proc.stderr)["error"] == "IoFailure"
        assert proc.stdout == ""
