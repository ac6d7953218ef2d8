import json
import os

import numpy as np
import pytest

from monivqa import cli
from monivqa.cli import (
    ExperimentConfig,
    UsageError,
    main,
    parse_config,
    parse_float_grid,
    run_experiment,
)


class TestGrammar:
    def test_float_grid_range(self):
        grid = parse_float_grid("0:1:0.05")
        assert len(grid) == 21
        assert grid[0] == 0.0 and abs(grid[-1] - 1.0) < 1e-12

    def test_float_grid_list(self):
        assert parse_float_grid("0.1,0.4") == (0.1, 0.4)

    def test_bad_grid(self):
        with pytest.raises(UsageError):
            parse_float_grid("0:1:0.05:9")

    def test_variance_example(self):
        cfg = parse_config(["variance", "--ansatz", "hea1", "--n", "8,10",
                            "--depth", "16", "--p", "0:1:0.05",
                            "--seed", "7"])
        assert cfg.subcommand == "variance"
        assert cfg.params["ansatz"] == "hea1"
        assert cfg.params["n"] == (8, 10)
        assert cfg.params["seed"] == 7
        assert len(cfg.params["p"]) == 21

    def test_missing_required(self):
        with pytest.raises(UsageError):
            parse_config(["variance", "--n", "8", "--p", "0.1"])

    def test_config_file_precedence(self, tmp_path):
        conf = tmp_path / "run.cfg"
        conf.write_text("ansatz = hea2\nn = 6\np = 0.1,0.2\nns = 500\n")
        cfg = parse_config(["variance", "--config", str(conf),
                            "--ns", "1000"])
        assert cfg.params["ns"] == 1000      # flag wins
        assert cfg.params["ansatz"] == "hea2"
        assert cfg.params["p"] == (0.1, 0.2)

    def test_unknown_config_key(self, tmp_path):
        conf = tmp_path / "run.cfg"
        conf.write_text("ansatz = hea2\nn = 6\np = 0.1\nbogus = 3\n")
        with pytest.raises(UsageError):
            parse_config(["variance", "--config", str(conf)])

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "envruns"))
        cfg = parse_config(["replay", "--realization", "x.json"])
        assert cfg.params["out_dir"] == str(tmp_path / "envruns")


def run_cli(*argv):
    return main(list(argv))


class TestRunExperiment:
    def test_variance_end_to_end(self, tmp_path):
        out = tmp_path / "var"
        code = run_cli("variance", "--ansatz", "hea1", "--n", "4",
                       "--depth", "2", "--p", "0.0,0.3", "--ns", "6",
                       "--seed", "3", "--workers", "1",
                       "--out-dir", str(out))
        assert code == 0
        csv = (out / "variance.csv").read_text()
        assert csv.splitlines()[0] == ("ansatz,n,depth,p,variant,grad_index,"
                                       "variance,ci_low,ci_high,n_samples,seed")
        manifest = json.loads((out / "manifest.json").read_text())
        assert "variance.csv" in manifest["outputs"]
        assert (out / "config_used.cfg").exists()

    def test_determinism_byte_identical(self, tmp_path):
        args = ["variance", "--ansatz", "hea2", "--n", "4", "--depth", "2",
                "--p", "0.0,0.4", "--ns", "5", "--seed", "11",
                "--workers", "1"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*args, "--out-dir", str(a)) == 0
        assert run_cli(*args, "--out-dir", str(b)) == 0
        assert (a / "variance.csv").read_bytes() == (b / "variance.csv").read_bytes()
        strip = lambda p: [ln for ln in p.read_text().splitlines()
                           if not ln.startswith("out_dir")]
        assert strip(a / "config_used.cfg") == strip(b / "config_used.cfg")

    def test_entropy_then_collapse_pipeline(self, tmp_path):
        ent = tmp_path / "ent"
        code = run_cli("entropy", "--ansatz", "hea2", "--n", "4,6,8",
                       "--p", "0.1:0.7:0.15", "--depth", "4", "--ns", "8",
                       "--seed", "5", "--workers", "1", "--out-dir", str(ent))
        assert code == 0
        col = tmp_path / "col"
        code = run_cli("collapse", "--entropy-csv", str(ent / "entropy.csv"),
                       "--out-dir", str(col), "--seed", "5", "--workers", "1")
        assert code == 0
        doc = json.loads((col / "collapse.json").read_text())
        assert np.isfinite(doc["p_c"]) and np.isfinite(doc["nu"])
        assert len(doc["restarts"]) == 5

    def test_optimize_and_replay(self, tmp_path):
        opt = tmp_path / "opt"
        code = run_cli("optimize", "--ansatz", "hea2", "--n", "4",
                       "--depth", "3", "--p", "0.2", "--traces", "2",
                       "--max-iters", "15", "--seed", "9", "--workers", "1",
                       "--out-dir", str(opt))
        assert code in (0, 3)
        manifest = json.loads((opt / "manifest.json").read_text())
        assert "exact_ground_energy" in manifest["extras"]
        assert abs(manifest["extras"]["exact_ground_energy"] + 1.0) < 1e-8
        real_file = opt / "realization_000.json"
        assert real_file.exists()
        r1, r2 = tmp_path / "r1", tmp_path / "r2"
        for out in (r1, r2):
            code = run_cli("replay", "--realization", str(real_file),
                           "--out-dir", str(out), "--workers", "1")
            assert code == 0
        assert (r1 / "replay.json").read_bytes() == (r2 / "replay.json").read_bytes()

    def test_mutualinfo_cli(self, tmp_path):
        out = tmp_path / "mi"
        code = run_cli("mutualinfo", "--n", "4", "--depths", "1,4",
                       "--na", "40", "--nb", "20", "--seed", "2",
                       "--workers", "1", "--out-dir", str(out))
        assert code == 0
        lines = (out / "mutualinfo.csv").read_text().splitlines()
        assert lines[0] == "ansatz,n,depth,p,estimator,bits,stderr,N_a,N_b,N_c,seed"
        assert len(lines) == 3

    def test_landscape_cli(self, tmp_path):
        out = tmp_path / "land"
        code = run_cli("landscape", "--ansatz", "hea2", "--n", "4",
                       "--depth", "2", "--p", "0.0", "--resolution", "11",
                       "--max-iters", "10", "--seed", "4", "--workers", "1",
                       "--out-dir", str(out))
        assert code == 0
        lines = (out / "landscape.csv").read_text().splitlines()
        assert lines[0] == "alpha,beta,cost"
        assert len(lines) == 1 + 11 * 11

    def test_unwritable_out_dir(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        code = run_cli("replay", "--realization", "missing.json",
                       "--out-dir", str(blocker / "sub"))
        assert code == 5

    def test_aborted_traces_exit_code(self, tmp_path, monkeypatch):
        from monivqa.lbfgs import OptTrace
        from monivqa.ansatz import build_hea2, realize, run as run_circ

        tpl = build_hea2(4, 2)
        real = realize(tpl, 0.0, np.random.default_rng(0))
        _, rec = run_circ(real)
        fake = OptTrace([0.5], real.theta_array(), 0.5, False, aborted=True,
                        message="dead branch")
        fake.realization = real
        fake.record = rec
        monkeypatch.setattr(cli, "optimize_ensemble", lambda cfg: [fake])
        code = run_cli("optimize", "--ansatz", "hea2", "--n", "4",
                       "--depth", "2", "--p", "0.0",
                       "--out-dir", str(tmp_path / "ab"), "--workers", "1")
        assert code == 3
