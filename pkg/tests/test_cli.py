"""Command-line harness: exit codes, CSV artifacts, manifests, replay."""

import csv
import json
import os
import subprocess
import sys

import pytest

import onebit_mimo.cli as cli
from onebit_mimo import __version__


SMALL_CONFIG = """\
master_seed: 42
experiments:
  - name: collision_small
    type: collision_check
    k: 1
    n_r: 1
    p: 1.0
    sigma2: 1.0
    trials: 20000
  - name: qpsk_small
    type: ser_sweep
    k: 2
    n_r: 4
    constellation: {kind: psk, order: 4}
    snr_grid_db: [0, 10]
    detectors: [NML1, NML2, ZF]
    trials_per_point: 40
"""


def _write_config(tmp_path, body=SMALL_CONFIG, name="conf.yaml"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestExitCodes:
    def test_missing_config_flag(self, capsys):
        assert cli.main([]) == 1
        assert "--config" in capsys.readouterr().err

    def test_nonexistent_config(self, tmp_path, capsys):
        assert cli.main(["--config", str(tmp_path / "nope.yaml")]) == 1
        assert "no such file" in capsys.readouterr().err

    def test_invalid_yaml(self, tmp_path, capsys):
        path = _write_config(tmp_path, "experiments: [unclosed\n")
        assert cli.main(["--config", path]) == 1
        assert "config error" in capsys.readouterr().err

    def test_schema_violation(self, tmp_path, capsys):
        path = _write_config(tmp_path, "master_seed: 1\nbogus: 2\n")
        assert cli.main(["--config", path]) == 1
        assert "bogus" in capsys.readouterr().err

    def test_bad_parallelism(self, tmp_path):
        path = _write_config(tmp_path)
        assert cli.main(["--config", path, "--parallelism", "0"]) == 1

    def test_bad_seed(self, tmp_path):
        path = _write_config(tmp_path)
        assert cli.main(["--config", path, "--seed", "-1"]) == 1

    def test_empty_experiment_list_warns_and_succeeds(self, tmp_path,
                                                      capsys):
        path = _write_config(tmp_path, "master_seed: 3\n")
        out_dir = tmp_path / "results"
        assert cli.main(
            ["--config", path, "--out-dir", str(out_dir)]
        ) == 0
        assert "nothing to do" in capsys.readouterr().err
        assert not out_dir.exists()

    def test_unwritable_out_dir(self, tmp_path, capsys):
        path = _write_config(tmp_path)
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        assert cli.main(
            ["--config", path, "--out-dir", str(blocker)]
        ) == 3
        assert "I/O error" in capsys.readouterr().err

    def test_runtime_failure_isolates_and_returns_2(self, tmp_path,
                                                    capsys):
        body = """\
master_seed: 1
experiments:
  - name: bad_distance
    type: multicell_sweep
    d_grid_m: [50]
    detectors: [ZF]
    trials: 4
    n_cells: 3
    k: 2
    n_r: 4
  - name: fine
    type: collision_check
    k: 1
    n_r: 1
    p: 1.0
    sigma2: 1.0
    trials: 1000
"""
        path = _write_config(tmp_path, body)
        out_dir = tmp_path / "results"
        assert cli.main(["--config", path, "--out-dir", str(out_dir)]) == 2
        assert "bad_distance" in capsys.readouterr().err
        # the healthy experiment still produced its artifact
        assert (out_dir / "fine.csv").exists()
        assert not (out_dir / "bad_distance.csv").exists()
        manifest = json.loads((out_dir / "manifest.json").read_text())
        status = {e["name"]: e["status"] for e in manifest["experiments"]}
        assert status == {"bad_distance": "error", "fine": "ok"}

    def test_io_error_wins_over_failure(self, tmp_path, monkeypatch,
                                        capsys):
        real = cli._write_csv

        def failing(path, columns, rows):
            if "collision_small" in path:
                raise OSError("disk full")
            return real(path, columns, rows)

        monkeypatch.setattr(cli, "_write_csv", failing)
        body = SMALL_CONFIG + """\
  - name: also_bad
    type: multicell_sweep
    d_grid_m: [50]
    detectors: [ZF]
    trials: 2
    n_cells: 3
    k: 2
    n_r: 4
"""
        path = _write_config(tmp_path, body)
        out_dir = tmp_path / "results"
        assert cli.main(["--config", path, "--out-dir", str(out_dir)]) == 3
        err = capsys.readouterr().err
        assert "disk full" in err


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_run")
    path = _write_config(tmp)
    out_dir = tmp / "results"
    assert cli.main(["--config", path, "--out-dir", str(out_dir)]) == 0
    return out_dir


class TestArtifacts:
    def test_csv_schemas(self, run_dir):
        col = _read_rows(run_dir / "collision_small.csv")
        assert list(col[0].keys()) == list(cli.COLLISION_COLUMNS)
        assert len(col) == 1
        assert float(col[0]["closed_form"]) == 0.25
        est = float(col[0]["mc_estimate"])
        se = float(col[0]["mc_stderr"])
        assert abs(est - 0.25) < 5 * se

        ser = _read_rows(run_dir / "qpsk_small.csv")
        assert list(ser[0].keys()) == list(cli.SER_COLUMNS)
        assert len(ser) == 6  # 2 SNRs x 3 detectors
        for row in ser:
            assert row["detector"] in ("NML1", "NML2", "ZF")
            assert int(row["symbols"]) == 80
            # floats are written with repr and parse back exactly
            assert 0.0 <= float(row["ser"]) <= 1.0
            if row["detector"] == "ZF":
                assert row["mean_iterations"] == ""
            else:
                assert float(row["mean_iterations"]) > 0
            if row["detector"] == "NML2":
                assert float(row["mean_candidates"]) >= 1.0
            else:
                assert row["mean_candidates"] == ""

    def test_manifest_contents(self, run_dir):
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["artifact_version"] == __version__
        assert manifest["master_seed"] == 42
        names = [e["name"] for e in manifest["experiments"]]
        assert names == ["collision_small", "qpsk_small"]
        for entry in manifest["experiments"]:
            assert entry["status"] == "ok"
            assert entry["output_csv"] == entry["name"] + ".csv"
            assert len(entry["config_hash"]) == 12
            assert entry["wall_time_s"] >= 0

    def test_plot_script_runs(self, run_dir):
        script = run_dir / cli.PLOT_SCRIPT_NAME
        assert script.exists()
        proc = subprocess.run(
            [sys.executable, str(script)], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
        assert (run_dir / "qpsk_small.png").exists()
        assert "collision_small" in proc.stdout

    def test_replay_from_manifest_is_byte_identical(self, run_dir,
                                                    tmp_path):
        replay_dir = tmp_path / "replay"
        assert cli.main(
            [
                "--config", str(run_dir / "manifest.json"),
                "--out-dir", str(replay_dir),
            ]
        ) == 0
        for name in ("collision_small.csv", "qpsk_small.csv"):
            assert (replay_dir / name).read_bytes() == (
                run_dir / name
            ).read_bytes()

    def test_parallelism_does_not_change_bytes(self, run_dir, tmp_path):
        par_dir = tmp_path / "par"
        config = json.loads((run_dir / "manifest.json").read_text())
        path = tmp_path / "replay.json"
        path.write_text(json.dumps(config))
        assert cli.main(
            [
                "--config", str(path),
                "--out-dir", str(par_dir),
                "--parallelism", "2",
            ]
        ) == 0
        for name in ("collision_small.csv", "qpsk_small.csv"):
            assert (par_dir / name).read_bytes() == (
                run_dir / name
            ).read_bytes()


class TestSeedOverride:
    def test_seed_changes_results(self, tmp_path):
        path = _write_config(tmp_path)
        a = tmp_path / "a"
        b = tmp_path / "b"
        c = tmp_path / "c"
        assert cli.main(["--config", path, "--out-dir", str(a),
                         "--seed", "1"]) == 0
        assert cli.main(["--config", path, "--out-dir", str(b),
                         "--seed", "2"]) == 0
        assert cli.main(["--config", path, "--out-dir", str(c),
                         "--seed", "1"]) == 0
        a_bytes = (a / "qpsk_small.csv").read_bytes()
        assert a_bytes != (b / "qpsk_small.csv").read_bytes()
        assert a_bytes == (c / "qpsk_small.csv").read_bytes()

    def test_explicit_per_experiment_seed_immune_to_override(self,
                                                             tmp_path):
        body = """\
master_seed: 5
experiments:
  - name: pinned
    type: collision_check
    seed: 12345
    k: 1
    n_r: 1
    p: 1.0
    sigma2: 1.0
    trials: 5000
"""
        path = _write_config(tmp_path, body)
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert cli.main(["--config", path, "--out-dir", str(a),
                         "--seed", "1"]) == 0
        assert cli.main(["--config", path, "--out-dir", str(b),
                         "--seed", "2"]) == 0
        assert (a / "pinned.csv").read_bytes() == (
            b / "pinned.csv"
        ).read_bytes()


class TestListing:
    def test_list_experiments(self, tmp_path, capsys):
        path = _write_config(tmp_path)
        out_dir = tmp_path / "never_created"
        assert cli.main(
            [
                "--config", path,
                "--out-dir", str(out_dir),
                "--list-experiments",
            ]
        ) == 0
        out = capsys.readouterr().out
        assert "collision_small" in out
        assert "qpsk_small" in out
        assert "hash=" in out
        assert not out_dir.exists()


class TestVerify:
    def test_verify_passes(self, capsys):
        assert cli.main(["--verify"]) == 0
        out = capsys.readouterr().out
        assert "ok" in out
        assert "FAIL" not in out
