import csv
import io
import subprocess
import sys

import pytest

from deep_eda.cli import main
from deep_eda.dbm import load_dbm
from deep_eda.harness import RUN_LOG_FIELDS, SUMMARY_FIELDS, load_config, read_pgm, read_results_csv
from deep_eda.problems import load_nk_instance

FAST = ["--n", "10", "--problem", "onemax"]


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text("pretrain_epochs = 3\nfinetune_epochs = 2\nsample_iterations = 3\nmax_generations = 5\n")
    return str(path)


def test_dump_config_applies_overrides(tmp_path, fast_config):
    code, text = run(["run", "--config", fast_config, "--dump-config", "--problem", "trap", "--n", "25", "--seed", "9"])
    assert code == 0
    (tmp_path / "dumped.cfg").write_text(text)
    s = load_config(tmp_path / "dumped.cfg")
    assert (s.problem, s.n, s.seed, s.pretrain_epochs) == ("trap", 25, 9, 3)


def test_run_writes_run_log_row(tmp_path, fast_config):
    snap = tmp_path / "p.dbm"
    code, text = run(["run", "--config", fast_config, *FAST, "--popsize", "20", "--snapshot", str(snap)])
    assert code == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == RUN_LOG_FIELDS
    assert rows[1][0] == "onemax10" and rows[1][1] == "20"
    assert load_dbm(snap).shape.n == 10


def test_snapshot_needs_dbm(tmp_path):
    code, _ = run(["run", *FAST, "--model", "umda", "--popsize", "20", "--snapshot", str(tmp_path / "x")])
    assert code == 1


def test_sweep_outputs(tmp_path):
    out = tmp_path / "res"
    code, text = run(["sweep", *FAST, "--model", "umda", "--grid", "20,40", "--runs", "3", "--out", str(out)])
    assert code == 0
    assert text.splitlines()[0] == ",".join(SUMMARY_FIELDS)
    assert "# min popsize for >=50% success" in text
    rows = read_results_csv(out / "summary.csv")
    assert rows and rows[0].popsize == 20
    assert (out / "runs.csv").read_text().splitlines()[0] == ",".join(RUN_LOG_FIELDS)
    assert (out / "sweep.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_sweep_no_plot(tmp_path):
    out = tmp_path / "res"
    code, _ = run(["sweep", *FAST, "--model", "umda", "--grid", "20", "--runs", "1", "--out", str(out), "--no-plot"])
    assert code == 0 and not (out / "sweep.png").exists()


def test_heatmap(tmp_path, fast_config):
    snap = tmp_path / "p.dbm"
    run(["run", "--config", fast_config, *FAST, "--popsize", "20", "--snapshot", str(snap)])
    code, _ = run(["heatmap", "--params", str(snap), "--out", str(tmp_path / "w.pgm"), "--png", str(tmp_path / "w.png")])
    assert code == 0
    assert read_pgm(tmp_path / "w.pgm").shape == (10, 10)
    assert (tmp_path / "w.png").exists()


def test_gen_nk(tmp_path):
    code, text = run(["gen-nk", "--n", "12", "--k", "3", "--seed", "4", "--out", str(tmp_path / "i.nk")])
    assert code == 0 and "known optimum" in text
    inst = load_nk_instance(tmp_path / "i.nk")
    assert (inst.n, inst.k) == (12, 3)


def test_errors_exit_2(tmp_path, capsys):
    assert run(["heatmap", "--params", str(tmp_path / "none"), "--out", str(tmp_path / "w.pgm")])[0] == 2
    assert run(["run", "--problem", "trap", "--n", "12"])[0] == 2
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "deep_eda", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout
