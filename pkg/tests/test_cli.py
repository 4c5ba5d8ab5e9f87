import io
import subprocess
import sys

import numpy as np
import pytest

from gradsel.cli import main, read_table
from gradsel.experiments import gen_mixture, gen_regression


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


@pytest.fixture
def cluster_file(tmp_path):
    s = gen_mixture(150, 1.0, 3)
    path = tmp_path / "points.csv"
    rows = ["x,y,label"] + [f"{a!r},{b!r},{c}" for (a, b), c in zip(s.Z.tolist(), s.labels.tolist())]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def regression_file(tmp_path):
    s = gen_regression(300, "sin", "t3", seed=2)
    path = tmp_path / "reg.tsv"
    rows = ["w\ty"] + [f"{w!r}\t{y!r}" for w, y in zip(s.W[:, 0].tolist(), s.Y.tolist())]
    path.write_text("\n".join(rows) + "\n")
    return path


def test_read_table_sniffs_delimiters(tmp_path, regression_file):
    names, data = read_table(regression_file)
    assert names == ["w", "y"] and data.shape == (300, 2)
    p = tmp_path / "semi.txt"
    p.write_text("# comment\na;b\n1;2\n3;4\n")
    assert read_table(p)[1].tolist() == [[1, 2], [3, 4]]


def test_cluster_select(cluster_file):
    code, text = run(["cluster-select", str(cluster_file), "--grid", "64", "--const", "1",
                      "--const", "10", "--noise-scale", "1", "1"])
    assert code == 0
    lines = text.strip().splitlines()
    assert len(lines) == 2 and all("bandwidth=(" in ln and "error=" in ln for ln in lines)


def test_regress_point_and_global(regression_file, tmp_path):
    code, text = run(["regress-point", str(regression_file), "--x0", "0.3"])
    assert code == 0 and "estimate=" in text
    out = tmp_path / "fit.csv"
    code, text = run(["regress-global", str(regression_file), "--grid", "20", "--out", str(out)])
    assert code == 0 and "bandwidth=" in text
    lines = out.read_text().splitlines()
    assert lines[0] == "x1,fit" and len(lines) == 21


def test_missing_file_is_a_usage_error(tmp_path, capsys):
    code, _ = run(["regress-point", str(tmp_path / "absent.csv"), "--x0", "0.5"])
    assert code == 2
    assert "cannot read data file" in capsys.readouterr().err


def test_bad_inputs_exit_two(tmp_path, regression_file, capsys):
    assert run(["frobnicate"])[0] == 2
    assert run(["regress-point", str(regression_file)])[0] == 2  # --x0 is required
    assert run(["regress-point", str(regression_file), "--x0", "0.1", "0.2"])[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,x\n")
    assert run(["regress-point", str(bad), "--x0", "0.5"])[0] == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("replicates = 0\n")
    assert run(["experiment", "figure1", "--config", str(cfg)])[0] == 2
    capsys.readouterr()


def test_experiment_from_config_file(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("[experiment]\nn = 60\nreplicates = 1\nu = 2\nconstants = 1\ngrid = 48\n"
                   "h_minus = 0.08\nn_restarts = 1\nmax_iter = 10\n")
    out = tmp_path / "res.csv"
    code, text = run(["experiment", "figure1", "--config", str(cfg), "--out", str(out)])
    assert code == 0 and "wrote" in text
    body = out.read_text().splitlines()
    assert body[0].startswith("experiment,method,constant,u,n,replicate")
    assert sum(ln.endswith(",false,,") for ln in body) == 3


def test_experiment_determinism_cli(tmp_path):
    args = ["experiment", "figure1", "--reps", "1", "--seed", "7", "--u", "1", "--grid", "48",
            "--const", "1", "--n", "60"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--out", str(a)])[0] == 0
    assert run(args + ["--out", str(b), "--jobs", "2"])[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_check_subcommand_passes():
    code, text = run(["check"])
    assert code == 0
    assert text.count("PASS") == 6 and "all checks passed" in text


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gradsel.cli", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "cluster-select" in proc.stdout
