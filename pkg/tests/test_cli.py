import csv
import io
import os
import subprocess
import sys

import pytest

from slicegrad import bench
from slicegrad.cli import SEED_ENV, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


QUICK = ("--repeats", "20", "--bootstrap", "50")


def test_bench_quad_default_grid(capsys):
    code, out, _ = run(capsys, "bench-quad", *QUICK)
    assert code == 0
    r = rows(out)
    assert r[0] == list(bench.VARIANCE_COLUMNS)
    assert len(r) == 17
    assert {x[0] for x in r[1:]} == {"glr", "slrg", "trrg:0.5", "brg:1.5"}
    assert {x[1] for x in r[1:]} == {"1", "10", "100", "1000"}


def test_bench_sigma_and_alt(capsys):
    code, out, _ = run(capsys, "bench-sigma", "--dims", "1,3", *QUICK)
    assert code == 0 and [x[0] for x in rows(out)[1:]] == ["glr_sigma", "glr_sigma", "wrg", "wrg"]
    code, out, _ = run(capsys, "bench-alt", "--dims", "2", *QUICK)
    assert code == 0
    assert {"lrg", "drg", "dlrg"} <= {x[0] for x in rows(out)[1:]}


def test_bench_options_reflected(capsys):
    code, out, _ = run(capsys, "bench-quad", "--dims", "5", "--estimators", "slrg", "--noise", "0",
                       "--samples", "40", "--seed", "11", *QUICK)
    assert code == 0
    (row,) = rows(out)[1:]
    rec = dict(zip(bench.VARIANCE_COLUMNS, row))
    assert rec["estimator"] == "slrg" and rec["noise_sigma"] == "0.0" and rec["seed"] == "11"
    assert rec["samples"] == "40" and rec["repeats"] == "20"


def test_outputs_are_reproducible(capsys, tmp_path):
    args = ("bench-quad", "--dims", "1,20", "--seed", "5", *QUICK)
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    c = run(capsys, *args, "--threads", "3")[1]
    assert a == b == c
    dest = tmp_path / "v.csv"
    assert run(capsys, *args, "--out", str(dest))[1] == ""
    assert dest.read_text() == a


def test_seed_from_environment(capsys, monkeypatch):
    args = ("bench-quad", "--dims", "2", "--estimators", "glr", *QUICK)
    monkeypatch.setenv(SEED_ENV, "9")
    env = run(capsys, *args)[1]
    explicit = run(capsys, *args, "--seed", "9")[1]
    assert env == explicit
    assert rows(env)[1][-1] == "9"
    monkeypatch.delenv(SEED_ENV)
    assert rows(run(capsys, *args)[1])[1][-1] == "0"
    monkeypatch.setenv(SEED_ENV, "abc")
    assert run(capsys, *args)[0] == 2


def test_c_table(capsys):
    code, out, _ = run(capsys, "c-table")
    r = rows(out)
    assert code == 0
    assert r[0] == ["c", "dim_minus_one", "accuracy_t", "dim_minus_one_rounded"]
    assert len(r) == 9
    assert r[5][0] == "0.5" and r[5][3] == "71"


@pytest.mark.parametrize("name,extra", [("bdist", ()), ("wdist", ()), ("truncratio", ("--c", "1.0")),
                                        ("betaslice", ("--alpha", "1.1")), ("chi", ("--k", "4"))])
def test_dist_check(capsys, name, extra):
    code, out, err = run(capsys, "dist-check", "--dist", name, "--n", "20000", "--bins", "40", *extra)
    assert code == 0
    r = rows(out)
    assert r[0] == ["x", "empirical_density", "analytic_pdf"] and len(r) == 41
    assert "chi-square" in err


@pytest.mark.parametrize("argv", [
    ("bench-quad", "--estimators", "nonsense"),
    ("bench-quad", "--dims", "0"),
    ("bench-quad", "--seed", "-4"),
    ("bench-quad", "--samples", "7", *QUICK),
    ("bench-quad", "--threads", "0"),
    ("bench-sigma", "--estimators", "glr", *QUICK),
    ("dist-check",),
    ("dist-check", "--dist", "gamma"),
    ("es-train", "--estimator", "wrg"),
    ("es-train", "--popsize", "7"),
    ("frobnicate",),
    (),
])
def test_usage_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == "" and err


def test_runtime_errors_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "dist-check", "--dist", "bdist", "--sigma", "-1")
    assert code == 1 and err
    code, _, err = run(capsys, "c-table", "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 1 and err


def test_help_exits_0(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "bench-quad" in out


def test_es_train_sphere(capsys):
    code, out, _ = run(capsys, "es-train", "--objective", "sphere", "--dim", "8", "--iterations", "20",
                       "--eval-every", "5", "--estimator", "brg:1.1", "--popsize", "8")
    r = rows(out)
    assert code == 0
    assert r[0] == ["iter", "mean_train_reward", "eval_reward", "grad_variance", "elapsed_ms"]
    assert len(r) == 22
    assert [x[0] for x in r[1:] if x[2]] == ["0", "5", "10", "15", "20"]
    assert all(x[4] == "0.0" for x in r[1:])


def test_es_train_config_file(capsys, tmp_path):
    cfg = tmp_path / "es.cfg"
    cfg.write_text("# sphere run\nobjective = sphere\ndim = 6\niterations = 10\npopsize = 16\nlr = 0.05\n"
                   "estimator = slrg\n")
    from_file = run(capsys, "es-train", "--config", str(cfg))[1]
    overridden = run(capsys, "es-train", "--config", str(cfg), "--iterations", "4")[1]
    assert len(rows(from_file)) == 12
    assert len(rows(overridden)) == 6
    # flags and file agree where they overlap
    flags = run(capsys, "es-train", "--objective", "sphere", "--dim", "6", "--iterations", "10",
                "--popsize", "16", "--lr", "0.05", "--estimator", "slrg")[1]
    assert flags == from_file
    bad = tmp_path / "bad.cfg"
    bad.write_text("iterations 3\n")
    assert run(capsys, "es-train", "--config", str(bad))[0] == 2
    bad.write_text("learning_rate = 3\n")
    assert run(capsys, "es-train", "--config", str(bad))[0] == 2


def test_es_train_cartpole_short(capsys):
    code, out, _ = run(capsys, "es-train", "--iterations", "2", "--popsize", "4", "--horizon", "50",
                       "--eval-every", "1", "--eval-samples", "2")
    assert code == 0 and len(rows(out)) == 4


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    env.pop(SEED_ENV, None)
    p = subprocess.run([sys.executable, "-m", "slicegrad", "c-table"], capture_output=True, text=True,
                       env=env, cwd=tmp_path)
    assert p.returncode == 0 and p.stdout.startswith("c,dim_minus_one")
    p = subprocess.run([sys.executable, "-m", "slicegrad", "bench-quad", "--estimators", "x"],
                       capture_output=True, text=True, env=env, cwd=tmp_path)
    assert p.returncode == 2
