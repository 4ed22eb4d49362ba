import csv
import io
import os
import socket
import subprocess
import sys

import pytest

from privmon.bench import COLUMNS, linear_fit, read_csv
from privmon.cli import main
from privmon.robustness import example_trace

from conftest import WORKED_FORMULA


@pytest.fixture
def trace_file(tmp_path):
    p = tmp_path / "trace.csv"
    p.write_text(example_trace().to_csv())
    return str(p)


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_monitor(trace_file, capsys):
    assert main(["monitor", "--trace", trace_file, "--formula", WORKED_FORMULA]) == 0
    assert capsys.readouterr().out == "3 SAT\n"
    assert main(["monitor", "--trace", trace_file, "--formula", "TRUE"]) == 0
    assert capsys.readouterr().out == "PINF SAT\n"
    assert main(["monitor", "--trace", trace_file, "--formula", "F[100,200) x >= 0"]) == 0
    assert capsys.readouterr().out == "NINF UNSAT\n"
    assert main(["monitor", "--trace", trace_file, "--formula", "x >= 3"]) == 0
    assert capsys.readouterr().out == "0 INCONCLUSIVE\n"


def test_formula_from_file(trace_file, tmp_path, capsys):
    f = tmp_path / "phi.txt"
    f.write_text(WORKED_FORMULA + "\n")
    assert main(["monitor", "--trace", trace_file, "--formula", f"@{f}"]) == 0
    assert capsys.readouterr().out == "3 SAT\n"


def test_validation_errors(tmp_path, trace_file, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x\n0,1\n5,2\n3,0\n")
    assert main(["monitor", "--trace", str(bad), "--formula", "TRUE"]) == 2
    assert main(["monitor", "--trace", trace_file, "--formula", "x >="]) == 2
    assert main(["monitor", "--trace", str(tmp_path / "missing.csv"), "--formula", "TRUE"]) == 4
    err = capsys.readouterr().err
    assert "strictly increasing" in err and "io error" in err


def test_synth_then_sim(tmp_path, trace_file, capsys):
    net = tmp_path / "net.txt"
    assert main(["synth", "--n", "4", "--m", "4", "--out", str(net)]) == 0
    stats = dict(kv.split("=") for kv in capsys.readouterr().out.split())
    assert int(stats["and"]) == 4281 and int(stats["cycles"]) == 49
    assert main(["sim", "--netlist", str(net), "--trace", trace_file, "--formula",
                 WORKED_FORMULA]) == 0
    assert capsys.readouterr().out == "3 SAT\n"
    assert main(["sim", "--netlist", str(net), "--trace", trace_file, "--formula",
                 WORKED_FORMULA, "--fixed"]) == 0
    assert capsys.readouterr().out == "3 SAT\n"
    # five nodes do not fit a four-node circuit
    assert main(["sim", "--netlist", str(net), "--trace", trace_file, "--formula",
                 "G[0,1) F[0,2) (x >= 1 && x >= 2)"]) == 2


def test_synth_stats_grow_linearly(capsys):
    ns, gates = [4, 8, 16], []
    for n in ns:
        assert main(["synth", "--n", str(n), "--m", "4", "--out", os.devnull]) == 0
        stats = dict(kv.split("=") for kv in capsys.readouterr().out.split())
        gates.append(int(stats["gates"]))
    assert linear_fit(ns, gates)[2] > 0.99


def test_gen(capsys, tmp_path):
    assert main(["gen", "trace", "--n", "10", "--seed", "7"]) == 0
    text = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(text)))[1:]
    times = [int(r[0]) for r in rows]
    assert len(times) == 10 and all(1 <= b - a <= 1_999_999 for a, b in zip(times, times[1:]))
    assert main(["gen", "trace", "--n", "10", "--seed", "7"]) == 0
    assert capsys.readouterr().out == text
    phi, tr = tmp_path / "phi.txt", tmp_path / "t.csv"
    assert main(["gen", "formula", "--depth", "3", "--seed", "1", "--out", str(phi)]) == 0
    assert main(["gen", "trace", "--n", "6", "--seed", "1", "--out", str(tr)]) == 0
    assert main(["monitor", "--trace", str(tr), "--formula", f"@{phi}"]) == 0
    assert capsys.readouterr().out.split()[1] in ("SAT", "UNSAT", "INCONCLUSIVE")


def test_bench_rows(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--n", "4", "--depth", "3", "--reps", "2", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = read_csv(fh)
    assert len(rows) == 2
    assert list(rows[0]) == COLUMNS
    for r in rows:
        assert r["error"] == "" and r["value"] == r["expected"]
        int(r["gates"]), int(r["bytes"]), float(r["total_ms"])


def _cli(*args, env=None):
    return subprocess.Popen([sys.executable, "-m", "privmon.cli", *args], stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, text=True, env=env)


def test_garble_evaluate_processes(trace_file):
    port = str(_free_port())
    g = _cli("garble", "--listen", f"127.0.0.1:{port}", "--n", "4", "--m", "4",
             "--formula", WORKED_FORMULA)
    e = _cli("evaluate", "--connect", f"127.0.0.1:{port}", "--n", "4", "--m", "4",
             "--trace", trace_file)
    (g_out, _), (e_out, _) = g.communicate(timeout=120), e.communicate(timeout=120)
    assert g.returncode == e.returncode == 0
    assert g_out == e_out == "3 SAT\n"


def test_param_mismatch_processes(trace_file):
    port = str(_free_port())
    g = _cli("garble", "--listen", f"127.0.0.1:{port}", "--n", "4", "--m", "4",
             "--formula", WORKED_FORMULA)
    e = _cli("evaluate", "--connect", f"127.0.0.1:{port}", "--n", "4", "--m", "4",
             "--kappa", "256", "--trace", trace_file)
    (_, g_err), (_, e_err) = g.communicate(timeout=60), e.communicate(timeout=60)
    assert g.returncode == e.returncode == 3
    assert "NEGOTIATE-FAIL" in g_err and "NEGOTIATE-FAIL" in e_err


def test_log_level_env(trace_file, tmp_path):
    net = tmp_path / "net.txt"
    assert main(["synth", "--n", "4", "--m", "4", "--out", str(net)]) == 0
    args = ("sim", "--netlist", str(net), "--trace", trace_file, "--formula", "TRUE")
    quiet = _cli(*args, env=dict(os.environ, PRIVMON_LOG="WARNING"))
    loud = _cli(*args, env=dict(os.environ, PRIVMON_LOG="INFO"))
    (_, q_err), (out, l_err) = quiet.communicate(timeout=60), loud.communicate(timeout=60)
    assert out == "PINF SAT\n"
    assert "simulation used" in l_err and "simulation used" not in q_err
