import json
import subprocess
import sys

import numpy as np
import pytest

from umival import io
from umival.cli import main
from umival.models import ranked_kernel, sample_datapoint


@pytest.fixture
def kernel_file(tmp_path):
    p = tmp_path / "k.mk"
    io.emit_kernel(ranked_kernel(np.random.default_rng(0), 6, 1), p)
    return p


@pytest.fixture
def trace_file(tmp_path):
    k = ranked_kernel(np.random.default_rng(0), 6, 1)
    _, tr = sample_datapoint(k, 3000, seed=1)
    p = tmp_path / "t.jsonl"
    io.emit_trace(tr, p)
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_value_trace(capsys, trace_file):
    code, out, _ = run(capsys, "value", "--trace", trace_file, "--seed", 7)
    assert code == 0
    recs = records(out)
    assert recs[0]["branch"] == "PLAUSIBLE" and recs[-1]["points"] == 1
    assert recs[-1]["total"] == recs[0]["value"]


def test_value_deterministic(capsys, trace_file):
    a = run(capsys, "value", "--trace", trace_file, "--seed", 7)[1]
    b = run(capsys, "--seed", "7", "value", "--trace", trace_file)[1]
    assert a == b
    c = run(capsys, "value", "--trace", trace_file, "--seed", 8)[1]
    assert c != a


def test_value_manifest_parallel(capsys, tmp_path, trace_file):
    m = tmp_path / "m.txt"
    m.write_text(f"{trace_file.name}\n{trace_file.name}\n")
    serial = run(capsys, "value", "--manifest", m)[1]
    par = run(capsys, "value", "--manifest", m, "--workers", 2)[1]
    assert serial == par
    assert records(serial)[-1]["points"] == 2


def test_simulate_then_value(capsys, tmp_path, kernel_file):
    t = tmp_path / "sim.jsonl"
    toks = tmp_path / "sim.tok"
    code, _, _ = run(capsys, "simulate", "--model", kernel_file, "--length", 2000, "--seed", 1,
                     "--output", t, "--tokens-out", toks)
    assert code == 0 and len(toks.read_text().split()) == 2000
    rec = records(run(capsys, "value", "--trace", t)[1])[0]
    assert rec["branch"] == "PLAUSIBLE" and rec["divergence"] < 0.05


def test_simulate_with_transform(capsys, tmp_path, kernel_file):
    t = tmp_path / "sim.jsonl"
    run(capsys, "simulate", "--model", kernel_file, "--length", 2000, "--transform", "top_k=1", "--output", t)
    rec = records(run(capsys, "value", "--trace", t)[1])[0]
    assert rec["branch"] == "DIVERGENT"


def test_transform_and_tests(capsys, tmp_path, trace_file):
    z = tmp_path / "z.txt"
    assert run(capsys, "transform", "--trace", trace_file, "--output", z)[0] == 0
    assert len(io.parse_z(z)) == 3000
    from_z = run(capsys, "tests", "--z", z)[1]
    from_trace = run(capsys, "tests", "--trace", trace_file)[1]
    assert from_z == from_trace
    assert records(from_z)[-1] == {"verdict": True, "vacuous": False}


def test_train(capsys, tmp_path):
    c = tmp_path / "c.txt"
    c.write_text("1 2 1 2 1\n")
    k = tmp_path / "k.mk"
    assert run(capsys, "train", "--corpus", c, "--order", 1, "--output", k)[0] == 0
    np.testing.assert_array_equal(io.parse_kernel(k).row((1,)), [0.0, 1.0])


def test_cdf(capsys, trace_file):
    _, out, _ = run(capsys, "cdf", "--trace", trace_file)
    lines = out.splitlines()
    assert lines[0] == "position,value" and len(lines) == 3000 + 3
    _, out, _ = run(capsys, "cdf", "--trace", trace_file, "--bins", 10)
    assert len(out.splitlines()) == 12


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "iid", "--pairs", 100)
    assert code == 0 and "PASS" in out and "kl_abs_error" in out
    code, out, _ = run(capsys, "verify", "markov", "--pairs", 10)
    assert code == 0 and "equal_kernel_gap" in out


def test_usage_errors(capsys):
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "value", "--trace", "x", "--nope")[0] == 1


def test_validation_and_io_errors(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"token": 1}\n')
    code, _, err = run(capsys, "value", "--trace", bad)
    assert code == 1 and "header required" in err
    code, _, err = run(capsys, "value", "--trace", tmp_path / "missing.jsonl")
    assert code == 2 and "I/O error" in err


def test_module_entry_point(trace_file):
    proc = subprocess.run([sys.executable, "-m", "umival", "value", "--trace", str(trace_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and '"total"' in proc.stdout
