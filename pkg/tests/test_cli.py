import csv
import io
import json
import math

import pytest

from dnabound import __version__
from dnabound.cli import crossing_point, main
from dnabound.pipeline import FER_COLUMNS


def run(argv):
    out = io.StringIO()
    rc = main(argv, out)
    return rc, out.getvalue()


def table(text):
    meta = {}
    body = []
    for ln in text.splitlines():
        if ln.startswith("# "):
            k, _, v = ln[2:].partition(" = ")
            meta[k] = v
        else:
            body.append(ln)
    return meta, list(csv.DictReader(body))


def test_dt_bound_spec_example():
    rc, text = run(["dt-bound", "--scheme", "tvc1", "--N", "960", "--M", "1", "--p", "0.10",
                    "--V", "200", "--seed", "7", "--workers", "1"])
    assert rc == 0
    meta, rows = table(text)
    assert len(rows) == 1
    r = rows[0]
    assert 0.0 <= float(r["bound"]) <= 1.0
    assert r["scheme"] == "tvc1" and r["N"] == "960" and r["M"] == "1" and r["V"] == "200"
    assert float(r["threshold_bits"]) == 480.0
    assert meta["run.seed"] == "7" and meta["command"] == "dt-bound"
    assert meta["tool"] == f"dnabound {__version__}"


def test_rerun_is_byte_identical(tmp_path):
    args = ["dt-bound", "--scheme", "tvc2", "--N", "120", "--p-list", "0.1,0.2", "--V", "6", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--workers", "1", "-o", str(a)]) == 0
    assert main(args + ["--workers", "2", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, rows = table(a.read_text())
    assert [r["p_id"] for r in rows] == ["0.1", "0.2"]


def test_json_mirror(tmp_path):
    j = tmp_path / "out.json"
    rc, text = run(["dt-bound", "--scheme", "wm", "--N", "40", "--p", "0.05", "--V", "3",
                    "--workers", "1", "--json", str(j)])
    assert rc == 0
    doc = json.loads(j.read_text())
    meta, rows = table(text)
    assert doc["meta"]["inner.scheme"] == "wm" == meta["inner.scheme"]
    assert doc["rows"][0]["bound"] == pytest.approx(float(rows[0]["bound"]))


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[channel]\np = 0.08\n[inner]\nscheme = tvc1\n[frame]\nN = 80\n"
                   "[sampling]\nV = 4\n[run]\nseed = 11\nworkers = 1\n")
    rc, text = run(["dt-bound", "--config", str(cfg), "--scheme", "tvc2"])
    assert rc == 0
    meta, rows = table(text)
    assert meta["inner.scheme"] == "tvc2" and meta["channel.p"] == "0.08" and meta["run.seed"] == "11"
    assert rows[0]["N"] == "80" and rows[0]["V"] == "4"


@pytest.mark.parametrize("text,word", [
    ("[channel]\np_inss = 0.1\n", "p_inss"),
    ("[channels]\np = 0.1\n", "channels"),
    ("[inner]\np = 0.1\n", "'p'"),
    ("[sampling]\nV = many\n", "'V'"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, word):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    assert main(["dt-bound", "--config", str(cfg), "--p", "0.1"]) == 2
    assert word in capsys.readouterr().err


def test_missing_config_and_bad_lengths(tmp_path, capsys):
    assert main(["dt-bound", "--config", str(tmp_path / "nope.ini")]) == 2
    assert main(["dt-bound", "--scheme", "tvc2", "--N", "962", "--p", "0.1"]) == 2
    assert "'N'" in capsys.readouterr().err
    # 128 nt gives 32 outer symbols, not a multiple of the protograph width.
    assert main(["simulate-fer", "--scheme", "tvc2", "--N", "128", "--p", "0.1"]) == 2
    assert "nearest valid N" in capsys.readouterr().err
    assert main(["dt-bound", "--scheme", "tvc2", "--N", "120"]) == 2  # no channel point
    assert main(["dt-bound", "--p", "0.7", "--V", "2"]) == 2


def test_channel_sample_noiseless():
    rc, text = run(["channel-sample", "--x", "ACGTTG", "--p", "0", "--M", "2"])
    assert rc == 0
    lines = dict(ln.split(" ", 1) for ln in text.splitlines() if not ln.startswith("#"))
    assert lines["x"] == "ACGTTG" and lines["y0"] == "ACGTTG" and lines["y1"] == "ACGTTG"
    assert lines["events0"] == "TA TC TG TT TT TG"
    assert lines["drift0"] == "0 0 0 0 0 0 0"


def test_channel_sample_trace_is_consistent():
    rc, text = run(["channel-sample", "--N", "200", "--p", "0.1", "--p-sub", "0.1", "--seed", "4"])
    assert rc == 0
    lines = dict(ln.split(" ", 1) for ln in text.splitlines() if not ln.startswith("#"))
    x, y = lines["x"], lines["y0"]
    ev = lines["events0"].split()
    drift = [int(v) for v in lines["drift0"].split()]
    rebuilt, pos = [], 0
    for e in ev:
        kind, base = e[0], e[1:]
        if kind == "I":
            rebuilt.append(base)
        elif kind == "T":
            assert base == x[pos]
            rebuilt.append(base)
            pos += 1
        elif kind == "S":
            assert base != x[pos]
            rebuilt.append(base)
            pos += 1
        else:
            pos += 1
    assert "".join(rebuilt) == y and pos == len(x) == 200
    assert drift[0] == 0 and drift[-1] == len(y) - len(x) and len(drift) == 201


def test_channel_sample_bad_input():
    assert main(["channel-sample", "--x", "ACGU", "--p", "0"]) == 2


def test_validate_codebook(tmp_path):
    f = tmp_path / "file.cb"
    f.write_text("codebook 1 n=4 k=2\n0 AAAA\n1 CCCC\n2 GGGG\n3 TTTT\n")
    rc, text = run(["validate-codebook", str(f)])
    assert rc == 0 and "min_levenshtein=4" in text
    rc, _ = run(["validate-codebook", str(f), "--strict"])
    assert rc == 0
    f.write_text("codebook 1 n=2 k=1\n0 AA\n1 AC\n")
    rc, text = run(["validate-codebook", str(f), "--strict"])
    assert rc == 1 and "FAIL" in text
    f.write_text("codebook 1 n=2 k=1\n0 AA\n")
    assert main(["validate-codebook", str(f)]) == 2


def test_simulate_fer_small(tmp_path):
    out = tmp_path / "fer.csv"
    rc = main(["simulate-fer", "--scheme", "tvc2", "--N", "120", "--p-list", "0,0.2", "--max-errors", "2",
               "--max-frames", "5", "--turbo-iters", "3", "--workers", "1", "-o", str(out)])
    assert rc == 0
    meta, rows = table(out.read_text())
    assert list(rows[0].keys()) == list(FER_COLUMNS)
    assert rows[0]["errors"] == "0" and rows[0]["frames"] == "5" and rows[0]["N"] == "120"
    assert meta["pipeline.turbo_iters"] == "3"


def test_normalized_rate_given_p_star():
    rc, text = run(["normalized-rate", "--scheme", "tvc2", "--N-list", "120,240", "--p-star", "0.05",
                    "--V", "5", "--target-fer", "1e-2", "--workers", "1"])
    assert rc == 0
    _, rows = table(text)
    assert [r["N"] for r in rows] == ["120", "240"]
    for r in rows:
        assert r["p_bracket"] == "given" and r["feasible"] == "True"
        assert float(r["normalized_rate"]) == pytest.approx(float(r["rate"]) / float(r["r_max"]))
        assert 0 < float(r["normalized_rate"]) < 1


def test_normalized_rate_with_fer_search():
    rc, text = run(["normalized-rate", "--scheme", "tvc2", "--N", "120", "--p-list", "0.02,0.3",
                    "--V", "4", "--max-errors", "3", "--max-frames", "6", "--turbo-iters", "2",
                    "--target-fer", "0.1", "--workers", "1"])
    assert rc == 0
    _, rows = table(text)
    assert rows[0]["p_bracket"] == "interp" and 0.02 <= float(rows[0]["p_star"]) <= 0.3


def test_crossing_point():
    p, how = crossing_point([0.1, 0.2], [1e-3, 1e-1], [1000, 1000], 1e-2)
    assert how == "interp" and p == pytest.approx(0.15)
    assert crossing_point([0.1, 0.2], [0, 0], [10, 10], 1e-2) == (0.2, "all_below")
    assert crossing_point([0.2, 0.1], [0.5, 0.3], [10, 10], 1e-2) == (0.1, "all_above")
    p, _ = crossing_point([0.1, 0.2, 0.3], [0.0, 0.001, 0.1], [100, 1000, 100], 0.01)
    assert 0.2 < p < 0.3 and math.isfinite(p)


def test_usage_errors():
    assert main([]) == 2
    assert main(["dt-bound", "--scheme", "marker"]) == 2
    assert main(["--version"]) == 0
