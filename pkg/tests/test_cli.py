import json
import subprocess
import sys

import jsonschema
import pytest

from copsonlab.cli import build_parser, load_schema, run
from copsonlab.sharpness import REGION_HEADER

CASES = [
    ("c0", ["c0", "--p", "2"], 0),
    ("c0", ["c0", "--p", "0.5"], 0),
    ("verify", ["verify", "--family", "C2", "--p", "2", "--c", "0", "--lambda", "const:1",
                "--x", "unit:1", "--N", "100"], 0),
    ("verify", ["verify", "--family", "BGA", "--p", "2", "--alpha", "0.5", "--lambda", "pow:-2",
                "--N", "500"], 0),
    ("verify", ["verify", "--family", "C2", "--p", "0.5", "--c", "0", "--reverse", "--N", "500"], 0),
    ("lemma", ["lemma", "--cond", "LEMMA21", "--p", "2", "--c", "-0.5", "--grid", "4096"], 1),
    ("lemma", ["lemma", "--cond", "HADAMARD", "--p", "3"], 0),
    ("weights", ["weights", "--scheme", "copson-tail", "--p", "2", "--c", "0", "--N", "100",
                 "--residuals"], 0),
    ("weights", ["weights", "--scheme", "bg", "--p", "2", "--alpha", "0.5", "--N", "100"], 1),
    ("master", ["master", "--form", "M22", "--p", "2", "--c", "0", "--N", "50"], 0),
    ("master", ["master", "--form", "M27", "--p", "2", "--alpha", "1", "--N", "50"], 0),
    ("ratio-scan", ["ratio-scan", "--family", "C1", "--p", "2", "--c", "2", "--eps", "0.5,0.2",
                    "--N", "10000"], 0),
    ("norm", ["norm", "--family", "C2_DUAL", "--p", "2", "--c", "0", "--N", "2"], 0),
    ("region", ["region", "--mode", "pc", "--p-range", "2:2:1", "--second-range", "-0.3:-0.2:0.1",
                "--N", "2000"], 0),
    ("search", ["search", "--family", "C2", "--p", "2", "--c", "0", "--N", "100", "--budget", "512"], 0),
    ("search", ["search", "--family", "I34", "--p", "2", "--alpha", "0.5", "--direction", "forward",
                "--N", "100", "--budget", "512"], 1),
]


def _run(argv, capsys):
    code = run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("schema,argv,code", CASES, ids=[" ".join(c[1][:3]) for c in CASES])
def test_output_validates(schema, argv, code, capsys):
    got, out, _ = _run(argv, capsys)
    assert got == code
    jsonschema.validate(json.loads(out), load_schema(schema))


def test_c0_example(capsys):
    code, out, _ = _run(["c0", "--p", "2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["p"] == 2.0 and doc["c0"] == pytest.approx(-0.23606797749979, abs=1e-13)
    assert out.startswith('{"p":2.0,"c0":-0.236067977499')


def test_lemma_example(capsys):
    code, out, _ = _run(["lemma", "--cond", "LEMMA21", "--p", "2", "--c", "-0.5", "--grid", "4096"], capsys)
    doc = json.loads(out)
    assert code == 1 and doc["verdict"] == "FAIL" and doc["witness"]["x"] == 1.0


def test_region_csv_and_overlays(tmp_path, capsys):
    out = tmp_path / "map.csv"
    code, _, _ = _run(["region", "--mode", "pa", "--p-range", "2:2:1", "--second-range", "0.5:0.8:0.3",
                       "--N", "2000", "--format", "csv", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == REGION_HEADER
    assert lines[1:] == [l for l in lines[1:] if l.startswith("PA,2.0,")] and len(lines) == 3
    overlays = json.loads((tmp_path / "map.csv.overlays.json").read_text())
    jsonschema.validate(overlays, load_schema("overlays"))
    assert overlays["alpha_min"] == [0.75]


@pytest.mark.parametrize("argv,header", [
    (["verify", "--family", "C2", "--p", "2", "--c", "0", "--N", "50", "--format", "csv"],
     "lambda,x,N,lhs,rhs,margin,error_budget,verdict"),
    (["ratio-scan", "--family", "C1", "--p", "2", "--c", "2", "--eps", "1", "--N", "100", "--format", "csv"],
     "eps,N,ratio,truncated_ratio,tail_budget,normalized,status"),
])
def test_csv_headers(argv, header, capsys):
    _, out, _ = _run(argv, capsys)
    assert out.splitlines()[0] == header


def test_byte_identical_and_timestamps(capsys):
    argv = ["search", "--family", "C1", "--p", "2", "--c", "2", "--N", "100", "--budget", "1024", "--seed", "5"]
    _, a, _ = _run(argv, capsys)
    _, b, _ = _run(argv, capsys)
    assert a == b and "timestamp" not in a
    _, c, _ = _run(argv + ["--timestamps"], capsys)
    assert "timestamp" in json.loads(c)


@pytest.mark.parametrize("argv,code", [
    (["nope"], 64),
    (["verify", "--family", "ZZ", "--p", "2"], 64),
    (["verify", "--family", "C2", "--p", "2", "--c", "1"], 64),
    (["c0", "--p", "2", "--format", "csv"], 64),
    (["search", "--family", "C2", "--p", "2", "--c", "0", "--budget", "0"], 64),
    (["verify", "--family", "C2", "--p", "2", "--c", "0", "--x", "file:/nonexistent/x.txt"], 65),
    (["norm", "--family", "C2_DUAL", "--p", "2", "--c", "0", "--N", "1000", "--max-iter", "3"], 70),
])
def test_exit_codes(argv, code, capsys):
    got, out, err = _run(argv, capsys)
    assert got == code
    assert out == ""
    assert len(err.strip().splitlines()) >= 1


def test_inconclusive_exit_code(capsys):
    # K = (p/(1-c))**p = 1 here, so x = e_1 gives equality and the margin sits inside the budget
    code, out, _ = _run(["verify", "--family", "C2", "--p", "2", "--c", "-1", "--x", "unit:1",
                         "--N", "10"], capsys)
    assert code == 2 and json.loads(out)["verdict"] == "INCONCLUSIVE"


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# c0 settings\np = 3\ntol = 1e-10\n")
    _, out, _ = _run(["c0", "--config", str(cfg)], capsys)
    assert json.loads(out)["p"] == 3.0
    _, out, _ = _run(["c0", "--config", str(cfg), "--p", "2"], capsys)
    assert json.loads(out)["p"] == 2.0
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    assert run(["c0", "--p", "2", "--config", str(bad)]) == 65


def test_negative_ranges_parse(capsys):
    code, out, _ = _run(["region", "--mode", "pc", "--p-range", "2:2:1", "--second-range", "-0.3:-0.2:0.1",
                         "--N", "2000"], capsys)
    assert [c["second"] for c in json.loads(out)["cells"]] == [-0.3, -0.2]


def test_help_lists_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, sp in sub.items():
        text = sp.format_help()
        assert "--format" in text and "--out" in text and "--config" in text
    assert "(default: 100000)" in sub["verify"].format_help()
    assert "(default: 4096)" in sub["lemma"].format_help()
    for name in list(sub) + [None]:
        argv = [sys.executable, "-m", "copsonlab.cli"] + ([name] if name else []) + ["--help"]
        assert subprocess.run(argv, capture_output=True).returncode == 0


def test_out_file(tmp_path, capsys):
    target = tmp_path / "c0.json"
    assert run(["c0", "--p", "2", "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())["c0"] < 0
