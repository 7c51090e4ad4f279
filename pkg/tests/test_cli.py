import csv
import json

import pytest

from rhls.cli import main
from rhls.inputs import InputError, corpus_dir, load_case, materialize
from rhls.parser import parse
from rhls.report import BenchRow, geomean, speedups, write_csv

HIST = str(corpus_dir() / "histogram.rk")


@pytest.fixture
def sumfile(tmp_path):
    p = tmp_path / "sum.rk"
    p.write_text("kernel sum(n: i32) { s = 0; i = 1;"
                 " do { s = s + i; i = i + 1; } while (i <= n); return s; }\n")
    (tmp_path / "sum.json").write_text(json.dumps({"args": {"n": 3}}))
    return p


def test_run_prints_cycles_and_return(sumfile, capsys):
    assert main(["run", str(sumfile)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "cycles: 4" and out[1] == "return: 6"
    stats = json.loads(out[2].split(": ", 1)[1])
    assert stats["config"]["addrq"] is True and stats["cycles"] == 4


def test_run_is_reproducible(sumfile, capsys):
    main(["run", str(sumfile)])
    first = capsys.readouterr().out
    main(["run", str(sumfile)])
    assert capsys.readouterr().out == first


def test_histogram_noq_slower(capsys):
    main(["run", HIST])
    full = int(capsys.readouterr().out.splitlines()[0].split()[1])
    main(["run", HIST, "--no-addrq"])
    noq = int(capsys.readouterr().out.splitlines()[0].split()[1])
    assert noq > full


def test_trace_dump_format(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    assert main(["run", HIST, "--dump-trace", str(trace)]) == 0
    events = [json.loads(line) for line in trace.read_text().splitlines()]
    assert events and set(events[0]) == {"op", "kind", "addr", "data", "cycle"}
    assert all(0 <= e["data"] < 2**32 for e in events)
    assert [e["cycle"] for e in events] == sorted(e["cycle"] for e in events)


def test_exit_codes(tmp_path, sumfile, capsys):
    bad = tmp_path / "bad.rk"
    bad.write_text("kernel b(a: i32[4]) {\n  a[0] = ;\n}\n")
    assert main(["build", str(bad)]) == 1
    assert "bad.rk:2:10:" in capsys.readouterr().err
    assert main(["run", str(sumfile), "--max-cycles", "2"]) == 3
    assert main(["run", str(sumfile), "--no-addrq", "--addrq-capacity", "4"]) == 1
    assert main(["frobnicate"]) == 1
    trap = tmp_path / "trap.rk"
    trap.write_text("kernel t(x: i32) { return 5 / x; }\n")
    (tmp_path / "trap.json").write_text(json.dumps({"args": {"x": 0}}))
    assert main(["run", str(trap)]) == 3


def test_check_all_configs(capsys):
    assert main(["check", HIST, "--all-configs"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all("PASS" in line for line in lines)


def test_build_emits_files(tmp_path, capsys):
    assert main(["build", HIST, "--emit=dot,json", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "histogram.netlist.dot").read_text().startswith("digraph")
    data = json.loads((tmp_path / "histogram.netlist.json").read_text())
    assert data["nodes"]
    assert main(["build", HIST, "--stop-after=lower-theta", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "histogram.lower-theta.json").exists()


def test_viz_writes_dot(tmp_path):
    out = tmp_path / "g.dot"
    assert main(["viz", HIST, "--stage", "rvsdg", "-o", str(out)]) == 0
    text = out.read_text()
    assert "cluster_r" in text and "style=dashed" in text


def test_bench_csv_and_png(tmp_path, capsys):
    csv_path, png = tmp_path / "b.csv", tmp_path / "b.png"
    assert main(["bench", "--csv", str(csv_path), "--png", str(png)]) == 0
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == ["kernel", "noq", "full", "full/noq"]
    assert len(rows) == 1 + 6 + 1 and rows[-1][0] == "geomean"
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_bench_empty_and_failing(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["bench", str(empty), "--csv", str(tmp_path / "e.csv"),
                 "--png", str(tmp_path / "e.png")]) == 0
    assert list(csv.reader((tmp_path / "e.csv").open())) == [["kernel", "noq", "full", "full/noq"]]
    corpus = tmp_path / "c"
    corpus.mkdir()
    (corpus / "ok.rk").write_text("kernel ok() { return 1; }\n")
    (corpus / "trap.rk").write_text("kernel trap(x: i32) { return 1 / x; }\n")
    (corpus / "trap.json").write_text(json.dumps({"args": {"x": 0}}))
    assert main(["bench", str(corpus), "--csv", str(tmp_path / "c.csv"),
                 "--png", str(tmp_path / "c.png")]) == 0
    rows = {r[0]: r for r in csv.reader((tmp_path / "c.csv").open())}
    assert rows["trap"][1:3] == ["FAILED", "FAILED"]
    assert rows["ok"][1] != "FAILED"


def test_fuzz_command(tmp_path, capsys):
    out = tmp_path / "v.jsonl"
    assert main(["fuzz", "--count", "3", "--seed", "1", "--out", str(out)]) == 0
    verdicts = [json.loads(line) for line in out.read_text().splitlines()]
    assert [v["index"] for v in verdicts] == [0, 1, 2] and all(v["passed"] for v in verdicts)


def test_report_helpers(tmp_path):
    rows = [BenchRow("k", "noq", True, 200), BenchRow("k", "full", True, 100),
            BenchRow("j", "noq", True, 100), BenchRow("j", "full", False, None, "deadlock")]
    assert speedups(rows) == {"k": 0.5}
    assert geomean([0.5, 2.0]) == pytest.approx(1.0)
    write_csv(rows, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[2] == "j,100,FAILED,"


def test_input_specs(tmp_path):
    k = parse("kernel i(a: i32[3], b: i32[2], n: i32) { return n; }")
    mem, args = materialize({"args": {"n": 5}, "arrays": {"a": [1, 2, 3],
                                                          "b": {"seed": 4, "lo": 7, "hi": 7}}}, k)
    assert mem == {"a": [1, 2, 3], "b": [7, 7]} and args == {"n": 5}
    with pytest.raises(InputError):
        materialize({"arrays": {"a": [1]}, "args": {"n": 1}}, k)
    with pytest.raises(InputError):
        materialize({}, k)
    with pytest.raises(InputError):
        materialize({"args": {"n": 1}, "arrays": {"zz": [1]}}, k)
    c = load_case(HIST)
    assert c.name == "histogram" and len(c.memories["feature"]) == 64
