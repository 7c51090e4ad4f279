import pytest

from rhls import alu
from rhls.ast import DoWhile, If, to_source
from rhls.interp import interpret
from rhls.parser import ParseError, parse


@pytest.mark.parametrize("op,a,b,want", [
    ("+", 0x7FFFFFFF, 1, -0x80000000),
    ("-", -0x80000000, 1, 0x7FFFFFFF),
    ("*", 65536, 65536, 0),
    ("/", -7, 2, -3),
    ("%", -7, 2, -1),
    ("/", 7, -2, -3),
    ("<<", 1, 33, 2),
    (">>", -8, 1, -4),
    ("<", -1, 0, 1),
    (">=", 3, 4, 0),
])
def test_alu_wraps_and_truncates(op, a, b, want):
    assert alu.evaluate(op, a, b) == want


def test_division_by_zero_traps():
    with pytest.raises(alu.Trap) as e:
        alu.binop("%", 3, 0)
    assert e.value.kind == "div0"


def test_while_desugars_to_guarded_do_while():
    k = parse("kernel w(n: i32) { i = 0; while (i < n) { i = i + 1; } return i; }")
    s = k.body[1]
    assert isinstance(s, If)
    assert isinstance(s.then[0], DoWhile) and s.orelse == []


def test_memory_ops_numbered_in_program_order():
    k = parse("kernel m(a: i32[4]) { a[0] = a[1]; x = a[2]; return a[3]; }")
    src = to_source(k)
    assert parse(src).arrays == {"a": 4}
    res = interpret(k, {"a": [5, 6, 7, 8]}, {})
    assert sorted(res.traces) == [0, 1, 2, 3]
    assert res.traces[0] == [("read", 1, 6)]
    assert res.traces[1] == [("write", 0, 6)]


@pytest.mark.parametrize("text,where", [
    ("kernel k(a: i32[4]) { a[0] = ; }", (1, 30)),
    ("kernel k(n: i32) { return m; }", (1, 27)),
    ("kernel k(a: i32[4]) { x = a; }", (1, 27)),
    ("kernel k(n: i32) {\n  do { t = 1; } while (n < 1);\n  return t;\n}", (3, 10)),
])
def test_parse_errors_carry_positions(text, where):
    with pytest.raises(ParseError) as e:
        parse(text)
    assert (e.value.line, e.value.col) == where


def test_interpreter_histogram_hand_computed():
    k = parse("""kernel histogram(feature: i32[3], weight: i32[3], hist: i32[2]) {
      i = 0;
      do {
        f = feature[i];
        hist[f] = hist[f] + weight[i];
        i = i + 1;
      } while (i < 3);
      return hist[0];
    }""")
    res = interpret(k, {"feature": [1, 1, 0], "weight": [2, 3, 4], "hist": [0, 0]}, {})
    assert res.memories["hist"] == [4, 5]
    assert res.ret == 4


def test_interpreter_reports_out_of_bounds_trap():
    k = parse("kernel o(a: i32[4], i: i32) { a[i] = 1; return 0; }")
    res = interpret(k, {"a": [0] * 4}, {"i": 4})
    assert res.trap is not None and res.trap.kind == "oob"
    assert res.ret is None
