from dataclasses import replace

import pytest

from rhls.fuzz import check_one, generate
from rhls.interp import interpret
from rhls.parser import parse
from rhls.pipeline import CONFIGS, FULL, compile_kernel
from rhls.sim import CycleLimit, Deadlock, Simulator, flatten, simulate
from rhls.verify import check_equivalence, run_check

SUM = """kernel sum(n: i32) {
  s = 0;
  i = 1;
  do {
    s = s + i;
    i = i + 1;
  } while (i <= n);
  return s;
}"""


def test_constant_kernel():
    res = simulate(compile_kernel("kernel c() { return 7; }").netlist)
    assert res.ret == 7 and res.cycles >= 1


def test_sum_to_three_frozen_cycles():
    # hand-stepped: one iteration per cycle, result after the third; the
    # loop-output buffer of the full configuration adds one more cycle
    assert simulate(compile_kernel(SUM, CONFIGS["noq-nobuf"]).netlist, {}, {"n": 3}).cycles == 3
    res = simulate(compile_kernel(SUM).netlist, {}, {"n": 3})
    assert (res.ret, res.cycles) == (6, 4)


def test_single_step_matches_run():
    net = compile_kernel(SUM).netlist
    sim = Simulator(flatten(net), {}, {"n": 3})
    pred = next(n.id for n in net.nodes.values() if n.kind == "PRED_BUF")
    assert sim.nodes[pred].state() == [0]  # termination token selects the init input
    steps = 0
    while not sim.done():
        sim.step()
        steps += 1
    assert steps == 4 and sim.result().ret == 6


def test_store_then_load_same_address():
    k = "kernel r(a: i32[4], v: i32) { a[2] = v; return a[2]; }"
    for cfg in CONFIGS.values():
        assert simulate(compile_kernel(k, cfg).netlist, {"a": [0] * 4}, {"v": 9}).ret == 9


def test_determinism():
    k = parse(generate(17)[0])
    net = compile_kernel(k).netlist
    mem = {a: list(range(n)) for a, n in k.arrays.items()}
    a = simulate(net, mem, {"n": 3})
    b = simulate(net, mem, {"n": 3})
    assert (a.cycles, a.traces, a.memories) == (b.cycles, b.traces, b.memories)


def test_cycle_limit():
    k = "kernel l(n: i32) { i = 0; do { i = i + 1; } while (i < n); return i; }"
    with pytest.raises(CycleLimit):
        simulate(compile_kernel(k).netlist, {}, {"n": 1000}, max_cycles=10)


def test_deadlock_is_reported_with_stalled_nodes():
    net = compile_kernel("kernel d(a: i32[4]) { a[1] = 5; return a[1]; }").netlist
    # starve the load's state input: a buffer feeding itself never holds a token
    load = next(n for n in net.nodes.values() if n.kind == "LOAD")
    src = load.inputs[1]
    net.add("SINK", [net.out_type(src)], [], [src])
    empty = net.add("BUF", [net.out_type(src)], [net.out_type(src)], [None], capacity=1)
    empty.inputs = [(empty.id, 0)]
    load.inputs[1] = (empty.id, 0)
    with pytest.raises(Deadlock) as e:
        simulate(net, {"a": [0] * 4}, {})
    assert e.value.stalled


def test_out_of_bounds_traps_in_both_engines():
    k = parse("kernel o(a: i32[4], i: i32) { a[i] = 1; return 0; }")
    out = run_check(k, {"a": [0] * 4}, {"i": 7})
    assert out.report.passed and out.report.reason == "both trapped"
    assert out.sim.trap.kind == "oob"


def test_memory_port_grants_at_most_two_per_cycle():
    k = parse("""kernel p(a: i32[16]) { i = 0; s = 0;
      do { s = s + a[i] + a[i + 8]; a[i] = s; i = i + 1; } while (i < 8); return s; }""")
    res = simulate(compile_kernel(k).netlist, {"a": list(range(16))}, {})
    per_cycle = {}
    for ev in res.traces.values():
        for kind, addr, data, cyc in ev:
            per_cycle[cyc] = per_cycle.get(cyc, 0) + 1
    assert max(per_cycle.values()) <= 2


def test_equivalence_detects_wrong_memory():
    k = parse("kernel w(a: i32[2]) { a[0] = 3; return 0; }")
    ref = interpret(k, {"a": [0, 0]}, {})
    res = simulate(compile_kernel(k).netlist, {"a": [0, 0]}, {})
    assert check_equivalence(ref, res).passed
    res.memories["a"][1] = 1
    r = check_equivalence(ref, res)
    assert not r.passed and r.divergence == {"what": "memory", "array": "a", "index": 1}


def test_reordered_independent_loads_pass():
    # the two arrays have separate chains, so the b loads can run ahead of
    # the a loads; only per-op order is compared
    k = parse("""kernel ro(a: i32[8], b: i32[8]) { i = 0; s = 0;
      do { s = s + a[a[i] & 7] + b[i]; i = i + 1; } while (i < 8); return s; }""")
    mem = {"a": [3, 1, 4, 1, 5, 9, 2, 6], "b": list(range(8))}
    out = run_check(k, mem, {})
    assert out.report.passed
    # op 1 is a[a[i]], op 2 is b[i]; in program order op 1 comes first
    outer, bload = out.sim.traces[1], out.sim.traces[2]
    assert all(b[3] < a[3] for a, b in zip(outer, bload))


def test_invariant_checks_pass_on_corpus_kernel():
    from rhls.inputs import load_corpus

    c = next(c for c in load_corpus() if c.name == "histogram")
    out = run_check(c.kernel, c.memories, c.args, FULL, check_invariants=True)
    assert out.report.passed


def test_fuzz_seed_one_ten_pass():
    verdicts = [check_one(i, 1) for i in range(10)]
    assert all(v.passed for v in verdicts)


def test_fuzz_generation_is_deterministic():
    assert generate(123) == generate(123)
    src, spec = generate(5)
    k = parse(src)
    assert set(spec["arrays"]) == set(k.arrays)


def test_fuzz_finds_dropped_sg4():
    cfg = replace(FULL, drop_gates=("SG4",))
    assert any(not check_one(i, 0, cfg, max_cycles=50_000).passed for i in range(1000))
