"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import time
from dataclasses import replace

import pytest

from rhls.buffers import BufferPolicy
from rhls.fuzz import case_seed, check_one, generate
from rhls.inputs import load_corpus
from rhls.ir import comb_cycles, validate_netlist, validate_rvsdg, Netlist, Rvsdg
from rhls.parser import parse
from rhls.pipeline import CONFIGS, FULL, STAGES, compile_kernel
from rhls.report import geomean
from rhls.sim import simulate
from rhls.verify import run_check

from addrq_harness import SCENARIOS, run_script

FUZZ_SEED = 0


@pytest.fixture(scope="module")
def corpus():
    return load_corpus()


def test_c1_corpus_equivalence_all_configs(corpus, criterion):
    t = time.time()
    bad = []
    for c in corpus:
        for name, cfg in CONFIGS.items():
            r = run_check(c.kernel, c.memories, c.args, cfg).report
            if not r.passed:
                bad.append(f"{c.name}/{name}: {r.reason}")
    dt = time.time() - t
    criterion(1, not bad and len(corpus) == 6 and dt < 60,
              f"{6 * 4 - len(bad)}/24 runs pass in {dt:.1f}s {bad[:3]}")


def test_c2_fuzz_equivalence(criterion):
    t = time.time()
    fails = []
    for i in range(1000):
        v = check_one(i, FUZZ_SEED, FULL)
        if not v.passed:
            fails.append((i, v.error, v.reason))
    dt = time.time() - t
    deadlocks = sum(1 for f in fails if f[1] == "deadlock")
    criterion(2, not fails and dt < 600,
              f"{1000 - len(fails)}/1000 pass, {deadlocks} deadlocks, {dt:.0f}s {fails[:3]}")


def test_c3_disambiguation_benefit(corpus, criterion):
    ratios = {}
    for c in corpus:
        full = run_check(c.kernel, c.memories, c.args, CONFIGS["full"]).report
        noq = run_check(c.kernel, c.memories, c.args, CONFIGS["noq"]).report
        assert full.passed and noq.passed, c.name
        ratios[c.name] = full.cycles / noq.cycles
    g = geomean(ratios.values())
    h = ratios["histogram"]
    criterion(3, g <= 0.75 and h <= 0.60, f"geomean {g:.3f} (<= 0.75), histogram {h:.3f} (<= 0.60)")


DIAMOND = """kernel diamond(a: i32[4], x: i32) {
  if (x < 5) { y = x + 1; } else { y = x * 2; }
  a[0] = y;
  return y;
}"""
DIAMOND_STORE = """kernel diamond(a: i32[4], x: i32) {
  if (x < 5) { y = x + 1; a[1] = y; } else { y = x * 2; }
  a[0] = y;
  return y;
}"""


def test_c4_gamma_forms(criterion):
    spec = compile_kernel(DIAMOND)
    guard = compile_kernel(DIAMOND_STORE)
    cs, cg = spec.netlist.census(), guard.netlist.census()
    ok = (list(spec.netlist.meta["gamma_forms"].values()) == ["speculative"]
          and cs.get("DMUX", 0) >= 1 and cs.get("NDMUX", 0) == 0
          and list(guard.netlist.meta["gamma_forms"].values()) == ["guarded"]
          and cg.get("BRANCH", 0) >= 1 and cg.get("NDMUX", 0) >= 1 and cg.get("DMUX", 0) == 0)
    criterion(4, ok, f"pure diamond DMUX={cs.get('DMUX', 0)} NDMUX={cs.get('NDMUX', 0)}; "
                     f"with store BRANCH={cg.get('BRANCH', 0)} NDMUX={cg.get('NDMUX', 0)}")


ACCUMULATE = """kernel acc(a: i32[64], n: i32) {
  i = 0;
  do {
    a[i] = n;
    i = i + 1;
  } while (i < 32);
  return 0;
}"""


def _store_ii(removal: bool) -> int:
    cfg = replace(FULL, policy=BufferPolicy(backedge_removal=removal))
    k = parse(ACCUMULATE)
    net = compile_kernel(k, cfg).netlist
    res = simulate(net, {"a": [0] * 64}, {"n": 3})
    cycles = [ev[3] for ev in res.traces[0]]
    assert len(cycles) == 32
    deltas = [b - a for a, b in zip(cycles, cycles[1:])]
    steady = deltas[len(deltas) // 2:]
    return max(steady)


def test_c5_initiation_interval(criterion):
    with_removal, without = _store_ii(True), _store_ii(False)
    criterion(5, with_removal == 1 and without >= 2,
              f"II with back-edge removal {with_removal}, without {without}")


def _stage_violations(kernel) -> list[str]:
    out = []

    def check(stage, obj):
        if isinstance(obj, Rvsdg):
            v = validate_rvsdg(obj)
        elif isinstance(obj, Netlist):
            p2p = STAGES.index(stage) >= STAGES.index("p2p")
            v = validate_netlist(obj, require_p2p=p2p)
            if p2p and comb_cycles(obj):
                v = v + ["combinational cycle without an opaque element"]
        else:
            return
        out.extend(f"{stage}: {x}" for x in v)

    compile_kernel(kernel, FULL, validate=False, on_stage=check)
    return out


def test_c6_structural_invariants(corpus, criterion):
    bad = []
    kernels = [c.kernel for c in corpus]
    kernels += [parse(generate(case_seed(FUZZ_SEED, i))[0]) for i in range(200)]
    for k in kernels:
        bad += [f"{k.name} {v}" for v in _stage_violations(k)]
    criterion(6, not bad, f"{len(kernels)} kernels x {len(STAGES)} stages, "
                          f"{len(bad)} violations {bad[:3]}")


def test_c7_mutation_sensitivity(corpus, criterion):
    found = {}
    for role in ("SG1", "SG2", "SG3", "SG4"):
        cfg = replace(FULL, drop_gates=(role,))
        for c in corpus:
            r = run_check(c.kernel, c.memories, c.args, cfg, max_cycles=50_000).report
            if not r.passed:
                found[role] = f"corpus {c.name}"
                break
        else:
            for i in range(1000):
                if not check_one(i, FUZZ_SEED, cfg, max_cycles=50_000).passed:
                    found[role] = f"fuzz #{i}"
                    break
    criterion(7, len(found) == 4, "first FAIL per dropped gate: " +
              ", ".join(f"{r} {found.get(r, 'none')}" for r in ("SG1", "SG2", "SG3", "SG4")))


def test_c8_addrq_scenarios(criterion):
    mismatched = []
    for name, (script, expected, attrs) in SCENARIOS.items():
        got = run_script(script, **attrs)
        if got != expected:
            mismatched.append(f"{name}: {got} != {expected}")
    criterion(8, not mismatched, f"{len(SCENARIOS)} scripted scenarios {mismatched[:2]}")
