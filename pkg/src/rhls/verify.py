"""Equivalence between the reference interpreter and the simulated circuit."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import alu
from .ast import Kernel
from .interp import RefResult, interpret
from .pipeline import FULL, Config, compile_kernel
from .sim import SimError, SimResult, simulate


@dataclass
class Report:
    passed: bool
    reason: str = ""
    divergence: dict | None = None
    cycles: int | None = None
    error: str | None = None  # "deadlock", "max_cycles", "invariant", ...

    def __str__(self) -> str:
        if self.passed:
            return f"PASS ({self.cycles} cycles)"
        return f"FAIL: {self.reason}"


def _trap_key(t: alu.Trap | None):
    return None if t is None else t.kind


def check_equivalence(ref: RefResult, sim: SimResult) -> Report:
    """Compare return value, final memories and per-operation access sequences.

    Cycle stamps are ignored and operations are compared independently, so
    legal reordering across operations is accepted.
    """
    if _trap_key(ref.trap) != _trap_key(sim.trap):
        return Report(False, f"trap mismatch: reference {ref.trap!r}, simulation {sim.trap!r}",
                      {"what": "trap"}, sim.cycles)
    if ref.trap is not None:
        # both trapped: memory written before the trap is timing dependent
        return Report(True, "both trapped", cycles=sim.cycles)
    if ref.ret != sim.ret:
        return Report(False, f"return value {sim.ret} != {ref.ret}",
                      {"what": "return", "expected": ref.ret, "got": sim.ret}, sim.cycles)
    for a in sorted(ref.memories):
        want, got = ref.memories[a], sim.memories.get(a)
        if got != want:
            i = next((i for i, (x, y) in enumerate(zip(want, got or [])) if x != y), 0)
            return Report(False, f"memory {a}[{i}] = {got[i] if got else None} != {want[i]}",
                          {"what": "memory", "array": a, "index": i}, sim.cycles)
    for op in sorted(set(ref.traces) | set(sim.traces)):
        want = [(k, a, d) for k, a, d in ref.traces.get(op, [])]
        got = [(k, a, d) for k, a, d, _ in sim.traces.get(op, [])]
        if want == got:
            continue
        i = next((i for i, (x, y) in enumerate(zip(want, got)) if x != y), min(len(want), len(got)))
        return Report(False, f"op {op} event {i}: {got[i] if i < len(got) else 'missing'}"
                             f" != {want[i] if i < len(want) else 'missing'}",
                      {"what": "trace", "op": op, "index": i}, sim.cycles)
    return Report(True, cycles=sim.cycles)


@dataclass
class Outcome:
    report: Report
    ref: RefResult | None = None
    sim: SimResult | None = None
    stats: dict = field(default_factory=dict)


def run_check(kernel: Kernel, memories: dict, args: dict, config: Config = FULL,
              mem_latency: int = 1, max_cycles: int = 1_000_000,
              check_invariants: bool = False) -> Outcome:
    """Compile ``kernel`` under ``config``, simulate it and compare with the interpreter."""
    ref = interpret(kernel, memories, args)
    net = compile_kernel(kernel, config).netlist
    try:
        res = simulate(net, memories, args, mem_latency, max_cycles, check_invariants)
    except SimError as e:
        return Outcome(Report(False, str(e), error=e.kind), ref)
    return Outcome(check_equivalence(ref, res), ref, res, res.stats)
