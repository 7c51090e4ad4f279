"""Sequential reference interpreter working directly on the syntax tree."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import alu
from .ast import Assign, Bin, DoWhile, Expr, If, Index, Kernel, Num, Store, Var


class StepLimit(Exception):
    pass


@dataclass
class RefResult:
    ret: int | None
    memories: dict[str, list[int]]
    traces: dict[int, list[tuple[str, int, int]]] = field(default_factory=dict)
    trap: alu.Trap | None = None
    steps: int = 0


class _Machine:
    def __init__(self, k: Kernel, memories, args, max_steps):
        self.k = k
        self.mem = {a: list(memories[a]) for a in k.arrays}
        self.env = {name: alu.wrap(args[name]) for name in k.scalars}
        self.traces: dict[int, list] = {}
        self.steps = 0
        self.max_steps = max_steps

    def tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimit(f"more than {self.max_steps} steps")

    def addr(self, array: str, idx: int, op: int) -> int:
        if not 0 <= idx < len(self.mem[array]):
            raise alu.Trap("oob", f"{array}[{idx}]", op)
        return idx

    def expr(self, e: Expr, env) -> int:
        if isinstance(e, Num):
            return alu.wrap(e.value)
        if isinstance(e, Var):
            return env[e.name]
        if isinstance(e, Index):
            i = self.addr(e.array, self.expr(e.index, env), e.mem_id)
            v = self.mem[e.array][i]
            self.traces.setdefault(e.mem_id, []).append(("read", i, v))
            self.tick()
            return v
        a = self.expr(e.left, env)
        b = self.expr(e.right, env)
        self.tick()
        try:
            return alu.evaluate(e.op, a, b)
        except alu.Trap as t:
            t.op = None
            raise

    def block(self, stmts, env) -> dict:
        env = dict(env)
        for s in stmts:
            self.tick()
            if isinstance(s, Assign):
                env[s.name] = self.expr(s.value, env)
            elif isinstance(s, Store):
                idx = self.expr(s.index, env)
                val = self.expr(s.value, env)
                i = self.addr(s.array, idx, s.mem_id)
                self.mem[s.array][i] = val
                self.traces.setdefault(s.mem_id, []).append(("write", i, val))
            elif isinstance(s, If):
                taken = s.then if self.expr(s.cond, env) != 0 else s.orelse
                env = self.block(taken, env)
            elif isinstance(s, DoWhile):
                while True:
                    env = self.block(s.body, env)
                    if self.expr(s.cond, env) == 0:
                        break
        return env


def interpret(k: Kernel, memories: dict[str, list[int]], args: dict[str, int],
              max_steps: int = 10_000_000) -> RefResult:
    """Run ``k`` sequentially.  Traps are reported in the result, not raised."""
    m = _Machine(k, memories, args, max_steps)
    ret = None
    trap = None
    try:
        env = m.block(k.body, m.env)
        if k.result is not None:
            ret = m.expr(k.result, env)
    except alu.Trap as t:
        trap = t
    return RefResult(ret, m.mem, m.traces, trap, m.steps)
