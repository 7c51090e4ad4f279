"""Cycle-accurate simulation of elastic netlists.

Every cycle runs in phases:

1. registered outputs (buffers, memory responses, state registers of
   memory operations, entry tokens) present their head tokens;
2. transparent nodes compute their outputs in forward topological order;
3. readiness flows backwards: state-only readiness first, then transparent
   nodes in reverse order.  Memory arbitration sits in this pass, since a
   load may issue into a response slot that is draining this cycle;
4. every channel whose offer is accepted transfers; nodes latch state.

A channel is a plain wire: tokens only rest inside nodes.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from . import alu
from .ir import LOAD_STATE_OUT, PRIMITIVES, STORE_STATE_OUT, Netlist, comb_paths

NONE = None  # "no token on this channel"


class SimError(Exception):
    kind = "error"


class Deadlock(SimError):
    kind = "deadlock"

    def __init__(self, cycle: int, stalled: list[dict]):
        super().__init__(f"deadlock at cycle {cycle}: {len(stalled)} stalled nodes")
        self.cycle = cycle
        self.stalled = stalled


class CycleLimit(SimError):
    kind = "max_cycles"


class InvariantViolation(SimError):
    kind = "invariant"


def flatten(net: Netlist) -> Netlist:
    """Executable copy of ``net``: loop clusters dissolved, primitives only."""
    for n in net.nodes.values():
        if n.kind not in PRIMITIVES:
            raise ValueError(f"node {n.id} has non-primitive kind {n.kind}; lower it first")
    flat = net.copy()
    flat.meta = dict(flat.meta, loops=len(flat.loops))
    flat.loops = {}
    for n in flat.nodes.values():
        n.loop = None
    return flat


@dataclass
class SimResult:
    cycles: int
    ret: int | None
    memories: dict[str, list[int]]
    traces: dict[int, list[tuple[str, int, int, int]]]
    stats: dict = field(default_factory=dict)
    trap: alu.Trap | None = None


# ---------------------------------------------------------------------------
# node models.  Each has ``ins``/``outs`` (channel ids, -1 when absent).

class _Node:
    __slots__ = ("nid", "kind", "ins", "outs", "attrs", "sim")
    static_ready: tuple = ()  # input ports whose readiness depends only on state
    registered: tuple = ()  # output ports driven from state
    needs: tuple | None = None  # output ports backward() reads; None = all

    def __init__(self, sim, n, ins, outs):
        self.sim = sim
        self.nid = n.id
        self.kind = n.kind
        self.ins = ins
        self.outs = outs
        self.attrs = n.attrs

    def emit(self, offer):
        pass

    def forward(self, offer):
        pass

    def ready(self, offer, accept):
        pass

    def backward(self, offer, accept):
        pass

    def commit(self, offer, accept, cycle) -> None:
        pass

    def occupancy(self) -> int:
        return 0

    def state(self):
        return None


class _Join(_Node):
    """All inputs needed, one output."""

    __slots__ = ()

    def backward(self, offer, accept):
        out = self.outs[0]
        go = offer[out] is not NONE and accept[out]
        for c in self.ins:
            accept[c] = go


class _Op(_Join):
    __slots__ = ("op",)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.op = n.attrs["op"]

    def forward(self, offer):
        a = offer[self.ins[0]]
        b = offer[self.ins[1]]
        if a is not NONE and b is not NONE:
            try:
                offer[self.outs[0]] = alu.evaluate(self.op, a, b)
            except alu.Trap as t:
                t.op = self.nid
                raise


class _Const(_Join):
    __slots__ = ("value",)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.value = n.attrs["value"]

    def forward(self, offer):
        if offer[self.ins[0]] is not NONE:
            offer[self.outs[0]] = self.value


class _Branch(_Node):
    __slots__ = ()

    def forward(self, offer):
        c = offer[self.ins[0]]
        d = offer[self.ins[1]]
        if c is not NONE and d is not NONE:
            offer[self.outs[c]] = d

    def backward(self, offer, accept):
        c = offer[self.ins[0]]
        go = c is not NONE and offer[self.ins[1]] is not NONE and accept[self.outs[c]]
        accept[self.ins[0]] = accept[self.ins[1]] = go


class _NDMux(_Node):
    __slots__ = ()

    def forward(self, offer):
        c = offer[self.ins[0]]
        if c is not NONE:
            d = offer[self.ins[1 + c]]
            if d is not NONE:
                offer[self.outs[0]] = d

    def backward(self, offer, accept):
        for ch in self.ins:
            accept[ch] = False
        out = self.outs[0]
        if offer[out] is not NONE and accept[out]:
            accept[self.ins[0]] = True
            accept[self.ins[1 + offer[self.ins[0]]]] = True


class _DMux(_Join):
    """Waits for every alternative, forwards the selected one, drops the rest."""

    __slots__ = ()

    def forward(self, offer):
        c = offer[self.ins[0]]
        if c is NONE:
            return
        for ch in self.ins[1:]:
            if offer[ch] is NONE:
                return
        offer[self.outs[0]] = offer[self.ins[1 + c]]


class _Fork(_Node):
    __slots__ = ("done",)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.done = [False] * len(outs)

    def forward(self, offer):
        v = offer[self.ins[0]]
        if v is not NONE:
            for j, ch in enumerate(self.outs):
                if not self.done[j]:
                    offer[ch] = v

    def backward(self, offer, accept):
        i = self.ins[0]
        if offer[i] is NONE:
            accept[i] = False
            return
        for j, ch in enumerate(self.outs):
            if not self.done[j] and not accept[ch]:
                accept[i] = False
                return
        accept[i] = True

    def commit(self, offer, accept, cycle):
        i = self.ins[0]
        if offer[i] is not NONE and accept[i]:
            self.done = [False] * len(self.outs)
            return
        for j, ch in enumerate(self.outs):
            if offer[ch] is not NONE and accept[ch]:
                self.done[j] = True

    def state(self):
        return list(self.done)


class _LazyFork(_Node):
    """Fork whose outputs all transfer in the same cycle or not at all.

    Every consumer port must be state-ready, so withdrawing acceptance here
    cannot contradict a decision already taken downstream.
    """

    __slots__ = ()

    def forward(self, offer):
        v = offer[self.ins[0]]
        if v is not NONE:
            for ch in self.outs:
                offer[ch] = v

    def backward(self, offer, accept):
        go = offer[self.ins[0]] is not NONE and all(accept[ch] for ch in self.outs)
        if not go:
            for ch in self.outs:
                accept[ch] = False
        accept[self.ins[0]] = go


class _Sink(_Node):
    __slots__ = ()
    static_ready = (0,)

    def ready(self, offer, accept):
        accept[self.ins[0]] = True


class _Result(_Node):
    __slots__ = ("value", "got")
    static_ready = (0,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.got = False
        self.value = None

    def ready(self, offer, accept):
        accept[self.ins[0]] = not self.got

    def commit(self, offer, accept, cycle):
        v = offer[self.ins[0]]
        if v is not NONE and accept[self.ins[0]]:
            self.got = True
            self.value = v
            self.sim.result_cycles[self.nid] = cycle


class _Source(_Node):
    """ENTRY / ARG: one token at start-up."""

    __slots__ = ("value", "sent")
    registered = (0,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.sent = False
        if n.kind == "ARG":
            self.value = alu.wrap(sim.args[n.attrs["name"]])
        else:
            self.value = n.attrs.get("value", 0)

    def emit(self, offer):
        if not self.sent:
            offer[self.outs[0]] = self.value

    def commit(self, offer, accept, cycle):
        if not self.sent and accept[self.outs[0]]:
            self.sent = True


class _Buf(_Node):
    """Opaque buffer (BUF, PRED_BUF): no same-cycle path in either direction."""

    __slots__ = ("q", "cap")
    static_ready = (0,)
    registered = (0,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.cap = n.attrs.get("capacity", 2)
        self.q = deque(n.attrs.get("init", []))

    def emit(self, offer):
        if self.q:
            offer[self.outs[0]] = self.q[0]

    def ready(self, offer, accept):
        accept[self.ins[0]] = len(self.q) < self.cap

    def commit(self, offer, accept, cycle):
        o = self.outs[0]
        if self.q and accept[o]:
            self.q.popleft()
        i = self.ins[0]
        if offer[i] is not NONE and accept[i]:
            self.q.append(offer[i])

    def occupancy(self):
        return len(self.q)

    def state(self):
        return list(self.q)


class _Fifo(_Node):
    """Transparent FIFO: passes a token straight through when empty."""

    __slots__ = ("q", "cap")
    static_ready = (0,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.cap = n.attrs.get("depth", 2)
        self.q = deque()

    def forward(self, offer):
        offer[self.outs[0]] = self.q[0] if self.q else offer[self.ins[0]]

    def ready(self, offer, accept):
        accept[self.ins[0]] = len(self.q) < self.cap

    def commit(self, offer, accept, cycle):
        i, o = self.ins[0], self.outs[0]
        took = offer[i] is not NONE and accept[i]
        gave = offer[o] is not NONE and accept[o]
        if self.q:
            if gave:
                self.q.popleft()
            if took:
                self.q.append(offer[i])
        elif took and not gave:
            self.q.append(offer[i])

    def occupancy(self):
        return len(self.q)

    def state(self):
        return list(self.q)


class _LoopBuf(_Node):
    """Loop-constant buffer: reloads on a termination token, replays otherwise."""

    __slots__ = ("stored",)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.stored = NONE

    def forward(self, offer):
        p = offer[self.ins[0]]
        if p is NONE:
            return
        if p == 0:
            v = offer[self.ins[1]]
            if v is not NONE:
                offer[self.outs[0]] = v
        elif self.stored is not NONE:
            offer[self.outs[0]] = self.stored

    def backward(self, offer, accept):
        o = self.outs[0]
        go = offer[o] is not NONE and accept[o]
        accept[self.ins[0]] = go
        accept[self.ins[1]] = go and offer[self.ins[0]] == 0

    def commit(self, offer, accept, cycle):
        if accept[self.ins[1]] and offer[self.ins[1]] is not NONE:
            self.stored = offer[self.ins[1]]

    def state(self):
        return self.stored


class _Gate(_Node):
    """State gate: consumes primary and trigger together.

    Both outputs are offered once the pair is present and are delivered
    independently, like a fork; the inputs are released when both are out.
    """

    __slots__ = ("fired", "done")

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.fired = 0
        self.done = [False, False]

    def forward(self, offer):
        p = offer[self.ins[0]]
        t = offer[self.ins[1]]
        if p is not NONE and t is not NONE:
            for j, v in enumerate((p, t)):
                if not self.done[j]:
                    offer[self.outs[j]] = v

    def backward(self, offer, accept):
        go = offer[self.ins[0]] is not NONE and offer[self.ins[1]] is not NONE and all(
            self.done[j] or accept[self.outs[j]] for j in (0, 1))
        accept[self.ins[0]] = accept[self.ins[1]] = go

    def commit(self, offer, accept, cycle):
        if offer[self.ins[0]] is not NONE and accept[self.ins[0]]:
            self.done = [False, False]
            self.fired += 1
            self.sim.on_gate(self, offer[self.ins[0]], cycle)
            return
        for j in (0, 1):
            ch = self.outs[j]
            if offer[ch] is not NONE and accept[ch]:
                self.done[j] = True

    def state(self):
        return list(self.done)


class _RegGate(_Node):
    """State gate whose trigger output is registered (used for SG1).

    It fires when the primary output is taken; the trigger token is queued
    (two slots, like the state register of a store) and leaves in a later
    cycle, so anything ordered behind the gate sees the primary's effect first.
    """

    __slots__ = ("fired", "held")
    registered = (1,)
    needs = (0,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.fired = 0
        self.held: deque = deque()

    def emit(self, offer):
        if self.held:
            offer[self.outs[1]] = self.held[0]

    def forward(self, offer):
        p = offer[self.ins[0]]
        if p is not NONE and offer[self.ins[1]] is not NONE and len(self.held) < 2:
            offer[self.outs[0]] = p

    def backward(self, offer, accept):
        o = self.outs[0]
        go = offer[o] is not NONE and accept[o]
        accept[self.ins[0]] = accept[self.ins[1]] = go

    def commit(self, offer, accept, cycle):
        if self.held and accept[self.outs[1]]:
            self.held.popleft()
        if offer[self.ins[0]] is not NONE and accept[self.ins[0]]:
            self.held.append(offer[self.ins[1]])
            self.fired += 1
            self.sim.on_gate(self, offer[self.ins[0]], cycle)

    def occupancy(self):
        return len(self.held)

    def state(self):
        return list(self.held)


class _AddrQueue(_Node):
    """Address queue: ports in [enqueue, dequeue, check], out [check].

    A check that has passed keeps its output valid until it is taken: any
    address enqueued after the pass belongs to a younger store.
    """

    __slots__ = ("q", "cap", "same_cycle", "passing")
    static_ready = (0, 1)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.cap = n.attrs.get("capacity", 8)
        self.same_cycle = n.attrs.get("same_cycle_check", True)
        if self.cap < 1:
            raise ValueError("address queue capacity must be >= 1")
        self.q: list[int] = []
        self.passing = False

    def forward(self, offer):
        a = offer[self.ins[2]]
        if a is not NONE and self.passing:
            offer[self.outs[0]] = a
            return
        if a is NONE or a in self.q:
            return
        e = offer[self.ins[0]] if self.same_cycle else NONE
        if e is not NONE and len(self.q) < self.cap and e == a:
            return  # same-cycle enqueue compared combinationally
        offer[self.outs[0]] = a

    def ready(self, offer, accept):
        accept[self.ins[0]] = len(self.q) < self.cap
        accept[self.ins[1]] = True

    def backward(self, offer, accept):
        o = self.outs[0]
        accept[self.ins[2]] = offer[o] is not NONE and accept[o]

    def commit(self, offer, accept, cycle):
        o = self.outs[0]
        self.passing = offer[o] is not NONE and not accept[o]
        if offer[self.ins[1]] is not NONE:
            if not self.q:
                raise InvariantViolation(f"ADDR_Q {self.nid}: dequeue from empty queue")
            self.q.pop(0)
            self.sim.on_dequeue(self, cycle)
        e = offer[self.ins[0]]
        if e is not NONE and accept[self.ins[0]]:
            self.q.append(e)

    def occupancy(self):
        return len(self.q)

    def state(self):
        return list(self.q)


class _Load(_Node):
    """ports in [addr, state, resp] out [data, state, req]."""

    __slots__ = ("slot", "inflight", "state_q", "has_state", "no_drain", "op", "array")
    static_ready = (2,)
    registered = (1,)
    needs = (2,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.slot = NONE
        self.inflight = False
        self.state_q: deque = deque()
        self.has_state = ins[1] >= 0
        self.no_drain = False
        self.op = n.attrs["op"]
        self.array = n.attrs["array"]

    def emit(self, offer):
        if self.has_state and self.state_q:
            offer[self.outs[1]] = self.state_q[0]

    def forward(self, offer):
        a = offer[self.ins[0]]
        if a is not NONE and (not self.has_state or
                              (offer[self.ins[1]] is not NONE and len(self.state_q) < 2)):
            offer[self.outs[2]] = a
        if self.slot is not NONE:
            offer[self.outs[0]] = self.slot
        else:
            r = offer[self.ins[2]]
            if r is not NONE:
                offer[self.outs[0]] = r

    def ready(self, offer, accept):
        accept[self.ins[2]] = True

    def can_issue(self, offer, accept) -> bool:
        arriving = offer[self.ins[2]] is not NONE
        if self.inflight and not arriving:
            return False
        holding = self.slot is not NONE or arriving
        if not holding:
            return True
        return not self.no_drain and accept[self.outs[0]]

    def backward(self, offer, accept):
        go = accept[self.outs[2]]
        accept[self.ins[0]] = go
        if self.has_state:
            accept[self.ins[1]] = go

    def commit(self, offer, accept, cycle):
        d = self.outs[0]
        gave = offer[d] is not NONE and accept[d]
        r = offer[self.ins[2]]
        if r is not NONE:
            self.inflight = False
            if not gave:
                self.slot = r
        elif gave:
            self.slot = NONE
        if self.has_state and self.state_q and accept[self.outs[1]]:
            self.state_q.popleft()
        if accept[self.outs[2]] and offer[self.outs[2]] is not NONE:
            self.inflight = True
            if self.has_state:
                self.state_q.append(0)

    def occupancy(self):
        return int(self.slot is not NONE) + len(self.state_q)

    def state(self):
        return {"slot": self.slot, "inflight": self.inflight, "state": len(self.state_q)}


class _Store(_Node):
    """ports in [addr, data, state] out [state, req]."""

    __slots__ = ("state_q", "op", "array")
    registered = (0,)
    needs = (1,)

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.state_q: deque = deque()
        self.op = n.attrs["op"]
        self.array = n.attrs["array"]

    def emit(self, offer):
        if self.state_q:
            offer[self.outs[0]] = self.state_q[0]

    def forward(self, offer):
        a = offer[self.ins[0]]
        d = offer[self.ins[1]]
        if a is not NONE and d is not NONE and offer[self.ins[2]] is not NONE \
                and len(self.state_q) < 2:
            offer[self.outs[1]] = (a, d)

    def backward(self, offer, accept):
        go = accept[self.outs[1]]
        for c in self.ins:
            accept[c] = go

    def commit(self, offer, accept, cycle):
        if self.state_q and accept[self.outs[0]]:
            self.state_q.popleft()
            self.sim.on_store_retire(self, cycle)
        if accept[self.outs[1]] and offer[self.outs[1]] is not NONE:
            self.state_q.append(0)

    def occupancy(self):
        return len(self.state_q)

    def state(self):
        return len(self.state_q)


class _MemResp(_Node):
    __slots__ = ("pending",)
    registered = None  # all outputs

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.pending: list[deque] = [deque() for _ in outs]

    def emit(self, offer):
        cyc = self.sim.cycle
        for j, ch in enumerate(self.outs):
            p = self.pending[j]
            if p and p[0][0] <= cyc:
                offer[ch] = p[0][1]

    def commit(self, offer, accept, cycle):
        for j, ch in enumerate(self.outs):
            if offer[ch] is not NONE and accept[ch]:
                self.pending[j].popleft()

    def busy(self) -> bool:
        return any(self.pending)

    def state(self):
        return [list(p) for p in self.pending]


class _MemReq(_Node):
    """Arbitrates up to ``dual_ports`` requests per cycle, stores first."""

    __slots__ = ("ports", "resp", "mem", "granted", "array", "grants_total")

    def __init__(self, sim, n, ins, outs):
        super().__init__(sim, n, ins, outs)
        self.array = n.attrs["array"]
        self.mem = sim.memories[self.array]
        self.ports = None  # resolved after all nodes exist
        self.resp = None
        self.granted: list[int] = []
        self.grants_total = 0

    def backward(self, offer, accept):
        limit = self.attrs.get("dual_ports", 2)
        granted = []
        store_addrs = set()
        for j, (kind, node) in enumerate(self.ports):
            ch = self.ins[j]
            accept[ch] = False
            if kind == "store" and offer[ch] is not NONE and len(granted) < limit:
                granted.append(j)
                store_addrs.add(offer[ch][0])
        for j, (kind, node) in enumerate(self.ports):
            ch = self.ins[j]
            if kind != "load" or offer[ch] is NONE or len(granted) >= limit:
                continue
            if offer[ch] in store_addrs:
                continue  # same-cycle read-after-write deferred
            if node.can_issue(offer, accept):
                granted.append(j)
        for j in granted:
            accept[self.ins[j]] = True
        self.granted = granted

    def commit(self, offer, accept, cycle):
        mem = self.mem
        reads = []
        writes = []
        for j in self.granted:
            kind, node = self.ports[j]
            v = offer[self.ins[j]]
            addr = v[0] if kind == "store" else v
            if not 0 <= addr < len(mem):
                raise alu.Trap("oob", f"{self.array}[{addr}]", node.op)
            if kind == "store":
                writes.append((node, addr, v[1]))
            else:
                reads.append((node, addr))
        lat = self.sim.mem_latency
        for node, addr in reads:
            val = mem[addr]
            self.resp.pending[self.resp.attrs["routes"][str(node.nid)]].append((cycle + lat, val))
            self.sim.trace(node.op, "read", addr, val, cycle)
        for node, addr, val in writes:
            mem[addr] = val
            self.sim.trace(node.op, "write", addr, val, cycle)
        self.grants_total += len(self.granted)

    def state(self):
        return {"granted": list(self.granted), "free_ports": 2 - len(self.granted)}


MODELS = {
    "OP": _Op, "CONST": _Const, "BRANCH": _Branch, "NDMUX": _NDMux, "DMUX": _DMux,
    "FORK": _Fork, "SINK": _Sink, "RESULT": _Result, "ENTRY": _Source, "ARG": _Source,
    "BUF": _Buf, "PRED_BUF": _Buf, "FIFO": _Fifo, "LOOP_BUF": _LoopBuf, "SG": _Gate,
    "ADDR_Q": _AddrQueue, "LOAD": _Load, "STORE": _Store, "MEM_RESP": _MemResp,
    "MEM_REQ": _MemReq,
}

# input ports whose readiness is decided from state alone
_STATIC_IN = {"SINK": None, "RESULT": None, "BUF": None, "PRED_BUF": None, "FIFO": None,
              "ADDR_Q": (0, 1), "LOAD": (2,)}


def _static_inputs(kind: str, n_in: int) -> set[int]:
    if kind in _STATIC_IN:
        v = _STATIC_IN[kind]
        return set(range(n_in)) if v is None else set(v)
    return set()


class Simulator:
    def __init__(self, net: Netlist, memories: dict[str, list[int]] | None = None,
                 args: dict[str, int] | None = None, mem_latency: int = 1,
                 max_cycles: int = 1_000_000, check_invariants: bool = False):
        if max_cycles <= 0:
            raise ValueError("max_cycles must be positive")
        self.net = net
        self.args = dict(args or {})
        self.memories = {}
        for a, length in net.memories.items():
            init = list((memories or {}).get(a, [0] * length))
            if len(init) != length:
                raise ValueError(f"array {a}: {len(init)} initial words for length {length}")
            self.memories[a] = [alu.wrap(v) for v in init]
        self.mem_latency = mem_latency
        self.max_cycles = max_cycles
        self.check_invariants = check_invariants
        self.cycle = 0
        self.traces: dict[int, list] = defaultdict(list)
        self.result_cycles: dict[int, int] = {}
        self.peak = 0
        self.transfers = 0
        self._build()

    # ------------------------------------------------------------------ setup
    def _build(self) -> None:
        net = self.net
        chan = {}
        self.chan_ends: list[tuple] = []
        for n in sorted(net.nodes.values(), key=lambda n: n.id):
            for i, src in enumerate(n.inputs):
                if src is None or n.in_types[i] is None:
                    continue
                chan[(n.id, i)] = len(self.chan_ends)
                self.chan_ends.append((src, (n.id, i)))
        out_chan = {src: c for c, (src, _) in enumerate(self.chan_ends)}
        self.n_chan = len(self.chan_ends)
        self.nodes: dict[int, _Node] = {}
        for n in sorted(net.nodes.values(), key=lambda n: n.id):
            ins = [chan.get((n.id, i), -1) for i in range(len(n.in_types))]
            outs = [out_chan.get((n.id, o), -1) if t is not None else -1
                    for o, t in enumerate(n.out_types)]
            for o, t in enumerate(n.out_types):
                if t is not None and outs[o] < 0:
                    raise ValueError(f"node {n.id} output {o} is unconnected; enforce p2p first")
            model = MODELS[n.kind]
            if n.kind == "FORK" and n.attrs.get("lazy"):
                model = _LazyFork
            elif n.kind == "SG" and n.attrs.get("registered_trigger"):
                model = _RegGate
            self.nodes[n.id] = model(self, n, ins, outs)
        for m in self.nodes.values():
            if m.kind == "MEM_REQ":
                m.ports = [(p["kind"], self.nodes[p["node"]]) for p in m.attrs["ports"]]
                m.resp = self.nodes[m.attrs["resp"]]
        consumer = {c: dst for c, (_, dst) in enumerate(self.chan_ends)}
        for m in self.nodes.values():
            if isinstance(m, _LazyFork):
                for ch in m.outs:
                    d, port = consumer[ch]
                    if port not in _static_inputs(self.nodes[d].kind, len(self.nodes[d].ins)):
                        raise ValueError(f"lazy fork {m.nid} feeds node {d} port {port}, "
                                         "which is not state-ready")
        self.results = [m for m in self.nodes.values() if m.kind == "RESULT"]
        self.resps = [m for m in self.nodes.values() if m.kind == "MEM_RESP"]
        self.emitters = [m for m in self.nodes.values()
                         if type(m).emit is not _Node.emit]
        self.readies = [m for m in self.nodes.values() if _static_inputs(m.kind, len(m.ins))]
        self._order()
        self._gate_setup()

    def _order(self) -> None:
        net = self.net
        consumer = {c: dst for c, (_, dst) in enumerate(self.chan_ends)}
        # forward: split each node into groups of ports joined by comb paths
        # (a LOAD's address->request and response->data paths are separate),
        # order the groups, and evaluate a node once per group
        group_in: dict[tuple, tuple] = {}
        group_out: dict[tuple, tuple] = {}
        groups = []
        for n in net.nodes.values():
            parent: dict = {}

            def find(x):
                while parent.setdefault(x, x) != x:
                    x = parent[x]
                return x

            for i, o in comb_paths(n):
                parent[find(("i", i))] = find(("o", o))
            roots = sorted({find(x) for x in list(parent)})
            for x in list(parent):
                g = (n.id, roots.index(find(x)))
                (group_in if x[0] == "i" else group_out)[(n.id, x[1])] = g
            groups += [(n.id, r) for r in range(len(roots))]
        fsucc = defaultdict(set)
        for src, dst in self.chan_ends:
            if src in group_out and dst in group_in:
                fsucc[group_out[src]].add(group_in[dst])
        index = {g: k for k, g in enumerate(groups)}
        order = _toposort(list(range(len(groups))),
                          {index[a]: {index[b] for b in bs} for a, bs in fsucc.items()})
        if order is None:
            raise ValueError("combinational cycle in netlist")
        self.fwd = [self.nodes[groups[k][0]] for k in order
                    if type(self.nodes[groups[k][0]]).forward is not _Node.forward]

        # backward: consumer (with same-cycle readiness on that port) before producer
        static = {nid: _static_inputs(m.kind, len(m.ins)) for nid, m in self.nodes.items()}

        def deps_edges(drop: set[int]):
            succ = defaultdict(set)  # d -> p means d evaluated before p
            for nid, m in self.nodes.items():
                needed = range(len(m.outs)) if m.needs is None else m.needs
                for o in needed:
                    ch = m.outs[o] if o < len(m.outs) else -1
                    if ch < 0:
                        continue
                    d, port = consumer[ch]
                    if port not in static[d]:
                        succ[d].add(nid)
            for m in self.nodes.values():
                if m.kind != "MEM_REQ":
                    continue
                for kind, load in m.ports:
                    if kind != "load" or load.nid in drop:
                        continue
                    d, port = consumer[load.outs[0]]
                    if port not in static[d]:
                        succ[d].add(m.nid)
            return succ

        drop: set[int] = set()
        loads = sorted(m.nid for m in self.nodes.values() if m.kind == "LOAD")
        while True:
            order = _toposort(sorted(self.nodes), deps_edges(drop))
            if order is not None:
                break
            pending = [lid for lid in loads if lid not in drop]
            if not pending:
                raise ValueError("cyclic readiness dependencies in netlist")
            # drop the drain shortcut of the load closest to the cycle
            stuck = _unsorted(sorted(self.nodes), deps_edges(drop))
            victim = next((lid for lid in pending if lid in stuck), pending[0])
            drop.add(victim)
        for lid in drop:
            self.nodes[lid].no_drain = True
        self.no_drain = sorted(drop)
        self.bwd = [self.nodes[i] for i in order
                    if type(self.nodes[i]).backward is not _Node.backward]

    def _gate_setup(self) -> None:
        """Shadow bookkeeping for the address-queue content invariant."""
        self.sg1_addrs: dict[int, list[int]] = defaultdict(list)  # store nid -> addresses
        self.deq_count: dict[int, int] = defaultdict(int)  # queue nid -> dequeues
        self.sg1_of: dict[int, int] = {}
        for m in self.nodes.values():
            if m.kind == "SG" and m.attrs.get("role") == "SG1":
                self.sg1_of[m.nid] = m.attrs["store"]
        self.queues = [m for m in self.nodes.values() if m.kind == "ADDR_Q"]

    # ------------------------------------------------------------- callbacks
    def trace(self, op: int, kind: str, addr: int, data: int, cycle: int) -> None:
        self.traces[op].append((kind, addr, data, cycle))

    def on_gate(self, gate, primary, cycle) -> None:
        store = self.sg1_of.get(gate.nid)
        if store is not None:
            self.sg1_addrs[store].append(primary)

    def on_dequeue(self, q, cycle) -> None:
        self.deq_count[q.nid] += 1

    def on_store_retire(self, store, cycle) -> None:
        pass

    # ------------------------------------------------------------------- run
    def step(self) -> dict:
        """Advance one cycle; returns a snapshot of what moved."""
        offer = [NONE] * self.n_chan
        accept = [False] * self.n_chan
        for m in self.emitters:
            m.emit(offer)
        for m in self.fwd:
            m.forward(offer)
        for m in self.readies:
            m.ready(offer, accept)
        for m in self.bwd:
            m.backward(offer, accept)
        moved = [c for c in range(self.n_chan) if offer[c] is not NONE and accept[c]]
        cyc = self.cycle
        for m in self.nodes.values():
            m.commit(offer, accept, cyc)
        self.transfers += len(moved)
        occ = 0
        for m in self.nodes.values():
            o = m.occupancy()
            if o > self.peak:
                self.peak = o
            occ += o
        if self.check_invariants:
            self._check_queues()
        self.cycle += 1
        self.last_offer = offer
        self.last_accept = accept
        return {"cycle": cyc, "moved": moved,
                "offered": [c for c in range(self.n_chan) if offer[c] is not NONE]}

    def done(self) -> bool:
        return all(r.got for r in self.results)

    def busy(self) -> bool:
        return any(r.busy() for r in self.resps)

    def run(self) -> SimResult:
        trap = None
        try:
            while not self.done():
                if self.cycle >= self.max_cycles:
                    raise CycleLimit(f"exceeded {self.max_cycles} cycles")
                snap = self.step()
                if not snap["moved"] and not self.busy() and not self.done():
                    raise Deadlock(self.cycle, self.stalled(snap))
        except alu.Trap as t:
            trap = t
        return self.result(trap)

    def stalled(self, snap=None) -> list[dict]:
        """Nodes offered a token they did not take, with the inputs they lack."""
        offer = self.last_offer
        out = []
        for (src, dst), val in zip(self.chan_ends, offer):
            if val is NONE:
                continue
            m = self.nodes[dst[0]]
            missing = [self.chan_ends[c][0][0] for c in m.ins if c >= 0 and offer[c] is NONE]
            out.append({"node": dst[0], "kind": m.kind, "port": dst[1], "from": src[0],
                        "waiting_on": missing})
        return out

    def _chan_of(self, nid: int, port: int) -> int:
        m = self.nodes[nid]
        return m.ins[port]

    def result(self, trap=None) -> SimResult:
        ret = None
        for r in self.results:
            if self.net.nodes[r.nid].attrs.get("role") == "return":
                ret = r.value
        return SimResult(self.cycle, ret, {a: list(m) for a, m in self.memories.items()},
                         {op: list(ev) for op, ev in self.traces.items()}, self.stats(), trap)

    def stats(self) -> dict:
        slots = 0
        for n in self.net.nodes.values():
            if n.kind in ("BUF", "PRED_BUF"):
                slots += n.attrs.get("capacity", 2)
            elif n.kind == "FIFO":
                slots += n.attrs.get("depth", 2)
            elif n.kind == "ADDR_Q":
                slots += n.attrs.get("capacity", 8)
        return {"cycles": self.cycle, "nodes": self.net.census(), "buffer_slots": slots,
                "peak_occupancy": self.peak, "transfers": self.transfers,
                "no_drain_loads": list(self.no_drain)}

    def _check_queues(self) -> None:
        for q in self.queues:
            store = q.attrs["store"]
            seen = self.sg1_addrs[store]
            k = self.deq_count[q.nid]
            held = list(q.q)
            if held != seen[k:]:
                raise InvariantViolation(
                    f"cycle {self.cycle}: ADDR_Q {q.nid} holds {held}, expected {seen[k:]}")
            written = len(self.traces.get(self.nodes[store].op, []))
            if not k <= written:
                raise InvariantViolation(
                    f"cycle {self.cycle}: ADDR_Q {q.nid} dequeued {k} but only {written} writes")

    def snapshot(self) -> dict:
        """Per-node internal state, keyed by node id."""
        return {nid: m.state() for nid, m in self.nodes.items() if m.state() is not None}


def _toposort(nodes: list[int], succ: dict) -> list[int] | None:
    indeg = {n: 0 for n in nodes}
    for a, bs in succ.items():
        for b in bs:
            indeg[b] += 1
    ready = deque(n for n in nodes if indeg[n] == 0)
    order = []
    while ready:
        a = ready.popleft()
        order.append(a)
        for b in sorted(succ.get(a, ())):
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return order if len(order) == len(nodes) else None


def _unsorted(nodes: list[int], succ: dict) -> set[int]:
    indeg = {n: 0 for n in nodes}
    for a, bs in succ.items():
        for b in bs:
            indeg[b] += 1
    ready = deque(n for n in nodes if indeg[n] == 0)
    seen = set()
    while ready:
        a = ready.popleft()
        seen.add(a)
        for b in succ.get(a, ()):
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return set(nodes) - seen


def simulate(net: Netlist, memories=None, args=None, mem_latency: int = 1,
             max_cycles: int = 1_000_000, check_invariants: bool = False) -> SimResult:
    """Run a point-to-point netlist to completion.

    Raises :class:`Deadlock` or :class:`CycleLimit`; arithmetic and
    out-of-bounds traps are reported in ``SimResult.trap``.
    """
    sim = Simulator(flatten(net), memories, args, mem_latency, max_cycles, check_invariants)
    return sim.run()
