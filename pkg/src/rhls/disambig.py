"""Distributed memory disambiguation with address queues and state gates.

For every outer loop and every array that has both loads and stores inside
that loop, the array's state chain is duplicated:

* the original (data) chain keeps the stores; each load on it is replaced by
  an SG4 gate triggered by the load's data output, so a younger store cannot
  write before an older load has read.  Data users still read the load
  directly and the gate's trigger output is discarded;
* the new (address) chain follows the same routing nodes with the same
  control inputs.  Each store on it becomes an SG1 gate on the store address,
  each load a pair SG2/SG3 spliced into the load address path, with one
  address queue per (store, load) pair between them.

SG1 enqueues its address in the cycle it fires and latches its address
token, which moves on one cycle later.  Any check ordered behind the store
therefore finds the address already queued, so the queues here do not
compare against a same-cycle enqueue: that comparison would only ever see
younger stores and would close a combinational loop whenever a load is
followed by a store in the same iteration.
"""

from __future__ import annotations

from .ir import CONTROL, VALUE, ENode, Netlist, state
from .lowering import dissolve_forks, enforce_point_to_point

ROLES = ("SG1", "SG2", "SG3", "SG4")
ROUTING = ("NDMUX", "BRANCH", "BUF", "LOOP_BUF", "DMUX", "FIFO")


def _subtree(net: Netlist, loop: int) -> set[int]:
    return {lid for lid in net.loops if net.in_loop(lid, loop)}


def _gate(net: Netlist, role: str, ptype, ttype, loop, primary, trigger, **attrs) -> ENode:
    return net.add("SG", [ptype, ttype], [ptype, ttype], [primary, trigger], loop,
                   role=role, **attrs)


def _apply(net: Netlist, outer: int, array: str, capacity: int) -> dict | None:
    st = state(array)
    loops = _subtree(net, outer)
    chain = [n for n in net.nodes.values()
             if n.loop in loops and st in (n.in_types + n.out_types)]
    loads = sorted((n for n in chain if n.kind == "LOAD"), key=lambda n: n.attrs["op"])
    stores = sorted((n for n in chain if n.kind == "STORE"), key=lambda n: n.attrs["op"])
    if not loads or not stores:
        return None
    routing = [n for n in chain if n.kind in ROUTING]
    for n in chain:
        if n.kind not in ROUTING + ("LOAD", "STORE"):
            raise ValueError(f"unexpected node {n.id} ({n.kind}) on the state chain of {array}")

    users = net.users()
    red_in: dict[int, tuple] = {}  # memory op -> red token arriving at it
    red_out: dict[int, tuple] = {}  # memory op -> red token leaving it
    clones: dict[int, ENode] = {}
    for n in sorted(routing, key=lambda n: n.id):
        c = net.add(n.kind, n.in_types, n.out_types, list(n.inputs), n.loop,
                    **dict(n.attrs, red=True))
        clones[n.id] = c

    def red(src):
        if src is None:
            return None
        nid, o = src
        if nid in clones:
            return (clones[nid].id, o)
        if nid in red_out:
            return red_out[nid]
        return src  # origin outside the loop: the chains split here

    # address chain: stores
    queues: dict[tuple[int, int], ENode] = {}
    for s in stores:
        addr = s.inputs[0]
        sg1 = _gate(net, "SG1", VALUE, st, s.loop, addr, None, store=s.id,
                    registered_trigger=True)
        hold = net.add("BUF", [VALUE], [VALUE], [(sg1.id, 0)], s.loop, capacity=capacity,
                       store_addr=True)
        s.inputs[0] = (hold.id, 0)
        red_in[s.id] = sg1
        red_out[s.id] = (sg1.id, 1)
        for ld in loads:
            q = net.add("ADDR_Q", [VALUE, st, VALUE], [VALUE], [(sg1.id, 0), (s.id, 0), None],
                        ld.loop, store=s.id, load=ld.id, capacity=capacity,
                        same_cycle_check=False)
            queues[(s.id, ld.id)] = q

    # address chain: loads
    for ld in loads:
        sg2 = _gate(net, "SG2", VALUE, st, ld.loop, ld.inputs[0], None, load=ld.id)
        addr = (sg2.id, 0)
        for s in stores:
            q = queues[(s.id, ld.id)]
            q.inputs[2] = addr
            addr = (q.id, 0)
        sg3 = _gate(net, "SG3", VALUE, st, ld.loop, addr, (sg2.id, 1), load=ld.id)
        ld.inputs[0] = (sg3.id, 0)
        red_in[ld.id] = sg2
        red_out[ld.id] = (sg3.id, 1)

    for nid, c in clones.items():
        n = net.nodes[nid]
        c.inputs = [red(src) if t == st else src for src, t in zip(n.inputs, n.in_types)]
    for s in stores:
        red_in[s.id].inputs[1] = red(s.inputs[2])
    for ld in loads:
        red_in[ld.id].inputs[1] = red(ld.inputs[1])

    # data chain: loads leave it, SG4 takes their place
    for ld in loads:
        sg4 = _gate(net, "SG4", st, VALUE, ld.loop, ld.inputs[1], (ld.id, 0), load=ld.id)
        net.rewire((ld.id, 1), (sg4.id, 0), users.get((ld.id, 1), []))
        ld.inputs[1] = None
        ld.in_types[1] = None
        ld.out_types[1] = None

    # merge after the loop
    exits = [n for n in routing if n.kind == "BRANCH" and n.loop == outer
             and n.attrs.get("loop_exit")]
    for br in exits:
        blue = (br.id, 0)
        after = users.get(blue, [])
        merge = _gate(net, "merge", st, st, net.loops[outer]["parent"], blue,
                      (clones[br.id].id, 0))
        net.rewire(blue, (merge.id, 0), after)
    return {"loop": outer, "array": array, "loads": [n.id for n in loads],
            "stores": [n.id for n in stores], "queues": len(queues)}


def _bypass(net: Netlist, roles: set[str]) -> None:
    users = net.users()
    for n in [n for n in net.nodes.values() if n.kind == "SG" and n.attrs.get("role") in roles]:
        for o in (0, 1):
            net.rewire((n.id, o), n.inputs[o], users.get((n.id, o), []))
        net.remove(n.id)
        users = net.users()


def disambiguate(net: Netlist, capacity: int = 8, drop_gates=()) -> Netlist:
    """Insert address queues and state gates for every outer loop.

    ``drop_gates`` names gate roles to wire around after insertion; it exists
    to show that each role is needed and breaks correctness when used.
    """
    if capacity < 1:
        raise ValueError("address queue capacity must be >= 1")
    bad = set(drop_gates) - set(ROLES)
    if bad:
        raise ValueError(f"unknown gate roles {sorted(bad)}")
    net = net.copy()
    dissolve_forks(net)
    applied = []
    outers = sorted(lid for lid, info in net.loops.items() if info["parent"] is None)
    for array in sorted(net.memories):
        for outer in outers:
            info = _apply(net, outer, array, capacity)
            if info is not None:
                applied.append(info)
    if drop_gates:
        _bypass(net, set(drop_gates))
    net.meta = dict(net.meta, disambig=applied, addrq_capacity=capacity,
                    dropped_gates=sorted(drop_gates))
    return enforce_point_to_point(net)
