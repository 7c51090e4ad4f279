"""Buffer placement heuristics.

Opaque buffers go after multipliers without a constant operand and on the
outputs of outer loops.  Transparent FIFOs decouple every fork output, with
deeper ones on control forks.  A loop back-edge buffer is removed when the
value it carries comes straight (through forks and state gates only) from a
registered state output, since that register already splits the cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Netlist

# registered state outputs a back edge may lean on: (kind, output port)
_REGISTERED_STATE = {("LOAD", 1), ("STORE", 0)}


@dataclass(frozen=True)
class BufferPolicy:
    fork_fifo_depth: int = 4
    ctl_fifo_depth: int = 16
    multiplier_buffers: bool = True
    backedge_removal: bool = True

    def __post_init__(self):
        if self.fork_fifo_depth < 1 or self.ctl_fifo_depth < 1:
            raise ValueError("FIFO depths must be >= 1")


def traces_to_state_register(net: Netlist, src: tuple) -> bool:
    """True if ``src`` is a registered state output seen through forks and gates."""
    seen = set()
    while src is not None and src not in seen:
        seen.add(src)
        n = net.nodes[src[0]]
        if (n.kind, src[1]) in _REGISTERED_STATE:
            return True
        if n.kind == "SG" and src[1] == 1 and n.attrs.get("registered_trigger"):
            return True
        if n.kind == "FORK":
            src = n.inputs[0]
        elif n.kind == "SG":
            src = n.inputs[src[1]]
        else:
            return False
    return False


def _insert_after(net: Netlist, src: tuple, kind: str, loop=False, **attrs) -> None:
    users = net.users().get(src, [])
    t = net.out_type(src)
    if loop is False:
        loop = net.nodes[src[0]].loop
    b = net.add(kind, [t], [t], [src], loop, **attrs)
    net.rewire(src, (b.id, 0), users)


def _const_driven(net: Netlist, src: tuple) -> bool:
    while net.nodes[src[0]].kind == "FORK":
        src = net.nodes[src[0]].inputs[0]
    return net.nodes[src[0]].kind == "CONST"


def _feeds_memory_port(net: Netlist, src: tuple) -> bool:
    """Does ``src`` reach a load/store address or data port without passing a stateful node?"""
    users = net.users()
    todo = [src]
    seen = set()
    while todo:
        s = todo.pop()
        if s in seen:
            continue
        seen.add(s)
        for nid, port in users.get(s, []):
            n = net.nodes[nid]
            if n.kind == "LOAD" and port == 0 or n.kind == "STORE" and port in (0, 1):
                return True
            if n.kind in ("OP", "FORK", "FIFO", "SG", "ADDR_Q", "BRANCH", "NDMUX", "DMUX"):
                todo.extend((nid, o) for o in range(len(n.out_types)))
    return False


def remove_back_edges(net: Netlist) -> int:
    """Drop back-edge buffers whose value traces to a registered state output."""
    removed = 0
    for b in [n for n in net.nodes.values() if n.kind == "BUF" and n.attrs.get("back")]:
        br = net.nodes[b.inputs[0][0]]
        if br.kind != "BRANCH" or not traces_to_state_register(net, br.inputs[1]):
            continue
        net.rewire((b.id, 0), b.inputs[0])
        net.remove(b.id)
        removed += 1
    return removed


def place_buffers(net: Netlist, policy: BufferPolicy = BufferPolicy()) -> Netlist:
    net = net.copy()
    placed = {"backedge_removed": 0, "multiplier": 0, "loop_output": 0, "fifo": 0}
    if policy.backedge_removal:
        placed["backedge_removed"] = remove_back_edges(net)

    nodes = sorted(net.nodes.values(), key=lambda n: n.id)
    if policy.multiplier_buffers:
        for n in nodes:
            if n.kind == "OP" and n.attrs["op"] == "*" \
                    and not any(_const_driven(net, s) for s in n.inputs) \
                    and not _feeds_memory_port(net, (n.id, 0)):
                _insert_after(net, (n.id, 0), "BUF", capacity=2)
                placed["multiplier"] += 1
    for n in nodes:
        if n.kind == "BRANCH" and n.attrs.get("loop_exit") and n.loop is not None \
                and net.loops[n.loop]["parent"] is None:
            _insert_after(net, (n.id, 0), "BUF", loop=None, capacity=2, loop_output=True)
            placed["loop_output"] += 1
    for n in nodes:
        if n.kind != "FORK" or n.attrs.get("lazy"):
            continue
        ctl = n.in_types[0].kind == "control"
        depth = policy.ctl_fifo_depth if ctl else policy.fork_fifo_depth
        for o in range(len(n.out_types)):
            _insert_after(net, (n.id, o), "FIFO", depth=depth)
            placed["fifo"] += 1
    net.meta = dict(net.meta, buffers=placed)
    return net
