"""Graph data structures: the region-nested source IR and the flat elastic netlist.

Both forms use mutable node records keyed by a stable integer id.  Passes
mutate copies; a node keeps its id for as long as it survives.

Source-IR origins are tuples ``("n", node_id, port)`` for node outputs and
``("a", region_id, index)`` for region arguments.  Netlist origins are plain
``(node_id, port)`` pairs.
"""

from __future__ import annotations

import copy
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

# ---------------------------------------------------------------------------
# Port types


@dataclass(frozen=True)
class PortType:
    kind: str  # value | control | state | memreq | memresp
    width: int = 32
    arity: int = 2
    array: str | None = None

    def encode(self) -> str:
        if self.kind == "value":
            return f"v{self.width}"
        if self.kind == "control":
            return f"c{self.arity}"
        return f"{self.kind}:{self.array}"

    @staticmethod
    def decode(text: str) -> "PortType":
        if text.startswith("v"):
            return PortType("value", width=int(text[1:]))
        if text.startswith("c"):
            return PortType("control", arity=int(text[1:]))
        kind, _, array = text.partition(":")
        return PortType(kind, array=array)

    def __str__(self) -> str:
        return self.encode()


VALUE = PortType("value")
CONTROL = PortType("control")


def state(array: str) -> PortType:
    return PortType("state", array=array)


def memreq(array: str) -> PortType:
    return PortType("memreq", array=array)


def memresp(array: str) -> PortType:
    return PortType("memresp", array=array)


def _enc(t: PortType | None) -> str | None:
    return None if t is None else t.encode()


def _dec(t: str | None) -> PortType | None:
    return None if t is None else PortType.decode(t)


@dataclass
class Violation:
    rule: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.where}: {self.message}"


# ---------------------------------------------------------------------------
# Region-nested source IR

STRUCTURAL = ("lambda", "gamma", "theta")


@dataclass
class RNode:
    id: int
    kind: str
    region: int
    in_types: list[PortType]
    out_types: list[PortType]
    inputs: list[tuple | None]
    attrs: dict = field(default_factory=dict)
    subregions: list[int] = field(default_factory=list)


@dataclass
class Region:
    id: int
    owner: int | None
    args: list[PortType]
    results: list[tuple] = field(default_factory=list)
    result_types: list[PortType] = field(default_factory=list)
    nodes: list[int] = field(default_factory=list)


class Rvsdg:
    """A region-nested dataflow graph with a single top region."""

    def __init__(self) -> None:
        self.nodes: dict[int, RNode] = {}
        self.regions: dict[int, Region] = {}
        self.meta: dict = {}
        self.next_id = 0
        self.next_region = 0
        self.root = self.add_region(None, []).id

    # construction ---------------------------------------------------------

    def add_region(self, owner: int | None, args: list[PortType]) -> Region:
        r = Region(self.next_region, owner, list(args))
        self.next_region += 1
        self.regions[r.id] = r
        if owner is not None:
            self.nodes[owner].subregions.append(r.id)
        return r

    def add_node(self, kind, region, in_types, out_types, inputs=None, nid=None, **attrs) -> RNode:
        if nid is None:
            nid = self.next_id
        self.next_id = max(self.next_id, nid + 1)
        if inputs is None:
            inputs = [None] * len(in_types)
        n = RNode(nid, kind, region, list(in_types), list(out_types), list(inputs), dict(attrs))
        self.nodes[nid] = n
        self.regions[region].nodes.append(nid)
        return n

    def remove_node(self, nid: int) -> None:
        n = self.nodes.pop(nid)
        self.regions[n.region].nodes.remove(nid)

    def move_node(self, nid: int, region: int) -> None:
        n = self.nodes[nid]
        self.regions[n.region].nodes.remove(nid)
        n.region = region
        self.regions[region].nodes.append(nid)

    def set_result(self, region: int, origin: tuple, typ: PortType) -> None:
        r = self.regions[region]
        r.results.append(origin)
        r.result_types.append(typ)

    # queries --------------------------------------------------------------

    def lambda_node(self) -> RNode:
        for nid in self.regions[self.root].nodes:
            if self.nodes[nid].kind == "lambda":
                return self.nodes[nid]
        raise LookupError("graph has no lambda")

    def origin_type(self, src: tuple) -> PortType | None:
        tag, ref, port = src
        if tag == "n":
            n = self.nodes.get(ref)
            if n is None or port >= len(n.out_types):
                return None
            return n.out_types[port]
        r = self.regions.get(ref)
        if r is None or port >= len(r.args):
            return None
        return r.args[port]

    def origin_region(self, src: tuple) -> int | None:
        tag, ref, _ = src
        if tag == "n":
            return self.nodes[ref].region if ref in self.nodes else None
        return ref if ref in self.regions else None

    def users(self, region: int) -> dict[tuple, list]:
        """Map origin -> list of ``("n", nid, port)`` / ``("r", rid, idx)`` users."""
        out: dict[tuple, list] = defaultdict(list)
        r = self.regions[region]
        for nid in r.nodes:
            for i, src in enumerate(self.nodes[nid].inputs):
                if src is not None:
                    out[src].append(("n", nid, i))
        for i, src in enumerate(r.results):
            out[src].append(("r", region, i))
        return out

    def replace_uses(self, region: int, old: tuple, new: tuple) -> None:
        r = self.regions[region]
        for nid in r.nodes:
            n = self.nodes[nid]
            n.inputs = [new if s == old else s for s in n.inputs]
        r.results = [new if s == old else s for s in r.results]

    def topo(self, region: int) -> list[int]:
        """Node ids of ``region`` in dependency order (raises on a cycle)."""
        order, cyc = _topo_region(self, region)
        if cyc:
            raise ValueError(f"cycle in region {region}: {sorted(cyc)}")
        return order

    def walk(self, region: int | None = None) -> Iterable[RNode]:
        """All nodes, recursively, parents before their subregion contents."""
        region = self.root if region is None else region
        for nid in list(self.regions[region].nodes):
            n = self.nodes[nid]
            yield n
            for sub in n.subregions:
                yield from self.walk(sub)

    def copy(self) -> "Rvsdg":
        return copy.deepcopy(self)


def _topo_region(g: Rvsdg, region: int) -> tuple[list[int], set[int]]:
    ids = g.regions[region].nodes
    members = set(ids)
    indeg = {nid: 0 for nid in ids}
    succ: dict[int, list[int]] = defaultdict(list)
    for nid in ids:
        for src in g.nodes[nid].inputs:
            if src is not None and src[0] == "n" and src[1] in members:
                indeg[nid] += 1
                succ[src[1]].append(nid)
    ready = [nid for nid in ids if indeg[nid] == 0]
    order = []
    while ready:
        nid = ready.pop(0)
        order.append(nid)
        for s in succ[nid]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    return order, members - set(order)


def validate_rvsdg(g: Rvsdg) -> list[Violation]:
    out: list[Violation] = []

    def check_origin(where: str, src, expected: PortType | None, region: int) -> None:
        if src is None:
            out.append(Violation("dangling", where, "input has no origin"))
            return
        t = g.origin_type(src)
        if t is None:
            out.append(Violation("dangling", where, f"origin {src} does not exist"))
            return
        if g.origin_region(src) != region:
            out.append(Violation("region-escape", where,
                                 f"origin {src} lives in region {g.origin_region(src)}, not {region}"))
        if expected is not None and t != expected:
            out.append(Violation("type", where, f"expected {expected}, origin carries {t}"))

    state_users: dict[tuple, int] = defaultdict(int)
    for rid, r in g.regions.items():
        for nid in r.nodes:
            n = g.nodes.get(nid)
            if n is None or n.region != rid:
                out.append(Violation("membership", f"region {rid}", f"node {nid} misfiled"))
                continue
            for i, (src, t) in enumerate(zip(n.inputs, n.in_types)):
                check_origin(f"node {nid} ({n.kind}) input {i}", src, t, rid)
                if src is not None and t is not None and t.kind == "state":
                    state_users[src] += 1
        for i, src in enumerate(r.results):
            t = r.result_types[i] if i < len(r.result_types) else None
            check_origin(f"region {rid} result {i}", src, t, rid)
            if src is not None and t is not None and t.kind == "state":
                state_users[src] += 1
        _, cyc = _topo_region(g, rid)
        if cyc:
            out.append(Violation("cycle", f"region {rid}", f"nodes {sorted(cyc)} form a cycle"))

    for src, count in state_users.items():
        if count > 1:
            out.append(Violation("state-fanout", f"origin {src}",
                                 f"memory state consumed {count} times; chains must be linear"))

    for n in g.nodes.values():
        where = f"node {n.id} ({n.kind})"
        if len(n.inputs) != len(n.in_types):
            out.append(Violation("arity", where, "input/type count mismatch"))
        if n.kind == "theta":
            if len(n.subregions) != 1:
                out.append(Violation("arity", where, "theta needs exactly one subregion"))
                continue
            sub = g.regions[n.subregions[0]]
            k = len(n.inputs)
            if not (len(sub.args) == k == len(n.out_types)):
                out.append(Violation("arity", where, "input/argument/output counts differ"))
            if len(sub.results) != len(sub.args) + 1:
                out.append(Violation("arity", where,
                                     f"{len(sub.results)} results for {len(sub.args)} arguments"
                                     " (expected arguments + predicate)"))
            elif sub.result_types and sub.result_types[0].kind != "control":
                out.append(Violation("type", where, "first theta result must be the predicate"))
            for i, t in enumerate(n.in_types):
                if i < len(sub.args) and sub.args[i] != t:
                    out.append(Violation("type", where, f"argument {i} type differs from input"))
        elif n.kind == "gamma":
            if not n.in_types or n.in_types[0].kind != "control":
                out.append(Violation("type", where, "gamma predicate must be control"))
                continue
            if n.in_types[0].arity != len(n.subregions):
                out.append(Violation("arity", where, "predicate arity != number of subregions"))
            for sid in n.subregions:
                sub = g.regions[sid]
                if sub.args != n.in_types[1:]:
                    out.append(Violation("arity", where, f"subregion {sid} arguments mismatch inputs"))
                if sub.result_types != n.out_types:
                    out.append(Violation("arity", where, f"subregion {sid} results mismatch outputs"))
        elif n.kind == "load":
            if len(n.in_types) != 2 or len(n.out_types) != 2:
                out.append(Violation("arity", where, "load is (addr, state) -> (data, state)"))
        elif n.kind == "store":
            if len(n.in_types) != 3 or len(n.out_types) != 1:
                out.append(Violation("arity", where, "store is (addr, data, state) -> (state)"))
    return out


# ---------------------------------------------------------------------------
# Elastic netlist

OPAQUE = frozenset({"BUF", "PRED_BUF"})
PRIMITIVES = frozenset({
    "OP", "CONST", "BRANCH", "NDMUX", "DMUX", "FORK", "SINK", "BUF", "FIFO",
    "PRED_BUF", "LOOP_BUF", "LOAD", "STORE", "MEM_REQ", "MEM_RESP", "ADDR_Q",
    "SG", "ENTRY", "ARG", "RESULT",
})

# LOAD ports: in [addr, state, resp]  out [data, state, req]
# STORE ports: in [addr, data, state] out [state, req]
# ADDR_Q ports: in [enqueue, dequeue, check] out [check]
# SG ports: in [primary, trigger] out [primary, trigger]
LOAD_STATE_OUT = 1
STORE_STATE_OUT = 0


@dataclass
class ENode:
    id: int
    kind: str
    in_types: list[PortType | None]
    out_types: list[PortType | None]
    inputs: list[tuple | None]
    attrs: dict = field(default_factory=dict)
    loop: int | None = None


def comb_paths(n: ENode) -> list[tuple[int, int]]:
    """(input, output) port pairs with a same-cycle forward path."""
    k = n.kind
    ins = [i for i, t in enumerate(n.in_types) if t is not None]
    outs = [o for o, t in enumerate(n.out_types) if t is not None]
    if k in ("BUF", "PRED_BUF", "MEM_RESP", "MEM_REQ", "ENTRY", "ARG", "SINK", "RESULT"):
        return []
    if k == "LOAD":
        pairs = [(i, 2) for i in (0, 1) if i in ins and 2 in outs]
        if 2 in ins:
            pairs.append((2, 0))
        return pairs
    if k == "STORE":
        return [(i, 1) for i in ins if 1 in outs]
    if k == "SG" and n.attrs.get("registered_trigger"):
        return [(0, 0), (1, 0)]
    if k == "ADDR_Q":
        return [(0, 0), (2, 0)] if n.attrs.get("same_cycle_check", True) else [(2, 0)]
    return [(i, o) for i in ins for o in outs]


class Netlist:
    def __init__(self) -> None:
        self.nodes: dict[int, ENode] = {}
        self.loops: dict[int, dict] = {}
        self.memories: dict[str, int] = {}
        self.meta: dict = {}
        self.next_id = 0

    def add(self, kind, in_types, out_types, inputs=None, loop=None, nid=None, **attrs) -> ENode:
        if nid is None:
            nid = self.next_id
        self.next_id = max(self.next_id, nid + 1)
        if inputs is None:
            inputs = [None] * len(in_types)
        n = ENode(nid, kind, list(in_types), list(out_types), list(inputs), dict(attrs), loop)
        self.nodes[nid] = n
        return n

    def remove(self, nid: int) -> None:
        del self.nodes[nid]

    def users(self) -> dict[tuple, list[tuple]]:
        out: dict[tuple, list[tuple]] = defaultdict(list)
        for n in self.nodes.values():
            for i, src in enumerate(n.inputs):
                if src is not None:
                    out[src].append((n.id, i))
        return out

    def rewire(self, old: tuple, new: tuple, users: list[tuple] | None = None) -> None:
        """Point every consumer of ``old`` (or just ``users``) at ``new``."""
        if users is None:
            users = self.users().get(old, [])
        for nid, i in users:
            self.nodes[nid].inputs[i] = new

    def out_type(self, src: tuple) -> PortType | None:
        n = self.nodes.get(src[0])
        if n is None or src[1] >= len(n.out_types):
            return None
        return n.out_types[src[1]]

    def loop_depth(self, loop: int | None) -> int:
        d = 0
        while loop is not None:
            d += 1
            loop = self.loops[loop]["parent"]
        return d

    def outer_loop(self, loop: int | None) -> int | None:
        while loop is not None and self.loops[loop]["parent"] is not None:
            loop = self.loops[loop]["parent"]
        return loop

    def in_loop(self, node_loop: int | None, loop: int) -> bool:
        while node_loop is not None:
            if node_loop == loop:
                return True
            node_loop = self.loops[node_loop]["parent"]
        return False

    def census(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for n in self.nodes.values():
            out[n.kind] += 1
        return dict(sorted(out.items()))

    def copy(self) -> "Netlist":
        return copy.deepcopy(self)


def comb_cycles(net: Netlist) -> list[list[int]]:
    """Strongly connected node groups on the same-cycle forward path graph."""
    succ: dict[tuple, list[tuple]] = defaultdict(list)
    for n in net.nodes.values():
        for i, o in comb_paths(n):
            succ[("i", n.id, i)].append(("o", n.id, o))
        for i, src in enumerate(n.inputs):
            if src is not None and n.in_types[i] is not None:
                succ[("o", src[0], src[1])].append(("i", n.id, i))
    return [sorted({v[1] for v in comp}) for comp in _sccs(succ) if len(comp) > 1]


def _sccs(succ: dict) -> list[list]:
    index: dict = {}
    low: dict = {}
    stack: list = []
    on: set = set()
    comps: list[list] = []
    counter = 0
    verts = set(succ)
    for vs in succ.values():
        verts.update(vs)
    for root in sorted(verts, key=repr):
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def validate_netlist(net: Netlist, require_p2p: bool = True) -> list[Violation]:
    """Check drivers, types, fan-out and combinational cycles.

    ``require_p2p=False`` skips the fan-out/sink rules, for netlists that have
    not been through point-to-point enforcement yet.
    """
    out: list[Violation] = []
    users = net.users()
    for n in net.nodes.values():
        where = f"node {n.id} ({n.kind})"
        if n.kind not in PRIMITIVES:
            out.append(Violation("kind", where, f"unknown node kind {n.kind}"))
        for i, t in enumerate(n.in_types):
            src = n.inputs[i] if i < len(n.inputs) else None
            if t is None:
                if src is not None:
                    out.append(Violation("driver", where, f"absent input {i} is driven"))
                continue
            if src is None:
                out.append(Violation("driver", where, f"input {i} has no driver"))
                continue
            st = net.out_type(src)
            if st is None:
                out.append(Violation("driver", where, f"input {i} driven by missing port {src}"))
            elif st != t:
                out.append(Violation("type", where, f"input {i} is {t}, driver carries {st}"))
        if n.kind == "FORK" and len([t for t in n.out_types if t]) < 2:
            out.append(Violation("arity", where, "fork needs at least two outputs"))
        if n.kind == "SG" and (len(n.in_types) != 2 or len(n.out_types) != 2):
            out.append(Violation("arity", where, "state gate is 2-in/2-out"))
        if n.kind == "SINK" and n.out_types:
            out.append(Violation("arity", where, "sink has outputs"))
        if not require_p2p:
            continue
        for o, t in enumerate(n.out_types):
            if t is None:
                continue
            count = len(users.get((n.id, o), []))
            if count == 0:
                out.append(Violation("unused", where, f"output {o} has no user"))
            elif count > 1:
                out.append(Violation("fan-out", where, f"output {o} has {count} users"))
    for comp in comb_cycles(net):
        out.append(Violation("combinational-cycle", f"nodes {comp}",
                             "cycle without an opaque element"))
    return out


# ---------------------------------------------------------------------------
# JSON serialization

JSON_VERSION = 1


def _src_out(src):
    return None if src is None else list(src)


def _src_in(src):
    return None if src is None else tuple(src)


def to_json(g: Rvsdg | Netlist) -> dict:
    if isinstance(g, Rvsdg):
        nodes = [{
            "id": n.id, "kind": n.kind, "region": n.region, "attrs": n.attrs,
            "in": [_enc(t) for t in n.in_types], "out": [_enc(t) for t in n.out_types],
            "subregions": n.subregions,
        } for n in sorted(g.nodes.values(), key=lambda n: n.id)]
        edges = []
        for n in sorted(g.nodes.values(), key=lambda n: n.id):
            for i, src in enumerate(n.inputs):
                edges.append({"from": _src_out(src), "to": ["n", n.id, i]})
        for r in g.regions.values():
            for i, src in enumerate(r.results):
                edges.append({"from": _src_out(src), "to": ["r", r.id, i]})
        regions = [{
            "id": r.id, "owner": r.owner, "args": [_enc(t) for t in r.args],
            "results": [_enc(t) for t in r.result_types], "nodes": r.nodes,
        } for r in sorted(g.regions.values(), key=lambda r: r.id)]
        return {"version": JSON_VERSION, "kind": "rvsdg", "root": g.root,
                "regions": regions, "nodes": nodes, "edges": edges, "meta": _plain(g.meta)}
    nodes = [{
        "id": n.id, "kind": n.kind, "loop": n.loop, "attrs": n.attrs,
        "in": [_enc(t) for t in n.in_types], "out": [_enc(t) for t in n.out_types],
    } for n in sorted(g.nodes.values(), key=lambda n: n.id)]
    edges = [{"from": _src_out(src), "to": [n.id, i]}
             for n in sorted(g.nodes.values(), key=lambda n: n.id)
             for i, src in enumerate(n.inputs) if src is not None]
    loops = [{"id": k, **v} for k, v in sorted(g.loops.items())]
    return {"version": JSON_VERSION, "kind": "netlist", "nodes": nodes, "edges": edges,
            "loops": loops, "memories": g.memories, "meta": _plain(g.meta)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def from_json(data: dict) -> Rvsdg | Netlist:
    if data.get("version") != JSON_VERSION:
        raise ValueError(f"unsupported graph version {data.get('version')}")
    if data["kind"] == "rvsdg":
        g = Rvsdg.__new__(Rvsdg)
        g.nodes, g.regions, g.meta = {}, {}, data.get("meta", {})
        g.root = data["root"]
        for r in data["regions"]:
            g.regions[r["id"]] = Region(r["id"], r["owner"], [_dec(t) for t in r["args"]],
                                        [None] * len(r["results"]),
                                        [_dec(t) for t in r["results"]], list(r["nodes"]))
        for n in data["nodes"]:
            g.nodes[n["id"]] = RNode(n["id"], n["kind"], n["region"],
                                     [_dec(t) for t in n["in"]], [_dec(t) for t in n["out"]],
                                     [None] * len(n["in"]), dict(n["attrs"]), list(n["subregions"]))
        for e in data["edges"]:
            tag, ref, idx = e["to"]
            src = _src_in(e["from"])
            if tag == "n":
                g.nodes[ref].inputs[idx] = src
            else:
                g.regions[ref].results[idx] = src
        g.next_id = max(g.nodes, default=-1) + 1
        g.next_region = max(g.regions, default=-1) + 1
        return g
    net = Netlist()
    net.meta = data.get("meta", {})
    net.memories = dict(data.get("memories", {}))
    for lp in data.get("loops", []):
        lp = dict(lp)
        net.loops[lp.pop("id")] = lp
    for n in data["nodes"]:
        net.add(n["kind"], [_dec(t) for t in n["in"]], [_dec(t) for t in n["out"]],
                loop=n["loop"], nid=n["id"], **n["attrs"])
    for e in data["edges"]:
        nid, idx = e["to"]
        net.nodes[nid].inputs[idx] = _src_in(e["from"])
    return net
