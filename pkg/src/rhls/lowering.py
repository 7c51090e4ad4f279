"""Lowering of the source IR to an elastic netlist.

The pipeline is fixed: gammas are flattened first (innermost first), thetas
then become loop clusters in the netlist, memory ports are attached, and
point-to-point wiring is enforced last.

Loop clusters: the netlist is flat.  Every node carries the id of its
innermost loop (``ENode.loop``); ``Netlist.loops`` records the nesting.  A
loop's entry multiplexers, exit branches, predicate buffer and back-edge
buffers are ordinary nodes of the cluster, so back edges are real cyclic
channels from the start.
"""

from __future__ import annotations

from . import alu
from .ir import (CONTROL, VALUE, ENode, Netlist, Rvsdg, memreq, memresp)

SPECULATIVE = "speculative"
GUARDED = "guarded"


# ---------------------------------------------------------------------------
# gamma

def _region_trigger(g: Rvsdg, rid: int) -> tuple:
    for nid in g.regions[rid].nodes:
        if g.nodes[nid].kind == "trigger":
            return ("n", nid, 0)
    return ("n", g.add_node("trigger", rid, [], [CONTROL]).id, 0)


def gamma_form(g: Rvsdg, nid: int) -> str:
    """Speculative iff no state passes through and no subregion holds a loop.

    Subregions with a trapping operation (division, remainder) are guarded
    as well, since executing them speculatively could raise a trap the
    sequential program never hits.
    """
    n = g.nodes[nid]
    if any(t.kind == "state" for t in n.in_types + n.out_types):
        return GUARDED
    for sid in n.subregions:
        for m in g.walk(sid):
            if m.kind == "theta":
                return GUARDED
            if m.kind == "binop" and m.attrs["op"] in alu.TRAPPING:
                return GUARDED
    return SPECULATIVE


def _flatten_gamma(g: Rvsdg, gid: int, forms: dict) -> None:
    n = g.nodes[gid]
    rid = n.region
    pred = n.inputs[0]
    k = len(n.subregions)
    form = gamma_form(g, gid)
    forms[str(gid)] = form

    arg_src: list[list[tuple]] = [[] for _ in range(k)]
    for src, t in zip(n.inputs[1:], n.in_types[1:]):
        if form == GUARDED:
            br = g.add_node("BRANCH", rid, [CONTROL, t], [t] * k, [pred, src], gamma=gid)
            for j in range(k):
                arg_src[j].append(("n", br.id, j))
        else:
            for j in range(k):
                arg_src[j].append(src)

    trig_branch = []

    def trig(j: int) -> tuple:
        if not trig_branch:
            base = _region_trigger(g, rid)
            trig_branch.append(g.add_node("BRANCH", rid, [CONTROL, CONTROL], [CONTROL] * k,
                                          [pred, base], gamma=gid, trigger=True))
        return ("n", trig_branch[0].id, j)

    results: list[list[tuple]] = []
    for j, sid in enumerate(n.subregions):
        sub = g.regions[sid]

        def remap(src, j=j, sid=sid):
            return arg_src[j][src[2]] if src[0] == "a" and src[1] == sid else src

        for nid in list(sub.nodes):
            m = g.nodes[nid]
            m.inputs = [remap(s) for s in m.inputs]
            if form == GUARDED and m.kind == "trigger":
                for other in sub.nodes:
                    om = g.nodes[other]
                    om.inputs = [trig(j) if s == ("n", nid, 0) else s for s in om.inputs]
                sub.results = [trig(j) if s == ("n", nid, 0) else s for s in sub.results]
                continue
            if form == GUARDED and m.kind == "const" and not m.inputs:
                m.inputs = [trig(j)]
                m.in_types = [CONTROL]
        results.append([remap(s) for s in sub.results])
        for nid in list(sub.nodes):
            if form == GUARDED and g.nodes[nid].kind == "trigger":
                g.remove_node(nid)
            else:
                g.move_node(nid, rid)

    mux_kind = "NDMUX" if form == GUARDED else "DMUX"
    for o, t in enumerate(n.out_types):
        mux = g.add_node(mux_kind, rid, [CONTROL] + [t] * k, [t],
                         [pred] + [results[j][o] for j in range(k)], gamma=gid)
        g.replace_uses(rid, ("n", gid, o), ("n", mux.id, 0))
    for sid in n.subregions:
        del g.regions[sid]
    g.remove_node(gid)


def _lower_gammas_in(g: Rvsdg, rid: int, forms: dict) -> None:
    for nid in list(g.regions[rid].nodes):
        for sid in list(g.nodes[nid].subregions):
            _lower_gammas_in(g, sid, forms)
    for nid in g.topo(rid):
        if nid in g.nodes and g.nodes[nid].kind == "gamma":
            _flatten_gamma(g, nid, forms)


def lower_gamma(g: Rvsdg) -> Rvsdg:
    """Flatten every gamma into its parent region (innermost first).

    The chosen form per gamma is recorded in ``meta["gamma_forms"]``.
    """
    g = g.copy()
    forms: dict = {}
    _lower_gammas_in(g, g.root, forms)
    g.meta["gamma_forms"] = forms
    return g


# ---------------------------------------------------------------------------
# theta

class _Converter:
    def __init__(self, g: Rvsdg):
        self.g = g
        self.net = Netlist()
        self.net.next_id = g.next_id
        self.entry: ENode | None = None

    def entry_token(self) -> tuple:
        if self.entry is None:
            self.entry = self.net.add("ENTRY", [], [CONTROL], value=0)
        return (self.entry.id, 0)

    def region(self, rid: int, vmap: dict, trigger, loop: int | None) -> None:
        g, net = self.g, self.net
        for nid in g.topo(rid):
            n = g.nodes[nid]
            ins = [vmap[s] for s in n.inputs]
            k = n.kind
            if k == "trigger":
                vmap[("n", nid, 0)] = trigger()
                continue
            if k == "theta":
                self.theta(n, vmap, loop)
                continue
            if k in ("gamma", "lambda"):
                raise ValueError(f"structural node {nid} ({k}) must be lowered first")
            if k == "const":
                if not ins:
                    ins = [trigger()]
                m = net.add("CONST", [CONTROL], [VALUE], ins, loop, nid, value=n.attrs["value"])
            elif k in ("binop", "cmp"):
                m = net.add("OP", n.in_types, n.out_types, ins, loop, nid, op=n.attrs["op"])
            elif k == "load":
                st = n.in_types[1]
                m = net.add("LOAD", [VALUE, st, None], [VALUE, st, None], ins + [None], loop, nid,
                            array=n.attrs["array"], op=n.attrs["op"])
            elif k == "store":
                st = n.in_types[2]
                m = net.add("STORE", [VALUE, VALUE, st], [st, None], ins, loop, nid,
                            array=n.attrs["array"], op=n.attrs["op"])
            elif k in ("BRANCH", "NDMUX", "DMUX"):
                m = net.add(k, n.in_types, n.out_types, ins, loop, nid, **n.attrs)
            else:
                raise ValueError(f"cannot lower node kind {k}")
            for o in range(len(n.out_types)):
                vmap[("n", nid, o)] = (m.id, o)

    def theta(self, n, vmap: dict, parent: int | None) -> None:
        g, net = self.g, self.net
        lid = n.id
        sub = g.regions[n.subregions[0]]
        predbuf = net.add("PRED_BUF", [CONTROL], [CONTROL], loop=lid, capacity=2, init=[0])
        invariant = [sub.results[1 + i] == ("a", sub.id, i) for i in range(len(sub.args))]
        net.loops[lid] = {"parent": parent, "theta": n.id, "pred_buf": predbuf.id,
                          "invariant": invariant}
        svmap: dict = {}
        muxes = {}
        for i, (src, t) in enumerate(zip(n.inputs, n.in_types)):
            ext = vmap[src]
            if invariant[i]:
                lb = net.add("LOOP_BUF", [CONTROL, t], [t], [(predbuf.id, 0), ext], lid)
                svmap[("a", sub.id, i)] = (lb.id, 0)
                vmap[("n", n.id, i)] = ext
            else:
                mux = net.add("NDMUX", [CONTROL, t, t], [t], [(predbuf.id, 0), ext, None], lid,
                              loop_entry=True)
                muxes[i] = mux
                svmap[("a", sub.id, i)] = (mux.id, 0)
        self.region(sub.id, svmap, lambda: (predbuf.id, 0), lid)
        pred = svmap[sub.results[0]]
        predbuf.inputs[0] = pred
        for i, mux in muxes.items():
            t = n.in_types[i]
            br = net.add("BRANCH", [CONTROL, t], [t, t], [pred, svmap[sub.results[1 + i]]], lid,
                         loop_exit=True)
            buf = net.add("BUF", [t], [t], [(br.id, 1)], lid, capacity=2, back=True)
            mux.inputs[2] = (buf.id, 0)
            vmap[("n", n.id, i)] = (br.id, 0)


def lower_theta(g: Rvsdg) -> Netlist:
    """Convert a gamma-free source IR into a (not yet point-to-point) netlist."""
    conv = _Converter(g)
    net = conv.net
    lam = g.lambda_node()
    body = g.regions[lam.subregions[0]]
    vmap: dict = {}
    scalars = lam.attrs["scalars"]
    for i, t in enumerate(body.args):
        if t.kind == "value":
            m = net.add("ARG", [], [t], name=scalars[i])
        else:
            m = net.add("ENTRY", [], [t], value=0, array=t.array)
        vmap[("a", body.id, i)] = (m.id, 0)
    conv.region(body.id, vmap, conv.entry_token, None)
    for src, t in zip(body.results, body.result_types):
        if t.kind == "state":
            net.add("RESULT", [t], [], [vmap[src]], role="state", array=t.array)
        else:
            net.add("RESULT", [t], [], [vmap[src]], role="return")
    net.memories = dict(lam.attrs["arrays"])
    net.meta = {"kernel": lam.attrs["name"], "scalars": list(scalars),
                "gamma_forms": dict(g.meta.get("gamma_forms", {}))}
    return net


# ---------------------------------------------------------------------------
# memory ports

def lower_memory_ports(net: Netlist) -> Netlist:
    """Attach one MEM_REQ/MEM_RESP pair per accessed array."""
    net = net.copy()
    by_array: dict[str, list[ENode]] = {}
    for n in net.nodes.values():
        if n.kind in ("LOAD", "STORE"):
            by_array.setdefault(n.attrs["array"], []).append(n)
    for array in sorted(by_array):
        ops = sorted(by_array[array], key=lambda n: (n.attrs["op"], n.id))
        loads = [n for n in ops if n.kind == "LOAD"]
        resp = net.add("MEM_RESP", [], [memresp(array)] * len(loads), array=array,
                       routes={str(n.id): j for j, n in enumerate(loads)})
        ports = []
        inputs = []
        for n in ops:
            if n.kind == "LOAD":
                n.in_types[2] = memresp(array)
                n.inputs[2] = (resp.id, loads.index(n))
                n.out_types[2] = memreq(array)
                inputs.append((n.id, 2))
            else:
                n.out_types[1] = memreq(array)
                inputs.append((n.id, 1))
            ports.append({"node": n.id, "kind": n.kind.lower(), "op": n.attrs["op"], "width": 32})
        req = net.add("MEM_REQ", [memreq(array)] * len(ops), [], inputs, array=array,
                      ports=ports, resp=resp.id, dual_ports=2)
        resp.attrs["req"] = req.id
    return net


# ---------------------------------------------------------------------------
# point-to-point

def dissolve_forks(net: Netlist) -> None:
    """Remove every FORK and SINK in place, reconnecting users to the roots."""

    def root(src):
        while src is not None and net.nodes[src[0]].kind == "FORK":
            src = net.nodes[src[0]].inputs[0]
        return src

    for n in net.nodes.values():
        if n.kind not in ("FORK", "SINK"):
            n.inputs = [root(s) for s in n.inputs]
    for nid in [n.id for n in net.nodes.values() if n.kind in ("FORK", "SINK")]:
        net.remove(nid)


def enforce_point_to_point(net: Netlist) -> Netlist:
    """Give every output exactly one user.

    Existing forks and sinks are dissolved first, so the result is canonical
    and the pass can be re-run after later rewiring.  The address fan-out of
    an SG1 gate becomes a lazy fork: all users take the token in one cycle.
    """
    net = net.copy()
    dissolve_forks(net)
    users = net.users()
    for n in sorted(net.nodes.values(), key=lambda n: n.id):
        for o, t in enumerate(n.out_types):
            if t is None:
                continue
            us = sorted(users.get((n.id, o), []))
            if not us:
                net.add("SINK", [t], [], [(n.id, o)], n.loop)
            elif len(us) > 1:
                lazy = n.kind == "SG" and n.attrs.get("role") == "SG1" and o == 0
                fork = net.add("FORK", [t], [t] * len(us), [(n.id, o)], n.loop,
                               **({"lazy": True} if lazy else {}))
                for j, (nid, i) in enumerate(us):
                    net.nodes[nid].inputs[i] = (fork.id, j)
    return net
