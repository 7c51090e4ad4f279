"""Construction of the region-nested IR from a kernel syntax tree."""

from __future__ import annotations

from . import alu
from .ast import Assign, Bin, DoWhile, Expr, If, Index, Kernel, Num, Stmt, Store, Var
from .ir import CONTROL, VALUE, PortType, Rvsdg, state

GLOBAL = "*"


def _reads(e: Expr, out: set[str]) -> set[str]:
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, Bin):
        _reads(e.left, out)
        _reads(e.right, out)
    elif isinstance(e, Index):
        _reads(e.index, out)
    return out


def _arrays_expr(e: Expr, out: set[str]) -> set[str]:
    if isinstance(e, Index):
        out.add(e.array)
        _arrays_expr(e.index, out)
    elif isinstance(e, Bin):
        _arrays_expr(e.left, out)
        _arrays_expr(e.right, out)
    return out


def _writes(stmts: list[Stmt], out: set[str]) -> set[str]:
    for s in stmts:
        if isinstance(s, Assign):
            out.add(s.name)
        elif isinstance(s, If):
            _writes(s.then, out)
            _writes(s.orelse, out)
        elif isinstance(s, DoWhile):
            _writes(s.body, out)
    return out


def _summary(stmts: list[Stmt], names: set[str], arrays: set[str]) -> None:
    """Collect scalar names touched and arrays accessed by ``stmts``."""
    for s in stmts:
        if isinstance(s, Assign):
            names.add(s.name)
            _reads(s.value, names)
            _arrays_expr(s.value, arrays)
        elif isinstance(s, Store):
            arrays.add(s.array)
            for e in (s.index, s.value):
                _reads(e, names)
                _arrays_expr(e, arrays)
        elif isinstance(s, If):
            _reads(s.cond, names)
            _arrays_expr(s.cond, arrays)
            _summary(s.then, names, arrays)
            _summary(s.orelse, names, arrays)
        elif isinstance(s, DoWhile):
            _summary(s.body, names, arrays)
            _reads(s.cond, names)
            _arrays_expr(s.cond, arrays)


class _Builder:
    def __init__(self, g: Rvsdg, key):
        self.g = g
        self.key = key  # array name -> state chain key

    def const(self, region: int, value: int):
        n = self.g.add_node("const", region, [], [VALUE], value=alu.wrap(value))
        return ("n", n.id, 0)

    def expr(self, e: Expr, region: int, env: dict, states: dict):
        g = self.g
        if isinstance(e, Num):
            return self.const(region, e.value)
        if isinstance(e, Var):
            return env[e.name]
        if isinstance(e, Index):
            addr = self.expr(e.index, region, env, states)
            k = self.key(e.array)
            n = g.add_node("load", region, [VALUE, state(k)], [VALUE, state(k)],
                           [addr, states[k]], array=e.array, op=e.mem_id)
            states[k] = ("n", n.id, 1)
            return ("n", n.id, 0)
        a = self.expr(e.left, region, env, states)
        b = self.expr(e.right, region, env, states)
        kind = "cmp" if e.op in alu.COMPARES else "binop"
        n = g.add_node(kind, region, [VALUE, VALUE], [VALUE], [a, b], op=e.op)
        return ("n", n.id, 0)

    def predicate(self, e: Expr, region: int, env: dict, states: dict):
        if isinstance(e, Bin) and e.op in alu.COMPARES:
            a = self.expr(e.left, region, env, states)
            b = self.expr(e.right, region, env, states)
            op = e.op
        else:
            a = self.expr(e, region, env, states)
            b = self.const(region, 0)
            op = "!="
        n = self.g.add_node("cmp", region, [VALUE, VALUE], [CONTROL], [a, b], op=op)
        return ("n", n.id, 0)

    def block(self, stmts: list[Stmt], region: int, env: dict, states: dict):
        env, states = dict(env), dict(states)
        g = self.g
        for s in stmts:
            if isinstance(s, Assign):
                env[s.name] = self.expr(s.value, region, env, states)
            elif isinstance(s, Store):
                addr = self.expr(s.index, region, env, states)
                data = self.expr(s.value, region, env, states)
                k = self.key(s.array)
                n = g.add_node("store", region, [VALUE, VALUE, state(k)], [state(k)],
                               [addr, data, states[k]], array=s.array, op=s.mem_id)
                states[k] = ("n", n.id, 0)
            elif isinstance(s, If):
                env, states = self.gamma(s, region, env, states)
            elif isinstance(s, DoWhile):
                env, states = self.theta(s, region, env, states)
        return env, states

    def _threaded(self, stmts, extra: list[Expr], env):
        names: set[str] = set()
        arrays: set[str] = set()
        _summary(stmts, names, arrays)
        for e in extra:
            _reads(e, names)
            _arrays_expr(e, arrays)
        free = sorted(names & set(env))
        keys = sorted({self.key(a) for a in arrays})
        return free, keys

    def gamma(self, s: If, region: int, env: dict, states: dict):
        g = self.g
        pred = self.predicate(s.cond, region, env, states)
        free, keys = self._threaded(s.then + s.orelse, [], env)
        in_types = [CONTROL] + [VALUE] * len(free) + [state(k) for k in keys]
        inputs = [pred] + [env[v] for v in free] + [states[k] for k in keys]
        node = g.add_node("gamma", region, in_types, [], inputs)
        branches = []
        for body in (s.orelse, s.then):  # subregion index == predicate value
            sub = g.add_region(node.id, in_types[1:])
            aenv = {v: ("a", sub.id, i) for i, v in enumerate(free)}
            ast_ = {k: ("a", sub.id, len(free) + j) for j, k in enumerate(keys)}
            benv, bst = self.block(body, sub.id, aenv, ast_)
            branches.append((sub, benv, bst))
        common = set(branches[0][1]) & set(branches[1][1])
        written = _writes(s.then + s.orelse, set())
        outs = [v for v in sorted(common) if v in written]
        node.out_types = [VALUE] * len(outs) + [state(k) for k in keys]
        for sub, benv, bst in branches:
            for v in outs:
                g.set_result(sub.id, benv[v], VALUE)
            for k in keys:
                g.set_result(sub.id, bst[k], state(k))
        env = dict(env)
        states = dict(states)
        for i, v in enumerate(outs):
            env[v] = ("n", node.id, i)
        for j, k in enumerate(keys):
            states[k] = ("n", node.id, len(outs) + j)
        return env, states

    def theta(self, s: DoWhile, region: int, env: dict, states: dict):
        g = self.g
        free, keys = self._threaded(s.body, [s.cond], env)
        types = [VALUE] * len(free) + [state(k) for k in keys]
        inputs = [env[v] for v in free] + [states[k] for k in keys]
        node = g.add_node("theta", region, types, types, inputs)
        sub = g.add_region(node.id, types)
        aenv = {v: ("a", sub.id, i) for i, v in enumerate(free)}
        ast_ = {k: ("a", sub.id, len(free) + j) for j, k in enumerate(keys)}
        benv, bst = self.block(s.body, sub.id, aenv, ast_)
        pred = self.predicate(s.cond, sub.id, benv, bst)
        g.set_result(sub.id, pred, CONTROL)
        for v in free:
            g.set_result(sub.id, benv[v], VALUE)
        for k in keys:
            g.set_result(sub.id, bst[k], state(k))
        env = dict(env)
        states = dict(states)
        for i, v in enumerate(free):
            env[v] = ("n", node.id, i)
        for j, k in enumerate(keys):
            states[k] = ("n", node.id, len(free) + j)
        return env, states


def build_rvsdg(k: Kernel, separate: bool = True) -> Rvsdg:
    """Build the source IR for ``k``.

    All memory operations are first threaded on one global state chain in
    program order; with ``separate`` (the default) the chain is then split
    per array by :func:`separate_state_edges`.
    """
    g = Rvsdg()
    b = _Builder(g, lambda a: GLOBAL)
    names: set[str] = set()
    arrays: set[str] = set()
    _summary(k.body, names, arrays)
    if k.result is not None:
        _arrays_expr(k.result, arrays)
    keys = [GLOBAL] if arrays else []
    scalars = k.scalars
    lam = g.add_node("lambda", g.root, [], [], name=k.name, scalars=scalars,
                     arrays=dict(k.arrays), state_keys=keys, has_return=k.result is not None)
    body = g.add_region(lam.id, [VALUE] * len(scalars) + [state(x) for x in keys])
    env = {v: ("a", body.id, i) for i, v in enumerate(scalars)}
    states = {x: ("a", body.id, len(scalars) + j) for j, x in enumerate(keys)}
    env, states = b.block(k.body, body.id, env, states)
    if k.result is not None:
        g.set_result(body.id, b.expr(k.result, body.id, env, states), VALUE)
    for x in keys:
        g.set_result(body.id, states[x], state(x))
    g.meta["kernel"] = k.name
    return separate_state_edges(g) if separate else g


# ---------------------------------------------------------------------------

def _subtree_arrays(g: Rvsdg, region: int) -> set[str]:
    out = set()
    for n in g.walk(region):
        if n.kind in ("load", "store"):
            out.add(n.attrs["array"])
    return out


def separate_state_edges(g: Rvsdg) -> Rvsdg:
    """Give every array its own state chain (distinct arrays never alias).

    Within one array the program order of the original chain is kept.
    """
    lam = g.lambda_node()
    if lam.attrs["state_keys"] != [GLOBAL]:
        return g.copy()
    new = Rvsdg()
    new.meta = dict(g.meta)
    old_body = g.regions[lam.subregions[0]]
    arrays = sorted(_subtree_arrays(g, old_body.id))
    attrs = dict(lam.attrs, state_keys=arrays)
    nlam = new.add_node("lambda", new.root, [], [], nid=lam.id, **attrs)
    vals = [t for t in old_body.args if t.kind != "state"]
    body = new.add_region(nlam.id, vals + [state(a) for a in arrays])
    vmap = {("a", old_body.id, i): ("a", body.id, i) for i in range(len(vals))}
    smap = {a: ("a", body.id, len(vals) + j) for j, a in enumerate(arrays)}
    _sep_region(g, new, old_body.id, body.id, vmap, smap)
    for src, t in zip(old_body.results, old_body.result_types):
        if t.kind != "state":
            new.set_result(body.id, vmap[src], t)
    for a in arrays:
        new.set_result(body.id, smap[a], state(a))
    new.next_id = max(new.next_id, g.next_id)
    return new


def _sep_region(g: Rvsdg, new: Rvsdg, old: int, rid: int, vmap: dict, smap: dict) -> None:
    for nid in g.topo(old):
        n = g.nodes[nid]
        if n.kind in ("load", "store"):
            a = n.attrs["array"]
            st = state(a)
            ins = [vmap[s] if t.kind != "state" else smap[a] for s, t in zip(n.inputs, n.in_types)]
            m = new.add_node(n.kind, rid, [st if t.kind == "state" else t for t in n.in_types],
                             [st if t.kind == "state" else t for t in n.out_types], ins,
                             nid=nid, **n.attrs)
            for o, t in enumerate(n.out_types):
                if t.kind == "state":
                    smap[a] = ("n", m.id, o)
                else:
                    vmap[("n", nid, o)] = ("n", m.id, o)
        elif n.kind in ("gamma", "theta"):
            used = sorted(_subtree_arrays(g, n.subregions[0]).union(
                *[_subtree_arrays(g, s) for s in n.subregions[1:]]))
            keep_in = [i for i, t in enumerate(n.in_types) if t.kind != "state"]
            keep_out = [o for o, t in enumerate(n.out_types) if t.kind != "state"]
            in_types = [n.in_types[i] for i in keep_in] + [state(a) for a in used]
            out_types = [n.out_types[o] for o in keep_out] + [state(a) for a in used]
            inputs = [vmap[n.inputs[i]] for i in keep_in] + [smap[a] for a in used]
            m = new.add_node(n.kind, rid, in_types, out_types, inputs, nid=nid, **n.attrs)
            for sid in n.subregions:
                osub = g.regions[sid]
                arg_keep = [i for i, t in enumerate(osub.args) if t.kind != "state"]
                sub = new.add_region(m.id, [osub.args[i] for i in arg_keep] +
                                     [state(a) for a in used])
                svmap = dict(vmap)
                for j, i in enumerate(arg_keep):
                    svmap[("a", sid, i)] = ("a", sub.id, j)
                ssmap = {a: ("a", sub.id, len(arg_keep) + j) for j, a in enumerate(used)}
                _sep_region(g, new, sid, sub.id, svmap, ssmap)
                for src, t in zip(osub.results, osub.result_types):
                    if t.kind != "state":
                        new.set_result(sub.id, svmap[src], t)
                for a in used:
                    new.set_result(sub.id, ssmap[a], state(a))
            for j, o in enumerate(keep_out):
                vmap[("n", nid, o)] = ("n", m.id, j)
            for j, a in enumerate(used):
                smap[a] = ("n", m.id, len(keep_out) + j)
        else:
            m = new.add_node(n.kind, rid, n.in_types, n.out_types,
                             [vmap[s] for s in n.inputs], nid=nid, **n.attrs)
            for o in range(len(n.out_types)):
                vmap[("n", nid, o)] = ("n", m.id, o)
