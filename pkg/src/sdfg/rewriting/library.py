"""The standard transformation library.

Map transformations (collapse, expansion, fusion, interchange, reduce
fusion, tiling), data transformations (double buffering, local storage,
local stream, vectorization), and control-flow transformations (map to
for-loop, state fusion, nested-graph inlining, redundant array removal).
Strict rules (redundant array, state fusion, inline) may be applied
automatically to fixpoint.
"""

from __future__ import annotations

from typing import Any

from ..ir import (
    AccessNode,
    AutoMemlet,
    ConsumeEntry,
    DataflowEdge,
    ENTRY_NODES,
    EXIT_NODES,
    MapEntry,
    MapExit,
    Memlet,
    NestedSdfg,
    Reduce,
    Sdfg,
    SdfgState,
    Tasklet,
)
from ..loops import loop_of_body
from ..propagation import connector_requirement, fill_auto_memlets
from ..symbolic import (
    Bin,
    Call,
    Cmp,
    Expr,
    Num,
    ONE,
    Subset,
    Sym,
    SymRange,
    ZERO,
    accesses_expr,
    free_symbols,
    linear_split,
    simplify,
    substitute,
)
from .engine import Match, Transformation, register
from .matching import Pattern, PatternNode, path_pattern


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------

def _fresh_name(sdfg: Sdfg, base: str) -> str:
    if base not in sdfg.data and base not in sdfg.symbols:
        return base
    i = 0
    while f"{base}_{i}" in sdfg.data or f"{base}_{i}" in sdfg.symbols:
        i += 1
    return f"{base}_{i}"


def _occurrences(sdfg: Sdfg, data: str) -> list[tuple[SdfgState, int]]:
    out = []
    for state in sdfg.states:
        for node_id, node in state.nodes.items():
            if isinstance(node, AccessNode) and node.data == data:
                out.append((state, node_id))
    return out


def _remove_node_and_edges(state: SdfgState, node_id: int) -> None:
    for e in list(state.edges):
        if e.src == node_id or e.dst == node_id:
            state.remove_edge(e)
    state.remove_node(node_id)


def _memlet_path(state: SdfgState, edge: DataflowEdge) -> list[DataflowEdge]:
    """The full chain an edge belongs to, through scope entry/exit connectors
    in both directions."""
    chain = [edge]
    cur = edge
    while isinstance(state.nodes[cur.src], EXIT_NODES) and cur.src_conn:
        inner_conn = "IN_" + cur.src_conn[4:]
        prev = [e for e in state.in_edges(cur.src) if e.dst_conn == inner_conn]
        if len(prev) != 1:
            break
        cur = prev[0]
        chain.insert(0, cur)
    cur = edge
    while isinstance(state.nodes[cur.dst], ENTRY_NODES) and cur.dst_conn \
            and cur.dst_conn.startswith("IN_"):
        out_conn = "OUT_" + cur.dst_conn[3:]
        nxt = [e for e in state.out_edges(cur.dst) if e.src_conn == out_conn]
        if len(nxt) != 1:
            break
        cur = nxt[0]
        chain.append(cur)
    return chain


def _nested_pair_applicable(sdfg: Sdfg, state: SdfgState, match: Match,
                            need_clean_ranges: bool = True) -> bool:
    outer = state.nodes[match.nodes["outer"]]
    inner = state.nodes[match.nodes["inner"]]
    try:
        tree = state.scope_of()
    except Exception:
        return False
    if tree.parent.get(inner.id) != outer.id:
        return False
    if set(tree.children.get(outer.id, [])) != {inner.id}:
        return False
    if inner.dynamic_range_connectors() or outer.dynamic_range_connectors():
        return False
    if need_clean_ranges:
        outer_params = set(outer.params)
        for r in inner.ranges:
            if r.free_symbols() & outer_params:
                return False
    # the inner exit must feed the outer exit directly
    inner_exit = tree.exits[inner.id]
    outer_exit = tree.exits[outer.id]
    for e in state.out_edges(inner_exit):
        if e.dst != outer_exit:
            return False
    return True


def _substitute_scope_params(state: SdfgState, tree, entry_id: int,
                             mapping: dict[str, Expr]) -> None:
    """Rename parameters in every memlet and range inside a scope."""
    inside = set()
    stack = [entry_id]
    while stack:
        cur = stack.pop()
        for child in tree.children.get(cur, []):
            if child == cur:
                continue
            inside.add(child)
            if child in tree.exits:
                inside.add(tree.exits[child])
            stack.append(child)
    inside.add(tree.exits[entry_id])
    for e in state.edges:
        if e.src in inside or e.dst in inside or e.src == entry_id:
            m = e.memlet
            if not m.is_empty and not isinstance(m, AutoMemlet):
                m.subset = m.subset.subs(mapping)
                if m.reindex is not None:
                    m.reindex = m.reindex.subs(mapping)
                if m.accesses is not None:
                    m.accesses = simplify(substitute(m.accesses, mapping))
    for node_id in inside:
        node = state.nodes.get(node_id)
        if isinstance(node, MapEntry):
            node.ranges = [r.subs(mapping) for r in node.ranges]


def _split_map(sdfg: Sdfg, state: SdfgState, entry: MapEntry,
               outer_spec: tuple[list[str], list[SymRange]],
               inner_spec: tuple[list[str], list[SymRange]]) -> tuple[int, int]:
    """Turn one map into two nested ones; boundary memlets are recomputed."""
    tree = state.scope_of()
    exit_id = tree.exits[entry.id]
    exit_node = state.nodes[exit_id]
    ime = state.add_node(MapEntry(list(inner_spec[0]), list(inner_spec[1]),
                                  entry.schedule))
    inner_me = state.nodes[ime]
    imx = state.add_node(MapExit(ime))
    inner_mx = state.nodes[imx]
    entry.params = list(outer_spec[0])
    entry.ranges = list(outer_spec[1])
    for e in list(state.out_edges(entry.id)):
        e.src = ime
        if e.src_conn:
            inner_me.outs.add(e.src_conn)
            inner_me.ins.add("IN_" + e.src_conn[4:])
    for conn in sorted(entry.outs):
        state.add_edge(entry.id, conn, ime, f"IN_{conn[4:]}",
                       AutoMemlet(conn[4:]))
    for e in list(state.in_edges(exit_id)):
        if e.src == entry.id:
            continue
        e.dst = imx
        if e.dst_conn:
            inner_mx.ins.add(e.dst_conn)
            inner_mx.outs.add("OUT_" + e.dst_conn[3:])
    for conn in sorted(exit_node.ins):
        state.add_edge(imx, f"OUT_{conn[3:]}", exit_id, conn,
                       AutoMemlet(conn[3:]))
    fill_auto_memlets(sdfg)
    return ime, imx


def _state_reads_writes(state: SdfgState) -> tuple[set[str], set[str]]:
    reads: set[str] = set()
    writes: set[str] = set()
    for node in state.nodes.values():
        if not isinstance(node, AccessNode):
            continue
        if any(not e.memlet.is_empty for e in state.in_edges(node.id)):
            writes.add(node.data)
        if any(not e.memlet.is_empty for e in state.out_edges(node.id)):
            reads.add(node.data)
    return reads, writes


def _insert_state_before(sdfg: Sdfg, target: str, new_name: str) -> SdfgState:
    fresh = new_name
    i = 0
    while sdfg.state(fresh) is not None:
        fresh = f"{new_name}_{i}"
        i += 1
    state = sdfg.add_state(fresh)
    for t in sdfg.transitions:
        if t.dst == target:
            t.dst = fresh
    sdfg.add_transition(fresh, target)
    if sdfg.start_state == target:
        sdfg.start_state = fresh
    elif sdfg.start_state == fresh:
        sdfg.start_state = target if not sdfg.in_transitions(fresh) else fresh
    return state


def _extent_upper_bound(e: Expr) -> Expr:
    """Pick min() arms so the extent folds to a constant where possible
    (allocation size of a clamped tile)."""
    def candidates(expr: Expr) -> list[Expr]:
        if isinstance(expr, Call) and expr.fn == "min":
            out = []
            for arm in expr.args:
                out.extend(candidates(arm))
            return out
        if isinstance(expr, Bin):
            lefts = candidates(expr.left)
            rights = candidates(expr.right)
            return [Bin(expr.op, l, r) for l in lefts for r in rights]
        return [expr]

    options = [simplify(c) for c in candidates(e)]
    for opt in options:
        if isinstance(opt, Num):
            return opt
    return simplify(e)


# --------------------------------------------------------------------------
# map transformations
# --------------------------------------------------------------------------

@register
class MapCollapse(Transformation):
    """Collapses two directly nested maps into one whose parameters and
    ranges are the concatenation of both."""

    name = "MapCollapse"

    def expressions(self):
        return [Pattern([PatternNode("outer", (MapEntry,)),
                         PatternNode("inner", (MapEntry,))],
                        [("outer", "inner")])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        return _nested_pair_applicable(sdfg, state, match)

    def apply(self, sdfg, state, match, params):
        outer: MapEntry = self.node(state, match, "outer")
        inner: MapEntry = self.node(state, match, "inner")
        tree = state.scope_of()
        inner_exit = tree.exits[inner.id]
        outer_exit = tree.exits[outer.id]
        outer.params = outer.params + inner.params
        outer.ranges = outer.ranges + inner.ranges
        for e in list(state.edges):
            if e.src == outer.id and e.dst == inner.id:
                state.remove_edge(e)
            elif e.src == inner_exit and e.dst == outer_exit:
                state.remove_edge(e)
        for e in list(state.out_edges(inner.id)):
            e.src = outer.id
            if e.src_conn:
                outer.outs.add(e.src_conn)
                outer.ins.add("IN_" + e.src_conn[4:])
        for e in list(state.in_edges(inner_exit)):
            e.dst = outer_exit
            exit_node = state.nodes[outer_exit]
            if e.dst_conn:
                exit_node.ins.add(e.dst_conn)
                exit_node.outs.add("OUT_" + e.dst_conn[3:])
        _remove_node_and_edges(state, inner.id)
        _remove_node_and_edges(state, inner_exit)


@register
class MapExpansion(Transformation):
    """Expands a multi-dimensional map into two nested maps, splitting the
    dimensions at a given position."""

    name = "MapExpansion"
    default_params = {"split": 1}

    def expressions(self):
        return [Pattern([PatternNode("map", (MapEntry,))])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        entry = self.node(state, match, "map")
        return len(entry.params) >= 2

    def apply(self, sdfg, state, match, params):
        entry: MapEntry = self.node(state, match, "map")
        split = int(params["split"])
        if not 0 < split < len(entry.params):
            raise ValueError(f"split must be within 1..{len(entry.params) - 1}")
        _split_map(sdfg, state, entry,
                   (entry.params[:split], entry.ranges[:split]),
                   (entry.params[split:], entry.ranges[split:]))


@register
class MapInterchange(Transformation):
    """Interchanges the parameter order of two directly nested maps."""

    name = "MapInterchange"

    def expressions(self):
        return [Pattern([PatternNode("outer", (MapEntry,)),
                         PatternNode("inner", (MapEntry,))],
                        [("outer", "inner")])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        return _nested_pair_applicable(sdfg, state, match)

    def apply(self, sdfg, state, match, params):
        outer: MapEntry = self.node(state, match, "outer")
        inner: MapEntry = self.node(state, match, "inner")
        outer.params, inner.params = inner.params, outer.params
        outer.ranges, inner.ranges = inner.ranges, outer.ranges
        # the mid-level boundary requirements depend on which parameter is
        # inner, so they are recomputed
        tree = state.scope_of()
        inner_exit = tree.exits[inner.id]
        outer_exit = tree.exits[outer.id]
        for e in state.edges:
            between = (e.src == outer.id and e.dst == inner.id) or \
                      (e.src == inner_exit and e.dst == outer_exit)
            if between and not e.memlet.is_empty:
                e.memlet = AutoMemlet(e.memlet.data)
        fill_auto_memlets(sdfg)


@register
class MapFusion(Transformation):
    """Fuses two consecutive maps over the same range whose only link is a
    transient written and read at matching per-instance indices."""

    name = "MapFusion"

    def expressions(self):
        return [path_pattern(PatternNode("exit1", (MapExit,)),
                             PatternNode("mid", (AccessNode,)),
                             PatternNode("entry2", (MapEntry,)))]

    def can_be_applied(self, sdfg, state, match, strict=False):
        mid: AccessNode = self.node(state, match, "mid")
        exit1: MapExit = self.node(state, match, "exit1")
        entry2: MapEntry = self.node(state, match, "entry2")
        desc = sdfg.data.get(mid.data)
        if desc is None or not desc.transient or desc.kind != "array":
            return False
        if state.in_degree(mid.id) != 1 or state.out_degree(mid.id) != 1:
            return False
        if len(_occurrences(sdfg, mid.data)) != 1:
            return False
        entry1 = state.nodes[exit1.entry]
        if len(entry1.params) != len(entry2.params):
            return False
        if entry2.dynamic_range_connectors() or entry1.dynamic_range_connectors():
            return False
        rename = {p2: Sym(p1) for p1, p2 in zip(entry1.params, entry2.params)}
        for r1, r2 in zip(entry1.ranges, entry2.ranges):
            if str(r1.simplified()) != str(r2.subs(rename).simplified()):
                return False
        writes = [e for e in state.in_edges(exit1.id)
                  if not e.memlet.is_empty and e.memlet.data == mid.data]
        reads = [e for e in state.out_edges(entry2.id)
                 if not e.memlet.is_empty and e.memlet.data == mid.data]
        if len(writes) != 1 or len(reads) != 1:
            return False
        if writes[0].memlet.wcr is not None:
            return False
        w_sub = writes[0].memlet.subset.simplified()
        r_sub = reads[0].memlet.subset.subs(rename).simplified()
        return str(w_sub) == str(r_sub)

    def apply(self, sdfg, state, match, params):
        mid: AccessNode = self.node(state, match, "mid")
        exit1: MapExit = self.node(state, match, "exit1")
        entry2: MapEntry = self.node(state, match, "entry2")
        entry1: MapEntry = state.nodes[exit1.entry]
        tree = state.scope_of()
        exit2 = state.nodes[tree.exits[entry2.id]]
        rename = {p2: Sym(p1) for p1, p2 in zip(entry1.params, entry2.params)}
        _substitute_scope_params(state, tree, entry2.id, rename)

        # the seam disappears first: exit1 -> mid -> entry2 boundary edges
        for e in list(state.edges):
            if (e.src == exit1.id and e.dst == mid.id) or \
                    (e.src == mid.id and e.dst == entry2.id):
                state.remove_edge(e)
        # producer writes land on the transient access node inside the scope
        for e in list(state.in_edges(exit1.id)):
            if not e.memlet.is_empty and e.memlet.data == mid.data:
                e.dst = mid.id
                e.dst_conn = None
        # consumer reads come straight off it; other reads enter through the
        # fused entry
        for e in list(state.out_edges(entry2.id)):
            if not e.memlet.is_empty and e.memlet.data == mid.data:
                e.src = mid.id
                e.src_conn = None
            else:
                e.src = entry1.id
                if e.src_conn:
                    entry1.outs.add(e.src_conn)
                    entry1.ins.add("IN_" + e.src_conn[4:])
        for e in list(state.in_edges(entry2.id)):
            if e.dst_conn and e.dst_conn.startswith("IN_"):
                existing = next(
                    (x for x in state.in_edges(entry1.id)
                     if x.dst_conn == e.dst_conn), None)
                if existing is None:
                    e.dst = entry1.id
                    entry1.ins.add(e.dst_conn)
                else:
                    state.remove_edge(e)
        # remaining first-map outputs drain through the surviving exit
        for e in list(state.in_edges(exit1.id)):
            e.dst = exit2.id
            if e.dst_conn:
                exit2.ins.add(e.dst_conn)
                exit2.outs.add("OUT_" + e.dst_conn[3:])
        for e in list(state.out_edges(exit1.id)):
            e.src = exit2.id
            if e.src_conn:
                exit2.outs.add(e.src_conn)
        exit2.entry = entry1.id
        entry1.ins.discard(f"IN_{mid.data}")
        entry1.outs.discard(f"OUT_{mid.data}")
        _remove_node_and_edges(state, exit1.id)
        _remove_node_and_edges(state, entry2.id)
        fill_auto_memlets(sdfg)


@register
class MapReduceFusion(Transformation):
    """Fuses a map that materializes a tensor with the reduction consuming
    it: map outputs are rewired through a conflict-resolving memlet and the
    reduction target is identity-initialized in a prepended state."""

    name = "MapReduceFusion"

    def expressions(self):
        return [path_pattern(PatternNode("mexit", (MapExit,)),
                             PatternNode("tmp", (AccessNode,)),
                             PatternNode("reduce", (Reduce,)),
                             PatternNode("target", (AccessNode,)))]

    def can_be_applied(self, sdfg, state, match, strict=False):
        tmp: AccessNode = self.node(state, match, "tmp")
        red: Reduce = self.node(state, match, "reduce")
        target: AccessNode = self.node(state, match, "target")
        desc = sdfg.data.get(tmp.data)
        if desc is None or not desc.transient:
            return False
        if state.in_degree(tmp.id) != 1 or state.out_degree(tmp.id) != 1:
            return False
        if len(_occurrences(sdfg, tmp.data)) != 1:
            return False
        if red.wcr.kind not in ("sum", "product"):
            return False
        in_edge = state.in_edges(red.id)[0]
        full = Subset(tuple(SymRange(ZERO, simplify(Bin("-", d, ONE)))
                            for d in desc.dims))
        if str(in_edge.memlet.subset.simplified()) != str(full):
            return False
        tdesc = sdfg.data[target.data]
        if tdesc.rank != desc.rank - len(red.axes):
            return False
        mexit: MapExit = self.node(state, match, "mexit")
        writes = [e for e in state.in_edges(mexit.id)
                  if not e.memlet.is_empty and e.memlet.data == tmp.data]
        if len(writes) != 1:
            return False
        return all(str(simplify(Bin("-", r.end, r.begin))) == "0"
                   for r in writes[0].memlet.subset.ranges)

    def apply(self, sdfg, state, match, params):
        tmp: AccessNode = self.node(state, match, "tmp")
        red: Reduce = self.node(state, match, "reduce")
        target: AccessNode = self.node(state, match, "target")
        mexit: MapExit = self.node(state, match, "mexit")
        tmp_data = tmp.data
        out_data = target.data
        axes = set(red.axes)
        wcr = red.wcr
        basetype = sdfg.data[out_data].basetype

        for e in state.in_edges(mexit.id):
            if e.memlet.is_empty or e.memlet.data != tmp_data:
                continue
            kept = [r for d, r in enumerate(e.memlet.subset.ranges)
                    if d not in axes]
            e.memlet = Memlet(data=out_data, subset=Subset(tuple(kept)),
                              accesses=accesses_expr(Subset(tuple(kept))),
                              wcr=wcr)
            e.dst_conn = f"IN_{out_data}"
        mexit.ins.discard(f"IN_{tmp_data}")
        mexit.outs.discard(f"OUT_{tmp_data}")
        mexit.ins.add(f"IN_{out_data}")
        mexit.outs.add(f"OUT_{out_data}")

        for e in list(state.edges):
            if e.dst == tmp.id or e.src == tmp.id or e.src == red.id \
                    or e.dst == red.id:
                state.remove_edge(e)
        state.remove_node(tmp.id)
        state.remove_node(red.id)
        state.add_edge(mexit.id, f"OUT_{out_data}", target.id, None,
                       AutoMemlet(out_data))
        if not _occurrences(sdfg, tmp_data):
            del sdfg.data[tmp_data]
        fill_auto_memlets(sdfg)

        # identity initialization of the reduction target
        init = _insert_state_before(sdfg, state.name, f"init_{out_data}")
        odesc = sdfg.data[out_data]
        params_ = [f"_z{d}" for d in range(odesc.rank)]
        ranges = [SymRange(ZERO, simplify(Bin("-", d, ONE))) for d in odesc.dims]
        me, mx = init.add_map(params_, ranges)
        identity = wcr.identity(basetype)
        literal = repr(float(identity)) if basetype == "float64" else str(int(identity))
        t = init.add_tasklet("init", [], ["o"], f"o = {literal}")
        init.add_edge(me, None, t, None, Memlet.empty())
        subset = "[" + ", ".join(params_) + "]"
        init.add_memlet_path(t, mx, init.add_access(out_data), src_conn="o",
                             memlet=Memlet.simple(out_data, subset))
        fill_auto_memlets(sdfg)


@register
class MapTiling(Transformation):
    """Orthogonal tiling: an outer map strides by the tile size, a new inner
    map covers each tile with min-clamped bounds."""

    name = "MapTiling"
    default_params = {"tile": 4}

    def expressions(self):
        return [Pattern([PatternNode("map", (MapEntry,))])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        entry: MapEntry = self.node(state, match, "map")
        if entry.dynamic_range_connectors():
            return False
        return all(str(r.stride) == "1" for r in entry.ranges)

    def apply(self, sdfg, state, match, params):
        entry: MapEntry = self.node(state, match, "map")
        tile = int(params["tile"])
        if tile < 2:
            raise ValueError("tile size must be at least 2")
        taken = set(entry.params) | set(sdfg.symbols) | set(sdfg.data)
        outer_params, outer_ranges = [], []
        inner_ranges = []
        for p, r in zip(entry.params, entry.ranges):
            tp = f"{p}_t"
            while tp in taken:
                tp += "_"
            taken.add(tp)
            outer_params.append(tp)
            outer_ranges.append(SymRange(r.begin, r.end, Num(tile)))
            clamped_end = simplify(Call("min", (
                Bin("+", Sym(tp), Num(tile - 1)), r.end)))
            inner_ranges.append(SymRange(Sym(tp), clamped_end))
        _split_map(sdfg, state, entry,
                   (outer_params, outer_ranges),
                   (list(entry.params), inner_ranges))


# --------------------------------------------------------------------------
# data transformations
# --------------------------------------------------------------------------

@register
class DoubleBuffering(Transformation):
    """Gives a transient between producer and consumer maps two buffers,
    toggled by the enclosing loop iteration."""

    name = "DoubleBuffering"

    def expressions(self):
        return [path_pattern(PatternNode("producer_exit", (MapExit,)),
                             PatternNode("buffer", (AccessNode,)),
                             PatternNode("consumer_entry", (MapEntry,)))]

    def can_be_applied(self, sdfg, state, match, strict=False):
        buf: AccessNode = self.node(state, match, "buffer")
        desc = sdfg.data.get(buf.data)
        if desc is None or not desc.transient or desc.kind != "array":
            return False
        if len(_occurrences(sdfg, buf.data)) != 1:
            return False
        return loop_of_body(sdfg, state.name) is not None

    def apply(self, sdfg, state, match, params):
        buf: AccessNode = self.node(state, match, "buffer")
        loop = loop_of_body(sdfg, state.name)
        desc = sdfg.data[buf.data]
        desc.dims = (Num(2),) + tuple(desc.dims)
        toggle = _fresh_name(sdfg, f"{buf.data}_db")
        for t in sdfg.transitions:
            if t.dst == state.name:
                t.assignments.append(
                    (toggle, simplify(Bin("%", Sym(loop.var), Num(2)))))
        lead = SymRange(Sym(toggle), Sym(toggle))
        for e in state.edges:
            m = e.memlet
            if m.is_empty or m.data != buf.data:
                continue
            m.subset = Subset((lead,) + tuple(m.subset.ranges))
            if m.reindex is not None:
                m.reindex = Subset((SymRange(ZERO, ZERO),) + tuple(m.reindex.ranges))
            m.propagated_subset = None
            m.propagated_accesses = None


@register
class LocalStorage(Transformation):
    """Caches the data an inner scope reads from one container in a new
    transient between two map levels; interior reads are reindexed relative
    to the tile origin."""

    name = "LocalStorage"
    default_params = {"data": ""}

    def expressions(self):
        return [Pattern([PatternNode("outer", (MapEntry,)),
                         PatternNode("inner", (MapEntry,))],
                        [("outer", "inner")])]

    def _candidates(self, sdfg, state, match) -> list[str]:
        outer = state.nodes[match.nodes["outer"]]
        inner = state.nodes[match.nodes["inner"]]
        out = []
        for e in state.edges:
            if e.src == outer.id and e.dst == inner.id \
                    and not e.memlet.is_empty and e.memlet.wcr is None \
                    and sdfg.data[e.memlet.data].kind == "array":
                out.append(e.memlet.data)
        return sorted(set(out))

    def can_be_applied(self, sdfg, state, match, strict=False):
        inner = state.nodes[match.nodes["inner"]]
        outer = state.nodes[match.nodes["outer"]]
        tree = state.scope_of()
        if tree.parent.get(inner.id) != outer.id:
            return False
        return bool(self._candidates(sdfg, state, match))

    def apply(self, sdfg, state, match, params):
        outer: MapEntry = self.node(state, match, "outer")
        inner: MapEntry = self.node(state, match, "inner")
        choices = self._candidates(sdfg, state, match)
        data = params["data"] or choices[0]
        if data not in choices:
            raise ValueError(f"'{data}' is not cacheable here; options: {choices}")
        desc = sdfg.data[data]
        region, _ = connector_requirement(sdfg, state, inner.id, f"IN_{data}")
        extents = [
            _extent_upper_bound(simplify(Bin("+", Bin("-", r.end, r.begin), ONE)))
            for r in region.ranges
        ]
        local = _fresh_name(sdfg, f"local_{data}")
        sdfg.add_array(local, extents, desc.basetype, transient=True)

        acc = state.add_access(local)
        # destination indices follow the actual (possibly clamped) extent;
        # the allocation above uses its upper bound
        copy_reindex = Subset(tuple(
            SymRange(ZERO, simplify(Bin("-", r.end, r.begin)))
            for r in region.ranges))
        boundary = next(e for e in state.edges
                        if e.src == outer.id and e.dst == inner.id
                        and not e.memlet.is_empty and e.memlet.data == data)
        state.add_edge(outer.id, boundary.src_conn, acc, None,
                       Memlet(data=data, subset=region, reindex=copy_reindex,
                              accesses=accesses_expr(region)))
        state.add_edge(acc, None, inner.id, f"IN_{local}", AutoMemlet(local))
        state.remove_edge(boundary)
        inner.ins.discard(f"IN_{data}")
        inner.outs.discard(f"OUT_{data}")
        inner.ins.add(f"IN_{local}")
        inner.outs.add(f"OUT_{local}")
        origin = [r.begin for r in region.ranges]
        for e in state.out_edges(inner.id):
            if e.memlet.is_empty or e.memlet.data != data:
                continue
            e.src_conn = f"OUT_{local}"
            shifted = tuple(
                SymRange(simplify(Bin("-", r.begin, o)),
                         simplify(Bin("-", r.end, o)), r.stride, r.tilesize)
                for r, o in zip(e.memlet.subset.ranges, origin))
            e.memlet = Memlet(data=local, subset=Subset(shifted),
                              accesses=e.memlet.accesses)
        fill_auto_memlets(sdfg)


@register
class LocalStream(Transformation):
    """Accumulates pushes from inside a map into a local transient stream,
    draining it into the global stream once per instance."""

    name = "LocalStream"

    def expressions(self):
        return [path_pattern(PatternNode("mexit", (MapExit,)),
                             PatternNode("stream", (AccessNode,)))]

    def can_be_applied(self, sdfg, state, match, strict=False):
        stream: AccessNode = self.node(state, match, "stream")
        desc = sdfg.data.get(stream.data)
        if desc is None or desc.kind != "stream":
            return False
        mexit: MapExit = self.node(state, match, "mexit")
        boundary = [e for e in state.out_edges(mexit.id)
                    if e.dst == stream.id and e.dst_conn == "push"]
        return len(boundary) == 1

    def apply(self, sdfg, state, match, params):
        stream: AccessNode = self.node(state, match, "stream")
        mexit: MapExit = self.node(state, match, "mexit")
        desc = sdfg.data[stream.data]
        local = _fresh_name(sdfg, f"local_{stream.data}")
        sdfg.add_stream(local, desc.basetype, dims=[1], transient=True)
        acc = state.add_access(local)
        conn = f"IN_{stream.data}"
        for e in list(state.in_edges(mexit.id)):
            if e.dst_conn == conn:
                e.dst = acc
                e.dst_conn = "push"
                e.memlet = Memlet.simple(local, "[0]", dynamic=True)
        state.add_edge(acc, "pop", mexit.id, conn,
                       Memlet.simple(local, "[0]", dynamic=True))


@register
class Vectorization(Transformation):
    """Widens the innermost map stride and marks its per-instance memlets
    with a vector tile size; element volume is unchanged."""

    name = "Vectorization"
    default_params = {"width": 4}

    def expressions(self):
        return [Pattern([PatternNode("map", (MapEntry,))])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        entry: MapEntry = self.node(state, match, "map")
        if len(entry.params) != 1 or entry.dynamic_range_connectors():
            return False
        try:
            tree = state.scope_of()
        except Exception:
            return False
        for child in tree.children.get(entry.id, []):
            node = state.nodes[child]
            if isinstance(node, ENTRY_NODES):
                return False
            if isinstance(node, Tasklet) and node.program.has_branches:
                return False
        r = entry.ranges[0]
        if str(r.stride) != "1":
            return False
        length = simplify(Bin("+", Bin("-", r.end, r.begin), ONE))
        if not isinstance(length, Num):
            return False
        param = entry.params[0]
        exit_id = tree.exits[entry.id]
        for e in state.edges:
            adjacent = e.src == entry.id or e.dst == exit_id
            if not adjacent or e.memlet.is_empty:
                continue
            if e.memlet.wcr is not None:
                return False
            sub = e.memlet.subset
            if param not in sub.free_symbols():
                continue
            last = sub.ranges[-1]
            if str(simplify(Bin("-", last.end, last.begin))) != "0":
                return False
            if param in (free_symbols(last.stride) | free_symbols(last.tilesize)):
                return False
            split = linear_split(last.begin, param)
            if split is None or str(split[0]) != "1":
                return False
            for other in sub.ranges[:-1]:
                if param in other.free_symbols():
                    return False
        return True

    def apply(self, sdfg, state, match, params):
        entry: MapEntry = self.node(state, match, "map")
        width = int(params["width"])
        r = entry.ranges[0]
        length = simplify(Bin("+", Bin("-", r.end, r.begin), ONE))
        if not isinstance(length, Num) or length.value % width != 0:
            raise ValueError(
                f"range length {length} is not divisible by the vector "
                f"width {width}")
        entry.ranges[0] = SymRange(r.begin, r.end, Num(width))
        param = entry.params[0]
        tree = state.scope_of()
        exit_id = tree.exits[entry.id]
        for e in state.edges:
            if (e.src != entry.id and e.dst != exit_id) or e.memlet.is_empty:
                continue
            sub = e.memlet.subset
            if param not in sub.free_symbols():
                continue
            last = sub.ranges[-1]
            new_last = SymRange(last.begin, last.end, ONE, Num(width))
            e.memlet.subset = Subset(tuple(sub.ranges[:-1]) + (new_last,))
            e.memlet.accesses = accesses_expr(e.memlet.subset)


# --------------------------------------------------------------------------
# control-flow transformations
# --------------------------------------------------------------------------

@register
class MapToForLoop(Transformation):
    """Converts a single-parameter top-level map into a guarded state loop."""

    name = "MapToForLoop"

    def expressions(self):
        return [Pattern([PatternNode("map", (MapEntry,))])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        entry: MapEntry = self.node(state, match, "map")
        if len(entry.params) != 1 or entry.dynamic_range_connectors():
            return False
        try:
            tree = state.scope_of()
        except Exception:
            return False
        if tree.parent.get(entry.id) is not None:
            return False
        exit_id = tree.exits[entry.id]
        scope_nodes = set(tree.children.get(entry.id, [])) | {entry.id, exit_id}
        for n in tree.children.get(None, []):
            if n == entry.id:
                continue
            if not isinstance(state.nodes[n], AccessNode):
                return False
            for e in state.out_edges(n) + state.in_edges(n):
                if e.src not in scope_nodes | {n} or e.dst not in scope_nodes | {n}:
                    return False
        param = entry.params[0]
        assigned = {a for t in sdfg.transitions for a, _ in t.assignments}
        return param not in assigned and param not in sdfg.symbols

    def apply(self, sdfg, state, match, params):
        entry: MapEntry = self.node(state, match, "map")
        tree = state.scope_of()
        exit_id = tree.exits[entry.id]
        param = entry.params[0]
        rng = entry.ranges[0]

        # splice the scope body to the top level: interior memlets connect
        # straight to the boundary access nodes
        for ie in list(state.out_edges(entry.id)):
            suffix = ie.src_conn[4:] if ie.src_conn else None
            boundary = next((b for b in state.in_edges(entry.id)
                             if suffix and b.dst_conn == f"IN_{suffix}"), None)
            if boundary is None:
                state.remove_edge(ie)  # ordering-only edge; the loop serializes
                continue
            ie.src = boundary.src
            ie.src_conn = boundary.src_conn
        for oe in list(state.in_edges(exit_id)):
            suffix = oe.dst_conn[3:] if oe.dst_conn else None
            boundary = next((b for b in state.out_edges(exit_id)
                             if suffix and b.src_conn == f"OUT_{suffix}"), None)
            if boundary is None:
                state.remove_edge(oe)
                continue
            oe.dst = boundary.dst
            oe.dst_conn = boundary.dst_conn
        _remove_node_and_edges(state, entry.id)
        _remove_node_and_edges(state, exit_id)

        guard_name = f"{state.name}_guard"
        i = 0
        while sdfg.state(guard_name) is not None:
            guard_name = f"{state.name}_guard_{i}"
            i += 1
        sdfg.add_state(guard_name)
        was_start = sdfg.start_state == state.name
        for t in sdfg.transitions:
            if t.dst == state.name:
                t.dst = guard_name
                t.assignments.append((param, rng.begin))
        after_loop = [t for t in sdfg.out_transitions(state.name)]
        for t in after_loop:
            t.src = guard_name
        loop_edge = sdfg.add_transition(guard_name, state.name,
                                        condition=Cmp("<=", Sym(param), rng.end))
        # the loop-entry condition is evaluated before any post-loop exits
        sdfg.transitions.remove(loop_edge)
        insert_at = sdfg.transitions.index(after_loop[0]) if after_loop else \
            len(sdfg.transitions)
        sdfg.transitions.insert(insert_at, loop_edge)
        sdfg.add_transition(state.name, guard_name, assignments=[
            (param, simplify(Bin("+", Sym(param), rng.stride)))])
        if was_start:
            # a start state cannot carry the init assignment; hop through a
            # fresh empty entry state
            pre = sdfg.add_state(_fresh_state_name(sdfg, "entry"))
            sdfg.add_transition(pre, guard_name, assignments=[(param, rng.begin)])
            sdfg.start_state = pre.name


@register
class RedundantArray(Transformation):
    """Removes a transient copied to another array and used nowhere else;
    incoming dataflow is repointed at the copy target."""

    name = "RedundantArray"
    strict = True

    def expressions(self):
        return [path_pattern(PatternNode("in_array", (AccessNode,)),
                             PatternNode("out_array", (AccessNode,)))]

    def can_be_applied(self, sdfg, state, match, strict=False):
        in_array: AccessNode = self.node(state, match, "in_array")
        out_array: AccessNode = self.node(state, match, "out_array")
        in_desc = sdfg.data.get(in_array.data)
        out_desc = sdfg.data.get(out_array.data)
        if in_desc is None or out_desc is None or in_desc is out_desc:
            return False
        # only one consumer: the copy target
        if state.out_degree(in_array.id) != 1:
            return False
        if not in_desc.transient:
            return False
        if in_desc.storage != out_desc.storage:
            return False
        # no other instances of this container anywhere
        if len(_occurrences(sdfg, in_array.data)) > 1:
            return False
        if strict and in_desc.rank != out_desc.rank:
            return False
        if strict and any(str(simplify(a)) != str(simplify(b))
                          for a, b in zip(in_desc.dims, out_desc.dims)):
            return False
        return True

    def apply(self, sdfg, state, match, params):
        in_array: AccessNode = self.node(state, match, "in_array")
        out_array: AccessNode = self.node(state, match, "out_array")
        in_name, out_name = in_array.data, out_array.data
        copy_edges = [e for e in state.out_edges(in_array.id)]
        for e in list(state.in_edges(in_array.id)):
            for pe in _memlet_path(state, e):
                if not pe.memlet.is_empty and pe.memlet.data == in_name:
                    pe.memlet.data = out_name
            e.dst = out_array.id
            e.dst_conn = None
        for e in copy_edges:
            state.remove_edge(e)
        state.remove_node(in_array.id)
        if not _occurrences(sdfg, in_name):
            del sdfg.data[in_name]


@register
class StateFusion(Transformation):
    """Fuses two states joined by a single unconditional transition when
    their dataflow is hazard-free."""

    name = "StateFusion"
    scope = "stateflow"
    strict = True

    def expressions(self):
        return [Pattern([PatternNode("first"), PatternNode("second")],
                        [("first", "second")])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        first = sdfg.states[match.nodes["first"]]
        second = sdfg.states[match.nodes["second"]]
        links = [t for t in sdfg.transitions
                 if t.src == first.name and t.dst == second.name]
        if len(links) != 1:
            return False
        link = links[0]
        if link.condition != ONE or link.assignments:
            return False
        if len(sdfg.out_transitions(first.name)) != 1:
            return False
        if len(sdfg.in_transitions(second.name)) != 1:
            return False
        r1, w1 = _state_reads_writes(first)
        r2, w2 = _state_reads_writes(second)
        if (w1 & (r2 | w2)) or (r1 & w2):
            return False
        return True

    def apply(self, sdfg, state, match, params):
        first = sdfg.states[match.nodes["first"]]
        second = sdfg.states[match.nodes["second"]]
        remap: dict[int, int] = {}
        for old_id in second.node_ids():
            node = second.nodes[old_id]
            remap[old_id] = first.add_node(node)
        for new_id in remap.values():
            node = first.nodes[new_id]
            if isinstance(node, EXIT_NODES):
                node.entry = remap[node.entry]
        for e in second.edges:
            first.add_edge(remap[e.src], e.src_conn, remap[e.dst], e.dst_conn,
                           e.memlet)
        sdfg.transitions = [t for t in sdfg.transitions
                            if not (t.src == first.name
                                    and t.dst == second.name)]
        for t in sdfg.transitions:
            if t.src == second.name:
                t.src = first.name
        sdfg.states.remove(second)


@register
class InlineSDFG(Transformation):
    """Splices a single-state nested graph into its parent state, remapping
    containers and symbols."""

    name = "InlineSDFG"
    strict = True

    def expressions(self):
        return [Pattern([PatternNode("nested", (NestedSdfg,))])]

    def can_be_applied(self, sdfg, state, match, strict=False):
        nested: NestedSdfg = self.node(state, match, "nested")
        inner = nested.sdfg
        if len(inner.states) != 1 or inner.transitions:
            return False
        mapping = nested.symbol_mapping
        for e in list(state.in_edges(nested.id)) + list(state.out_edges(nested.id)):
            if e.memlet.is_empty:
                continue
            conn = e.dst_conn if e.dst == nested.id else e.src_conn
            if conn not in inner.data:
                return False
            idesc = inner.data[conn]
            odesc = sdfg.data.get(e.memlet.data)
            if odesc is None or e.memlet.reindex is not None:
                return False
            inner_dims = [str(simplify(substitute(d, mapping))) for d in idesc.dims]
            if inner_dims != [str(simplify(d)) for d in odesc.dims]:
                return False
            full = Subset(tuple(SymRange(ZERO, simplify(Bin("-", d, ONE)))
                                for d in odesc.dims))
            if str(e.memlet.subset.simplified()) != str(full):
                return False
        return True

    def apply(self, sdfg, state, match, params):
        nested: NestedSdfg = self.node(state, match, "nested")
        inner = nested.sdfg
        inner_state = inner.states[0]
        mapping = dict(nested.symbol_mapping)

        rename: dict[str, str] = {}
        for e in state.in_edges(nested.id):
            if not e.memlet.is_empty:
                rename[e.dst_conn] = e.memlet.data
        for e in state.out_edges(nested.id):
            if not e.memlet.is_empty:
                rename.setdefault(e.src_conn, e.memlet.data)
        for name, desc in inner.data.items():
            if name in rename:
                continue
            fresh = _fresh_name(sdfg, f"{inner.name}_{name}")
            rename[name] = fresh
            dims = [simplify(substitute(d, mapping)) for d in desc.dims]
            if desc.kind == "array":
                sdfg.add_array(fresh, dims, desc.basetype, transient=True)
            else:
                sdfg.add_stream(fresh, desc.basetype, dims=dims)

        remap: dict[int, int] = {}
        for old_id in inner_state.node_ids():
            node = inner_state.nodes[old_id]
            if isinstance(node, AccessNode):
                node.data = rename[node.data]
            if isinstance(node, MapEntry):
                node.ranges = [r.subs(mapping) for r in node.ranges]
            if isinstance(node, ConsumeEntry):
                node.num_pes = simplify(substitute(node.num_pes, mapping))
                node.condition = simplify(substitute(node.condition, mapping))
            if isinstance(node, NestedSdfg):
                node.symbol_mapping = {
                    k: simplify(substitute(v, mapping))
                    for k, v in node.symbol_mapping.items()}
            remap[old_id] = state.add_node(node)
        for node in inner_state.nodes.values():
            if isinstance(node, EXIT_NODES):
                node.entry = remap[node.entry]
        spliced_edges = []
        for e in inner_state.edges:
            m = e.memlet
            if not m.is_empty:
                m.data = rename[m.data]
                m.subset = m.subset.subs(mapping)
                if m.reindex is not None:
                    m.reindex = m.reindex.subs(mapping)
                if m.accesses is not None:
                    m.accesses = simplify(substitute(m.accesses, mapping))
            spliced_edges.append(state.add_edge(
                remap[e.src], e.src_conn, remap[e.dst], e.dst_conn, m))

        sources = {}
        sinks = {}
        for old_id, new_id in remap.items():
            node = state.nodes[new_id]
            if not isinstance(node, AccessNode):
                continue
            if all(e.src not in remap.values() for e in state.in_edges(new_id)):
                sources.setdefault(node.data, []).append(new_id)
            if all(e.dst not in remap.values() for e in state.out_edges(new_id)):
                sinks.setdefault(node.data, []).append(new_id)

        for e in list(state.in_edges(nested.id)):
            if not e.memlet.is_empty:
                for nid in sources.get(e.memlet.data, []):
                    state.add_edge(e.src, None, nid, None, Memlet.empty())
            state.remove_edge(e)
        for e in list(state.out_edges(nested.id)):
            if not e.memlet.is_empty:
                for nid in sinks.get(e.memlet.data, []):
                    state.add_edge(nid, None, e.dst, None, Memlet.empty())
            state.remove_edge(e)
        state.remove_node(nested.id)


def _fresh_state_name(sdfg: Sdfg, base: str) -> str:
    name = base
    i = 0
    while sdfg.state(name) is not None:
        name = f"{base}_{i}"
        i += 1
    return name
