"""Memlet propagation: compute scope-level data requirements from interior
memlets, working outwards.

The rule per scope connector pair: the boundary requirement is the image of
the scope parameters applied to the union of the interior memlet subsets on
that connector.  Its volume is the interior volume times the range
cardinality when both are static; a data-dependent range or a volume that
varies with the eliminated parameter makes it dynamic.

``propagate_memlets`` annotates boundary edges (authored memlets are left
untouched for round-tripping); ``fill_auto_memlets`` uses the same
computation to resolve the placeholders ``add_memlet_path`` leaves behind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ir import (
    AutoMemlet,
    ConsumeEntry,
    DataflowEdge,
    ENTRY_NODES,
    EXIT_NODES,
    GraphError,
    MapEntry,
    Memlet,
    Sdfg,
    SdfgState,
    WcrFunc,
)
from .symbolic import (
    Bin,
    Expr,
    Num,
    ONE,
    Subset,
    SymRange,
    free_symbols,
    simplify,
    subset_image,
    subset_union,
)


@dataclass
class PropagationWarning:
    state: str
    edge: int
    message: str


@dataclass
class _Requirement:
    subset: Optional[Subset]
    accesses: Optional[Expr]  # None = dynamic
    wcr: Optional[WcrFunc]
    notes: list[str]


def _full_subset(sdfg: Sdfg, data: str) -> Subset:
    desc = sdfg.data[data]
    return Subset(tuple(SymRange(Num(0), simplify(Bin("-", d, ONE)))
                        for d in desc.dims))


def _interior_edges(state: SdfgState, node_id: int, connector: str,
                    entry_side: bool) -> list[DataflowEdge]:
    if entry_side:
        out_name = "OUT_" + connector[3:]
        return [e for e in state.out_edges(node_id) if e.src_conn == out_name]
    in_name = "IN_" + connector[4:]
    return [e for e in state.in_edges(node_id) if e.dst_conn == in_name]


def _scope_requirement(sdfg: Sdfg, state: SdfgState, scope_node, interior:
                       list[DataflowEdge]) -> _Requirement:
    notes: list[str] = []
    live = [e.memlet for e in interior if not e.memlet.is_empty]
    if not live:
        return _Requirement(None, None, None, notes)
    data = live[0].data
    if any(m.data != data for m in live):
        raise GraphError(
            f"connector mixes containers {sorted({m.data for m in live})} "
            f"in state '{state.name}'")
    subset = live[0].subset
    for m in live[1:]:
        subset = subset_union(subset, m.subset)
    dynamic = any(m.accesses is None for m in live)
    acc: Optional[Expr] = None
    if not dynamic:
        acc = Num(0)
        for m in live:
            acc = Bin("+", acc, m.accesses)
        acc = simplify(acc)
    wcrs = {m.wcr.kind if m.wcr else None for m in live}
    wcr = live[0].wcr if len(wcrs) == 1 else None

    dims = sdfg.data[data].dims
    if isinstance(scope_node, MapEntry):
        params = list(zip(scope_node.params, scope_node.ranges))
    else:  # consume: one worker-index parameter, volume always dynamic
        params = [(scope_node.param, SymRange(Num(0),
                   simplify(Bin("-", scope_node.num_pes, ONE))))]
        acc = None
    dyn_conns = (scope_node.dynamic_range_connectors()
                 if isinstance(scope_node, MapEntry) else {"IN_stream"})
    # eliminate parameters innermost-out, one at a time
    for param, prange in reversed(params):
        range_syms = (free_symbols(prange.begin) | free_symbols(prange.end)
                      | free_symbols(prange.stride))
        if range_syms & dyn_conns:
            # data-dependent range: bounds unknowable statically
            subset = _full_subset(sdfg, data)
            acc = None
            notes.append(f"data-dependent range for '{param}': "
                         f"full-container fallback")
            break
        subset, flags = subset_image(param, prange, subset, dims=dims)
        notes.extend(flags)
        if acc is not None:
            if param in free_symbols(acc):
                acc = None  # volume varies across instances
            else:
                acc = simplify(Bin("*", acc, prange.count_expr()))
    subset = subset.simplified()
    return _Requirement(subset, acc, wcr, notes)


def _scopes_by_depth(state: SdfgState):
    tree = state.scope_of()

    def depth(entry: Optional[int]) -> int:
        d = 0
        while entry is not None:
            entry = tree.parent[entry]
            d += 1
        return d

    entries = [n for n in state.nodes if isinstance(state.nodes[n], ENTRY_NODES)]
    entries.sort(key=lambda n: (-depth(n), n))
    return tree, entries


def _boundary_edges(state: SdfgState, entry: int, exit_: int):
    """Yield (edge, scope_node, interior_edges) for each boundary edge."""
    entry_node = state.nodes[entry]
    for e in state.in_edges(entry):
        if e.dst_conn and e.dst_conn.startswith("IN_"):
            yield e, entry_node, _interior_edges(state, entry, e.dst_conn, True)
    for e in state.out_edges(exit_):
        if e.src_conn and e.src_conn.startswith("OUT_"):
            yield e, entry_node, _interior_edges(state, exit_, e.src_conn, False)


def fill_auto_memlets(sdfg: Sdfg) -> None:
    """Resolve AutoMemlet placeholders on scope boundaries, innermost first."""
    for state in sdfg.states:
        if not any(isinstance(e.memlet, AutoMemlet) for e in state.edges):
            continue
        tree, entries = _scopes_by_depth(state)
        for entry in entries:
            exit_ = tree.exits[entry]
            for edge, scope_node, interior in _boundary_edges(state, entry, exit_):
                if not isinstance(edge.memlet, AutoMemlet):
                    continue
                if any(isinstance(ie.memlet, AutoMemlet) for ie in interior):
                    raise GraphError(
                        f"unresolved interior memlet under scope {entry} "
                        f"in state '{state.name}'")
                req = _scope_requirement(sdfg, state, scope_node, interior)
                if req.subset is None:
                    edge.memlet = Memlet.empty()
                else:
                    edge.memlet = Memlet(data=edge.memlet.data, subset=req.subset,
                                         accesses=req.accesses, wcr=req.wcr)
        remaining = [e for e in state.edges if isinstance(e.memlet, AutoMemlet)]
        if remaining:
            raise GraphError(
                f"auto-memlets without a scope boundary in state '{state.name}': "
                f"edges {[e.id for e in remaining]}")


def connector_requirement(sdfg: Sdfg, state: SdfgState, entry_id: int,
                          connector: str) -> tuple[Subset, Optional[Expr]]:
    """Aggregate requirement of one scope connector: the image of the scope
    parameters over the union of its interior memlets.  Returns (subset,
    accesses); accesses is None when dynamic."""
    entry = state.nodes[entry_id]
    interior = _interior_edges(state, entry_id, connector, True) \
        if connector.startswith("IN_") else \
        _interior_edges(state, state.scope_of().exits[entry_id], connector, False)
    req = _scope_requirement(sdfg, state, entry, interior)
    if req.subset is None:
        raise GraphError(f"connector '{connector}' has no interior memlets")
    return req.subset, req.accesses


def propagate_memlets(sdfg: Sdfg) -> list[PropagationWarning]:
    """Annotate every scope-boundary memlet with its propagated requirement.

    Authored subsets are preserved; the computed aggregate lands in
    ``propagated_subset``/``propagated_accesses``.  Falls back to the full
    container (with a warning) where bounds are not statically known.
    """
    warnings: list[PropagationWarning] = []
    for state in sdfg.states:
        tree, entries = _scopes_by_depth(state)
        for entry in entries:
            exit_ = tree.exits[entry]
            for edge, scope_node, interior in _boundary_edges(state, entry, exit_):
                if edge.memlet.is_empty:
                    continue
                req = _scope_requirement(sdfg, state, scope_node, interior)
                if req.subset is None:
                    continue
                edge.memlet.propagated_subset = req.subset
                edge.memlet.propagated_accesses = req.accesses
                for note in req.notes:
                    warnings.append(PropagationWarning(state.name, edge.id, note))
    for nested in sdfg.nested_sdfgs():
        warnings.extend(propagate_memlets(nested))
    return warnings
