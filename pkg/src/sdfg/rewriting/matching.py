"""Subgraph isomorphism for transformation patterns, VF2-style.

Patterns are small node-kind-constrained digraph templates (wildcards
allowed).  An embedding maps every pattern node to a distinct graph node
such that every pattern edge has at least one corresponding graph edge;
candidate pairs grow from the terminal sets of the partial mapping with
pred/succ consistency checks, as in VF2.  Enumeration order is
deterministic: embeddings come out sorted by their mapped ids in pattern
node order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from ..ir import Node, SdfgState


@dataclass
class PatternNode:
    name: str
    kinds: Optional[tuple[type, ...]] = None  # None matches any node kind
    predicate: Optional[Callable] = None  # (graph_adapter, node_id) -> bool

    def admits(self, graph: "GraphAdapter", node_id) -> bool:
        if self.kinds is not None and not isinstance(graph.node_of(node_id),
                                                     self.kinds):
            return False
        if self.predicate is not None and not self.predicate(graph, node_id):
            return False
        return True


@dataclass
class Pattern:
    nodes: list[PatternNode]
    edges: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        names = [n.name for n in self.nodes]
        if len(names) != len(set(names)):
            raise ValueError("pattern node names must be unique")
        self._index = {n.name: i for i, n in enumerate(self.nodes)}
        self._succ: dict[int, set[int]] = {i: set() for i in range(len(self.nodes))}
        self._pred: dict[int, set[int]] = {i: set() for i in range(len(self.nodes))}
        for u, v in self.edges:
            self._succ[self._index[u]].add(self._index[v])
            self._pred[self._index[v]].add(self._index[u])


def path_pattern(*nodes: PatternNode) -> Pattern:
    edges = [(a.name, b.name) for a, b in zip(nodes, nodes[1:])]
    return Pattern(list(nodes), edges)


class GraphAdapter:
    """Uniform digraph view for the matcher: dataflow states and the
    top-level state machine both fit behind it."""

    def node_ids(self) -> list:
        raise NotImplementedError

    def node_of(self, node_id):
        raise NotImplementedError

    def succs(self, node_id) -> set:
        raise NotImplementedError

    def preds(self, node_id) -> set:
        raise NotImplementedError

    def has_edge(self, u, v) -> bool:
        return v in self.succs(u)


class StateGraph(GraphAdapter):
    def __init__(self, state: SdfgState):
        self.state = state
        self._succ: dict[int, set[int]] = {n: set() for n in state.nodes}
        self._pred: dict[int, set[int]] = {n: set() for n in state.nodes}
        for e in state.edges:
            self._succ[e.src].add(e.dst)
            self._pred[e.dst].add(e.src)

    def node_ids(self):
        return sorted(self.state.nodes)

    def node_of(self, node_id) -> Node:
        return self.state.nodes[node_id]

    def succs(self, node_id):
        return self._succ[node_id]

    def preds(self, node_id):
        return self._pred[node_id]


class StateMachineGraph(GraphAdapter):
    """States as nodes (identified by index in declaration order)."""

    def __init__(self, sdfg):
        self.sdfg = sdfg
        names = sdfg.state_names()
        self._by_name = {name: i for i, name in enumerate(names)}
        self._succ: dict[int, set[int]] = {i: set() for i in range(len(names))}
        self._pred: dict[int, set[int]] = {i: set() for i in range(len(names))}
        for t in sdfg.transitions:
            u, v = self._by_name[t.src], self._by_name[t.dst]
            self._succ[u].add(v)
            self._pred[v].add(u)

    def node_ids(self):
        return list(range(len(self.sdfg.states)))

    def node_of(self, node_id):
        return self.sdfg.states[node_id]

    def succs(self, node_id):
        return self._succ[node_id]

    def preds(self, node_id):
        return self._pred[node_id]


def find_embeddings(pattern: Pattern, graph: GraphAdapter) -> list[dict[str, int]]:
    """All injective embeddings of the pattern, deterministically ordered."""
    n = len(pattern.nodes)
    results: list[tuple] = []
    core: list[Optional[int]] = [None] * n
    used: set = set()

    def candidates(i: int) -> Iterator:
        # VF2 candidate-pair generation: prefer nodes adjacent to the
        # already-mapped frontier, in ascending id order
        frontier: set = set()
        for j in range(i):
            g = core[j]
            if i in pattern._succ[j]:
                frontier |= graph.succs(g)
            if i in pattern._pred[j]:
                frontier |= graph.preds(g)
        pool = frontier if frontier else set(graph.node_ids())
        return iter(sorted(p for p in pool if p not in used))

    def feasible(i: int, g) -> bool:
        if not pattern.nodes[i].admits(graph, g):
            return False
        # consistency: every pattern edge touching i and a mapped node must be
        # mirrored in the graph
        for j in range(i):
            if i in pattern._succ[j] and not graph.has_edge(core[j], g):
                return False
            if i in pattern._pred[j] and not graph.has_edge(g, core[j]):
                return False
        # look-ahead: g needs enough distinct neighbors for i's pattern degree
        if len(graph.succs(g)) < len(pattern._succ[i]):
            return False
        if len(graph.preds(g)) < len(pattern._pred[i]):
            return False
        return True

    def search(i: int) -> None:
        if i == n:
            results.append(tuple(core))
            return
        for g in candidates(i):
            if feasible(i, g):
                core[i] = g
                used.add(g)
                search(i + 1)
                used.discard(g)
                core[i] = None

    search(0)
    results.sort()
    return [{pattern.nodes[i].name: mapping[i] for i in range(n)}
            for mapping in results]
