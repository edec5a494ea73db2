"""Transformation framework: rule metadata, match discovery, single-pushout
style application on persistent snapshots, the strict fixpoint pass, and
journal replay.

A rule is a pattern subgraph L, applicability conditions beyond structure,
and a procedural replacement; a match is a concrete injective embedding of
L.  ``apply_transformation`` never mutates its input: it re-checks the
match, rewrites a deep copy, and returns it with a replayable journal
entry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from ..ir import Node, Sdfg, SdfgState
from .matching import (
    GraphAdapter,
    Pattern,
    StateGraph,
    StateMachineGraph,
    find_embeddings,
)


class StaleMatchError(RuntimeError):
    pass


class ReplayError(RuntimeError):
    pass


class TransformationError(RuntimeError):
    pass


@dataclass
class Match:
    transformation: str
    state: Optional[str]  # None for state-machine scope matches
    nodes: dict[str, int]
    expr_index: int = 0

    def anchor_digest(self, sdfg: Sdfg) -> str:
        labels = {}
        for pname, node_id in sorted(self.nodes.items()):
            if self.state is None:
                labels[pname] = [node_id, "state", sdfg.states[node_id].name]
            else:
                node = sdfg.state(self.state).nodes.get(node_id)
                labels[pname] = [node_id, type(node).__name__,
                                 node.label() if node else "?"]
        blob = json.dumps({"t": self.transformation, "s": self.state,
                           "n": labels}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def describe(self, sdfg: Sdfg) -> str:
        where = self.state if self.state is not None else "<states>"
        parts = []
        for pname, node_id in sorted(self.nodes.items()):
            if self.state is None:
                parts.append(f"{pname}={sdfg.states[node_id].name}")
            else:
                node = sdfg.state(self.state).nodes[node_id]
                parts.append(f"{pname}={node_id}({node.label()})")
        return f"{self.transformation} in {where}: {', '.join(parts)}"

    def to_json(self, sdfg: Optional[Sdfg] = None) -> dict:
        doc = {"transformation": self.transformation, "state": self.state,
               "anchors": dict(sorted(self.nodes.items())),
               "expr_index": self.expr_index}
        if sdfg is not None:
            doc["digest"] = self.anchor_digest(sdfg)
        return doc


class Transformation:
    """Base rule: subclasses define the pattern, the applicability check,
    and the rewrite."""

    name: str = ""
    scope: str = "dataflow"  # or "stateflow"
    strict: bool = False
    default_params: dict[str, Any] = {}

    def expressions(self) -> list[Pattern]:
        raise NotImplementedError

    def can_be_applied(self, sdfg: Sdfg, state: Optional[SdfgState],
                       match: Match, strict: bool = False) -> bool:
        raise NotImplementedError

    def apply(self, sdfg: Sdfg, state: Optional[SdfgState], match: Match,
              params: dict[str, Any]) -> None:
        raise NotImplementedError

    # -- helpers shared by library rules ---------------------------------

    def node(self, state: SdfgState, match: Match, pname: str) -> Node:
        return state.nodes[match.nodes[pname]]


registry: dict[str, Transformation] = {}


def register(cls):
    instance = cls()
    if not instance.name:
        instance.name = cls.__name__
    registry[instance.name] = instance
    return cls


def get_transformation(name: str) -> Transformation:
    if name not in registry:
        raise TransformationError(
            f"unknown transformation '{name}'; registered: "
            f"{', '.join(sorted(registry))}")
    return registry[name]


def find_pattern_matches(t: Transformation, sdfg: Sdfg) -> list[Match]:
    """All injective embeddings of the rule's patterns, unchecked."""
    out: list[Match] = []
    for expr_index, pattern in enumerate(t.expressions()):
        if t.scope == "stateflow":
            for emb in find_embeddings(pattern, StateMachineGraph(sdfg)):
                out.append(Match(t.name, None, emb, expr_index))
        else:
            for state in sdfg.states:
                for emb in find_embeddings(pattern, StateGraph(state)):
                    out.append(Match(t.name, state.name, emb, expr_index))
    return out


def find_matches(sdfg: Sdfg, transformation: Optional[str] = None,
                 strict: bool = False) -> list[Match]:
    """Applicable matches in deterministic order (state order, then node-id
    lexicographic); filtered through each rule's ``can_be_applied``."""
    names = [transformation] if transformation else sorted(registry)
    out: list[Match] = []
    for name in names:
        t = get_transformation(name)
        for m in find_pattern_matches(t, sdfg):
            state = sdfg.state(m.state) if m.state is not None else None
            if t.can_be_applied(sdfg, state, m, strict=strict):
                out.append(m)
    return out


def _match_still_valid(t: Transformation, sdfg: Sdfg, match: Match,
                       strict: bool = False) -> bool:
    if match.state is None:
        if any(i >= len(sdfg.states) for i in match.nodes.values()):
            return False
        state = None
    else:
        state = sdfg.state(match.state)
        if state is None or any(i not in state.nodes for i in match.nodes.values()):
            return False
    pattern = t.expressions()[match.expr_index]
    graph: GraphAdapter = (StateMachineGraph(sdfg) if match.state is None
                           else StateGraph(state))
    byname = {p.name: p for p in pattern.nodes}
    for pname, node_id in match.nodes.items():
        if pname not in byname or not byname[pname].admits(graph, node_id):
            return False
    for u, v in pattern.edges:
        if not graph.has_edge(match.nodes[u], match.nodes[v]):
            return False
    return t.can_be_applied(sdfg, state, match, strict=strict)


def apply_transformation(sdfg: Sdfg, match: Match,
                         params: Optional[dict[str, Any]] = None,
                         strict: bool = False) -> tuple[Sdfg, dict]:
    """Re-check the match, rewrite a fresh copy, and return it with the
    journal entry.  The input graph is never mutated."""
    t = get_transformation(match.transformation)
    if not _match_still_valid(t, sdfg, match, strict=strict):
        raise StaleMatchError(
            f"match for {match.transformation} no longer applies: "
            f"{match.to_json()}")
    merged = dict(t.default_params)
    merged.update(params or {})
    unknown = set(merged) - set(t.default_params)
    if unknown:
        raise TransformationError(
            f"{t.name} has no parameter {sorted(unknown)}; accepts "
            f"{sorted(t.default_params) or 'none'}")
    new_sdfg = sdfg.copy()
    new_state = new_sdfg.state(match.state) if match.state is not None else None
    t.apply(new_sdfg, new_state, match, merged)
    new_sdfg.renumber()  # keep ids canonical so journal anchors stay stable
    entry = match.to_json()
    entry["params"] = {k: v for k, v in merged.items()
                       if v != t.default_params.get(k)}
    return new_sdfg, entry


def apply_strict(sdfg: Sdfg) -> tuple[Sdfg, list[dict]]:
    """Fixpoint application of the strict (always-beneficial) rules in
    registry order.  Terminates: every strict rule lowers the total node or
    state count."""
    entries: list[dict] = []
    current = sdfg
    while True:
        strict_names = [name for name in registry if registry[name].strict]
        progressed = False
        for name in strict_names:
            matches = find_matches(current, name, strict=True)
            if not matches:
                continue
            current, entry = apply_transformation(current, matches[0], strict=True)
            entries.append(entry)
            progressed = True
            break
        if not progressed:
            return current, entries


def replay_journal(sdfg: Sdfg, entries: Sequence[dict]) -> Sdfg:
    """Re-apply a recorded chain by anchor lookup; deterministic matching
    makes the result reproducible."""
    current = sdfg
    for i, entry in enumerate(entries):
        match = Match(entry["transformation"], entry.get("state"),
                      {k: int(v) for k, v in entry["anchors"].items()},
                      int(entry.get("expr_index", 0)))
        try:
            current, _ = apply_transformation(current, match,
                                              entry.get("params") or {})
        except StaleMatchError as exc:
            raise ReplayError(f"journal entry {i} does not apply: {exc}") from exc
    return current
