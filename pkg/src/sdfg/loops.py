"""Detection of guarded loops in the state machine.

The canonical shape produced by the builder and by map-to-loop conversion:
an empty guard state whose first outgoing transition enters the body under
a condition over the loop variable, a body whose single outgoing transition
returns to the guard carrying the variable update, and entry transitions
into the guard assigning the initial value.  Code generation emits these as
structured ``for`` loops; everything else falls back to conditional gotos.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ir import InterstateEdge, Sdfg
from .symbolic import Expr, free_symbols, ONE


@dataclass
class GuardLoop:
    guard: str
    body: str
    var: str
    condition: Expr
    update: Expr
    entries: list[InterstateEdge]  # transitions into the guard from outside
    exits: list[InterstateEdge]    # guard transitions taken after the loop


def detect_guard_loops(sdfg: Sdfg) -> list[GuardLoop]:
    loops: list[GuardLoop] = []
    for guard in sdfg.states:
        if guard.nodes:
            continue
        outs = sdfg.out_transitions(guard.name)
        if not outs or outs[0].condition == ONE:
            continue
        enter = outs[0]
        body = sdfg.state(enter.dst)
        if body is None or body.name == guard.name:
            continue
        back = [t for t in sdfg.out_transitions(body.name)]
        if len(back) != 1 or back[0].dst != guard.name:
            continue
        if back[0].condition != ONE or len(back[0].assignments) != 1:
            continue
        var, update = back[0].assignments[0]
        if var not in free_symbols(enter.condition):
            continue
        entries = [t for t in sdfg.in_transitions(guard.name)
                   if t.src != body.name]
        if not entries or any(var not in [a for a, _ in t.assignments]
                              for t in entries):
            continue
        body_in = [t for t in sdfg.in_transitions(body.name)]
        if len(body_in) != 1:
            continue
        loops.append(GuardLoop(guard.name, body.name, var, enter.condition,
                               update, entries, outs[1:]))
    return loops


def loop_of_body(sdfg: Sdfg, state_name: str) -> Optional[GuardLoop]:
    for loop in detect_guard_loops(sdfg):
        if loop.body == state_name:
            return loop
    return None
