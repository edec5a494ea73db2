"""Stateful dataflow multigraph toolkit.

A state machine of acyclic dataflow multigraphs: containers and tasklets
connected by memlets, parametric map/consume scopes, and guarded
transitions.  The package builds, validates, interprets, transforms
(pattern-based rewriting with a journal), and generates C code from such
graphs, and serves an interactive optimization workbench over HTTP.
"""

from .ir import (  # noqa: F401
    AccessNode,
    ConsumeEntry,
    ConsumeExit,
    DataDesc,
    InterstateEdge,
    MapEntry,
    MapExit,
    Memlet,
    NestedSdfg,
    Reduce,
    Sdfg,
    SdfgState,
    Tasklet,
    WcrFunc,
)
from .symbolic import (  # noqa: F401
    Subset,
    SymRange,
    parse_expr,
    parse_range,
    parse_subset,
)

__version__ = "0.1.0"
