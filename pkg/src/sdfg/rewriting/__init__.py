"""Pattern-based graph rewriting: matching, application, journals, and the
standard transformation library."""

from .engine import (  # noqa: F401
    Match,
    ReplayError,
    StaleMatchError,
    Transformation,
    apply_strict,
    apply_transformation,
    find_matches,
    get_transformation,
    registry,
    replay_journal,
)
from .matching import Pattern, PatternNode, path_pattern  # noqa: F401
from . import library  # noqa: F401  (populates the registry)
