"""Deterministic sleeping-model simulator and protocol library."""

from .graph import (
    CheckReport,
    DltAssignment,
    DltVertex,
    Graph,
    GraphError,
    VertexLabel,
    generate_graph,
    label_compare,
    label_to_round,
    load_graph,
    make_graph,
    reroot_levels,
    validate_dlt,
)
from .engine import (
    EngineConfig,
    MODE_CONGEST,
    MODE_LOCAL,
    RunMetrics,
    VertexProgram,
    run,
)

__all__ = [
    "CheckReport",
    "DltAssignment",
    "DltVertex",
    "EngineConfig",
    "Graph",
    "GraphError",
    "MODE_CONGEST",
    "MODE_LOCAL",
    "RunMetrics",
    "VertexLabel",
    "VertexProgram",
    "generate_graph",
    "label_compare",
    "label_to_round",
    "load_graph",
    "make_graph",
    "reroot_levels",
    "run",
    "validate_dlt",
]

__version__ = "0.1.0"
