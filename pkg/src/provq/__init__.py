"""Provenance graph query engine.

Core pieces: a typed PROV-style property DAG (:mod:`provq.graph`), grammars
and reachability solvers for similar-ancestry path queries (:mod:`provq.grammar`,
:mod:`provq.cflr`), the segmentation operator with boundary criteria
(:mod:`provq.seg`), path-preserving summarization (:mod:`provq.summarize`),
synthetic workload generators (:mod:`provq.gen`), and a benchmark harness,
CLI and HTTP service on top.
"""

from .factstore import Backend, BudgetExceededError, FactStore
from .graph import (
    Edge,
    EdgeType,
    GraphError,
    ProvGraph,
    Vertex,
    VertexType,
    build,
    load,
    save,
    validate,
)
from .labels import ExclusionRule, LabelOracle
from .seg import (
    Algorithm,
    BoundarySpec,
    Expansion,
    SegQuery,
    Segment,
    SegmentQueryError,
    Tag,
    adjust,
    segment,
)
from .summarize import PropertyAggregation, SummaryGraph, summarize
from .gen import SynPGConfig, SynSGConfig, synpg, synsg

__all__ = [
    "Algorithm",
    "Backend",
    "BoundarySpec",
    "BudgetExceededError",
    "Edge",
    "EdgeType",
    "ExclusionRule",
    "Expansion",
    "FactStore",
    "GraphError",
    "LabelOracle",
    "PropertyAggregation",
    "ProvGraph",
    "SegQuery",
    "Segment",
    "SegmentQueryError",
    "SummaryGraph",
    "SynPGConfig",
    "SynSGConfig",
    "Tag",
    "Vertex",
    "VertexType",
    "adjust",
    "build",
    "load",
    "save",
    "segment",
    "summarize",
    "synpg",
    "synsg",
    "validate",
]
