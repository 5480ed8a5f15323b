"""Typed property DAG with PROV-core vertex and edge kinds.

A graph is immutable after construction and safe for concurrent readers.
Vertices and edges carry dense integer ids; every vertex additionally has a
global creation sequence number (``seq``, the "order of being") used by the
temporal pruning rules of the path solvers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

Scalar = str | int | float | bool


class GraphError(ValueError):
    """Malformed graph document or inconsistent construction input."""


class VertexType(str, Enum):
    ENTITY = "ENTITY"
    ACTIVITY = "ACTIVITY"
    AGENT = "AGENT"


class EdgeType(str, Enum):
    USED = "used"
    WAS_GENERATED_BY = "wasGeneratedBy"
    WAS_ASSOCIATED_WITH = "wasAssociatedWith"
    WAS_ATTRIBUTED_TO = "wasAttributedTo"
    WAS_DERIVED_FROM = "wasDerivedFrom"


#: (src type, dst type) admitted for each edge kind.
ENDPOINT_TYPES: dict[EdgeType, tuple[VertexType, VertexType]] = {
    EdgeType.USED: (VertexType.ACTIVITY, VertexType.ENTITY),
    EdgeType.WAS_GENERATED_BY: (VertexType.ENTITY, VertexType.ACTIVITY),
    EdgeType.WAS_ASSOCIATED_WITH: (VertexType.ACTIVITY, VertexType.AGENT),
    EdgeType.WAS_ATTRIBUTED_TO: (VertexType.ENTITY, VertexType.AGENT),
    EdgeType.WAS_DERIVED_FROM: (VertexType.ENTITY, VertexType.ENTITY),
}

#: Edge kinds whose raw-direction subgraph must stay acyclic.  Agent-directed
#: edges cannot participate in cycles because agents have no outgoing edges.
ACYCLIC_EDGE_TYPES: tuple[EdgeType, ...] = (
    EdgeType.USED,
    EdgeType.WAS_GENERATED_BY,
    EdgeType.WAS_DERIVED_FROM,
)

#: Edge kinds that carry ancestry for path queries (raw direction points
#: from a product toward what produced it).
ANCESTRY_EDGE_TYPES: tuple[EdgeType, ...] = (
    EdgeType.USED,
    EdgeType.WAS_GENERATED_BY,
)


@dataclass(frozen=True, slots=True)
class Vertex:
    id: int
    vtype: VertexType
    seq: int
    props: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class Edge:
    id: int
    etype: EdgeType
    src: int
    dst: int
    props: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class Violation:
    code: str
    message: str
    vertex_id: int | None = None
    edge_id: int | None = None


class ProvGraph:
    """Id-indexed vertex/edge arrays plus per-type adjacency lists.

    ``out(v, t)`` / ``in_(v, t)`` return ``(neighbor, edge_id)`` pairs and are
    O(degree); arbitrary vertices and edges resolve in O(1) by id.
    """

    __slots__ = ("vertices", "edges", "property_types", "_out", "_in")

    def __init__(self, vertices: list[Vertex], edges: list[Edge], property_types: frozenset[str]):
        self.vertices = vertices
        self.edges = edges
        self.property_types = property_types
        n = len(vertices)
        self._out: dict[EdgeType, list[list[tuple[int, int]]]] = {
            t: [[] for _ in range(n)] for t in EdgeType
        }
        self._in: dict[EdgeType, list[list[tuple[int, int]]]] = {
            t: [[] for _ in range(n)] for t in EdgeType
        }
        for e in edges:
            self._out[e.etype][e.src].append((e.dst, e.id))
            self._in[e.etype][e.dst].append((e.src, e.id))

    # -- accessors ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.vertices)

    def out(self, v: int, etype: EdgeType) -> list[tuple[int, int]]:
        return self._out[etype][v]

    def in_(self, v: int, etype: EdgeType) -> list[tuple[int, int]]:
        return self._in[etype][v]

    def vertex(self, v: int) -> Vertex:
        return self.vertices[v]

    def edge(self, e: int) -> Edge:
        return self.edges[e]

    def vertices_of_type(self, vtype: VertexType) -> list[int]:
        return [v.id for v in self.vertices if v.vtype is vtype]

    def entities_by_seq(self) -> list[int]:
        """Entity ids sorted by order of being, oldest first."""
        ents = [v for v in self.vertices if v.vtype is VertexType.ENTITY]
        ents.sort(key=lambda v: v.seq)
        return [v.id for v in ents]

    def seq_of(self, v: int) -> int:
        return self.vertices[v].seq


def _check_props(props: Mapping[str, Any], declared: frozenset[str], where: str) -> None:
    for key, value in props.items():
        if key not in declared:
            raise GraphError(f"{where}: property {key!r} not in declared property types")
        if not isinstance(value, (str, int, float, bool)):
            raise GraphError(f"{where}: property {key!r} has non-scalar value {value!r}")


def build(
    vertices: Iterable[Vertex],
    edges: Iterable[Edge],
    property_types: Iterable[str] | None = None,
) -> ProvGraph:
    """Assemble a graph and its adjacency. Semantic validation is separate
    (see :func:`validate`); this only rejects structurally unusable input.
    """
    vlist = list(vertices)
    elist = list(edges)
    for pos, v in enumerate(vlist):
        if v.id != pos:
            raise GraphError(f"vertex ids must be dense from 0; found id {v.id} at position {pos}")
    seqs = {v.seq for v in vlist}
    if len(seqs) != len(vlist):
        raise GraphError("vertex seq values must be unique")
    n = len(vlist)
    for pos, e in enumerate(elist):
        if e.id != pos:
            raise GraphError(f"edge ids must be dense from 0; found id {e.id} at position {pos}")
        if not (0 <= e.src < n) or not (0 <= e.dst < n):
            raise GraphError(f"edge {e.id} has dangling endpoint ({e.src}, {e.dst})")
    if property_types is None:
        declared: set[str] = set()
        for v in vlist:
            declared.update(v.props)
        for e in elist:
            declared.update(e.props)
        ptypes = frozenset(declared)
    else:
        ptypes = frozenset(property_types)
    for v in vlist:
        _check_props(v.props, ptypes, f"vertex {v.id}")
    for e in elist:
        _check_props(e.props, ptypes, f"edge {e.id}")
    return ProvGraph(vlist, elist, ptypes)


def validate(g: ProvGraph) -> list[Violation]:
    """Report endpoint-typing and acyclicity violations. Violations are data,
    not exceptions: an empty report means the graph is well formed."""
    report: list[Violation] = []
    for e in g.edges:
        want_src, want_dst = ENDPOINT_TYPES[e.etype]
        got_src = g.vertices[e.src].vtype
        got_dst = g.vertices[e.dst].vtype
        if got_src is not want_src or got_dst is not want_dst:
            report.append(
                Violation(
                    code="endpoint-typing",
                    message=(
                        f"edge {e.id} ({e.etype.value}) requires "
                        f"{want_src.value}->{want_dst.value}, got {got_src.value}->{got_dst.value}"
                    ),
                    edge_id=e.id,
                )
            )
    # Kahn's algorithm over the raw used/wasGeneratedBy/wasDerivedFrom subgraph.
    n = len(g.vertices)
    indeg = [0] * n
    for t in ACYCLIC_EDGE_TYPES:
        for adj in g._out[t]:
            for dst, _ in adj:
                indeg[dst] += 1
    queue = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for t in ACYCLIC_EDGE_TYPES:
            for dst, _ in g._out[t][v]:
                indeg[dst] -= 1
                if indeg[dst] == 0:
                    queue.append(dst)
    if seen != n:
        cyclic = sorted(v for v in range(n) if indeg[v] > 0)
        report.append(
            Violation(
                code="ancestry-cycle",
                message=f"used/wasGeneratedBy/wasDerivedFrom subgraph has a cycle through vertices {cyclic}",
            )
        )
    return report


# -- serialization ----------------------------------------------------------

_VTYPE_BY_NAME = {t.value: t for t in VertexType}
_ETYPE_BY_NAME = {t.value: t for t in EdgeType}


def to_doc(g: ProvGraph) -> dict:
    """Canonical JSON-ready document. Field order is fixed so identical
    graphs serialize to identical bytes."""
    return {
        "propertyTypes": sorted(g.property_types),
        "vertices": [
            {
                "id": v.id,
                "type": v.vtype.value,
                "seq": v.seq,
                "props": {k: v.props[k] for k in sorted(v.props)},
            }
            for v in g.vertices
        ],
        "edges": [
            {
                "id": e.id,
                "type": e.etype.value,
                "src": e.src,
                "dst": e.dst,
                "props": {k: e.props[k] for k in sorted(e.props)},
            }
            for e in g.edges
        ],
    }


def from_doc(doc: Any) -> ProvGraph:
    if not isinstance(doc, dict):
        raise GraphError("graph document must be a JSON object")
    for key in ("propertyTypes", "vertices", "edges"):
        if key not in doc:
            raise GraphError(f"graph document missing {key!r}")
    vertices = []
    for item in doc["vertices"]:
        try:
            vtype = _VTYPE_BY_NAME[item["type"]]
        except KeyError:
            raise GraphError(f"unknown vertex type {item.get('type')!r}") from None
        try:
            vertices.append(
                Vertex(id=int(item["id"]), vtype=vtype, seq=int(item["seq"]), props=dict(item.get("props", {})))
            )
        except (TypeError, KeyError) as exc:
            raise GraphError(f"malformed vertex record: {item!r}") from exc
    edges = []
    for item in doc["edges"]:
        try:
            etype = _ETYPE_BY_NAME[item["type"]]
        except KeyError:
            raise GraphError(f"unknown edge type {item.get('type')!r}") from None
        try:
            edges.append(
                Edge(
                    id=int(item["id"]),
                    etype=etype,
                    src=int(item["src"]),
                    dst=int(item["dst"]),
                    props=dict(item.get("props", {})),
                )
            )
        except (TypeError, KeyError) as exc:
            raise GraphError(f"malformed edge record: {item!r}") from exc
    return build(vertices, edges, property_types=doc["propertyTypes"])


def dumps(g: ProvGraph) -> str:
    return json.dumps(to_doc(g), separators=(",", ":"), ensure_ascii=False)


def loads(text: str) -> ProvGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from exc
    return from_doc(doc)


def save(g: ProvGraph, sink: str | Path) -> None:
    Path(sink).write_text(dumps(g), encoding="utf-8")


def load(source: str | Path) -> ProvGraph:
    return loads(Path(source).read_text(encoding="utf-8"))


# -- DOT export -------------------------------------------------------------

_DOT_SHAPES = {
    VertexType.ENTITY: "ellipse",
    VertexType.ACTIVITY: "box",
    VertexType.AGENT: "house",
}


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(g: ProvGraph, *, name_prop: str = "name", extra_vertex_attrs=None) -> str:
    """Graphviz rendering with one shape per vertex kind.

    ``extra_vertex_attrs`` may map vertex id -> attribute string (used by
    segment and summary exports for tag-based styling).
    """
    lines = ["digraph provenance {", "  rankdir=LR;"]
    for v in g.vertices:
        label = str(v.props.get(name_prop, v.id))
        attrs = f'label="{_dot_escape(label)}", shape={_DOT_SHAPES[v.vtype]}'
        if extra_vertex_attrs and v.id in extra_vertex_attrs:
            attrs += ", " + extra_vertex_attrs[v.id]
        lines.append(f"  v{v.id} [{attrs}];")
    for e in g.edges:
        lines.append(f'  v{e.src} -> v{e.dst} [label="{e.etype.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
