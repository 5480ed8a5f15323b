"""Effective label mapping for path queries.

Boundary exclusion is expressed by relabeling: a vertex or edge that matches
any active exclusion rule gets the empty label and therefore cannot appear
inside a qualifying path word. Property-constrained matching extends a vertex
label with one selected property value, so both sides of a palindromic path
must agree on that value, not just on the vertex kind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .graph import Edge, EdgeType, ProvGraph, Vertex, VertexType

_VERTEX_LABEL = {
    VertexType.ENTITY: "E",
    VertexType.ACTIVITY: "A",
    VertexType.AGENT: "AGENT",
}

_OPS = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a is not None and a < b,
    "le": lambda a, b: a is not None and a <= b,
    "gt": lambda a, b: a is not None and a > b,
    "ge": lambda a, b: a is not None and a >= b,
    "in": lambda a, b: a in b,
    "not_in": lambda a, b: a not in b,
}

_MISSING = object()


@dataclass(frozen=True)
class ExclusionRule:
    """Declarative predicate over a vertex or edge; a match excludes it.

    ``field`` is one of ``"type"``, ``"id"``, ``"seq"`` (vertices only) or
    ``"prop:<name>"``. Rules are pure and total: a missing property simply
    never matches equality/membership tests.
    """

    target: str  # "vertex" | "edge"
    field: str
    op: str
    value: Any

    def __post_init__(self) -> None:
        if self.target not in ("vertex", "edge"):
            raise ValueError(f"unknown exclusion target {self.target!r}")
        if self.op not in _OPS:
            raise ValueError(f"unknown exclusion op {self.op!r}")

    def _resolve(self, obj: Vertex | Edge) -> Any:
        if self.field == "type":
            return obj.vtype.value if isinstance(obj, Vertex) else obj.etype.value
        if self.field == "id":
            return obj.id
        if self.field == "seq" and isinstance(obj, Vertex):
            return obj.seq
        if self.field.startswith("prop:"):
            return obj.props.get(self.field[5:], _MISSING)
        return _MISSING

    def matches(self, obj: Vertex | Edge) -> bool:
        got = self._resolve(obj)
        if got is _MISSING:
            return False
        try:
            return bool(_OPS[self.op](got, self.value))
        except TypeError:
            return False

    def to_json(self) -> dict:
        return {"target": self.target, "field": self.field, "op": self.op, "value": self.value}

    @classmethod
    def from_json(cls, doc: Mapping) -> "ExclusionRule":
        return cls(target=doc["target"], field=doc["field"], op=doc["op"], value=doc["value"])


class LabelOracle:
    """Resolves effective vertex/edge labels and pre-filters ancestry adjacency.

    ``vertex_label`` returns ``None`` for an excluded vertex (the empty word);
    ``vertex_value`` returns the selected property value when property
    constraints are active for that vertex kind, else ``None``.
    """

    __slots__ = (
        "graph",
        "vertex_rules",
        "edge_rules",
        "property_constraints",
        "_vlabel",
        "_vvalue",
        "generators",
        "products",
        "users",
        "inputs",
    )

    def __init__(
        self,
        graph: ProvGraph,
        vertex_rules: tuple[ExclusionRule, ...] = (),
        edge_rules: tuple[ExclusionRule, ...] = (),
        property_constraints: Mapping[VertexType, str] | None = None,
    ):
        self.graph = graph
        self.vertex_rules = tuple(r for r in vertex_rules if r.target == "vertex")
        self.edge_rules = tuple(r for r in edge_rules if r.target == "edge")
        self.property_constraints = dict(property_constraints or {})

        n = len(graph)
        self._vlabel: list[str | None] = [None] * n
        self._vvalue: list[Any] = [None] * n
        for v in graph.vertices:
            if any(rule.matches(v) for rule in self.vertex_rules):
                continue
            self._vlabel[v.id] = _VERTEX_LABEL[v.vtype]
            prop = self.property_constraints.get(v.vtype)
            if prop is not None:
                self._vvalue[v.id] = v.props.get(prop, _MISSING)

        def edge_ok(eid: int) -> bool:
            e = graph.edges[eid]
            return not any(rule.matches(e) for rule in self.edge_rules)

        # Ancestry adjacency with excluded edges dropped. Kept as plain lists
        # because the solvers iterate them in tight loops.
        self.generators: list[list[int]] = [[] for _ in range(n)]  # entity -> generating activities
        self.products: list[list[int]] = [[] for _ in range(n)]  # activity -> entities it generated
        self.users: list[list[int]] = [[] for _ in range(n)]  # entity -> activities that used it
        self.inputs: list[list[int]] = [[] for _ in range(n)]  # activity -> entities it used
        for e in graph.edges:
            if e.etype is EdgeType.WAS_GENERATED_BY and edge_ok(e.id):
                self.generators[e.src].append(e.dst)
                self.products[e.dst].append(e.src)
            elif e.etype is EdgeType.USED and edge_ok(e.id):
                self.inputs[e.src].append(e.dst)
                self.users[e.dst].append(e.src)

    # -- label access --------------------------------------------------------

    def vertex_label(self, v: int) -> str | None:
        return self._vlabel[v]

    def vertex_value(self, v: int) -> Any:
        return self._vvalue[v]

    def vertex_passes(self, v: int) -> bool:
        return self._vlabel[v] is not None

    def edge_passes(self, eid: int) -> bool:
        e = self.graph.edges[eid]
        return not any(rule.matches(e) for rule in self.edge_rules)

    def value_equals(self, v: int, value: Any) -> bool:
        got = self._vvalue[v]
        return got is not _MISSING and got == value

    def value_missing(self, v: int) -> bool:
        """True when a property constraint applies to v's kind but v lacks
        the property, so no value-specialized label can match it."""
        return self._vvalue[v] is _MISSING

    def values_match(self, u: int, v: int) -> bool:
        """Extended-label equality for a matched vertex pair on the two sides
        of a path. With no property constraint this is always true."""
        a, b = self._vvalue[u], self._vvalue[v]
        if a is None and b is None:
            return True
        if a is _MISSING or b is _MISSING:
            return False
        return a == b

    def constrained(self, vtype: VertexType) -> bool:
        return vtype in self.property_constraints

    def value_universe(self, vtype: VertexType) -> list[Any]:
        """Distinct constrained values present among non-excluded vertices of
        one kind; used to specialize grammar rules per value."""
        prop = self.property_constraints.get(vtype)
        if prop is None:
            return []
        seen = []
        seen_set = set()
        for v in self.graph.vertices:
            if v.vtype is vtype and self._vlabel[v.id] is not None:
                val = v.props.get(prop, _MISSING)
                if val is not _MISSING and val not in seen_set:
                    seen_set.add(val)
                    seen.append(val)
        return seen
