from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provq.gen import SynPGConfig, synpg
from provq.graph import (
    ACYCLIC_EDGE_TYPES,
    Edge,
    EdgeType,
    GraphError,
    Vertex,
    VertexType,
    build,
    dumps,
    from_doc,
    loads,
    to_doc,
    to_dot,
    validate,
)

from .conftest import A, E, G, U, make_graph
from .oracles import find_cycle_dfs


def test_empty_graph_round_trip():
    g = build([], [])
    assert len(g) == 0
    assert validate(g) == []
    assert loads(dumps(g)).vertices == []


def test_single_edge_adjacency():
    ng = make_graph([("e0", E, {}), ("a0", A, {})], [(U, "a0", "e0")])
    g = ng.graph
    assert g.out(ng["a0"], EdgeType.USED) == [(ng["e0"], 0)]
    assert g.in_(ng["e0"], EdgeType.USED) == [(ng["a0"], 0)]


def test_build_rejects_sparse_ids():
    with pytest.raises(GraphError, match="dense"):
        build([Vertex(id=1, vtype=VertexType.ENTITY, seq=0)], [])


def test_build_rejects_dangling_endpoint():
    with pytest.raises(GraphError, match="dangling"):
        build(
            [Vertex(id=0, vtype=VertexType.ENTITY, seq=0)],
            [Edge(id=0, etype=EdgeType.USED, src=0, dst=5)],
        )


def test_build_rejects_duplicate_seq():
    with pytest.raises(GraphError, match="seq"):
        build(
            [
                Vertex(id=0, vtype=VertexType.ENTITY, seq=0),
                Vertex(id=1, vtype=VertexType.ENTITY, seq=0),
            ],
            [],
        )


def test_build_rejects_undeclared_property():
    with pytest.raises(GraphError, match="not in declared"):
        build(
            [Vertex(id=0, vtype=VertexType.ENTITY, seq=0, props={"x": 1})],
            [],
            property_types=set(),
        )


def test_build_rejects_nested_property_values():
    with pytest.raises(GraphError, match="non-scalar"):
        build([Vertex(id=0, vtype=VertexType.ENTITY, seq=0, props={"x": [1, 2]})], [])


def test_validate_reports_endpoint_typing():
    # an entity on the activity side of a usage edge
    ng = make_graph([("e", E, {}), ("e2", E, {})], [(U, "e", "e2")])
    report = validate(ng.graph)
    assert len(report) == 1
    assert report[0].code == "endpoint-typing"


def test_validate_reports_two_cycle_matching_dfs_oracle():
    ng = make_graph([("e", E, {}), ("a", A, {})], [(G, "e", "a"), (U, "a", "e")])
    report = validate(ng.graph)
    assert any(v.code == "ancestry-cycle" for v in report)
    assert find_cycle_dfs(ng.graph, ACYCLIC_EDGE_TYPES)


def test_validate_clean_on_lifecycle(lifecycle):
    assert validate(lifecycle.graph) == []
    assert not find_cycle_dfs(lifecycle.graph, ACYCLIC_EDGE_TYPES)


def test_lifecycle_loads_and_round_trips(lifecycle):
    text = dumps(lifecycle.graph)
    again = loads(text)
    assert dumps(again) == text
    assert validate(again) == []


def test_edge_type_strings_parse_exactly():
    doc = {
        "propertyTypes": [],
        "vertices": [
            {"id": 0, "type": "ENTITY", "seq": 0, "props": {}},
            {"id": 1, "type": "ACTIVITY", "seq": 1, "props": {}},
        ],
        "edges": [{"id": 0, "type": "wasGeneratedBy", "src": 0, "dst": 1, "props": {}}],
    }
    g = from_doc(doc)
    assert g.edges[0].etype is EdgeType.WAS_GENERATED_BY


def test_unknown_type_strings_rejected():
    doc = {
        "propertyTypes": [],
        "vertices": [{"id": 0, "type": "THING", "seq": 0, "props": {}}],
        "edges": [],
    }
    with pytest.raises(GraphError, match="unknown vertex type"):
        from_doc(doc)
    with pytest.raises(GraphError, match="invalid JSON"):
        loads("{not json")


def _structurally_equal(g1, g2) -> bool:
    return to_doc(g1) == to_doc(g2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32), n=st.integers(min_value=10, max_value=120))
def test_round_trip_random_graphs(seed, n):
    g = synpg(SynPGConfig(n=n, seed=seed))
    assert _structurally_equal(loads(dumps(g)), g)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32))
def test_adjacency_symmetry(seed):
    g = synpg(SynPGConfig(n=60, seed=seed))
    for v in range(len(g)):
        for t in EdgeType:
            for u, eid in g.out(v, t):
                assert (v, eid) in g.in_(u, t)


def test_seq_values_are_permutation():
    g = synpg(SynPGConfig(n=100, seed=3))
    assert sorted(v.seq for v in g.vertices) == list(range(len(g)))


def test_dot_export_contains_shapes(lifecycle):
    dot = to_dot(lifecycle.graph)
    assert "shape=ellipse" in dot and "shape=box" in dot and "shape=house" in dot
    assert dot.count("->") == len(lifecycle.graph.edges)


def test_canonical_empty_document():
    g = build([], [])
    assert json.loads(dumps(g)) == {"propertyTypes": [], "vertices": [], "edges": []}
