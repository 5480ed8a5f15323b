from __future__ import annotations

from dataclasses import dataclass

import pytest

from provq.graph import Edge, EdgeType, ProvGraph, Vertex, VertexType, build


@dataclass
class NamedGraph:
    graph: ProvGraph
    ids: dict[str, int]

    def __getitem__(self, name: str) -> int:
        return self.ids[name]

    def names(self, vertex_ids) -> set[str]:
        rev = {v: k for k, v in self.ids.items()}
        return {rev[v] for v in vertex_ids}


def make_graph(vertex_spec, edge_spec, property_types=None) -> NamedGraph:
    """Vertices as (name, vtype, props) in order of being; edges as
    (etype, src name, dst name)."""
    ids: dict[str, int] = {}
    vertices = []
    for name, vtype, props in vertex_spec:
        vid = len(vertices)
        ids[name] = vid
        vertices.append(Vertex(id=vid, vtype=vtype, seq=vid, props=props))
    edges = []
    for etype, src, dst in edge_spec:
        edges.append(Edge(id=len(edges), etype=etype, src=ids[src], dst=ids[dst]))
    return NamedGraph(build(vertices, edges, property_types=property_types), ids)


E, A, AG = VertexType.ENTITY, VertexType.ACTIVITY, VertexType.AGENT
U, G, S, T, D = (
    EdgeType.USED,
    EdgeType.WAS_GENERATED_BY,
    EdgeType.WAS_ASSOCIATED_WITH,
    EdgeType.WAS_ATTRIBUTED_TO,
    EdgeType.WAS_DERIVED_FROM,
)


@pytest.fixture
def t1() -> NamedGraph:
    """One activity using two entities and generating the destination."""
    return make_graph(
        [
            ("e1", E, {}),
            ("e2", E, {}),
            ("a1", A, {}),
            ("d", E, {}),
        ],
        [
            (U, "a1", "e1"),
            (U, "a1", "e2"),
            (G, "d", "a1"),
        ],
    )


@pytest.fixture
def t2() -> NamedGraph:
    """A two-step chain from e0 down to the destination."""
    return make_graph(
        [
            ("e0", E, {}),
            ("a1", A, {}),
            ("e1", E, {}),
            ("a2", A, {}),
            ("d", E, {}),
        ],
        [
            (U, "a1", "e0"),
            (G, "e1", "a1"),
            (U, "a2", "e1"),
            (G, "d", "a2"),
        ],
    )


@pytest.fixture
def lifecycle() -> NamedGraph:
    """Hand transcription of a two-person model-training history: three
    training runs, two edit activities, versioned artifacts."""

    def ent(filename, version):
        return {"name": f"{filename}-v{version}", "filename": filename}

    vertices = [
        ("alice", AG, {"name": "Alice"}),
        ("bob", AG, {"name": "Bob"}),
        ("dataset", E, ent("dataset", 1)),
        ("model_v1", E, ent("model", 1)),
        ("solver_v1", E, ent("solver", 1)),
        ("train_v1", A, {"name": "train-v1", "command": "train"}),
        ("logs_v1", E, ent("logs", 1)),
        ("weights_v1", E, ent("weights", 1)),
        ("update_v2", A, {"name": "update-v2", "command": "update"}),
        ("model_v2", E, ent("model", 2)),
        ("train_v2", A, {"name": "train-v2", "command": "train"}),
        ("logs_v2", E, ent("logs", 2)),
        ("weights_v2", E, ent("weights", 2)),
        ("update_v3", A, {"name": "update-v3", "command": "update"}),
        ("solver_v3", E, ent("solver", 3)),
        ("train_v3", A, {"name": "train-v3", "command": "train"}),
        ("logs_v3", E, ent("logs", 3)),
        ("weights_v3", E, ent("weights", 3)),
    ]
    edges = [
        (T, "dataset", "alice"),
        (T, "model_v1", "alice"),
        (T, "solver_v1", "alice"),
        (S, "train_v1", "alice"),
        (U, "train_v1", "model_v1"),
        (U, "train_v1", "solver_v1"),
        (U, "train_v1", "dataset"),
        (G, "logs_v1", "train_v1"),
        (G, "weights_v1", "train_v1"),
        (S, "update_v2", "alice"),
        (U, "update_v2", "model_v1"),
        (G, "model_v2", "update_v2"),
        (D, "model_v2", "model_v1"),
        (S, "train_v2", "alice"),
        (U, "train_v2", "model_v2"),
        (U, "train_v2", "solver_v1"),
        (U, "train_v2", "dataset"),
        (G, "logs_v2", "train_v2"),
        (G, "weights_v2", "train_v2"),
        (S, "update_v3", "bob"),
        (U, "update_v3", "solver_v1"),
        (G, "solver_v3", "update_v3"),
        (D, "solver_v3", "solver_v1"),
        (S, "train_v3", "bob"),
        (U, "train_v3", "model_v1"),
        (U, "train_v3", "solver_v3"),
        (U, "train_v3", "dataset"),
        (G, "logs_v3", "train_v3"),
        (G, "weights_v3", "train_v3"),
    ]
    return make_graph(vertices, edges, property_types={"name", "filename", "command"})
