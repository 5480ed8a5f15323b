from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provq.gen import SynSGConfig, synsg
from provq.graph import EdgeType, VertexType
from provq.summarize import (
    Direction,
    NeighborhoodSizeError,
    PropertyAggregation,
    SegmentData,
    as_segment_data,
    build_g0,
    compaction_ratio,
    iso_check,
    partition,
    ptype,
    segment_diameter,
    segment_path_labels,
    simulate,
    summarize,
)

from .conftest import A, D, E, G, S, T, U, make_graph
from .oracles import merge_allowed_by_traces, trace_sets

ALL_PROPS = PropertyAggregation(
    keep_entity=frozenset({"label"}), keep_activity=frozenset({"label"})
)


def _line_segment(index: int, activity_labels: list[str]) -> SegmentData:
    """entity -> activity -> entity -> activity ... pipeline segment.

    Edges follow raw ancestry direction: each product points at its activity
    (generated-by), each activity points at its input (used)."""
    vertices = []
    edges = []
    vid = 0
    prev_entity = 0
    vertices.append((0, VertexType.ENTITY, {"label": "artifact"}))
    for lab in activity_labels:
        act = vid + 1
        out = vid + 2
        vid += 2
        vertices.append((act, VertexType.ACTIVITY, {"label": lab}))
        vertices.append((out, VertexType.ENTITY, {"label": "artifact"}))
        edges.append((act, prev_entity, EdgeType.USED))
        edges.append((out, act, EdgeType.WAS_GENERATED_BY))
        prev_entity = out
    return SegmentData(index, vertices, edges)


# -- neighborhoods -----------------------------------------------------------


def test_ptype_zero_is_single_vertex(lifecycle):
    seg = as_segment_data(lifecycle.graph, 0)
    n = ptype(seg, lifecycle["train_v1"], 0)
    assert n.vertices == {lifecycle["train_v1"]}
    assert n.edges == frozenset()


def test_ptype_one_is_star(t1):
    seg = as_segment_data(t1.graph, 0)
    n = ptype(seg, t1["a1"], 1)
    assert n.vertices == {t1["a1"], t1["e1"], t1["e2"], t1["d"]}
    assert len(n.edges) == 3


def test_ptype_distinguishes_update_contexts(lifecycle):
    """With filenames kept, the two edit activities have different one-hop
    neighborhoods; with everything ignored they collapse."""
    pagg = PropertyAggregation(
        keep_entity=frozenset({"filename"}), keep_activity=frozenset({"command"})
    )
    part = partition([lifecycle.graph], pagg, k=1)
    u2 = part.class_of[(0, lifecycle["update_v2"])]
    u3 = part.class_of[(0, lifecycle["update_v3"])]
    assert u2 != u3
    coarse = partition([lifecycle.graph], PropertyAggregation(), k=0)
    assert (
        coarse.class_of[(0, lifecycle["update_v2"])]
        == coarse.class_of[(0, lifecycle["update_v3"])]
    )


def test_agents_collapse_when_names_dropped(lifecycle):
    pagg = PropertyAggregation()
    part = partition([lifecycle.graph], pagg, k=0)
    assert part.class_of[(0, lifecycle["alice"])] == part.class_of[(0, lifecycle["bob"])]
    named = partition([lifecycle.graph], PropertyAggregation(keep_agent=frozenset({"name"})), k=0)
    assert named.class_of[(0, lifecycle["alice"])] != named.class_of[(0, lifecycle["bob"])]


# -- isomorphism ---------------------------------------------------------------


def test_iso_identical_graphs(t1):
    seg = as_segment_data(t1.graph, 0)
    n = ptype(seg, t1["a1"], 1)
    assert iso_check(n, n, [seg], PropertyAggregation())


def test_iso_detects_direction_flip():
    a = _line_segment(0, ["t"])
    b = SegmentData(
        1,
        [(0, VertexType.ENTITY, {"label": "artifact"}),
         (1, VertexType.ACTIVITY, {"label": "t"}),
         (2, VertexType.ENTITY, {"label": "artifact"})],
        [(1, 0, EdgeType.USED), (1, 2, EdgeType.USED)],  # two inputs, no output
    )
    na = ptype(a, 1, 1)
    nb = ptype(b, 1, 1)
    assert not iso_check(na, nb, [a, b], ALL_PROPS)


def test_iso_size_cap():
    spokes = [(0, VertexType.ACTIVITY, {"label": "t"})]
    edges = []
    for i in range(1, 70):
        spokes.append((i, VertexType.ENTITY, {"label": "artifact"}))
        edges.append((0, i, EdgeType.USED))
    big = SegmentData(0, spokes, edges)
    n = ptype(big, 0, 1)
    with pytest.raises(NeighborhoodSizeError):
        iso_check(n, n, [big], ALL_PROPS)


def test_k1_multiset_shortcut_matches_backtracker():
    """On star neighborhoods the class split from signatures must equal the
    split the backtracking test induces."""
    segs = [_line_segment(0, ["t0", "t1", "t0"]), _line_segment(1, ["t1", "t0", "t1"])]
    part = partition(segs, ALL_PROPS, k=1)
    pagg = ALL_PROPS
    occs = [(s.index, v) for s in segs for v in s.vertex_ids]
    for occ_a, occ_b in itertools.combinations(occs, 2):
        same = part.class_of[occ_a] == part.class_of[occ_b]
        na = ptype(segs[occ_a[0]], occ_a[1], 1)
        nb = ptype(segs[occ_b[0]], occ_b[1], 1)
        key_a = (segs[occ_a[0]].vtypes[occ_a[1]], dict(segs[occ_a[0]].props[occ_a[1]]))
        key_b = (segs[occ_b[0]].vtypes[occ_b[1]], dict(segs[occ_b[0]].props[occ_b[1]]))
        expected = key_a == key_b and iso_check(na, nb, segs, pagg)
        assert same == expected, f"{occ_a} vs {occ_b}"


# -- partitioning -----------------------------------------------------------------


def test_partition_pairs_duplicate_segments():
    seg = _line_segment(0, ["t0", "t1"])
    twin = _line_segment(1, ["t0", "t1"])
    part = partition([seg, twin], ALL_PROPS, k=1)
    for v in seg.vertex_ids:
        assert part.class_of[(0, v)] == part.class_of[(1, v)]


def test_partition_class_count_monotone_in_k():
    segs = synsg(SynSGConfig(alpha=0.5, k=3, n=6, num_segments=3, seed=5))
    counts = [len(partition(segs, ALL_PROPS, k=k).classes) for k in (0, 1, 2)]
    assert counts[0] <= counts[1] <= counts[2]


# -- initial union graph -------------------------------------------------------------


def test_g0_single_segment_full_frequency():
    seg = _line_segment(0, ["t0"])
    part = partition([seg], ALL_PROPS, k=1)
    psg = build_g0([seg], part)
    assert len(psg.nodes) == 3
    assert all(psg.freq(key) == 1.0 for key in psg.edges)


def test_g0_partial_frequency():
    a = _line_segment(0, ["t0"])
    b = SegmentData(
        1,
        [(0, VertexType.ENTITY, {"label": "artifact"})],
        [],
    )
    psg = build_g0([a, b], partition([a, b], ALL_PROPS, k=1))
    assert {psg.freq(k) for k in psg.edges} == {0.5}


def test_merged_duplicates_carry_full_frequency():
    segs = [_line_segment(0, ["t0", "t1"]), _line_segment(1, ["t0", "t1"]), _line_segment(2, ["t0", "t1"])]
    psg = summarize(segs, ALL_PROPS, k=1)
    assert all(psg.freq(key) == 1.0 for key in psg.edges)


# -- simulation ------------------------------------------------------------------


def _toy_psg(vertices, edges, labels):
    """Build a summary graph by hand: vertices with given class labels."""
    segs = [
        SegmentData(
            0,
            [(v, VertexType.ENTITY, {"label": labels[v]}) for v in vertices],
            [(s, d, EdgeType.WAS_DERIVED_FROM) for s, d in edges],
        )
    ]
    part = partition(segs, ALL_PROPS, k=0)
    return build_g0(segs, part), part, segs[0]


def test_leaves_with_equal_labels_mutually_in_simulate():
    psg, part, seg = _toy_psg([0, 1], [], {0: "x", 1: "x"})
    rel = simulate(psg, Direction.IN)
    a, b = psg.node_of((0, 0)), psg.node_of((0, 1))
    assert rel.mutual(a, b)


def test_dominated_parents_example():
    # u's parents {P}; v's parents {P', Q}: u dominated by v, not conversely
    labels = {0: "p", 1: "p", 2: "q", 3: "x", 4: "x"}
    edges = [(0, 3), (1, 4), (2, 4)]
    psg, part, seg = _toy_psg([0, 1, 2, 3, 4], edges, labels)
    rel = simulate(psg, Direction.IN)
    u, v = psg.node_of((0, 3)), psg.node_of((0, 4))
    assert rel.leq(u, v)
    assert not rel.leq(v, u)
    # cross-check against full trace languages
    out_adj, in_adj = psg.adjacency()
    node_labels = {n: psg.partition.canonical_label(psg.nodes[n].class_idx) for n in psg.nodes}
    tin, _ = trace_sets(list(psg.nodes), out_adj, in_adj, node_labels)
    assert tin[u] <= tin[v] and not (tin[v] <= tin[u])


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_simulation_is_a_preorder(data):
    n = data.draw(st.integers(min_value=2, max_value=7))
    labels = {i: data.draw(st.sampled_from(["x", "y"]), label=f"lab{i}") for i in range(n)}
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if data.draw(st.booleans(), label=f"e{i}-{j}"):
                edges.append((i, j))
    psg, _, _ = _toy_psg(list(range(n)), edges, labels)
    for direction in Direction:
        rel = simulate(psg, direction)
        nodes = list(psg.nodes)
        for u in nodes:
            assert rel.leq(u, u)
        for u, v, w in itertools.product(nodes, repeat=3):
            if rel.leq(u, v) and rel.leq(v, w):
                assert rel.leq(u, w)


# -- summarize ------------------------------------------------------------------


def test_two_identical_segments_halve():
    segs = [_line_segment(0, ["t0", "t1", "t0"]), _line_segment(1, ["t0", "t1", "t0"])]
    psg = summarize(segs, ALL_PROPS, k=1)
    assert compaction_ratio(psg) == 0.5
    assert all(psg.freq(key) == 1.0 for key in psg.edges)
    assert psg.is_acyclic()


def test_equal_label_chain_never_merges():
    seg = SegmentData(
        0,
        [(0, VertexType.ENTITY, {"label": "artifact"}), (1, VertexType.ENTITY, {"label": "artifact"})],
        [(0, 1, EdgeType.WAS_DERIVED_FROM)],
    )
    psg = summarize([seg], PropertyAggregation(keep_entity=frozenset({"label"})), k=0)
    assert len(psg.nodes) == 2
    assert psg.is_acyclic()


def test_fork_join_around_differing_step():
    """Shared prefix and suffix merge; the differing middle stays split."""
    a = _line_segment(0, ["t0", "t1", "t2"])
    b = _line_segment(1, ["t0", "t9", "t2"])
    psg = summarize([a, b], ALL_PROPS, k=0)
    L = 2 * max(segment_diameter(a), segment_diameter(b))
    part = psg.partition
    union_labels = segment_path_labels(a, part, L) | segment_path_labels(b, part, L)
    assert psg.path_labels(L) == union_labels
    # the two middle activities keep distinct nodes
    mid_a = psg.node_of((0, 3))
    mid_b = psg.node_of((1, 3))
    assert mid_a != mid_b


def _path_preservation_case(seed: int, n: int, num_segments: int, alpha: float):
    segs = synsg(SynSGConfig(alpha=alpha, k=3, n=n, num_segments=num_segments, seed=seed))
    data = [as_segment_data(s, i) for i, s in enumerate(segs)]
    psg = summarize(data, ALL_PROPS, k=1)
    L = min(2 * max(segment_diameter(s) for s in data), 2 * n)
    union = set()
    for s in data:
        union |= segment_path_labels(s, psg.partition, L)
    assert psg.path_labels(L) == union
    assert psg.is_acyclic()
    assert 0 < compaction_ratio(psg) <= 1.0
    for key in psg.edges:
        assert 0 < psg.freq(key) <= 1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_path_label_preservation_random(seed):
    _path_preservation_case(seed, n=5, num_segments=3, alpha=0.4)


def test_merges_confirmed_by_trace_oracle():
    """Every merge the operator performs must be legal under exact trace
    comparison at the moment it happens."""
    checked = 0

    def audit(psg, u, v, condition):
        nonlocal checked
        out_adj, in_adj = psg.adjacency()
        labels = {n: psg.partition.canonical_label(psg.nodes[n].class_idx) for n in psg.nodes}
        assert merge_allowed_by_traces(u, v, list(psg.nodes), out_adj, in_adj, labels), condition
        checked += 1

    segs = [_line_segment(0, ["t0", "t1"]), _line_segment(1, ["t0", "t1"]), _line_segment(2, ["t1", "t1"])]
    summarize(segs, ALL_PROPS, k=1, audit=audit)
    assert checked > 0


def test_every_node_subset_of_one_class():
    segs = synsg(SynSGConfig(alpha=0.3, k=2, n=5, num_segments=4, seed=9))
    psg = summarize(segs, ALL_PROPS, k=1)
    for node in psg.nodes.values():
        classes = {psg.partition.class_of[occ] for occ in node.members}
        assert classes == {node.class_idx}


def test_summary_json_shape():
    segs = [_line_segment(0, ["t0"]), _line_segment(1, ["t0"])]
    psg = summarize(segs, ALL_PROPS, k=1)
    doc = psg.to_doc()
    assert set(doc) == {"vertices", "edges"}
    assert all(set(v) == {"id", "classLabel", "memberCount", "members"} for v in doc["vertices"])
    assert all(set(e) == {"src", "dst", "type", "freq"} for e in doc["edges"])
    dot = psg.to_dot(segs)
    assert "1.00" in dot
