"""Summarization: merge similar segments into one summary graph whose paths
are exactly the union of the segments' paths.

Vertices first partition into equivalence classes (same kind, same kept
property values, isomorphic k-hop neighborhoods). The summary starts as the
disjoint union of the segments and then greedily merges class-mates whose
incoming/outgoing path languages allow it, approximated by simulation
preorders computed in one topological pass per direction. Edge annotations
track, per merged edge, which segments contribute a constituent edge.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Sequence

from .graph import EdgeType, ProvGraph, VertexType

Occ = tuple[int, int]  # (segment index, vertex id within the segment)


class NeighborhoodSizeError(ValueError):
    """A k-hop neighborhood exceeded the isomorphism size cap."""


@dataclass(frozen=True)
class PropertyAggregation:
    keep_entity: frozenset[str] = frozenset()
    keep_activity: frozenset[str] = frozenset()
    keep_agent: frozenset[str] = frozenset()

    def kept(self, vtype: VertexType) -> frozenset[str]:
        if vtype is VertexType.ENTITY:
            return self.keep_entity
        if vtype is VertexType.ACTIVITY:
            return self.keep_activity
        return self.keep_agent

    def to_json(self) -> dict:
        return {
            "entity": sorted(self.keep_entity),
            "activity": sorted(self.keep_activity),
            "agent": sorted(self.keep_agent),
        }

    @classmethod
    def from_json(cls, doc: Mapping | None) -> "PropertyAggregation":
        if not doc:
            return cls()
        return cls(
            keep_entity=frozenset(doc.get("entity", ())),
            keep_activity=frozenset(doc.get("activity", ())),
            keep_agent=frozenset(doc.get("agent", ())),
        )


class SegmentData:
    """Minimal view of one segment: typed vertices, properties, typed edges."""

    __slots__ = ("index", "vertex_ids", "vtypes", "props", "edges", "out", "inc")

    def __init__(self, index: int, vertices: Iterable[tuple[int, VertexType, Mapping]], edges):
        self.index = index
        self.vertex_ids: list[int] = []
        self.vtypes: dict[int, VertexType] = {}
        self.props: dict[int, Mapping] = {}
        for vid, vtype, props in vertices:
            self.vertex_ids.append(vid)
            self.vtypes[vid] = vtype
            self.props[vid] = props
        self.edges: list[tuple[int, int, EdgeType]] = list(edges)
        self.out: dict[int, list[tuple[int, EdgeType]]] = {v: [] for v in self.vertex_ids}
        self.inc: dict[int, list[tuple[int, EdgeType]]] = {v: [] for v in self.vertex_ids}
        for s, d, t in self.edges:
            self.out[s].append((d, t))
            self.inc[d].append((s, t))

    @classmethod
    def from_graph(cls, g: ProvGraph, index: int) -> "SegmentData":
        return cls(
            index,
            ((v.id, v.vtype, v.props) for v in g.vertices),
            ((e.src, e.dst, e.etype) for e in g.edges),
        )

    @classmethod
    def from_segment(cls, seg, index: int) -> "SegmentData":
        g = seg.graph
        vids = set(seg.tags)
        return cls(
            index,
            ((v, g.vertex(v).vtype, g.vertex(v).props) for v in sorted(vids)),
            (
                (g.edge(eid).src, g.edge(eid).dst, g.edge(eid).etype)
                for eid in sorted(seg.edge_ids)
            ),
        )


def as_segment_data(obj: Any, index: int) -> SegmentData:
    if isinstance(obj, SegmentData):
        return obj
    if isinstance(obj, ProvGraph):
        return SegmentData.from_graph(obj, index)
    return SegmentData.from_segment(obj, index)


# ---------------------------------------------------------------------------
# Provenance types (k-hop neighborhoods) and isomorphism
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Neighborhood:
    segment: int
    center: int
    vertices: frozenset[int]
    edges: frozenset[tuple[int, int, EdgeType]]


def ptype(seg: SegmentData, v: int, k: int) -> Neighborhood:
    """Induced subgraph on vertices within undirected distance k of v."""
    seen = {v}
    frontier = [v]
    for _ in range(k):
        nxt = []
        for u in frontier:
            for w, _t in seg.out[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
            for w, _t in seg.inc[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    edges = frozenset((s, d, t) for s, d, t in seg.edges if s in seen and d in seen)
    return Neighborhood(segment=seg.index, center=v, vertices=frozenset(seen), edges=edges)


def _vertex_key(seg: SegmentData, v: int, pagg: PropertyAggregation):
    vtype = seg.vtypes[v]
    kept = pagg.kept(vtype)
    props = seg.props[v]
    return (vtype.value, tuple(sorted((p, props[p]) for p in kept if p in props)))


def iso_check(
    n1: Neighborhood,
    n2: Neighborhood,
    segs: Sequence[SegmentData],
    pagg: PropertyAggregation,
    *,
    size_cap: int = 64,
) -> bool:
    """Backtracking bijection test between two neighborhoods, preserving
    vertex kind, kept property values and typed edges, with the centers
    mapped to each other."""
    if len(n1.vertices) > size_cap or len(n2.vertices) > size_cap:
        raise NeighborhoodSizeError(
            f"neighborhood sizes {len(n1.vertices)}/{len(n2.vertices)} exceed cap {size_cap}"
        )
    if len(n1.vertices) != len(n2.vertices) or len(n1.edges) != len(n2.edges):
        return False
    s1, s2 = segs[n1.segment], segs[n2.segment]
    key1 = {v: _vertex_key(s1, v, pagg) for v in n1.vertices}
    key2 = {v: _vertex_key(s2, v, pagg) for v in n2.vertices}
    if Counter(key1.values()) != Counter(key2.values()):
        return False
    out1: dict[int, set[tuple[int, EdgeType]]] = {v: set() for v in n1.vertices}
    in1: dict[int, set[tuple[int, EdgeType]]] = {v: set() for v in n1.vertices}
    for s, d, t in n1.edges:
        out1[s].add((d, t))
        in1[d].add((s, t))
    out2: dict[int, set[tuple[int, EdgeType]]] = {v: set() for v in n2.vertices}
    in2: dict[int, set[tuple[int, EdgeType]]] = {v: set() for v in n2.vertices}
    for s, d, t in n2.edges:
        out2[s].add((d, t))
        in2[d].add((s, t))

    def degree_sig(v, out, inc):
        return (
            tuple(sorted(t.value for _, t in out[v])),
            tuple(sorted(t.value for _, t in inc[v])),
        )

    order = sorted(n1.vertices - {n1.center})
    mapping = {n1.center: n2.center}
    used = {n2.center}
    if key1[n1.center] != key2[n2.center]:
        return False
    if degree_sig(n1.center, out1, in1) != degree_sig(n2.center, out2, in2):
        return False

    def consistent(v1: int, v2: int) -> bool:
        for d, t in out1[v1]:
            if d in mapping and (mapping[d], t) not in out2[v2]:
                return False
        for s, t in in1[v1]:
            if s in mapping and (mapping[s], t) not in in2[v2]:
                return False
        # reverse direction: every mapped edge of v2 must be present around v1
        inv = {b: a for a, b in mapping.items()}
        for d, t in out2[v2]:
            if d in inv and (inv[d], t) not in out1[v1]:
                return False
        for s, t in in2[v2]:
            if s in inv and (inv[s], t) not in in1[v1]:
                return False
        return True

    def backtrack(idx: int) -> bool:
        if idx == len(order):
            return True
        v1 = order[idx]
        sig = degree_sig(v1, out1, in1)
        for v2 in sorted(n2.vertices - used):
            if key2[v2] != key1[v1] or degree_sig(v2, out2, in2) != sig:
                continue
            if not consistent(v1, v2):
                continue
            mapping[v1] = v2
            used.add(v2)
            if backtrack(idx + 1):
                return True
            del mapping[v1]
            used.discard(v2)
        return False

    return backtrack(0)


def _star_signature(seg: SegmentData, v: int, nbhd: Neighborhood, pagg: PropertyAggregation):
    """Rooted-star signature, or None when neighbors interconnect (then the
    multiset shortcut is not exact and the backtracker decides)."""
    for s, d, _t in nbhd.edges:
        if s != v and d != v:
            return None
    spokes = []
    for d, t in seg.out[v]:
        spokes.append(("out", t.value, _vertex_key(seg, d, pagg)))
    for s, t in seg.inc[v]:
        spokes.append(("in", t.value, _vertex_key(seg, s, pagg)))
    return (_vertex_key(seg, v, pagg), tuple(sorted(spokes)))


# ---------------------------------------------------------------------------
# Equivalence partition
# ---------------------------------------------------------------------------


@dataclass
class EquivalencePartition:
    classes: list[tuple[Occ, ...]]  # sorted members, classes sorted by canonical
    class_of: dict[Occ, int]

    def canonical(self, idx: int) -> Occ:
        return self.classes[idx][0]

    def canonical_label(self, idx: int) -> str:
        seg, vid = self.canonical(idx)
        return f"{seg}.{vid}"


def partition(
    segments: Sequence[Any],
    pagg: PropertyAggregation,
    k: int = 1,
    *,
    size_cap: int = 64,
) -> EquivalencePartition:
    """Group all segment vertices by kind, kept properties and k-hop
    neighborhood isomorphism. k = 1 star neighborhoods partition by signature
    multisets; everything else goes through pairwise backtracking."""
    segs = [as_segment_data(s, i) for i, s in enumerate(segments)]
    occs: list[Occ] = [(s.index, v) for s in segs for v in s.vertex_ids]

    buckets: dict[Any, list[Occ]] = {}
    for seg_idx, vid in occs:
        buckets.setdefault(_vertex_key(segs[seg_idx], vid, pagg), []).append((seg_idx, vid))

    classes: list[list[Occ]] = []
    for _key, members in sorted(buckets.items(), key=lambda kv: min(kv[1])):
        if k == 0:
            classes.append(sorted(members))
            continue
        nbhds = {occ: ptype(segs[occ[0]], occ[1], k) for occ in members}
        remaining: list[Occ] = sorted(members)
        sig_groups: dict[Any, list[Occ]] = {}
        hard: list[Occ] = []
        if k == 1:
            for occ in remaining:
                sig = _star_signature(segs[occ[0]], occ[1], nbhds[occ], pagg)
                if sig is None:
                    hard.append(occ)
                else:
                    sig_groups.setdefault(sig, []).append(occ)
        else:
            hard = remaining
        pre_classes = [grp for _sig, grp in sorted(sig_groups.items(), key=lambda kv: min(kv[1]))]
        # Pairwise isomorphism for the non-star (or k > 1) leftovers.
        hard_classes: list[list[Occ]] = []
        for occ in hard:
            placed = False
            for cls in hard_classes:
                if iso_check(nbhds[cls[0]], nbhds[occ], segs, pagg, size_cap=size_cap):
                    cls.append(occ)
                    placed = True
                    break
            if not placed:
                hard_classes.append([occ])
        classes.extend(sorted(grp) for grp in pre_classes + hard_classes)

    classes.sort(key=lambda grp: grp[0])
    out = EquivalencePartition(classes=[tuple(grp) for grp in classes], class_of={})
    for idx, grp in enumerate(out.classes):
        for occ in grp:
            out.class_of[occ] = idx
    return out


# ---------------------------------------------------------------------------
# Summary graph
# ---------------------------------------------------------------------------


@dataclass
class PsgNode:
    id: int
    class_idx: int
    members: set[Occ]

    def canonical(self) -> Occ:
        return min(self.members)


class SummaryGraph:
    """Merged summary: nodes are subsets of one equivalence class; edges
    remember which segments contribute a constituent edge."""

    def __init__(self, partition_: EquivalencePartition, n_segments: int, total_occurrences: int):
        self.partition = partition_
        self.n_segments = n_segments
        self.total_occurrences = total_occurrences
        self.nodes: dict[int, PsgNode] = {}
        self.edges: dict[tuple[int, int, EdgeType], set[int]] = {}
        self._node_of: dict[Occ, int] = {}

    # -- construction ------------------------------------------------------

    def add_node(self, node_id: int, class_idx: int, members: Iterable[Occ]) -> None:
        node = PsgNode(node_id, class_idx, set(members))
        self.nodes[node_id] = node
        for occ in node.members:
            self._node_of[occ] = node_id

    def add_edge(self, u: int, v: int, etype: EdgeType, segment: int) -> None:
        self.edges.setdefault((u, v, etype), set()).add(segment)

    def node_of(self, occ: Occ) -> int:
        return self._node_of[occ]

    # -- views ---------------------------------------------------------------

    def freq(self, key: tuple[int, int, EdgeType]) -> float:
        return len(self.edges[key]) / self.n_segments

    def parents(self, v: int) -> list[tuple[int, EdgeType]]:
        return [(u, t) for (u, w, t) in self.edges if w == v]

    def children(self, u: int) -> list[tuple[int, EdgeType]]:
        return [(v, t) for (w, v, t) in self.edges if w == u]

    def compaction_ratio(self) -> float:
        return len(self.nodes) / self.total_occurrences

    def adjacency(self) -> tuple[dict[int, list[tuple[int, EdgeType]]], dict[int, list[tuple[int, EdgeType]]]]:
        out: dict[int, list[tuple[int, EdgeType]]] = {v: [] for v in self.nodes}
        inc: dict[int, list[tuple[int, EdgeType]]] = {v: [] for v in self.nodes}
        for (u, v, t) in self.edges:
            out[u].append((v, t))
            inc[v].append((u, t))
        return out, inc

    def topological_order(self) -> list[int]:
        out, inc = self.adjacency()
        indeg = {v: len(inc[v]) for v in self.nodes}
        queue = sorted(v for v in self.nodes if indeg[v] == 0)
        order: list[int] = []
        while queue:
            v = queue.pop(0)
            order.append(v)
            for w, _t in sorted(out[v]):
                indeg[w] -= 1
                if indeg[w] == 0:
                    queue.append(w)
        if len(order) != len(self.nodes):
            raise RuntimeError("summary graph is not acyclic")
        return order

    def is_acyclic(self) -> bool:
        try:
            self.topological_order()
            return True
        except RuntimeError:
            return False

    def has_path(self, u: int, v: int) -> bool:
        if u == v:
            return False
        out, _ = self.adjacency()
        stack = [u]
        seen = {u}
        while stack:
            x = stack.pop()
            for y, _t in out[x]:
                if y == v:
                    return True
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    # -- merging -------------------------------------------------------------

    def merge(self, a: int, b: int) -> int:
        """Fold one node into another; the survivor is the one whose smallest
        member is smaller, keeping ids deterministic. Edge contributions are
        unioned, which recomputes segment frequencies exactly."""
        if self.nodes[b].canonical() < self.nodes[a].canonical():
            a, b = b, a
        keep, gone = self.nodes[a], self.nodes[b]
        keep.members |= gone.members
        for occ in gone.members:
            self._node_of[occ] = a
        del self.nodes[b]
        moved: dict[tuple[int, int, EdgeType], set[int]] = {}
        for (u, v, t), segs in list(self.edges.items()):
            if u == b or v == b:
                del self.edges[(u, v, t)]
                nu = a if u == b else u
                nv = a if v == b else v
                moved.setdefault((nu, nv, t), set()).update(segs)
        for key, segs in moved.items():
            self.edges.setdefault(key, set()).update(segs)
        return a

    # -- path language ---------------------------------------------------------

    def path_labels(self, max_edges: int) -> set[tuple]:
        out, _ = self.adjacency()
        labels = {v: self.partition.canonical_label(self.nodes[v].class_idx) for v in self.nodes}
        return _enumerate_path_labels(list(self.nodes), out, labels, max_edges)

    # -- serialization ---------------------------------------------------------

    def to_doc(self) -> dict:
        order = sorted(self.nodes, key=lambda n: self.nodes[n].canonical())
        return {
            "vertices": [
                {
                    "id": n,
                    "classLabel": self.partition.canonical_label(self.nodes[n].class_idx),
                    "memberCount": len(self.nodes[n].members),
                    "members": [[s, v] for s, v in sorted(self.nodes[n].members)],
                }
                for n in order
            ],
            "edges": [
                {"src": u, "dst": v, "type": t.value, "freq": round(self.freq((u, v, t)), 6)}
                for (u, v, t) in sorted(self.edges, key=lambda k: (k[0], k[1], k[2].value))
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"), ensure_ascii=False)

    def to_dot(self, segments: Sequence[SegmentData] | None = None) -> str:
        shapes = {VertexType.ENTITY: "ellipse", VertexType.ACTIVITY: "box", VertexType.AGENT: "house"}
        lines = ["digraph summary {", "  rankdir=LR;"]
        for n in sorted(self.nodes, key=lambda n: self.nodes[n].canonical()):
            node = self.nodes[n]
            label = self.partition.canonical_label(node.class_idx)
            shape = "ellipse"
            if segments is not None:
                seg_idx, vid = node.canonical()
                shape = shapes[segments[seg_idx].vtypes[vid]]
            lines.append(f'  n{n} [label="{label} (x{len(node.members)})", shape={shape}];')
        for (u, v, t) in sorted(self.edges, key=lambda k: (k[0], k[1], k[2].value)):
            lines.append(f'  n{u} -> n{v} [label="{t.value} {self.freq((u, v, t)):.2f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _enumerate_path_labels(
    vertices: list,
    out: Mapping,
    labels: Mapping,
    max_edges: int,
) -> set[tuple]:
    """All path label words with at most ``max_edges`` edges, vertex labels
    interleaved with edge types."""
    results: set[tuple] = set()

    def walk(v, word: tuple, depth: int) -> None:
        results.add(word)
        if depth == max_edges:
            return
        for w, t in out[v]:
            walk(w, word + (t.value, labels[w]), depth + 1)

    for v in vertices:
        walk(v, (labels[v],), 0)
    return results


def segment_path_labels(
    seg: SegmentData, partition_: EquivalencePartition, max_edges: int
) -> set[tuple]:
    labels = {
        v: partition_.canonical_label(partition_.class_of[(seg.index, v)]) for v in seg.vertex_ids
    }
    return _enumerate_path_labels(seg.vertex_ids, seg.out, labels, max_edges)


def segment_diameter(seg: SegmentData) -> int:
    """Longest directed path length (in edges); segments are DAGs."""
    order: list[int] = []
    indeg = {v: len(seg.inc[v]) for v in seg.vertex_ids}
    queue = [v for v in seg.vertex_ids if indeg[v] == 0]
    while queue:
        v = queue.pop()
        order.append(v)
        for w, _t in seg.out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    depth = {v: 0 for v in seg.vertex_ids}
    for v in order:
        for w, _t in seg.out[v]:
            depth[w] = max(depth[w], depth[v] + 1)
    return max(depth.values(), default=0)


def build_g0(segments: Sequence[Any], partition_: EquivalencePartition) -> SummaryGraph:
    """Disjoint union of the segments with singleton summary nodes."""
    segs = [as_segment_data(s, i) for i, s in enumerate(segments)]
    occs: list[Occ] = sorted((s.index, v) for s in segs for v in s.vertex_ids)
    psg = SummaryGraph(partition_, n_segments=len(segs), total_occurrences=len(occs))
    for node_id, occ in enumerate(occs):
        psg.add_node(node_id, partition_.class_of[occ], [occ])
    for s in segs:
        for u, v, t in s.edges:
            psg.add_edge(psg.node_of((s.index, u)), psg.node_of((s.index, v)), t, s.index)
    return psg


# ---------------------------------------------------------------------------
# Simulation preorders
# ---------------------------------------------------------------------------


class Direction(str, Enum):
    IN = "in"
    OUT = "out"


@dataclass
class SimulationRelation:
    direction: Direction
    dominators: dict[int, frozenset[int]]  # u -> {v : u is dominated by v}

    def leq(self, u: int, v: int) -> bool:
        return v in self.dominators[u]

    def mutual(self, u: int, v: int) -> bool:
        return self.leq(u, v) and self.leq(v, u)


def simulate(psg: SummaryGraph, direction: Direction) -> SimulationRelation:
    """Greatest simulation preorder seeded by class-label equality.

    On an acyclic summary a single pass in dependency order is exact: a
    pair's condition refers only to strictly earlier pairs (parents for the
    incoming direction, children for the outgoing one)."""
    order = psg.topological_order()
    if direction is Direction.OUT:
        order = list(reversed(order))
    out_adj, in_adj = psg.adjacency()
    dep = in_adj if direction is Direction.IN else out_adj

    by_class: dict[int, list[int]] = {}
    for v, node in psg.nodes.items():
        by_class.setdefault(node.class_idx, []).append(v)

    dominators: dict[int, frozenset[int]] = {}
    for u in order:
        mates = by_class[psg.nodes[u].class_idx]
        dep_u = dep[u]
        doms = set()
        for v in mates:
            if v == u:
                doms.add(v)
                continue
            dep_v = dep[v]
            ok = True
            for p, t in dep_u:
                if not any(t == t2 and q in dominators[p] for q, t2 in dep_v):
                    ok = False
                    break
            if ok:
                doms.add(v)
        dominators[u] = frozenset(doms)
    return SimulationRelation(direction=direction, dominators=dominators)


# ---------------------------------------------------------------------------
# The summarization operator
# ---------------------------------------------------------------------------

AuditHook = Callable[[SummaryGraph, int, int, str], None]


def _mutual_groups(psg: SummaryGraph, rel: SimulationRelation) -> list[list[int]]:
    """Equivalence classes of mutual simulation, smallest-canonical first."""
    by_class: dict[int, list[int]] = {}
    for v, node in psg.nodes.items():
        by_class.setdefault(node.class_idx, []).append(v)
    groups: list[list[int]] = []
    for _cls, members in sorted(by_class.items()):
        members = sorted(members, key=lambda n: psg.nodes[n].canonical())
        assigned: set[int] = set()
        for i, u in enumerate(members):
            if u in assigned:
                continue
            group = [u]
            assigned.add(u)
            for v in members[i + 1 :]:
                if v not in assigned and rel.mutual(u, v):
                    group.append(v)
                    assigned.add(v)
            if len(group) > 1:
                groups.append(group)
    return groups


def summarize(
    segments: Sequence[Any],
    pagg: PropertyAggregation,
    k: int = 1,
    *,
    size_cap: int = 64,
    audit: AuditHook | None = None,
) -> SummaryGraph:
    """Build the summary graph: partition, disjoint union, then merge rounds
    until no eligible pair remains.

    Each round batch-merges mutual-simulation groups (safe together, since
    members of a group have identical trace sets in the merge direction) and
    then applies at most one dominated-pair merge, guarded against connecting
    paths, before recomputing the relations."""
    segs = [as_segment_data(s, i) for i, s in enumerate(segments)]
    part = partition(segs, pagg, k, size_cap=size_cap)
    psg = build_g0(segs, part)

    def run_mutual(direction: Direction) -> bool:
        rel = simulate(psg, direction)
        merged = False
        for group in _mutual_groups(psg, rel):
            survivor = group[0]
            for other in group[1:]:
                if audit is not None:
                    audit(psg, survivor, other, f"mutual-{direction.value}")
                survivor = psg.merge(survivor, other)
                merged = True
        return merged

    def run_dominated() -> bool:
        rel_in = simulate(psg, Direction.IN)
        rel_out = simulate(psg, Direction.OUT)
        nodes = sorted(psg.nodes, key=lambda n: psg.nodes[n].canonical())
        for u in nodes:
            for v in nodes:
                if u == v or psg.nodes[u].class_idx != psg.nodes[v].class_idx:
                    continue
                if not (rel_in.leq(u, v) and rel_out.leq(u, v)):
                    continue
                if psg.has_path(u, v) or psg.has_path(v, u):
                    continue
                if audit is not None:
                    audit(psg, u, v, "dominated")
                psg.merge(u, v)
                return True
        return False

    while True:
        if run_mutual(Direction.IN):
            continue
        if run_mutual(Direction.OUT):
            continue
        if run_dominated():
            continue
        break
    if not psg.is_acyclic():
        raise RuntimeError("summarization produced a cycle")
    return psg


def compaction_ratio(psg: SummaryGraph) -> float:
    return psg.compaction_ratio()
