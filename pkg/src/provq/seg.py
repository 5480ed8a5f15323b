"""Segmentation: induce the subgraph explaining how destination entities
derive from source entities, under adjustable boundary criteria.

Induction collects four vertex families: interiors of direct ancestry paths,
vertices on similar ancestry paths (the grammar-constrained part, with three
interchangeable solvers), sibling outputs of induced activities, and
responsible agents. Exclusion boundaries act during induction through the
empty-label mapping; expansion boundaries pull in additional ancestors after
induction. The induced result is cached so boundary adjustments never repeat
the induction work.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .cflr import CflrResult, cflr_baseline
from .factstore import Backend, FactStore
from .graph import EdgeType, ProvGraph, VertexType, to_dot
from .grammar import ANCHOR, USE_LR, EdgeTerm, build_sim_normal_form
from .labels import ExclusionRule, LabelOracle

ENTITY_PAIR_FACT = "EntityPair"
ACTIVITY_PAIR_FACT = "ActivityPair"

_USED = EdgeTerm(EdgeType.USED)
_USED_INV = EdgeTerm(EdgeType.USED, inverse=True)
_GEN = EdgeTerm(EdgeType.WAS_GENERATED_BY)
_GEN_INV = EdgeTerm(EdgeType.WAS_GENERATED_BY, inverse=True)

DEFAULT_MAX_EXPANSION_HOPS = 8


class Algorithm(str, Enum):
    BASELINE = "baseline"
    SEG = "seg"
    TST = "tst"


class Tag(str, Enum):
    SRC = "SRC"
    DST = "DST"
    NP = "NP"
    NS = "NS"
    NE = "NE"
    NA = "NA"
    EXPANDED = "EXPANDED"


class SegmentQueryError(ValueError):
    """Semantically invalid query (non-entity endpoints, bad expansion, ...)."""


@dataclass(frozen=True)
class Expansion:
    entities: frozenset[int]
    k: int

    def to_json(self) -> dict:
        return {"entityIds": sorted(self.entities), "k": self.k}

    @classmethod
    def from_json(cls, doc: Mapping) -> "Expansion":
        return cls(entities=frozenset(int(x) for x in doc["entityIds"]), k=int(doc["k"]))


@dataclass(frozen=True)
class BoundarySpec:
    vertex_excluders: tuple[ExclusionRule, ...] = ()
    edge_excluders: tuple[ExclusionRule, ...] = ()
    expansions: tuple[Expansion, ...] = ()

    def is_empty(self) -> bool:
        return not (self.vertex_excluders or self.edge_excluders or self.expansions)

    def to_json(self) -> dict:
        return {
            "vertexExcluders": [r.to_json() for r in self.vertex_excluders],
            "edgeExcluders": [r.to_json() for r in self.edge_excluders],
            "expansions": [x.to_json() for x in self.expansions],
        }

    @classmethod
    def from_json(cls, doc: Mapping | None) -> "BoundarySpec":
        if not doc:
            return cls()
        return cls(
            vertex_excluders=tuple(ExclusionRule.from_json(r) for r in doc.get("vertexExcluders", ())),
            edge_excluders=tuple(ExclusionRule.from_json(r) for r in doc.get("edgeExcluders", ())),
            expansions=tuple(Expansion.from_json(x) for x in doc.get("expansions", ())),
        )


EMPTY_BOUNDARY = BoundarySpec()


@dataclass(frozen=True)
class SegQuery:
    src: frozenset[int]
    dst: frozenset[int]
    boundary: BoundarySpec = EMPTY_BOUNDARY
    algorithm: Algorithm = Algorithm.SEG
    property_constraints: tuple[tuple[VertexType, str], ...] = ()

    def constraint_map(self) -> dict[VertexType, str]:
        return dict(self.property_constraints)

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "src": sorted(self.src),
            "dst": sorted(self.dst),
            "algorithm": self.algorithm.value,
            "boundary": self.boundary.to_json(),
        }
        if self.property_constraints:
            doc["propertyConstraints"] = {t.value: p for t, p in self.property_constraints}
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "SegQuery":
        constraints = tuple(
            (VertexType(t), p) for t, p in sorted(doc.get("propertyConstraints", {}).items())
        )
        return cls(
            src=frozenset(int(x) for x in doc["src"]),
            dst=frozenset(int(x) for x in doc["dst"]),
            boundary=BoundarySpec.from_json(doc.get("boundary")),
            algorithm=Algorithm(doc.get("algorithm", "seg")),
            property_constraints=constraints,
        )


@dataclass
class SegStats:
    facts_enqueued: int = 0
    facts_processed: int = 0
    early_stopped: int = 0
    levels: int = 0


# ---------------------------------------------------------------------------
# Direct-path induction
# ---------------------------------------------------------------------------


def induce_np(
    graph: ProvGraph,
    src: Iterable[int],
    dst: Iterable[int],
    oracle: LabelOracle | None = None,
    *,
    include_derivations: bool = False,
) -> set[int]:
    """Interior vertices of raw-direction ancestry paths from a destination
    to a source: forward reachability from dst intersected with backward
    reachability from src, endpoints excluded."""
    oracle = oracle or LabelOracle(graph)
    etypes = [EdgeType.USED, EdgeType.WAS_GENERATED_BY]
    if include_derivations:
        etypes.append(EdgeType.WAS_DERIVED_FROM)

    def reach(seeds: Iterable[int], direction: str) -> set[int]:
        seen = {s for s in seeds if oracle.vertex_passes(s)}
        frontier = deque(seen)
        while frontier:
            v = frontier.popleft()
            for t in etypes:
                adj = graph.out(v, t) if direction == "out" else graph.in_(v, t)
                for u, eid in adj:
                    if u not in seen and oracle.edge_passes(eid) and oracle.vertex_passes(u):
                        seen.add(u)
                        frontier.append(u)
        return seen

    forward = reach(dst, "out")
    backward = reach(src, "in")
    return (forward & backward) - set(src) - set(dst)


# ---------------------------------------------------------------------------
# Similar-path induction: pair worklist solver
# ---------------------------------------------------------------------------


def solve_pairs(
    graph: ProvGraph,
    dst: Iterable[int],
    oracle: LabelOracle,
    *,
    src_min_seq: int | None = None,
    prune: bool = True,
    early_stop: bool = True,
    backend: Backend = Backend.PLAIN_BITMAP,
    budget: int | None = None,
) -> tuple[FactStore, SegStats]:
    """Derive entity-pair and activity-pair facts around the destination
    anchors by wrapping pairs outward one ancestry hop at a time.

    Both fact kinds are symmetric, so with ``prune`` only the id-ordered
    orientation is enqueued while the history answers for both. The early
    stopping rule skips expanding an activity pair that predates every
    source entity; on temporally ordered graphs no source-containing fact
    can descend from such a pair.
    """
    stats = SegStats()
    store = FactStore(
        len(graph),
        [ENTITY_PAIR_FACT, ACTIVITY_PAIR_FACT],
        backend=backend,
        budget=budget,
        symmetric=(ENTITY_PAIR_FACT, ACTIVITY_PAIR_FACT) if prune else (),
    )
    dst_set = frozenset(dst)
    seq = [v.seq for v in graph.vertices]
    vlabel = oracle.vertex_label
    values_match = oracle.values_match
    generators = oracle.generators
    inputs = oracle.inputs

    def emit(nt: str, i: int, j: int) -> None:
        if prune and i > j:
            i, j = j, i
        if store.enqueue(nt, i, j):
            stats.facts_enqueued += 1

    for d in sorted(dst_set):
        if oracle.vertex_passes(d):
            emit(ENTITY_PAIR_FACT, d, d)

    while True:
        fact = store.pop()
        if fact is None:
            break
        nt, i, j = fact
        if nt == ACTIVITY_PAIR_FACT and early_stop and src_min_seq is not None:
            if seq[i] < src_min_seq and seq[j] < src_min_seq:
                stats.early_stopped += 1
                continue
        stats.facts_processed += 1
        if vlabel(i) is None or vlabel(j) is None:
            continue
        if nt == ENTITY_PAIR_FACT:
            # An anchor pair is consumed as the destination terminal, which
            # carries no property value; other pairs must agree on theirs.
            if not (i == j and i in dst_set) and not values_match(i, j):
                continue
            for a in generators[i]:
                for b in generators[j]:
                    emit(ACTIVITY_PAIR_FACT, a, b)
        else:
            if not values_match(i, j):
                continue
            for e in inputs[i]:
                for f in inputs[j]:
                    emit(ENTITY_PAIR_FACT, e, f)
    return store, stats


class PairDerivations:
    """Lazy derivation view over a completed pair-fact history; mirrors the
    wrap rules of :func:`solve_pairs` to enumerate every way a fact arises."""

    def __init__(self, graph: ProvGraph, oracle: LabelOracle, store: FactStore, dst: frozenset[int]):
        self.graph = graph
        self.oracle = oracle
        self.store = store
        self.dst = dst
        self._closure: dict[tuple[str, int, int], frozenset[int]] = {}

    def derivations(self, nt: str, i: int, j: int) -> list[tuple[tuple[str, int, int] | None, tuple[int, int]]]:
        """Each derivation is ``(inner_fact | None, (left, right))`` where the
        pair gives the two wrapped vertices (equal to ``(i, j)`` for seeds)."""
        o = self.oracle
        out: list[tuple[tuple[str, int, int] | None, tuple[int, int]]] = []
        if nt == ENTITY_PAIR_FACT:
            if i == j and i in self.dst and o.vertex_passes(i):
                out.append((None, (i, j)))
            for a in o.users[i]:
                for b in o.users[j]:
                    if (
                        self.store.contains(ACTIVITY_PAIR_FACT, a, b)
                        and o.vertex_label(a) is not None
                        and o.vertex_label(b) is not None
                        and o.values_match(a, b)
                    ):
                        out.append(((ACTIVITY_PAIR_FACT, a, b), (a, b)))
        else:
            for e in o.products[i]:
                for f in o.products[j]:
                    if (
                        self.store.contains(ENTITY_PAIR_FACT, e, f)
                        and o.vertex_label(e) is not None
                        and o.vertex_label(f) is not None
                        and ((e == f and e in self.dst) or o.values_match(e, f))
                    ):
                        out.append(((ENTITY_PAIR_FACT, e, f), (e, f)))
        return out

    def vertex_closure(self, nt: str, i: int, j: int) -> frozenset[int]:
        key = (nt, i, j)
        cached = self._closure.get(key)
        if cached is not None:
            return cached
        self._closure[key] = frozenset()
        acc = {i, j}
        for inner, (a, b) in self.derivations(nt, i, j):
            acc.update((a, b))
            if inner is not None:
                acc.update(self.vertex_closure(*inner))
        result = frozenset(acc)
        self._closure[key] = result
        return result

    def collect_vertices(self, roots: Iterable[tuple[str, int, int]]) -> set[int]:
        """Union of witness-path vertices over many facts at once: one pass
        over the reachable fact cone, no per-fact sets retained. Facts are
        symmetric, so each unordered pair is visited once."""
        out: set[int] = set()
        seen: set[tuple[str, int, int]] = set()
        stack = []

        def push(nt: str, i: int, j: int) -> None:
            key = (nt, i, j) if i <= j else (nt, j, i)
            if key not in seen:
                seen.add(key)
                stack.append(key)

        for nt, i, j in roots:
            push(nt, i, j)
        while stack:
            nt, i, j = stack.pop()
            out.add(i)
            out.add(j)
            for inner, (a, b) in self.derivations(nt, i, j):
                out.add(a)
                out.add(b)
                if inner is not None:
                    push(*inner)
        return out

    def witness(self, nt: str, i: int, j: int, through: int | None = None) -> list[Any] | None:
        """One alternating walk realizing the fact (vertex ids interleaved
        with ``(src, dst, edge term)`` steps), optionally through a vertex."""
        if not self.store.contains(nt, i, j):
            return None
        for inner, (a, b) in self.derivations(nt, i, j):
            if inner is None:
                if through is None or through == i:
                    return [i]
                continue
            if through is not None and through not in {i, j} | self.vertex_closure(*inner):
                continue
            route = through if through is not None and through in self.vertex_closure(*inner) else None
            mid = self.witness(*inner, route)
            if mid is None:
                continue
            if nt == ENTITY_PAIR_FACT:
                return [i, (i, a, _USED_INV), *mid, (b, j, _USED), j]
            return [i, (i, a, _GEN_INV), *mid, (b, j, _GEN), j]
        return None


def extract_similar_from_pairs(
    store: FactStore,
    derivations: PairDerivations,
    src: Iterable[int],
) -> set[int]:
    """Vertices on any witness path of an entity-pair fact with a source
    endpoint. Histories are symmetric, so scanning source rows covers facts
    in either orientation."""
    roots = [
        (ENTITY_PAIR_FACT, s, t) for s in sorted(set(src)) for t in store.row(ENTITY_PAIR_FACT, s)
    ]
    if not roots:
        return set()
    return derivations.collect_vertices(roots)


#: Graphs at or above this size run the accelerated engines (unless a
#: property constraint forces the scalar path, which supports them).
AUTO_BATCH_THRESHOLD = 1500


def _pick_engine(graph: ProvGraph, oracle: LabelOracle, engine: str) -> str:
    if engine in ("batch", "compiled"):
        if oracle.property_constraints:
            raise ValueError(f"the {engine} engine does not support property-constrained labels")
        return engine
    if engine == "scalar":
        return "scalar"
    if engine != "auto":
        raise ValueError(f"unknown engine {engine!r}")
    if len(graph) >= AUTO_BATCH_THRESHOLD and not oracle.property_constraints:
        return "compiled"
    return "scalar"


def induce_ns_seg(
    graph: ProvGraph,
    src: Iterable[int],
    dst: Iterable[int],
    oracle: LabelOracle | None = None,
    *,
    engine: str = "auto",
    **kwargs: Any,
) -> tuple[set[int], Any, SegStats]:
    oracle = oracle or LabelOracle(graph)
    src = frozenset(src)
    dst = frozenset(dst)
    src_min_seq = min((graph.seq_of(s) for s in src), default=None)
    picked = _pick_engine(graph, oracle, engine)
    if picked == "compiled":
        from . import kernels

        stats = SegStats()
        kwargs.pop("backend", None)
        result = kernels.compiled_solve_pairs(
            graph, dst, oracle, src_min_seq=src_min_seq, stats=stats, **kwargs
        )
        return kernels.compiled_extract_pairs(result, src, dst), result, stats
    if picked == "batch":
        from . import batch

        stats = SegStats()
        kwargs.pop("backend", None)
        result = batch.batch_solve_pairs(
            graph, dst, oracle, src_min_seq=src_min_seq, stats=stats, **kwargs
        )
        return batch.batch_extract_pairs(result, src, dst), result, stats
    store, stats = solve_pairs(graph, dst, oracle, src_min_seq=src_min_seq, **kwargs)
    deriv = PairDerivations(graph, oracle, store, dst)
    return extract_similar_from_pairs(store, deriv, src), store, stats


# ---------------------------------------------------------------------------
# Similar-path induction: per-destination level sets
# ---------------------------------------------------------------------------


def _class_depth(cls: "_LevelClass") -> int:
    depth = 0
    while cls.parent is not None:
        cls = cls.parent
        depth += 1
    return depth


class _LevelClass:
    """One equivalence class of one level: the member vertices, a link to the
    class it was expanded from, and the label value its expansion consumed
    (None outside property-constrained queries and at the anchor). Member
    predecessors are recomputed on demand during result extraction, keeping
    expansion allocation-free."""

    __slots__ = ("parent", "members", "is_entity", "via_value")

    def __init__(self, parent: "_LevelClass | None", is_entity: bool, via_value=None):
        self.parent = parent
        self.members: set[int] = set()
        self.is_entity = is_entity
        self.via_value = via_value


def solve_levels(
    graph: ProvGraph,
    anchor: int,
    oracle: LabelOracle,
    src: frozenset[int],
    *,
    early_stop: bool = True,
    max_levels: int | None = None,
    stats: SegStats | None = None,
) -> set[int]:
    """Similar-ancestry vertices for one destination via alternating level
    sets: all members of one class relate pairwise, because their descent
    words to the anchor coincide by construction.

    Classes split when a property constraint makes consumed labels differ;
    the signature tuple keys the split. A class containing a source entity is
    closed back down to the anchor through the recorded parent chain, and
    since every class member pairs with the hit source, the closure runs over
    whole classes.
    """
    stats = stats if stats is not None else SegStats()
    o = oracle
    if not o.vertex_passes(anchor):
        return set()
    src_min_seq = min((graph.seq_of(s) for s in src), default=None)
    cap = max_levels if max_levels is not None else len(graph)
    seq = graph.seq_of

    root = _LevelClass(None, is_entity=True)
    root.members.add(anchor)
    stats.facts_enqueued += 1
    e_frontier: dict[tuple, _LevelClass] = {(): root}
    hits: list[_LevelClass] = [root] if anchor in src else []

    ent_constrained = o.constrained(VertexType.ENTITY)
    act_constrained = o.constrained(VertexType.ACTIVITY)
    vertex_label = o.vertex_label
    generators = o.generators
    inputs = o.inputs

    level = 0
    while e_frontier and level < cap:
        level += 1
        # Generation wrap: consume entity labels, move to generating
        # activities. The anchor class is consumed as the destination
        # terminal, so no property value applies there.
        a_frontier: dict[tuple, _LevelClass] = {}
        for sig, cls in e_frontier.items():
            at_anchor = cls.parent is None
            for e in cls.members:
                if vertex_label(e) is None:
                    continue
                value = None
                if ent_constrained and not at_anchor:
                    if o.value_missing(e):
                        continue
                    value = o.vertex_value(e)
                    key = sig + (("E", value),)
                else:
                    key = sig
                gens = generators[e]
                if gens:
                    bucket = a_frontier.get(key)
                    if bucket is None:
                        bucket = a_frontier[key] = _LevelClass(cls, is_entity=False, via_value=value)
                    bucket.members.update(gens)
        if early_stop and src_min_seq is not None:
            kept: dict[tuple, _LevelClass] = {}
            for key, cls in a_frontier.items():
                if all(seq(a) < src_min_seq for a in cls.members):
                    stats.early_stopped += len(cls.members)
                else:
                    kept[key] = cls
            a_frontier = kept
        # Use wrap: consume activity labels, move to the entities they used.
        next_e: dict[tuple, _LevelClass] = {}
        for sig, cls in a_frontier.items():
            stats.facts_enqueued += len(cls.members)
            stats.facts_processed += len(cls.members)
            for a in cls.members:
                if vertex_label(a) is None:
                    continue
                value = None
                if act_constrained:
                    if o.value_missing(a):
                        continue
                    value = o.vertex_value(a)
                    key = sig + (("A", value),)
                else:
                    key = sig
                used = inputs[a]
                if used:
                    bucket = next_e.get(key)
                    if bucket is None:
                        bucket = next_e[key] = _LevelClass(cls, is_entity=True, via_value=value)
                    bucket.members.update(used)
        for cls in next_e.values():
            stats.facts_enqueued += len(cls.members)
            stats.facts_processed += len(cls.members)
            if src & cls.members:
                hits.append(cls)
        e_frontier = next_e
    stats.levels = max(stats.levels, level)

    def feeds(v: int, cls: _LevelClass) -> bool:
        """Would v have expanded into this class? Mirrors the label gating
        applied during expansion (a recorded value implies constrained mode)."""
        if vertex_label(v) is None:
            return False
        return cls.via_value is None or o.value_equals(v, cls.via_value)

    # One downward sweep serves every hit class: frontiers accumulate on the
    # shared parent chain instead of being walked per hit.
    result: set[int] = set()
    frontiers: dict[int, set[int]] = {}
    order: list[_LevelClass] = []
    for cls in hits:
        key = id(cls)
        if key not in frontiers:
            frontiers[key] = set()
            order.append(cls)
        frontiers[key] |= cls.members
    queue = list(order)
    seen_cls = {id(c) for c in queue}
    idx = 0
    while idx < len(queue):
        cls = queue[idx]
        idx += 1
        if cls.parent is not None and id(cls.parent) not in seen_cls:
            seen_cls.add(id(cls.parent))
            queue.append(cls.parent)
    # process deepest-first: a class always precedes its parent in depth
    queue.sort(key=_class_depth, reverse=True)
    for cls in queue:
        frontier = frontiers.get(id(cls), set())
        if not frontier:
            continue
        result |= frontier
        parent = cls.parent
        if parent is None:
            continue
        if cls.is_entity:
            upstream = {
                a
                for a in parent.members
                if feeds(a, cls) and any(e in frontier for e in inputs[a])
            }
        else:
            upstream = set()
            for a in frontier:
                for e in o.products[a]:
                    if e in parent.members and feeds(e, cls):
                        upstream.add(e)
        if upstream:
            frontiers.setdefault(id(parent), set()).update(upstream)
    return result


def induce_ns_tst(
    graph: ProvGraph,
    src: Iterable[int],
    dst: Iterable[int],
    oracle: LabelOracle | None = None,
    *,
    early_stop: bool = True,
    max_levels: int | None = None,
    engine: str = "auto",
) -> tuple[set[int], SegStats]:
    oracle = oracle or LabelOracle(graph)
    src = frozenset(src)
    stats = SegStats()
    out: set[int] = set()
    picked = _pick_engine(graph, oracle, engine)
    if picked == "compiled":
        from . import kernels
        from .batch import build_space

        space = build_space(graph, oracle)
        for d in sorted(set(dst)):
            out |= kernels.compiled_solve_levels(
                graph, d, oracle, src,
                early_stop=early_stop, max_levels=max_levels, stats=stats, space=space,
            )
        return out, stats
    if picked == "batch":
        from . import batch

        space = batch.build_space(graph, oracle)
        for d in sorted(set(dst)):
            out |= batch.batch_solve_levels(
                graph, d, oracle, src,
                early_stop=early_stop, max_levels=max_levels, stats=stats, space=space,
            )
        return out, stats
    for d in sorted(set(dst)):
        out |= solve_levels(
            graph, d, oracle, src, early_stop=early_stop, max_levels=max_levels, stats=stats
        )
    return out, stats


# ---------------------------------------------------------------------------
# Similar-path induction: generic normal-form solver
# ---------------------------------------------------------------------------


def induce_ns_baseline(
    graph: ProvGraph,
    src: Iterable[int],
    dst: Iterable[int],
    oracle: LabelOracle | None = None,
    *,
    backend: Backend = Backend.PLAIN_BITMAP,
    budget: int | None = None,
    use_fastset_rowcol: bool = False,
    engine: str = "auto",
) -> tuple[set[int], Any]:
    """Similar-ancestry vertices through the exhaustive normal-form solver.

    Extraction reads the use-closed pair facts (whose words are exactly the
    palindromic segment labels) plus anchor seeds, so endpoint labels play no
    role — matching the other two solvers under endpoint exclusion."""
    oracle = oracle or LabelOracle(graph)
    src = frozenset(src)
    dst = frozenset(dst)
    picked = _pick_engine(graph, oracle, engine)
    if picked == "compiled":
        from . import kernels
        from .batch import batch_extract_normal_form

        stats = SegStats()
        result = kernels.compiled_solve_normal_form(
            graph, dst, oracle, budget=budget, fastset=use_fastset_rowcol, stats=stats
        )
        return batch_extract_normal_form(result, src, dst), result
    if picked == "batch" and not use_fastset_rowcol:
        from . import batch

        stats = SegStats()
        result = batch.batch_solve_normal_form(graph, dst, oracle, budget=budget, stats=stats)
        return batch.batch_extract_normal_form(result, src, dst), result
    entity_values = oracle.value_universe(VertexType.ENTITY) or None
    activity_values = oracle.value_universe(VertexType.ACTIVITY) or None
    grammar = build_sim_normal_form(
        dst, graph, entity_values=entity_values, activity_values=activity_values
    )
    result = cflr_baseline(
        graph, grammar, oracle, backend=backend, budget=budget, use_fastset_rowcol=use_fastset_rowcol
    )
    out: set[int] = set()
    roots = []
    for s in sorted(src):
        if result.store.contains(ANCHOR, s, s):
            out.add(s)
        roots.extend((USE_LR, s, t) for t in result.store.row(USE_LR, s))
    if roots:
        out |= result.derivations.collect_vertices(roots)
    return out, result


# ---------------------------------------------------------------------------
# Siblings, agents, expansion
# ---------------------------------------------------------------------------


def induce_ne(graph: ProvGraph, core: Iterable[int], oracle: LabelOracle | None = None) -> set[int]:
    """Entities generated by an induced activity but not themselves induced."""
    oracle = oracle or LabelOracle(graph)
    core = set(core)
    out: set[int] = set()
    for v in core:
        if graph.vertex(v).vtype is VertexType.ACTIVITY:
            for e in oracle.products[v]:
                if e not in core and oracle.vertex_passes(e):
                    out.add(e)
    return out


def induce_na(graph: ProvGraph, vset: Iterable[int], oracle: LabelOracle | None = None) -> set[int]:
    """Agents associated with induced activities or attributed induced entities."""
    oracle = oracle or LabelOracle(graph)
    out: set[int] = set()
    for v in vset:
        for etype in (EdgeType.WAS_ASSOCIATED_WITH, EdgeType.WAS_ATTRIBUTED_TO):
            for u, eid in graph.out(v, etype):
                if oracle.edge_passes(eid) and oracle.vertex_passes(u):
                    out.add(u)
    return out


def expand_ancestors(
    graph: ProvGraph, start: Iterable[int], k: int, oracle: LabelOracle | None = None
) -> set[int]:
    """Ancestors within 2k raw hops of the start entities, alternating the
    generated-by and used steps (k activities away). Returns only vertices
    not already in ``start``."""
    oracle = oracle or LabelOracle(graph)
    seen = set(start)
    frontier = set(start)
    reached: set[int] = set()
    for _ in range(2 * k):
        nxt: set[int] = set()
        for v in frontier:
            vtype = graph.vertex(v).vtype
            if vtype is VertexType.ENTITY:
                steps = oracle.generators[v]
            elif vtype is VertexType.ACTIVITY:
                steps = oracle.inputs[v]
            else:
                continue
            for u in steps:
                if u not in seen and oracle.vertex_passes(u):
                    seen.add(u)
                    nxt.add(u)
        reached |= nxt
        frontier = nxt
    return reached


# ---------------------------------------------------------------------------
# The segmentation operator
# ---------------------------------------------------------------------------


@dataclass
class _SegmentCache:
    oracle: LabelOracle
    np: frozenset[int]
    ns: frozenset[int]
    ne: frozenset[int]
    na: frozenset[int]
    facts: Any
    cflr: Any
    stats: SegStats


@dataclass
class Segment:
    graph: ProvGraph
    query: SegQuery
    boundary: BoundarySpec
    tags: dict[int, Tag]
    edge_ids: list[int]
    connected: bool
    cache: _SegmentCache = field(repr=False)

    @property
    def vertex_ids(self) -> list[int]:
        return sorted(self.tags)

    @property
    def stats(self) -> SegStats:
        return self.cache.stats

    def to_doc(self) -> dict:
        query_doc = self.query.to_json()
        query_doc["boundary"] = self.boundary.to_json()
        return {
            "query": query_doc,
            "vertices": [{"id": v, "tag": self.tags[v].value} for v in sorted(self.tags)],
            "edges": sorted(self.edge_ids),
            "connected": self.connected,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"), ensure_ascii=False)

    def to_dot(self) -> str:
        colors = {
            Tag.SRC: "dodgerblue",
            Tag.DST: "firebrick",
            Tag.NP: "gold",
            Tag.NS: "darkseagreen",
            Tag.NE: "gray",
            Tag.NA: "orchid",
            Tag.EXPANDED: "orange",
        }
        sub = subgraph_of(self.graph, set(self.tags), self.edge_ids)
        attrs = {}
        remap = {old: new for new, old in enumerate(sorted(self.tags))}
        for old, tag in self.tags.items():
            attrs[remap[old]] = f'style=filled, fillcolor="{colors[tag].lower()}"'
        return to_dot(sub, extra_vertex_attrs=attrs)


def subgraph_of(graph: ProvGraph, vertex_ids: set[int], edge_ids: Iterable[int]) -> ProvGraph:
    """Materialize an induced subgraph with re-densified ids; original ids are
    preserved in an ``origId``-style mapping only through position order."""
    from .graph import Edge, Vertex, build

    order = sorted(vertex_ids)
    remap = {old: new for new, old in enumerate(order)}
    vertices = [
        Vertex(id=remap[v], vtype=graph.vertex(v).vtype, seq=graph.vertex(v).seq, props=graph.vertex(v).props)
        for v in order
    ]
    edges = []
    for new_id, eid in enumerate(sorted(edge_ids)):
        e = graph.edge(eid)
        edges.append(Edge(id=new_id, etype=e.etype, src=remap[e.src], dst=remap[e.dst], props=e.props))
    return build(vertices, edges, property_types=graph.property_types)


def _validate_query(graph: ProvGraph, query: SegQuery) -> None:
    if not query.src or not query.dst:
        raise SegmentQueryError("source and destination entity sets must be non-empty")
    for v in query.src | query.dst:
        if not (0 <= v < len(graph)):
            raise SegmentQueryError(f"query vertex {v} not in graph")
        if graph.vertex(v).vtype is not VertexType.ENTITY:
            raise SegmentQueryError(f"query vertex {v} is not an entity")
    for t, prop in query.property_constraints:
        if prop not in graph.property_types:
            raise SegmentQueryError(f"property constraint {prop!r} not a declared property type")


def segment(
    graph: ProvGraph,
    query: SegQuery,
    *,
    backend: Backend = Backend.PLAIN_BITMAP,
    budget: int | None = None,
    prune: bool = True,
    early_stop: bool = True,
    np_include_derivations: bool = False,
    max_levels: int | None = None,
    max_expansion_k: int = DEFAULT_MAX_EXPANSION_HOPS,
    use_fastset_rowcol: bool = False,
    engine: str = "auto",
) -> Segment:
    """Induce the segment for a query, then apply its boundary as a view.

    Exclusions take part in induction through empty labels; the induced base
    is cached so later :func:`adjust` calls restyle the same induction."""
    _validate_query(graph, query)
    oracle = LabelOracle(
        graph,
        vertex_rules=query.boundary.vertex_excluders,
        edge_rules=query.boundary.edge_excluders,
        property_constraints=query.constraint_map(),
    )
    np_set = induce_np(graph, query.src, query.dst, oracle, include_derivations=np_include_derivations)
    facts: Any = None
    cflr: Any = None
    if query.algorithm is Algorithm.SEG:
        ns_set, facts, stats = induce_ns_seg(
            graph, query.src, query.dst, oracle,
            prune=prune, early_stop=early_stop, backend=backend, budget=budget, engine=engine,
        )
    elif query.algorithm is Algorithm.TST:
        ns_set, stats = induce_ns_tst(
            graph, query.src, query.dst, oracle,
            early_stop=early_stop, max_levels=max_levels, engine=engine,
        )
    else:
        ns_set, cflr = induce_ns_baseline(
            graph, query.src, query.dst, oracle,
            backend=backend, budget=budget, use_fastset_rowcol=use_fastset_rowcol, engine=engine,
        )
        if isinstance(cflr, CflrResult):
            stats = SegStats(
                facts_enqueued=cflr.stats.enqueued,
                facts_processed=cflr.stats.popped,
            )
        else:
            stats = cflr.stats
    core = np_set | ns_set
    ne_set = induce_ne(graph, core, oracle)
    na_set = induce_na(
        graph,
        {v for v in (set(query.src) | set(query.dst) | core | ne_set) if oracle.vertex_passes(v)},
        oracle,
    )
    cache = _SegmentCache(
        oracle=oracle,
        np=frozenset(np_set),
        ns=frozenset(ns_set),
        ne=frozenset(ne_set),
        na=frozenset(na_set),
        facts=facts,
        cflr=cflr,
        stats=stats,
    )
    return _compose_view(graph, query, cache, query.boundary, max_expansion_k)


def adjust(seg: Segment, boundary: BoundarySpec, *, max_expansion_k: int = DEFAULT_MAX_EXPANSION_HOPS) -> Segment:
    """Re-apply boundary criteria to the cached induction: exclusions filter
    linearly, expansions traverse ancestry from vertices of the current view.
    The cached base is untouched, so adjustments are freely reversible."""
    return _compose_view(seg.graph, seg.query, seg.cache, boundary, max_expansion_k)


def _compose_view(
    graph: ProvGraph,
    query: SegQuery,
    cache: _SegmentCache,
    boundary: BoundarySpec,
    max_expansion_k: int,
) -> Segment:
    def vertex_ok(v: int) -> bool:
        vx = graph.vertex(v)
        return not any(rule.matches(vx) for rule in boundary.vertex_excluders)

    def edge_ok(eid: int) -> bool:
        e = graph.edge(eid)
        return not any(rule.matches(e) for rule in boundary.edge_excluders)

    tags: dict[int, Tag] = {}

    def assign(ids: Iterable[int], tag: Tag) -> None:
        for v in ids:
            if v not in tags and vertex_ok(v):
                tags[v] = tag

    assign(query.src, Tag.SRC)
    assign(query.dst, Tag.DST)
    assign(sorted(cache.np), Tag.NP)
    assign(sorted(cache.ns), Tag.NS)
    assign(sorted(cache.ne), Tag.NE)
    assign(sorted(cache.na), Tag.NA)

    view_oracle = LabelOracle(
        graph, vertex_rules=boundary.vertex_excluders, edge_rules=boundary.edge_excluders
    )
    for expansion in boundary.expansions:
        if expansion.k < 0 or expansion.k > max_expansion_k:
            raise SegmentQueryError(
                f"expansion hop count {expansion.k} outside [0, {max_expansion_k}]"
            )
        missing = expansion.entities - tags.keys()
        if missing:
            raise SegmentQueryError(f"expansion entities {sorted(missing)} not in the segment")
        for v in expansion.entities:
            if graph.vertex(v).vtype is not VertexType.ENTITY:
                raise SegmentQueryError(f"expansion vertex {v} is not an entity")
        assign(sorted(expand_ancestors(graph, expansion.entities, expansion.k, view_oracle)), Tag.EXPANDED)

    vset = set(tags)
    edge_ids = [
        e.id for e in graph.edges if e.src in vset and e.dst in vset and edge_ok(e.id)
    ]

    # Undirected connectivity over the view.
    connected = False
    if vset:
        adj: dict[int, list[int]] = {v: [] for v in vset}
        for eid in edge_ids:
            e = graph.edge(eid)
            adj[e.src].append(e.dst)
            adj[e.dst].append(e.src)
        start = next(iter(vset))
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        connected = seen == vset
    return Segment(
        graph=graph,
        query=query,
        boundary=boundary,
        tags=tags,
        edge_ids=edge_ids,
        connected=connected,
        cache=cache,
    )
