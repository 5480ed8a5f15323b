"""Worklist solver for context-free reachability over provenance graphs.

The solver takes a normal-form grammar (at most two right-hand symbols per
production) and repeatedly extends dequeued facts through every production
in which their nonterminal appears, seeding from single-symbol rules. Vertex
labels act like self-loop edges: consuming one re-emits the same vertex pair
after checking the label is not excluded.

Derivations are not recorded during the run. Because the history set is
complete once the worklist drains, every way a fact can be derived is
reconstructible afterwards from the history plus the graph; the
:class:`DerivationView` does exactly that, on demand, which keeps solver
memory proportional to the fact count alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .factstore import Backend, BudgetExceededError, FactStore, PairSet, PlainRow
from .graph import EdgeType, ProvGraph, VertexType
from .grammar import AnchorTerm, EdgeTerm, Grammar, Production, Symbol, VertexTerm
from .labels import LabelOracle


@dataclass
class SolveStats:
    enqueued: int = 0
    popped: int = 0
    extended: int = 0


class _TermAdjacency:
    """Row/Col access for terminal symbols, backed by the label oracle's
    pre-filtered ancestry lists where possible."""

    def __init__(self, graph: ProvGraph, oracle: LabelOracle):
        self.graph = graph
        self.oracle = oracle

    def row(self, v: int, term: Symbol) -> Iterable[int]:
        """All u with an effective ``v --term--> u`` step."""
        o = self.oracle
        if isinstance(term, VertexTerm):
            return self._self_loop(v, term)
        if isinstance(term, AnchorTerm):
            return (v,) if v == term.vertex_id and o.vertex_passes(v) else ()
        if term.etype is EdgeType.USED:
            return o.users[v] if term.inverse else o.inputs[v]
        if term.etype is EdgeType.WAS_GENERATED_BY:
            return o.products[v] if term.inverse else o.generators[v]
        adj = self.graph.in_(v, term.etype) if term.inverse else self.graph.out(v, term.etype)
        return [u for u, eid in adj if o.edge_passes(eid)]

    def col(self, v: int, term: Symbol) -> Iterable[int]:
        """All u with an effective ``u --term--> v`` step."""
        o = self.oracle
        if isinstance(term, (VertexTerm, AnchorTerm)):
            return self.row(v, term)
        if term.etype is EdgeType.USED:
            return o.inputs[v] if term.inverse else o.users[v]
        if term.etype is EdgeType.WAS_GENERATED_BY:
            return o.generators[v] if term.inverse else o.products[v]
        adj = self.graph.out(v, term.etype) if term.inverse else self.graph.in_(v, term.etype)
        return [u for u, eid in adj if o.edge_passes(eid)]

    def _self_loop(self, v: int, term: VertexTerm) -> tuple[int, ...]:
        o = self.oracle
        if o.vertex_label(v) != term.label:
            return ()
        if term.value is not None and not o.value_equals(v, term.value):
            return ()
        return (v,)


@dataclass
class CflrResult:
    store: FactStore
    derivations: "DerivationView"
    stats: SolveStats


def _compiled_ops(graph: ProvGraph, grammar: Grammar, oracle: LabelOracle, nts: list[str]):
    """Pre-resolve every production into a flat op table keyed by the
    triggering nonterminal: terminal partners become neighbor lists or
    self-loop masks, so the pop loop does no symbol dispatch."""
    terms = _TermAdjacency(graph, oracle)
    n = len(graph)
    adj_cache: dict[tuple, list] = {}

    def adjacency(term: EdgeTerm, side: str) -> list[list[int]]:
        key = (term.etype, term.inverse, side)
        if key not in adj_cache:
            fn = terms.row if side == "row" else terms.col
            adj_cache[key] = [list(fn(v, term)) for v in range(n)]
        return adj_cache[key]

    def mask(term: VertexTerm | AnchorTerm) -> list[bool]:
        return [bool(terms.row(v, term)) for v in range(n)]

    ops: dict[str, list[tuple]] = {nt: [] for nt in nts}
    for p in grammar.productions:
        if len(p.rhs) == 1:
            if isinstance(p.rhs[0], str):
                ops[p.rhs[0]].append(("unit", p.lhs))
            continue
        x, y = p.rhs
        if isinstance(x, str) and isinstance(y, str):
            raise ValueError("compiled path does not handle nonterminal pairs")
        if isinstance(x, str):  # A -> B term : extend on the right
            if isinstance(y, EdgeTerm):
                ops[x].append(("right_adj", p.lhs, adjacency(y, "row")))
            else:
                ops[x].append(("right_mask", p.lhs, mask(y)))
        else:  # A -> term B : extend on the left
            if isinstance(x, EdgeTerm):
                ops[y].append(("left_adj", p.lhs, adjacency(x, "col")))
            else:
                ops[y].append(("left_mask", p.lhs, mask(x)))
    return ops


def _compiled_solve(graph, grammar, oracle, store: FactStore, stats: SolveStats) -> None:
    """Per-fact worklist loop with pre-resolved productions and inlined
    history rows; observationally identical to the generic loop."""
    nts = store.nonterminals
    ops = _compiled_ops(graph, grammar, oracle, nts)
    nt_index = {nt: k for k, nt in enumerate(nts)}
    op_table = [ops[nt] for nt in nts]
    universe = store.universe
    rows = [store.history[nt]._rows for nt in nts]
    backend = store.backend
    from .factstore import ChunkedRow, PlainRow

    n_bytes = (universe + 7) >> 3
    make_row = (lambda: PlainRow(n_bytes)) if backend is Backend.PLAIN_BITMAP else ChunkedRow
    queue = store.worklist
    budget = store.budget
    sstats = store.stats

    def emit(nt_idx: int, i: int, j: int) -> None:
        row = rows[nt_idx].get(i)
        if row is None:
            row = rows[nt_idx][i] = make_row()
        if not row.add(j):
            return
        sstats.enqueued += 1
        sstats.peak = sstats.enqueued
        stats.enqueued += 1
        if budget is not None and sstats.enqueued > budget:
            raise BudgetExceededError(budget, sstats.enqueued)
        queue.push((nt_idx * universe + i) * universe + j)

    # seeds from single-terminal rules (shared with the generic path)
    terms = _TermAdjacency(graph, oracle)
    for p in grammar.productions:
        if len(p.rhs) != 1 or isinstance(p.rhs[0], str):
            continue
        sym = p.rhs[0]
        lhs = nt_index[p.lhs]
        if isinstance(sym, AnchorTerm):
            if oracle.vertex_passes(sym.vertex_id):
                emit(lhs, sym.vertex_id, sym.vertex_id)
        elif isinstance(sym, VertexTerm):
            for v in range(len(graph)):
                if terms.row(v, sym):
                    emit(lhs, v, v)
        else:
            for v in range(len(graph)):
                for u in terms.row(v, sym):
                    emit(lhs, v, u)

    pop = queue.pop
    while len(queue):
        packed = pop()
        sstats.popped += 1
        stats.popped += 1
        stats.extended += 1
        rest, j = divmod(packed, universe)
        b, i = divmod(rest, universe)
        for op in op_table[b]:
            kind = op[0]
            if kind == "right_adj":
                nt_idx = nt_index[op[1]]
                target = rows[nt_idx]
                row = target.get(i)
                if row is None:
                    row = target[i] = make_row()
                for v in op[2][j]:
                    if row.add(v):
                        sstats.enqueued += 1
                        stats.enqueued += 1
                        queue.push((nt_idx * universe + i) * universe + v)
                if budget is not None and sstats.enqueued > budget:
                    sstats.peak = sstats.enqueued
                    raise BudgetExceededError(budget, sstats.enqueued)
            elif kind == "left_adj":
                nt_idx = nt_index[op[1]]
                target = rows[nt_idx]
                for u in op[2][i]:
                    row = target.get(u)
                    if row is None:
                        row = target[u] = make_row()
                    if row.add(j):
                        sstats.enqueued += 1
                        stats.enqueued += 1
                        queue.push((nt_idx * universe + u) * universe + j)
                if budget is not None and sstats.enqueued > budget:
                    sstats.peak = sstats.enqueued
                    raise BudgetExceededError(budget, sstats.enqueued)
            elif kind == "right_mask":
                if op[2][j]:
                    emit(nt_index[op[1]], i, j)
            elif kind == "left_mask":
                if op[2][i]:
                    emit(nt_index[op[1]], i, j)
            else:  # unit
                emit(nt_index[op[1]], i, j)
        sstats.peak = sstats.enqueued


def cflr_baseline(
    graph: ProvGraph,
    grammar: Grammar,
    oracle: LabelOracle | None = None,
    *,
    backend: Backend = Backend.PLAIN_BITMAP,
    budget: int | None = None,
    use_fastset_rowcol: bool = False,
) -> CflrResult:
    """Exhaustive fact derivation; no source information, no early exits.

    ``use_fastset_rowcol`` switches the per-fact candidate filtering from a
    per-element membership loop to whole-row bitmap differences; both paths
    produce the same history. Grammars without nonterminal-pair productions
    run through a pre-compiled op table, everything else through the generic
    symbol-dispatch loop.
    """
    if not grammar.normal_form:
        raise ValueError("solver requires a normal-form grammar (<= 2 RHS symbols)")
    oracle = oracle or LabelOracle(graph)
    nt_nt_free = all(
        not (len(p.rhs) == 2 and isinstance(p.rhs[0], str) and isinstance(p.rhs[1], str))
        for p in grammar.productions
    )
    if nt_nt_free and not use_fastset_rowcol:
        nts = sorted({p.lhs for p in grammar.productions})
        store = FactStore(len(graph), nts, backend=backend, budget=budget)
        stats = SolveStats()
        _compiled_solve(graph, grammar, oracle, store, stats)
        return CflrResult(
            store=store, derivations=DerivationView(graph, grammar, oracle, store), stats=stats
        )
    terms = _TermAdjacency(graph, oracle)
    nts = sorted({p.lhs for p in grammar.productions})
    store = FactStore(len(graph), nts, backend=backend, budget=budget)
    stats = SolveStats()

    # Index productions by the worklist nonterminal that triggers them.
    on_left: dict[str, list[tuple[str, Symbol]]] = {nt: [] for nt in nts}  # A -> B C, B popped
    on_right: dict[str, list[tuple[str, Symbol]]] = {nt: [] for nt in nts}  # A -> C B, B popped
    unit: dict[str, list[str]] = {nt: [] for nt in nts}
    nt_nt = False
    for p in grammar.productions:
        if len(p.rhs) == 1 and isinstance(p.rhs[0], str):
            unit[p.rhs[0]].append(p.lhs)
        elif len(p.rhs) == 2:
            x, y = p.rhs
            if isinstance(x, str):
                on_left[x].append((p.lhs, y))
            if isinstance(y, str):
                on_right[y].append((p.lhs, x))
            if isinstance(x, str) and isinstance(y, str):
                nt_nt = True
    cols = {nt: PairSet(len(graph), backend) for nt in nts} if nt_nt else None

    n_bytes = (len(graph) + 7) >> 3

    def fast_new(candidates: Iterable[int], nt: str, anchor: int) -> list[int]:
        key_row = store.history[nt]._rows.get(anchor)
        if key_row is None:
            return list(candidates)
        if isinstance(key_row, PlainRow):
            cand = PlainRow(n_bytes)
            for c in candidates:
                cand.add(c)
            return list(cand.diff_words(key_row))
        return [c for c in candidates if c not in key_row]

    def emit(nt: str, i: int, j: int) -> None:
        if store.enqueue(nt, i, j):
            stats.enqueued += 1
        if cols is not None:
            cols[nt].insert(j, i)

    # Seed from single-terminal rules.
    for p in grammar.productions:
        if len(p.rhs) != 1 or isinstance(p.rhs[0], str):
            continue
        sym = p.rhs[0]
        if isinstance(sym, AnchorTerm):
            d = sym.vertex_id
            if oracle.vertex_passes(d):
                emit(p.lhs, d, d)
        elif isinstance(sym, VertexTerm):
            for v in range(len(graph)):
                if terms.row(v, sym):
                    emit(p.lhs, v, v)
        else:
            for v in range(len(graph)):
                for u in terms.row(v, sym):
                    emit(p.lhs, v, u)

    while True:
        fact = store.pop()
        if fact is None:
            break
        b, i, j = fact
        stats.popped += 1
        stats.extended += 1
        for a in unit[b]:
            if not store.contains(a, i, j):
                emit(a, i, j)
        for a, partner in on_left[b]:  # A -> B C : extend on the right of (i, j)
            if isinstance(partner, str):
                candidates: Iterable[int] = list(store.row(partner, j))
            else:
                candidates = terms.row(j, partner)
            if use_fastset_rowcol:
                for v in fast_new(candidates, a, i):
                    emit(a, i, v)
            else:
                for v in candidates:
                    if not store.contains(a, i, v):
                        emit(a, i, v)
        for a, partner in on_right[b]:  # A -> C B : extend on the left of (i, j)
            if isinstance(partner, str):
                assert cols is not None
                candidates = list(cols[partner].row(i))
            else:
                candidates = terms.col(i, partner)
            for u in candidates:
                if not store.contains(a, u, j):
                    emit(a, u, j)

    return CflrResult(store=store, derivations=DerivationView(graph, grammar, oracle, store), stats=stats)


@dataclass(frozen=True)
class DerivationStep:
    """One way a fact arises: the production used, the inner facts it
    consumed, and the concrete graph steps (edges or in-place labels)."""

    production: Production
    inner: tuple[tuple[str, int, int], ...]
    edges: tuple[tuple[int, int, Symbol], ...]  # (from, to, terminal)


class DerivationView:
    """On-demand derivation table over a completed history set.

    For every supported production shape the inner facts that could have
    produced a fact are recomputed from the history and the graph, so the
    view enumerates *all* derivations, not just the ones the solver happened
    to walk first.
    """

    def __init__(self, graph: ProvGraph, grammar: Grammar, oracle: LabelOracle, store: FactStore):
        self.graph = graph
        self.grammar = grammar
        self.oracle = oracle
        self.store = store
        self._terms = _TermAdjacency(graph, oracle)
        self._by_lhs: dict[str, list[Production]] = {}
        for p in grammar.productions:
            self._by_lhs.setdefault(p.lhs, []).append(p)
        self._closure: dict[tuple[str, int, int], frozenset[int]] = {}

    def derivations(self, nt: str, i: int, j: int) -> list[DerivationStep]:
        if not self.store.contains(nt, i, j):
            return []
        out: list[DerivationStep] = []
        for p in self._by_lhs.get(nt, ()):  # noqa: B007
            out.extend(self._match(p, i, j))
        return out

    def _match(self, p: Production, i: int, j: int) -> Iterator[DerivationStep]:
        rhs = p.rhs
        terms = self._terms
        store = self.store
        if len(rhs) == 1:
            sym = rhs[0]
            if isinstance(sym, str):
                if store.contains(sym, i, j):
                    yield DerivationStep(p, ((sym, i, j),), ())
            elif j in terms.row(i, sym):
                yield DerivationStep(p, (), ((i, j, sym),))
            return
        x, y = rhs
        if isinstance(x, str) and isinstance(y, str):
            for k in store.row(x, i):
                if store.contains(y, k, j):
                    yield DerivationStep(p, ((x, i, k), (y, k, j)), ())
        elif isinstance(x, str):
            for k in terms.col(j, y):
                if store.contains(x, i, k):
                    yield DerivationStep(p, ((x, i, k),), ((k, j, y),))
        elif isinstance(y, str):
            for k in terms.row(i, x):
                if store.contains(y, k, j):
                    yield DerivationStep(p, ((y, k, j),), ((i, k, x),))
        else:
            for k in terms.row(i, x):
                if j in terms.row(k, y):
                    yield DerivationStep(p, (), ((i, k, x), (k, j, y)))

    def vertex_closure(self, nt: str, i: int, j: int) -> frozenset[int]:
        """Every vertex on any path witnessing the fact, across all
        derivations. Memoized; derivation references are acyclic on valid
        provenance DAGs, so plain recursion with an in-progress guard works."""
        key = (nt, i, j)
        cached = self._closure.get(key)
        if cached is not None:
            return cached
        self._closure[key] = frozenset()  # guard against pathological cycles
        acc = {i, j}
        for step in self.derivations(nt, i, j):
            for u, v, _sym in step.edges:
                acc.add(u)
                acc.add(v)
            for inner in step.inner:
                acc.update(self.vertex_closure(*inner))
        result = frozenset(acc)
        self._closure[key] = result
        return result

    def collect_vertices(self, roots: Iterable[tuple[str, int, int]]) -> set[int]:
        """Union of witness vertices over many facts: single traversal of the
        reachable fact cone without retaining per-fact closures."""
        out: set[int] = set()
        seen: set[tuple[str, int, int]] = set()
        stack = []
        for fact in roots:
            if fact not in seen:
                seen.add(fact)
                stack.append(fact)
        while stack:
            fact = stack.pop()
            nt, i, j = fact
            out.add(i)
            out.add(j)
            for step in self.derivations(nt, i, j):
                for u, v, _sym in step.edges:
                    out.add(u)
                    out.add(v)
                for inner in step.inner:
                    if inner not in seen:
                        seen.add(inner)
                        stack.append(inner)
        return out

    def witness(self, nt: str, i: int, j: int, through: int | None = None) -> list[Any] | None:
        """One concrete alternating walk realizing the fact, optionally forced
        through a given vertex. Elements are vertex ids and
        ``(src, dst, terminal)`` edge steps; in-place label consumption adds
        no element."""
        if not self.store.contains(nt, i, j):
            return None
        for step in self.derivations(nt, i, j):
            if through is not None:
                touched = {i, j}
                for u, v, _sym in step.edges:
                    touched.update((u, v))
                reach = any(through in self.vertex_closure(*inner) for inner in step.inner)
                if through not in touched and not reach:
                    continue
            return self._expand(step, i, j, through)
        return None

    def _route(self, inner: tuple[str, int, int], through: int | None) -> int | None:
        if through is not None and through in self.vertex_closure(*inner):
            return through
        return None

    def _expand(self, step: DerivationStep, i: int, j: int, through: int | None) -> list[Any]:
        p = step.production
        rhs = p.rhs
        if len(rhs) == 1:
            sym = rhs[0]
            if isinstance(sym, str):
                return self.witness(sym, i, j, self._route(step.inner[0], through))  # type: ignore[return-value]
            if isinstance(sym, (AnchorTerm, VertexTerm)):
                return [i]
            return [i, (i, j, sym), j]
        x, y = rhs
        if isinstance(x, str) and isinstance(y, str):
            fact1, fact2 = step.inner
            left = self.witness(*fact1, self._route(fact1, through))
            right = self.witness(*fact2, self._route(fact2, through))
            return left + right[1:]  # type: ignore[operator]
        if isinstance(x, str):
            fact1 = step.inner[0]
            inner = self.witness(*fact1, self._route(fact1, through))
            if isinstance(y, VertexTerm):
                return inner  # label consumed in place
            k = fact1[2]
            return inner + [(k, j, y), j]  # type: ignore[operator]
        if isinstance(y, str):
            fact1 = step.inner[0]
            inner = self.witness(*fact1, self._route(fact1, through))
            if isinstance(x, VertexTerm):
                return inner
            k = fact1[1]
            return [i, (i, k, x)] + inner  # type: ignore[operator]
        return [i, (i, step.edges[0][1], x), step.edges[0][1], (step.edges[1][0], j, y), j]
