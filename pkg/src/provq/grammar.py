"""Context-free grammars over provenance path alphabets.

Terminals match path elements: a vertex by its effective label (optionally
extended with one property value), an edge by its kind and travel direction,
or one specific anchor vertex by id. Nonterminals derive vertex pairs joined
by a path whose element labels spell a word of the nonterminal's language.

Two grammar forms describe the same family of palindromic ancestry words:

* the compact pair form, whose two nonterminals relate entity pairs and
  activity pairs and whose vertex-label rules are consumed in place, and
* the binary normal form, where every production has at most two right-hand
  symbols and each ancestry hop takes four worklist steps instead of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .graph import EdgeType, ProvGraph, VertexType


@dataclass(frozen=True, slots=True)
class VertexTerm:
    """Matches a vertex whose effective label equals ``label`` (and whose
    constrained property value equals ``value`` when one is given)."""

    label: str  # "E" | "A" | "AGENT"
    value: Any = None

    def __str__(self) -> str:
        return self.label if self.value is None else f"{self.label}:{self.value}"


@dataclass(frozen=True, slots=True)
class EdgeTerm:
    etype: EdgeType
    inverse: bool = False

    def __str__(self) -> str:
        mark = "~" if self.inverse else ""
        return f"{mark}{self.etype.value}"


@dataclass(frozen=True, slots=True)
class AnchorTerm:
    """Matches exactly one destination vertex, by id."""

    vertex_id: int

    def __str__(self) -> str:
        return f"#{self.vertex_id}"


Symbol = VertexTerm | EdgeTerm | AnchorTerm | str  # str = nonterminal name


@dataclass(frozen=True, slots=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]

    def __str__(self) -> str:
        return f"{self.lhs} -> " + " ".join(str(s) for s in self.rhs)


@dataclass(frozen=True)
class Grammar:
    productions: tuple[Production, ...]
    start: str

    def __post_init__(self) -> None:
        heads = {p.lhs for p in self.productions}
        for p in self.productions:
            for sym in p.rhs:
                if isinstance(sym, str) and sym not in heads:
                    raise ValueError(f"nonterminal {sym!r} in {p} has no production")
        if self.start not in heads:
            raise ValueError(f"start symbol {self.start!r} has no production")

    @property
    def normal_form(self) -> bool:
        return all(len(p.rhs) <= 2 for p in self.productions)

    def by_lhs(self, lhs: str) -> list[Production]:
        return [p for p in self.productions if p.lhs == lhs]

    def __str__(self) -> str:
        return "\n".join(str(p) for p in self.productions)


# Nonterminal names. The pair form relates same-kind vertex pairs whose
# descent words to a shared anchor coincide.
ENTITY_PAIR = "EntityPair"
ACTIVITY_PAIR = "ActivityPair"

# Normal-form stages: each ancestry hop extends the pair with an inverse edge
# on the left (…L), then closes it with the matching forward edge and the two
# endpoint vertex labels (…LR).
ANCHOR = "Anchor"
GEN_L = "GenL"
GEN_LR = "GenLR"
ACT_L = "ActL"
ACT_LR = "ActLR"
USE_L = "UseL"
USE_LR = "UseLR"
ENT_L = "EntL"
ENT_LR = "EntLR"

_USED = EdgeTerm(EdgeType.USED)
_USED_INV = EdgeTerm(EdgeType.USED, inverse=True)
_GEN = EdgeTerm(EdgeType.WAS_GENERATED_BY)
_GEN_INV = EdgeTerm(EdgeType.WAS_GENERATED_BY, inverse=True)


def _check_dst(dst: Iterable[int], graph: ProvGraph | None) -> list[int]:
    ids = sorted(set(dst))
    if graph is not None:
        for d in ids:
            if not (0 <= d < len(graph)) or graph.vertex(d).vtype is not VertexType.ENTITY:
                raise ValueError(f"destination id {d} is not an entity vertex")
    return ids


def _vertex_terms(label: str, values: Sequence[Any] | None) -> list[VertexTerm]:
    if values is None:
        return [VertexTerm(label)]
    return [VertexTerm(label, value=v) for v in values]


def build_sim_grammar(
    dst: Iterable[int],
    graph: ProvGraph | None = None,
    *,
    entity_values: Sequence[Any] | None = None,
    activity_values: Sequence[Any] | None = None,
) -> Grammar:
    """Pair-form grammar for similar-ancestry words around the given anchors.

    One anchor production per destination; the vertex-label rules double as
    the per-hop label checks. When a value list is given the corresponding
    vertex-label rule is specialized per value, which is how matched path
    sides are forced to agree on a selected property.
    """
    ids = _check_dst(dst, graph)
    prods: list[Production] = [Production(ENTITY_PAIR, (AnchorTerm(d),)) for d in ids]
    prods.append(Production(ENTITY_PAIR, (_USED_INV, ACTIVITY_PAIR, _USED)))
    for term in _vertex_terms("E", entity_values):
        prods.append(Production(ENTITY_PAIR, (term, ENTITY_PAIR, term)))
    prods.append(Production(ACTIVITY_PAIR, (_GEN_INV, ENTITY_PAIR, _GEN)))
    for term in _vertex_terms("A", activity_values):
        prods.append(Production(ACTIVITY_PAIR, (term, ACTIVITY_PAIR, term)))
    return Grammar(tuple(prods), start=ENTITY_PAIR)


def build_sim_normal_form(
    dst: Iterable[int],
    graph: ProvGraph | None = None,
    *,
    entity_values: Sequence[Any] | None = None,
    activity_values: Sequence[Any] | None = None,
) -> Grammar:
    """Binary normal form of the similar-ancestry grammar.

    Vertex labels are consumed by dedicated one-sided rules, so value
    specialization threads the matched value through a per-value …L stage.
    """
    ids = _check_dst(dst, graph)
    prods: list[Production] = [Production(ANCHOR, (AnchorTerm(d),)) for d in ids]
    if ids:
        prods.append(Production(GEN_L, (_GEN_INV, ANCHOR)))
    prods.append(Production(GEN_L, (_GEN_INV, ENT_LR)))
    prods.append(Production(GEN_LR, (GEN_L, _GEN)))
    for term in _vertex_terms("A", activity_values):
        stage = ACT_L if term.value is None else f"{ACT_L}@{term.value}"
        prods.append(Production(stage, (term, GEN_LR)))
        prods.append(Production(ACT_LR, (stage, term)))
    prods.append(Production(USE_L, (_USED_INV, ACT_LR)))
    prods.append(Production(USE_LR, (USE_L, _USED)))
    for term in _vertex_terms("E", entity_values):
        stage = ENT_L if term.value is None else f"{ENT_L}@{term.value}"
        prods.append(Production(stage, (term, USE_LR)))
        prods.append(Production(ENT_LR, (stage, term)))
    return Grammar(tuple(prods), start=ENT_LR)
