from __future__ import annotations

from itertools import product

import pytest

from provq.graph import EdgeType, VertexType
from provq.grammar import (
    ACTIVITY_PAIR,
    ENTITY_PAIR,
    ENT_LR,
    AnchorTerm,
    EdgeTerm,
    Grammar,
    Production,
    VertexTerm,
    build_sim_grammar,
    build_sim_normal_form,
)

from .conftest import A, E, G, U, make_graph
from .oracles import EdgeToken, VertexToken, cfg_accepts

_U = EdgeTerm(EdgeType.USED)
_UI = EdgeTerm(EdgeType.USED, inverse=True)
_G = EdgeTerm(EdgeType.WAS_GENERATED_BY)
_GI = EdgeTerm(EdgeType.WAS_GENERATED_BY, inverse=True)


def _tok(sym, anchor_id=7):
    """Token for a symbolic letter; vertex tokens get synthetic ids."""
    if sym == "E":
        return VertexToken(1000, "E", None)
    if sym == "A":
        return VertexToken(2000, "A", None)
    if sym == "d":
        return VertexToken(anchor_id, "E", None)
    mapping = {"u": (EdgeType.USED, False), "~u": (EdgeType.USED, True),
               "g": (EdgeType.WAS_GENERATED_BY, False), "~g": (EdgeType.WAS_GENERATED_BY, True)}
    etype, inv = mapping[sym]
    return EdgeToken(etype, inv)


def _word(letters, anchor_id=7):
    return [_tok(s, anchor_id) for s in letters]


def test_pair_grammar_production_counts():
    assert len(build_sim_grammar([7]).productions) == 5
    assert len(build_sim_grammar([7, 8]).productions) == 6


def test_pair_grammar_rejects_non_entity_destination(t1):
    with pytest.raises(ValueError, match="not an entity"):
        build_sim_grammar([t1["a1"]], t1.graph)


def test_normal_form_production_counts_and_flag():
    nf = build_sim_normal_form([7])
    assert len(nf.productions) == 10
    assert nf.normal_form
    assert not build_sim_grammar([7]).normal_form
    # the generation stage has two alternatives: anchor base and recursion
    gen_l = [p for p in nf.productions if p.lhs == "GenL"]
    assert len(gen_l) == 2


def test_anchor_palindrome_word_accepted_by_pair_grammar():
    g = build_sim_grammar([7])
    assert cfg_accepts(g, _word(["~u", "A", "~g", "d", "g", "A", "u"]))


def test_nested_palindrome_accepted():
    g = build_sim_grammar([7])
    word = _word(["~u", "A", "~g", "E", "~u", "A", "~g", "d", "g", "A", "u", "E", "g", "A", "u"])
    assert cfg_accepts(g, word)


def test_mismatched_words_rejected():
    g = build_sim_grammar([7])
    assert not cfg_accepts(g, _word(["~u", "A", "~g", "d", "g", "A", "g"]))  # unbalanced close
    assert not cfg_accepts(g, _word(["~g", "E", "~g", "d", "g", "E", "g"]))  # wrong nesting order
    assert not cfg_accepts(g, _word(["~u", "A", "d", "A", "u"]))  # missing anchor wrap
    # a word through a different anchor id
    assert not cfg_accepts(g, _word(["~u", "A", "~g", "d", "g", "A", "u"], anchor_id=9))


def test_excluded_vertex_blocks_the_word():
    g = build_sim_grammar([7])
    word = _word(["~u", "A", "~g", "d", "g", "A", "u"])
    word[1] = VertexToken(2000, None, None)  # excluded activity: empty label
    assert not cfg_accepts(g, word)


def _path_shaped_words(alphabet_v, alphabet_e, max_len):
    """All alternating vertex/edge words of odd length up to max_len."""
    for n_edges in range(1, (max_len - 1) // 2 + 1):
        for vs in product(alphabet_v, repeat=n_edges + 1):
            for es in product(alphabet_e, repeat=n_edges):
                word = [vs[0]]
                for i, e in enumerate(es):
                    word.append(e)
                    word.append(vs[i + 1])
                yield word


def test_normal_form_agrees_with_pair_form_on_path_shaped_words():
    """Full-path words (with endpoint labels) of length <= 9: membership in
    the normal form's language must match wrapping the pair form's word with
    its endpoint entity labels."""
    pair = build_sim_grammar([7])
    nf = build_sim_normal_form([7])
    alphabet_v = ["E", "A", "d"]
    alphabet_e = ["u", "~u", "g", "~g"]
    n_checked = 0
    for letters in _path_shaped_words(alphabet_v, alphabet_e, 9):
        word = [_tok(s) for s in letters]
        in_nf = cfg_accepts(nf, word)
        # endpoint labels must be entities for the word to describe an
        # entity-to-entity path; the pair form speaks about the interior.
        interior_ok = (
            letters[0] in ("E", "d")
            and letters[-1] in ("E", "d")
            and cfg_accepts(pair, word[1:-1])
            and len(word) > 1
        )
        assert in_nf == interior_ok, f"disagreement on {letters}"
        n_checked += 1
    assert n_checked > 1000


def test_property_constrained_variants_specialize_rules():
    g = build_sim_grammar([7], activity_values=["train", "update"])
    wraps = [p for p in g.productions if p.lhs == ACTIVITY_PAIR and isinstance(p.rhs[0], VertexTerm)]
    assert {p.rhs[0].value for p in wraps} == {"train", "update"}
    word = [
        _tok("~u"), VertexToken(10, "A", "train"), _tok("~g"), _tok("d"),
        _tok("g"), VertexToken(11, "A", "train"), _tok("u"),
    ]
    assert cfg_accepts(g, word)
    word[1] = VertexToken(10, "A", "update")  # sides disagree on the value
    assert not cfg_accepts(g, word)


def test_grammar_validation_rejects_unknown_nonterminal():
    with pytest.raises(ValueError, match="no production"):
        Grammar((Production("S", ("Missing",)),), start="S")


def test_empty_destination_grammars_accept_nothing():
    g = build_sim_grammar([])
    assert not cfg_accepts(g, _word(["~u", "A", "~g", "d", "g", "A", "u"]))
    nf = build_sim_normal_form([])
    assert nf.normal_form
