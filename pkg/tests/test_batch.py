from __future__ import annotations

import numpy as np
import pytest

from provq import batch
from provq.gen import SynPGConfig, synpg
from provq.labels import ExclusionRule, LabelOracle
from provq.seg import (
    ENTITY_PAIR_FACT,
    SegStats,
    induce_ns_baseline,
    induce_ns_seg,
    induce_ns_tst,
    solve_pairs,
)


def _graph(seed, n=800):
    return synpg(SynPGConfig(n=n, seed=seed))


def _hardest(g):
    ents = g.entities_by_seq()
    return set(ents[:2]), set(ents[-2:])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_batch_pair_history_matches_scalar(seed):
    g = _graph(seed, n=400)
    src, dst = _hardest(g)
    oracle = LabelOracle(g)
    min_seq = min(g.seq_of(s) for s in src)
    scalar_store, scalar_stats = solve_pairs(g, dst, oracle, src_min_seq=min_seq)
    batch_stats = SegStats()
    result = batch.batch_solve_pairs(
        g, dst, oracle, src_min_seq=min_seq, stats=batch_stats
    )
    # identical histories
    scalar_pairs = set(scalar_store.pairs(ENTITY_PAIR_FACT))
    dense = {int(result.space.ent_of[v]): v for v in range(len(g)) if result.space.ent_of[v] >= 0}
    got = set()
    for i_dense, vid in dense.items():
        for j_dense in result.h_ee.row(i_dense):
            got.add((vid, dense[int(j_dense)]))
    assert got == scalar_pairs
    assert batch_stats.facts_enqueued == scalar_stats.facts_enqueued
    assert batch_stats.facts_processed == scalar_stats.facts_processed
    assert batch_stats.early_stopped == scalar_stats.early_stopped


@pytest.mark.parametrize("engine", ["batch", "compiled"])
@pytest.mark.parametrize("seed", [3, 4, 5, 6])
def test_accelerated_engines_agree_with_scalar_results(seed, engine):
    g = _graph(seed, n=700)
    src, dst = _hardest(g)
    oracle = LabelOracle(g)
    ns_scalar, _, st_scalar = induce_ns_seg(g, src, dst, oracle, engine="scalar")
    ns_fast, _, st_fast = induce_ns_seg(g, src, dst, oracle, engine=engine)
    assert ns_fast == ns_scalar
    assert (st_fast.facts_enqueued, st_fast.facts_processed, st_fast.early_stopped) == (
        st_scalar.facts_enqueued,
        st_scalar.facts_processed,
        st_scalar.early_stopped,
    )
    tst_scalar, st_s = induce_ns_tst(g, src, dst, oracle, engine="scalar")
    tst_fast, st_b = induce_ns_tst(g, src, dst, oracle, engine=engine)
    assert tst_fast == tst_scalar == ns_scalar
    assert (st_b.facts_enqueued, st_b.facts_processed, st_b.early_stopped) == (
        st_s.facts_enqueued,
        st_s.facts_processed,
        st_s.early_stopped,
    )
    base_scalar, _ = induce_ns_baseline(g, src, dst, oracle, engine="scalar")
    base_fast, _ = induce_ns_baseline(g, src, dst, oracle, engine=engine)
    assert base_fast == base_scalar == ns_scalar


def test_fastset_mode_matches_plain_compiled():
    g = _graph(7, n=700)
    src, dst = _hardest(g)
    oracle = LabelOracle(g)
    plain, res_p = induce_ns_baseline(g, src, dst, oracle, engine="compiled")
    fast, res_f = induce_ns_baseline(
        g, src, dst, oracle, engine="compiled", use_fastset_rowcol=True
    )
    assert plain == fast
    assert res_p.stats.facts_enqueued == res_f.stats.facts_enqueued
    assert res_p.stats.facts_processed == res_f.stats.facts_processed


def test_batch_respects_exclusions():
    g = _graph(9, n=500)
    src, dst = _hardest(g)
    mid = g.entities_by_seq()[len(g.entities_by_seq()) // 2]
    rules = (ExclusionRule("vertex", "id", "eq", mid),)
    oracle = LabelOracle(g, vertex_rules=rules)
    ns_scalar, _, _ = induce_ns_seg(g, src, dst, oracle, engine="scalar")
    ns_batch, _, _ = induce_ns_seg(g, src, dst, oracle, engine="batch")
    assert ns_batch == ns_scalar
    tst_batch, _ = induce_ns_tst(g, src, dst, oracle, engine="batch")
    assert tst_batch == ns_scalar
    base_batch, _ = induce_ns_baseline(g, src, dst, oracle, engine="batch")
    assert base_batch == ns_scalar


def test_batch_budget_enforced():
    from provq.factstore import BudgetExceededError

    g = _graph(2, n=600)
    src, dst = _hardest(g)
    oracle = LabelOracle(g)
    with pytest.raises(BudgetExceededError):
        induce_ns_seg(g, src, dst, oracle, engine="batch", budget=50)
    with pytest.raises(BudgetExceededError):
        induce_ns_baseline(g, src, dst, oracle, engine="batch", budget=50)


def test_batch_rejects_property_constraints():
    from provq.graph import VertexType

    g = _graph(1, n=200)
    src, dst = _hardest(g)
    oracle = LabelOracle(g, property_constraints={VertexType.ACTIVITY: "command"})
    with pytest.raises(ValueError, match="property-constrained"):
        induce_ns_seg(g, src, dst, oracle, engine="batch")
    # auto selection falls back to the scalar engine
    ns, _, _ = induce_ns_seg(g, src, dst, oracle, engine="auto")
    assert isinstance(ns, set)


def test_batch_early_stop_counts_and_results():
    g = _graph(11, n=900)
    ents = g.entities_by_seq()
    src = set(ents[-2:])
    dst = set(ents[-4:-2])
    oracle = LabelOracle(g)
    on, st_on = induce_ns_tst(g, src, dst, oracle, engine="batch", early_stop=True)
    off, st_off = induce_ns_tst(g, src, dst, oracle, engine="batch", early_stop=False)
    assert on == off
    assert st_on.early_stopped > 0
    assert st_on.facts_processed <= st_off.facts_processed
    min_seq = min(g.seq_of(s) for s in src)
    stats_on, stats_off = SegStats(), SegStats()
    r_on = batch.batch_solve_pairs(g, dst, oracle, src_min_seq=min_seq, early_stop=True, stats=stats_on)
    r_off = batch.batch_solve_pairs(g, dst, oracle, src_min_seq=min_seq, early_stop=False, stats=stats_off)
    assert batch.batch_extract_pairs(r_on, src, dst) == batch.batch_extract_pairs(r_off, src, dst)
    assert stats_on.early_stopped > 0
