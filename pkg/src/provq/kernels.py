"""Machine-compiled per-fact worklist kernels for large graphs.

These are the same algorithms as the scalar engines — one fact dequeued at a
time, history bitmaps for de-duplication — compiled with numba over dense CSR
arrays. Plain labels only; property-constrained queries stay on the scalar
engines. Observational equivalence with the scalar engines (fact sets,
result sets, enqueue/process/early-stop counts) is covered by differential
tests.

The staged normal-form solver supports both candidate filtering schemes: the
per-instance membership check, and whole-row bitmap differences per dequeued
fact ("fast set" rows), whose per-fact cost grows with the vertex universe
rather than the degree — the configuration the published runtime comparisons
used, and measurably the slower one on sparse provenance graphs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .factstore import BudgetExceededError
from .graph import ProvGraph
from .labels import LabelOracle
from .batch import _Space, build_space  # dense spaces are shared with the wave engines

_EE = 0
_AA = 1


@njit(cache=True, inline="always")
def _bit_test(bits: np.ndarray, key: np.int64) -> bool:
    return bool(bits[key >> 3] & (np.uint8(1) << np.uint8(key & 7)))


@njit(cache=True, inline="always")
def _bit_set(bits: np.ndarray, key: np.int64) -> None:
    bits[key >> 3] |= np.uint8(1) << np.uint8(key & 7)


@njit(cache=True)
def _pair_solve(
    gens_ptr, gens_idx, in_ptr, in_idx,
    pass_e, pass_a, seq_a,
    seeds, src_min_seq, early_stop, prune, budget, ne, na,
):
    ne8 = (ne + 7) & ~7
    na8 = (na + 7) & ~7
    h_ee = np.zeros((ne * ne8) >> 3, dtype=np.uint8)
    h_aa = np.zeros((na * na8) >> 3, dtype=np.uint8)
    queue = np.empty(1 << 16, dtype=np.int64)
    head = 0
    tail = 0
    enq = 0
    proc = 0
    stopped = 0
    status = 0

    for d in seeds:
        key = d * ne8 + d
        if not _bit_test(h_ee, key):
            _bit_set(h_ee, key)
            enq += 1
            if tail == len(queue):
                grown = np.empty(len(queue) * 2, dtype=np.int64)
                grown[: len(queue)] = queue
                queue = grown
            queue[tail] = (key << 1) | _EE
            tail += 1
    if budget >= 0 and enq > budget:
        status = 1
        tail = head

    while head < tail:
        packed = queue[head]
        head += 1
        kind = packed & 1
        key = packed >> 1
        if kind == _EE:
            i = key // ne8
            j = key % ne8
            proc += 1
            if not (pass_e[i] and pass_e[j]):
                continue
            for p in range(gens_ptr[i], gens_ptr[i + 1]):
                a = gens_idx[p]
                for q in range(gens_ptr[j], gens_ptr[j + 1]):
                    b = gens_idx[q]
                    lo, hi = (a, b) if (not prune or a <= b) else (b, a)
                    k2 = lo * na8 + hi
                    if _bit_test(h_aa, k2):
                        continue
                    _bit_set(h_aa, k2)
                    if prune and lo != hi:
                        _bit_set(h_aa, hi * na8 + lo)
                    enq += 1
                    if budget >= 0 and enq > budget:
                        status = 1
                        head = tail
                        break
                    if tail == len(queue):
                        grown = np.empty(len(queue) * 2, dtype=np.int64)
                        grown[: len(queue)] = queue
                        queue = grown
                    queue[tail] = (k2 << 1) | _AA
                    tail += 1
                if status:
                    break
        else:
            i = key // na8
            j = key % na8
            if early_stop and src_min_seq >= 0:
                if seq_a[i] < src_min_seq and seq_a[j] < src_min_seq:
                    stopped += 1
                    continue
            proc += 1
            if not (pass_a[i] and pass_a[j]):
                continue
            for p in range(in_ptr[i], in_ptr[i + 1]):
                e = in_idx[p]
                for q in range(in_ptr[j], in_ptr[j + 1]):
                    f = in_idx[q]
                    lo, hi = (e, f) if (not prune or e <= f) else (f, e)
                    k2 = lo * ne8 + hi
                    if _bit_test(h_ee, k2):
                        continue
                    _bit_set(h_ee, k2)
                    if prune and lo != hi:
                        _bit_set(h_ee, hi * ne8 + lo)
                    enq += 1
                    if budget >= 0 and enq > budget:
                        status = 1
                        head = tail
                        break
                    if tail == len(queue):
                        grown = np.empty(len(queue) * 2, dtype=np.int64)
                        grown[: len(queue)] = queue
                        queue = grown
                    queue[tail] = (k2 << 1) | _EE
                    tail += 1
                if status:
                    break
        if status:
            break
    return h_ee, h_aa, enq, proc, stopped, status


@njit(cache=True)
def _pair_extract(
    users_ptr, users_idx, prod_ptr, prod_idx,
    pass_e, pass_a, h_ee, h_aa, roots, dst_mask, ne, na,
):
    ne8 = (ne + 7) & ~7
    na8 = (na + 7) & ~7
    seen_e = np.zeros_like(h_ee)
    seen_a = np.zeros_like(h_aa)
    got_e = np.zeros(ne, dtype=np.bool_)
    got_a = np.zeros(na, dtype=np.bool_)
    queue = np.empty(max(len(roots) * 2, 1 << 16), dtype=np.int64)
    head = 0
    tail = 0
    for key in roots:
        if not _bit_test(seen_e, key):
            _bit_set(seen_e, key)
            queue[tail] = (key << 1) | _EE
            tail += 1
    while head < tail:
        packed = queue[head]
        head += 1
        kind = packed & 1
        key = packed >> 1
        if kind == _EE:
            i = key // ne8
            j = key % ne8
            got_e[i] = True
            got_e[j] = True
            for p in range(users_ptr[i], users_ptr[i + 1]):
                a = users_idx[p]
                if not pass_a[a]:
                    continue
                for q in range(users_ptr[j], users_ptr[j + 1]):
                    b = users_idx[q]
                    if not pass_a[b]:
                        continue
                    lo, hi = (a, b) if a <= b else (b, a)
                    k2 = lo * na8 + hi
                    if _bit_test(h_aa, k2) and not _bit_test(seen_a, k2):
                        _bit_set(seen_a, k2)
                        if tail == len(queue):
                            grown = np.empty(len(queue) * 2, dtype=np.int64)
                            grown[: len(queue)] = queue
                            queue = grown
                        queue[tail] = (k2 << 1) | _AA
                        tail += 1
        else:
            i = key // na8
            j = key % na8
            got_a[i] = True
            got_a[j] = True
            for p in range(prod_ptr[i], prod_ptr[i + 1]):
                e = prod_idx[p]
                for q in range(prod_ptr[j], prod_ptr[j + 1]):
                    f = prod_idx[q]
                    ok = (pass_e[e] and pass_e[f]) or (e == f and dst_mask[e])
                    if not ok:
                        continue
                    lo, hi = (e, f) if e <= f else (f, e)
                    k2 = lo * ne8 + hi
                    if _bit_test(h_ee, k2) and not _bit_test(seen_e, k2):
                        _bit_set(seen_e, k2)
                        if tail == len(queue):
                            grown = np.empty(len(queue) * 2, dtype=np.int64)
                            grown[: len(queue)] = queue
                            queue = grown
                        queue[tail] = (k2 << 1) | _EE
                        tail += 1
    return got_e, got_a


@njit(cache=True)
def _levels_solve(
    gens_ptr, gens_idx, in_ptr, in_idx, prod_ptr, prod_idx,
    pass_e, pass_a, seq_a, anchor, src_mask,
    src_min_seq, early_stop, cap, ne, na,
):
    """Per-destination level sets with the closure sweep, plain labels: one
    class per level, membership kept as per-level bitmaps for the sweep."""
    ne_bytes = ((ne + 7) & ~7) >> 3
    na_bytes = ((na + 7) & ~7) >> 3
    max_levels = cap + 1
    lv_e = np.zeros((1, ne_bytes), dtype=np.uint8)
    lv_a = np.zeros((1, na_bytes), dtype=np.uint8)
    hit = np.zeros(1, dtype=np.bool_)
    stamp_e = np.full(ne, -1, dtype=np.int64)
    stamp_a = np.full(na, -1, dtype=np.int64)
    buf_e = np.empty(ne, dtype=np.int64)
    buf_a = np.empty(na, dtype=np.int64)
    enq = 1
    proc = 0
    stopped = 0

    cur = np.empty(1, dtype=np.int64)
    cur[0] = anchor
    n_cur = 1
    hit0 = src_mask[anchor]
    levels = 0
    while n_cur > 0 and levels < cap:
        levels += 1
        # generation wrap
        n_a = 0
        for t in range(n_cur):
            e = cur[t] if levels > 1 else anchor
            e = cur[t]
            if not pass_e[e]:
                continue
            for p in range(gens_ptr[e], gens_ptr[e + 1]):
                a = gens_idx[p]
                if stamp_a[a] != levels:
                    stamp_a[a] = levels
                    buf_a[n_a] = a
                    n_a += 1
        if n_a == 0:
            levels -= 1
            break
        if early_stop and src_min_seq >= 0:
            mx = np.int64(-1)
            for t in range(n_a):
                if seq_a[buf_a[t]] > mx:
                    mx = seq_a[buf_a[t]]
            if mx < src_min_seq:
                stopped += n_a
                levels -= 1
                break
        enq += n_a
        proc += n_a
        # use wrap
        n_e = 0
        for t in range(n_a):
            a = buf_a[t]
            if not pass_a[a]:
                continue
            for p in range(in_ptr[a], in_ptr[a + 1]):
                e = in_idx[p]
                if stamp_e[e] != levels:
                    stamp_e[e] = levels
                    buf_e[n_e] = e
                    n_e += 1
        enq += n_e
        proc += n_e
        # persist level bitmaps
        if levels >= lv_e.shape[0]:
            grown_e = np.zeros((lv_e.shape[0] * 2 + 2, ne_bytes), dtype=np.uint8)
            grown_e[: lv_e.shape[0]] = lv_e
            lv_e = grown_e
            grown_a = np.zeros((lv_a.shape[0] * 2 + 2, na_bytes), dtype=np.uint8)
            grown_a[: lv_a.shape[0]] = lv_a
            lv_a = grown_a
            grown_h = np.zeros(lv_e.shape[0], dtype=np.bool_)
            grown_h[: len(hit)] = hit
            hit = grown_h
        is_hit = False
        for t in range(n_a):
            _bit_set(lv_a[levels], buf_a[t])
        for t in range(n_e):
            _bit_set(lv_e[levels], buf_e[t])
            if src_mask[buf_e[t]]:
                is_hit = True
        hit[levels] = is_hit
        if n_e == 0:
            break
        cur = buf_e[:n_e].copy()
        n_cur = n_e

    got_e = np.zeros(ne, dtype=np.bool_)
    got_a = np.zeros(na, dtype=np.bool_)
    deepest = 0
    for m in range(levels, 0, -1):
        if hit[m]:
            deepest = m
            break
    if not (deepest or hit0):
        return got_e, got_a, enq, proc, stopped, levels
    frontier = np.zeros(ne, dtype=np.bool_)
    nxt = np.zeros(ne, dtype=np.bool_)
    for m in range(deepest, 0, -1):
        if hit[m]:
            row = lv_e[m]
            for e in range(ne):
                if row[e >> 3] & (np.uint8(1) << np.uint8(e & 7)):
                    frontier[e] = True
        any_front = False
        for e in range(ne):
            if frontier[e]:
                got_e[e] = True
                any_front = True
        if not any_front:
            continue
        for e in range(ne):
            nxt[e] = False
        row_a = lv_a[m]
        row_e_below = lv_e[m - 1] if m >= 2 else None
        for a in range(na):
            if not (row_a[a >> 3] & (np.uint8(1) << np.uint8(a & 7))):
                continue
            if not pass_a[a]:
                continue
            touched = False
            for p in range(in_ptr[a], in_ptr[a + 1]):
                if frontier[in_idx[p]]:
                    touched = True
                    break
            if not touched:
                continue
            got_a[a] = True
            for p in range(prod_ptr[a], prod_ptr[a + 1]):
                e = prod_idx[p]
                if not pass_e[e]:
                    continue
                if m >= 2:
                    if row_e_below is not None and (
                        row_e_below[e >> 3] & (np.uint8(1) << np.uint8(e & 7))
                    ):
                        nxt[e] = True
                else:
                    if e == anchor:
                        nxt[e] = True
        tmp = frontier
        frontier = nxt
        nxt = tmp
    for e in range(ne):
        if frontier[e]:
            got_e[e] = True
    if hit0:
        got_e[anchor] = True
    return got_e, got_a, enq, proc, stopped, levels



# stage codes for the normal-form kernel
_ANCHOR, _GENL, _GENLR, _ACTL, _ACTLR, _USEL, _USELR, _ENTL, _ENTLR = range(9)


@njit(cache=True)
def _staged_solve(
    gens_ptr, gens_idx, in_ptr, in_idx,
    pass_e, pass_a, seeds, budget, fastset, ne, na,
):
    """Per-fact staged normal-form worklist.

    With ``fastset`` the two edge-productions per direction filter their
    candidates by whole-row bitmap differences (via transposed twins for the
    left-extending stages), so each dequeued fact pays for a full row scan
    regardless of its degree. Without it, each candidate is a single
    membership probe. Both modes derive identical fact sets.
    """
    ne8 = (ne + 7) & ~7
    na8 = (na + 7) & ~7
    h_anchor = np.zeros((ne * ne8) >> 3, dtype=np.uint8)
    h_genl = np.zeros((na * ne8) >> 3, dtype=np.uint8)
    h_genl_t = np.zeros((ne * na8) >> 3, dtype=np.uint8)  # column twin
    h_genlr = np.zeros((na * na8) >> 3, dtype=np.uint8)
    h_actl = np.zeros((na * na8) >> 3, dtype=np.uint8)
    h_actlr = np.zeros((na * na8) >> 3, dtype=np.uint8)
    h_usel = np.zeros((ne * na8) >> 3, dtype=np.uint8)
    h_usel_t = np.zeros((na * ne8) >> 3, dtype=np.uint8)  # column twin
    h_uselr = np.zeros((ne * ne8) >> 3, dtype=np.uint8)
    h_entl = np.zeros((ne * ne8) >> 3, dtype=np.uint8)
    h_entlr = np.zeros((ne * ne8) >> 3, dtype=np.uint8)
    scratch = np.zeros(max(ne8 >> 3, na8 >> 3), dtype=np.uint8)

    queue = np.empty(1 << 16, dtype=np.int64)
    head = 0
    tail = 0
    enq = 0
    proc = 0
    status = 0

    for d in seeds:
        key = d * ne8 + d
        if not _bit_test(h_anchor, key):
            _bit_set(h_anchor, key)
            enq += 1
            queue[tail] = key * 16 + _ANCHOR
            tail += 1
    if budget >= 0 and enq > budget:
        status = 1
        tail = head

    while head < tail:
        packed = queue[head]
        head += 1
        stage = packed % 16
        key = packed // 16
        proc += 1
        n_new = 0
        new_keys = np.empty(0, dtype=np.int64)

        if stage == _ANCHOR or stage == _ENTLR:
            # left extension over inverse generation: GenL(a, j) for a gen of i
            i = key // ne8
            j = key % ne8
            lo, hi = gens_ptr[i], gens_ptr[i + 1]
            if fastset:
                nb = na8 >> 3
                for b in range(nb):
                    scratch[b] = 0
                for p in range(lo, hi):
                    _bit_set(scratch, gens_idx[p])
                col0 = (j * na8) >> 3
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for b in range(nb):
                    fresh = np.int64(scratch[b] & ~h_genl_t[col0 + b])
                    while fresh:
                        x = fresh & -fresh
                        pos = 0
                        while x > 1:
                            x >>= 1
                            pos += 1
                        a = (b << 3) + pos
                        fresh &= fresh - 1
                        h_genl_t[col0 + b] |= np.uint8(1 << pos)
                        _bit_set(h_genl, a * ne8 + j)
                        new_keys[n_new] = (a * ne8 + j) * 16 + _GENL
                        n_new += 1
            else:
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for p in range(lo, hi):
                    a = gens_idx[p]
                    k2 = a * ne8 + j
                    if not _bit_test(h_genl, k2):
                        _bit_set(h_genl, k2)
                        _bit_set(h_genl_t, j * na8 + a)
                        new_keys[n_new] = k2 * 16 + _GENL
                        n_new += 1
        elif stage == _GENL:
            # right extension over generation: GenLR(i, a2) for a2 gen of j
            i = key // ne8
            j = key % ne8
            lo, hi = gens_ptr[j], gens_ptr[j + 1]
            if fastset:
                nb = na8 >> 3
                for b in range(nb):
                    scratch[b] = 0
                for p in range(lo, hi):
                    _bit_set(scratch, gens_idx[p])
                row0 = (i * na8) >> 3
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for b in range(nb):
                    fresh = np.int64(scratch[b] & ~h_genlr[row0 + b])
                    while fresh:
                        x = fresh & -fresh
                        pos = 0
                        while x > 1:
                            x >>= 1
                            pos += 1
                        a2 = (b << 3) + pos
                        fresh &= fresh - 1
                        h_genlr[row0 + b] |= np.uint8(1 << pos)
                        new_keys[n_new] = (i * na8 + a2) * 16 + _GENLR
                        n_new += 1
            else:
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for p in range(lo, hi):
                    a2 = gens_idx[p]
                    k2 = i * na8 + a2
                    if not _bit_test(h_genlr, k2):
                        _bit_set(h_genlr, k2)
                        new_keys[n_new] = k2 * 16 + _GENLR
                        n_new += 1
        elif stage == _GENLR:
            i = key // na8
            j = key % na8
            if pass_a[i] and not _bit_test(h_actl, key):
                _bit_set(h_actl, key)
                new_keys = np.empty(1, dtype=np.int64)
                new_keys[0] = key * 16 + _ACTL
                n_new = 1
        elif stage == _ACTL:
            i = key // na8
            j = key % na8
            if pass_a[j] and not _bit_test(h_actlr, key):
                _bit_set(h_actlr, key)
                new_keys = np.empty(1, dtype=np.int64)
                new_keys[0] = key * 16 + _ACTLR
                n_new = 1
        elif stage == _ACTLR:
            # left extension over inverse use: UseL(e1, j) for e1 used by i
            i = key // na8
            j = key % na8
            lo, hi = in_ptr[i], in_ptr[i + 1]
            if fastset:
                nb = ne8 >> 3
                for b in range(nb):
                    scratch[b] = 0
                for p in range(lo, hi):
                    _bit_set(scratch, in_idx[p])
                col0 = (j * ne8) >> 3
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for b in range(nb):
                    fresh = np.int64(scratch[b] & ~h_usel_t[col0 + b])
                    while fresh:
                        x = fresh & -fresh
                        pos = 0
                        while x > 1:
                            x >>= 1
                            pos += 1
                        e1 = (b << 3) + pos
                        fresh &= fresh - 1
                        h_usel_t[col0 + b] |= np.uint8(1 << pos)
                        _bit_set(h_usel, e1 * na8 + j)
                        new_keys[n_new] = (e1 * na8 + j) * 16 + _USEL
                        n_new += 1
            else:
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for p in range(lo, hi):
                    e1 = in_idx[p]
                    k2 = e1 * na8 + j
                    if not _bit_test(h_usel, k2):
                        _bit_set(h_usel, k2)
                        _bit_set(h_usel_t, j * ne8 + e1)
                        new_keys[n_new] = k2 * 16 + _USEL
                        n_new += 1
        elif stage == _USEL:
            # right extension over use: UseLR(i, e2) for e2 used by j
            i = key // na8
            j = key % na8
            lo, hi = in_ptr[j], in_ptr[j + 1]
            if fastset:
                nb = ne8 >> 3
                for b in range(nb):
                    scratch[b] = 0
                for p in range(lo, hi):
                    _bit_set(scratch, in_idx[p])
                row0 = (i * ne8) >> 3
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for b in range(nb):
                    fresh = np.int64(scratch[b] & ~h_uselr[row0 + b])
                    while fresh:
                        x = fresh & -fresh
                        pos = 0
                        while x > 1:
                            x >>= 1
                            pos += 1
                        e2 = (b << 3) + pos
                        fresh &= fresh - 1
                        h_uselr[row0 + b] |= np.uint8(1 << pos)
                        new_keys[n_new] = (i * ne8 + e2) * 16 + _USELR
                        n_new += 1
            else:
                new_keys = np.empty(hi - lo, dtype=np.int64)
                for p in range(lo, hi):
                    e2 = in_idx[p]
                    k2 = i * ne8 + e2
                    if not _bit_test(h_uselr, k2):
                        _bit_set(h_uselr, k2)
                        new_keys[n_new] = k2 * 16 + _USELR
                        n_new += 1
        elif stage == _USELR:
            i = key // ne8
            j = key % ne8
            if pass_e[i] and not _bit_test(h_entl, key):
                _bit_set(h_entl, key)
                new_keys = np.empty(1, dtype=np.int64)
                new_keys[0] = key * 16 + _ENTL
                n_new = 1
        else:  # _ENTL
            i = key // ne8
            j = key % ne8
            if pass_e[j] and not _bit_test(h_entlr, key):
                _bit_set(h_entlr, key)
                new_keys = np.empty(1, dtype=np.int64)
                new_keys[0] = key * 16 + _ENTLR
                n_new = 1

        for t in range(n_new):
            enq += 1
            if tail == len(queue):
                grown = np.empty(len(queue) * 2, dtype=np.int64)
                grown[: len(queue)] = queue
                queue = grown
            queue[tail] = new_keys[t]
            tail += 1
        if budget >= 0 and enq > budget:
            status = 1
            break
    return (
        h_anchor, h_genl, h_genlr, h_actl, h_actlr, h_usel, h_uselr, h_entl, h_entlr,
        enq, proc, status,
    )


# -- python-side glue ---------------------------------------------------------------


def compiled_solve_pairs(
    graph: ProvGraph,
    dst,
    oracle: LabelOracle,
    *,
    src_min_seq: int | None = None,
    prune: bool = True,
    early_stop: bool = True,
    budget: int | None = None,
    stats=None,
):
    from .batch import BatchPairResult, PackedPairs

    sp = build_space(graph, oracle)
    seeds = np.array(
        sorted(int(sp.ent_of[d]) for d in set(dst) if oracle.vertex_passes(d)), dtype=np.int64
    )
    h_ee, h_aa, enq, proc, stopped, status = _pair_solve(
        *sp.gens, *sp.inputs,
        sp.pass_e, sp.pass_a, sp.seq_a,
        seeds,
        np.int64(-1 if src_min_seq is None else src_min_seq),
        early_stop,
        prune,
        np.int64(-1 if budget is None else budget),
        len(sp.ents),
        len(sp.acts),
    )
    if stats is not None:
        stats.facts_enqueued += int(enq)
        stats.facts_processed += int(proc)
        stats.early_stopped += int(stopped)
    if status:
        raise BudgetExceededError(budget, int(enq))
    ee = PackedPairs(len(sp.ents), len(sp.ents), bits=h_ee)
    aa = PackedPairs(len(sp.acts), len(sp.acts), bits=h_aa)
    return BatchPairResult(sp, ee, aa, stats)


def compiled_extract_pairs(result, src, dst) -> set[int]:
    sp = result.space
    roots = []
    for s in sorted(set(src)):
        sd = int(sp.ent_of[s])
        if sd < 0:
            continue
        row = result.h_ee.row(sd)
        ncols8 = result.h_ee.ncols8
        for t in row:
            lo, hi = (sd, int(t)) if sd <= t else (int(t), sd)
            roots.append(lo * ncols8 + hi)
    if not roots:
        return set()
    dst_mask = np.zeros(len(sp.ents), dtype=np.bool_)
    for d in set(dst):
        dd = int(sp.ent_of[d])
        if dd >= 0:
            dst_mask[dd] = True
    got_e, got_a = _pair_extract(
        *sp.users, *sp.products,
        sp.pass_e, sp.pass_a,
        result.h_ee.bits, result.h_aa.bits,
        np.array(sorted(set(roots)), dtype=np.int64),
        dst_mask,
        len(sp.ents),
        len(sp.acts),
    )
    out = {int(sp.ents[k]) for k in np.flatnonzero(got_e)}
    out |= {int(sp.acts[k]) for k in np.flatnonzero(got_a)}
    return out


def compiled_solve_levels(
    graph: ProvGraph,
    anchor: int,
    oracle: LabelOracle,
    src,
    *,
    early_stop: bool = True,
    max_levels: int | None = None,
    stats=None,
    space: _Space | None = None,
) -> set[int]:
    sp = space if space is not None else build_space(graph, oracle)
    if not oracle.vertex_passes(anchor):
        return set()
    src_mask = np.zeros(len(sp.ents), dtype=np.bool_)
    for s in set(src):
        sd = int(sp.ent_of[s])
        if sd >= 0:
            src_mask[sd] = True
    src_min_seq = min((graph.seq_of(s) for s in src), default=None)
    got_e, got_a, enq, proc, stopped, levels = _levels_solve(
        *sp.gens, *sp.inputs, *sp.products,
        sp.pass_e, sp.pass_a, sp.seq_a,
        np.int64(sp.ent_of[anchor]),
        src_mask,
        np.int64(-1 if src_min_seq is None else src_min_seq),
        early_stop,
        np.int64(max_levels if max_levels is not None else len(graph)),
        len(sp.ents),
        len(sp.acts),
    )
    if stats is not None:
        stats.facts_enqueued += int(enq)
        stats.facts_processed += int(proc)
        stats.early_stopped += int(stopped)
        stats.levels = max(stats.levels, int(levels))
    out = {int(sp.ents[k]) for k in np.flatnonzero(got_e)}
    out |= {int(sp.acts[k]) for k in np.flatnonzero(got_a)}
    return out


def compiled_solve_normal_form(
    graph: ProvGraph,
    dst,
    oracle: LabelOracle,
    *,
    budget: int | None = None,
    fastset: bool = False,
    stats=None,
):
    from .batch import BatchNormalFormResult, PackedPairs, _NF_UNIVERSES

    sp = build_space(graph, oracle)
    seeds = np.array(
        sorted(int(sp.ent_of[d]) for d in set(dst) if oracle.vertex_passes(d)), dtype=np.int64
    )
    out = _staged_solve(
        *sp.gens, *sp.inputs,
        sp.pass_e, sp.pass_a,
        seeds,
        np.int64(-1 if budget is None else budget),
        fastset,
        len(sp.ents),
        len(sp.acts),
    )
    (h_anchor, h_genl, h_genlr, h_actl, h_actlr, h_usel, h_uselr, h_entl, h_entlr,
     enq, proc, status) = out
    if stats is not None:
        stats.facts_enqueued += int(enq)
        stats.facts_processed += int(proc)
    if status:
        raise BudgetExceededError(budget, int(enq))
    sizes = {"E": len(sp.ents), "A": len(sp.acts)}
    arrays = {
        "Anchor": h_anchor,
        "GenL": h_genl,
        "GenLR": h_genlr,
        "ActL": h_actl,
        "ActLR": h_actlr,
        "UseL": h_usel,
        "UseLR": h_uselr,
        "EntL": h_entl,
        "EntLR": h_entlr,
    }
    stages = {
        name: PackedPairs(sizes[uni[0]], sizes[uni[1]], bits=arrays[name])
        for name, uni in _NF_UNIVERSES.items()
    }
    return BatchNormalFormResult(sp, stages, stats)
