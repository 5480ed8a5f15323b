from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provq.factstore import (
    Backend,
    BudgetExceededError,
    FactStore,
    OutOfUniverseError,
    PairSet,
)


@pytest.mark.parametrize("backend", list(Backend))
def test_insert_then_contains(backend):
    s = PairSet(16, backend)
    assert s.insert(3, 5)
    assert s.contains(3, 5)
    assert not s.insert(3, 5)
    assert not s.contains(5, 3)


@pytest.mark.parametrize("backend", list(Backend))
def test_diff_row(backend):
    s = PairSet(8, backend)
    s.insert(0, 2)
    assert s.diff_row([1, 2, 3], 0) == [1, 3]
    assert s.diff_row([1, 2, 3], 7) == [1, 2, 3]


@pytest.mark.parametrize("backend", list(Backend))
def test_out_of_universe_rejected(backend):
    s = PairSet(4, backend)
    with pytest.raises(OutOfUniverseError):
        s.insert(1, 9)
    with pytest.raises(OutOfUniverseError):
        s.contains(-1, 0)


def test_symmetric_pairs_mirror():
    s = PairSet(8, Backend.PLAIN_BITMAP, symmetric=True)
    s.insert(2, 6)
    assert s.contains(6, 2)
    assert sorted(s.row(6)) == [2]


@settings(max_examples=30, deadline=None)
@given(
    ops=st.lists(
        st.tuples(st.integers(0, 99), st.integers(0, 99)),
        min_size=1,
        max_size=400,
    )
)
def test_backends_observationally_equivalent(ops):
    plain = PairSet(100, Backend.PLAIN_BITMAP)
    packed = PairSet(100, Backend.COMPRESSED_BITMAP)
    for i, j in ops:
        assert plain.insert(i, j) == packed.insert(i, j)
    for i, j in ops:
        assert plain.contains(i, j) and packed.contains(i, j)
    for i in {i for i, _ in ops}:
        assert sorted(plain.row(i)) == sorted(packed.row(i))
    assert sorted(plain.pairs()) == sorted(packed.pairs())


def test_large_randomized_backend_differential():
    import random

    rng = random.Random(7)
    plain = PairSet(5000, Backend.PLAIN_BITMAP)
    packed = PairSet(5000, Backend.COMPRESSED_BITMAP)
    rows = [rng.randrange(5000) for _ in range(10_000)]
    cols = [rng.randrange(5000) for _ in range(10_000)]
    for i, j in zip(rows, cols):
        assert plain.insert(i, j) == packed.insert(i, j)
    probe = random.Random(8)
    for _ in range(2000):
        i, j = probe.randrange(5000), probe.randrange(5000)
        assert plain.contains(i, j) == packed.contains(i, j)
    hot = max(set(rows), key=rows.count)
    assert sorted(plain.row(hot)) == sorted(packed.row(hot))


def test_factstore_no_fact_enqueued_twice():
    fs = FactStore(10, ["X"], Backend.PLAIN_BITMAP)
    assert fs.enqueue("X", 1, 2)
    assert not fs.enqueue("X", 1, 2)
    assert fs.pop() == ("X", 1, 2)
    assert fs.pop() is None
    assert fs.stats.popped == 1
    assert fs.fact_count() == 1


def test_factstore_budget_raises_structured_error():
    fs = FactStore(10, ["X"], budget=2)
    fs.enqueue("X", 0, 1)
    fs.enqueue("X", 0, 2)
    with pytest.raises(BudgetExceededError) as exc:
        fs.enqueue("X", 0, 3)
    assert exc.value.budget == 2
    assert exc.value.count == 3


def test_factstore_csv_dump():
    fs = FactStore(10, ["X", "Y"])
    fs.enqueue("Y", 1, 2)
    fs.enqueue("X", 0, 1)
    assert fs.dump_csv() == "nonterminal,i,j\nX,0,1\nY,1,2\n"
