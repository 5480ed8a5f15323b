"""Worklist and history sets for grammar facts over vertex pairs.

A fact ``N(i, j)`` asserts that some path from vertex ``i`` to vertex ``j``
carries a word of nonterminal ``N``. The store keeps a FIFO worklist of
newly found facts and per-nonterminal membership rows so a fact is enqueued
at most once; total insertions are counted against an optional budget so
runaway queries fail with a structured error instead of exhausting memory.

Two row representations are provided: a flat 64-bit-word bitmap and a
chunked form that keeps sparse 4096-entry blocks as sorted sets and switches
dense blocks to packed bits, trading random-access speed for memory.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator


class Backend(str, Enum):
    PLAIN_BITMAP = "plain"
    COMPRESSED_BITMAP = "compressed"


class BudgetExceededError(RuntimeError):
    """Fact budget hit; carries the limit and the count that tripped it."""

    def __init__(self, budget: int, count: int):
        super().__init__(f"fact budget exceeded: {count} facts > budget {budget}")
        self.budget = budget
        self.count = count


class OutOfUniverseError(IndexError):
    pass


class PlainRow:
    """Flat bitmap over a fixed universe; constant-time single-bit access."""

    __slots__ = ("bits",)

    def __init__(self, n_bytes: int):
        self.bits = bytearray(n_bytes)

    def add(self, i: int) -> bool:
        idx = i >> 3
        mask = 1 << (i & 7)
        cur = self.bits[idx]
        if cur & mask:
            return False
        self.bits[idx] = cur | mask
        return True

    def __contains__(self, i: int) -> bool:
        return bool(self.bits[i >> 3] & (1 << (i & 7)))

    def __iter__(self) -> Iterator[int]:
        word = int.from_bytes(self.bits, "little")
        while word:
            low = word & -word
            yield low.bit_length() - 1
            word ^= low

    def diff_words(self, other: "PlainRow") -> Iterator[int]:
        """Members of self absent from other, by whole-row bit arithmetic."""
        word = int.from_bytes(self.bits, "little") & ~int.from_bytes(other.bits, "little")
        while word:
            low = word & -word
            yield low.bit_length() - 1
            word ^= low


_CHUNK = 4096
_DENSE_AT = 256  # promote a chunk from sorted-set to packed bits past this


class ChunkedRow:
    """Compressed row: per-chunk containers, set for sparse, bytes for dense."""

    __slots__ = ("chunks",)

    def __init__(self):
        self.chunks: dict[int, set[int] | bytearray] = {}

    def add(self, i: int) -> bool:
        hi, lo = divmod(i, _CHUNK)
        c = self.chunks.get(hi)
        if c is None:
            self.chunks[hi] = {lo}
            return True
        if isinstance(c, set):
            if lo in c:
                return False
            c.add(lo)
            if len(c) > _DENSE_AT:
                packed = bytearray(_CHUNK // 8)
                for x in c:
                    packed[x >> 3] |= 1 << (x & 7)
                self.chunks[hi] = packed
            return True
        byte, bit = lo >> 3, 1 << (lo & 7)
        if c[byte] & bit:
            return False
        c[byte] |= bit
        return True

    def __contains__(self, i: int) -> bool:
        hi, lo = divmod(i, _CHUNK)
        c = self.chunks.get(hi)
        if c is None:
            return False
        if isinstance(c, set):
            return lo in c
        return bool(c[lo >> 3] & (1 << (lo & 7)))

    def __iter__(self) -> Iterator[int]:
        for hi in sorted(self.chunks):
            c = self.chunks[hi]
            base = hi * _CHUNK
            if isinstance(c, set):
                for lo in sorted(c):
                    yield base + lo
            else:
                for byte_idx, byte in enumerate(c):
                    while byte:
                        low = byte & -byte
                        yield base + (byte_idx << 3) + low.bit_length() - 1
                        byte ^= low


class PairSet:
    """Membership rows for one nonterminal: ``row(i) = {j : N(i, j)}``."""

    def __init__(self, universe: int, backend: Backend, symmetric: bool = False):
        self.universe = universe
        self.backend = backend
        self.symmetric = symmetric
        self._rows: dict[int, PlainRow | ChunkedRow] = {}
        self._n_bytes = (universe + 7) >> 3

    def _row_for(self, i: int) -> PlainRow | ChunkedRow:
        row = self._rows.get(i)
        if row is None:
            row = PlainRow(self._n_bytes) if self.backend is Backend.PLAIN_BITMAP else ChunkedRow()
            self._rows[i] = row
        return row

    def _check(self, i: int, j: int) -> None:
        if not (0 <= i < self.universe and 0 <= j < self.universe):
            raise OutOfUniverseError(f"pair ({i}, {j}) outside universe of {self.universe}")

    def insert(self, i: int, j: int) -> bool:
        """Add a pair; returns True when it was new. Symmetric sets mirror
        the pair so both orientations are queryable."""
        self._check(i, j)
        fresh = self._row_for(i).add(j)
        if fresh and self.symmetric and i != j:
            self._row_for(j).add(i)
        return fresh

    def contains(self, i: int, j: int) -> bool:
        self._check(i, j)
        row = self._rows.get(i)
        return row is not None and j in row

    def row(self, i: int) -> Iterator[int]:
        row = self._rows.get(i)
        return iter(row) if row is not None else iter(())

    def diff_row(self, candidates: Iterable[int], i: int) -> list[int]:
        """Candidates not yet present in row ``i`` (set difference)."""
        row = self._rows.get(i)
        if row is None:
            out = list(candidates)
        else:
            out = [j for j in candidates if j not in row]
        for j in out:
            self._check(i, j)
        return out

    def pairs(self) -> Iterator[tuple[int, int]]:
        for i, row in self._rows.items():
            for j in row:
                yield i, j


@dataclass
class StoreStats:
    enqueued: int = 0
    popped: int = 0
    peak: int = 0


class _IntQueue:
    """FIFO of packed integers in fixed-size array chunks: far lighter than a
    deque of tuples when worklists reach millions of entries."""

    __slots__ = ("_chunks", "_head", "_size")
    _CHUNK = 8192

    def __init__(self) -> None:
        self._chunks: list[array] = []
        self._head = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, value: int) -> None:
        if not self._chunks or len(self._chunks[-1]) == self._CHUNK:
            self._chunks.append(array("q"))
        self._chunks[-1].append(value)
        self._size += 1

    def pop(self) -> int:
        first = self._chunks[0]
        value = first[self._head]
        self._head += 1
        self._size -= 1
        if self._head == len(first) and (len(self._chunks) > 1 or self._head == self._CHUNK):
            self._chunks.pop(0)
            self._head = 0
        elif self._size == 0:
            self._chunks.clear()
            self._head = 0
        return value


class FactStore:
    """FIFO worklist plus per-nonterminal history sets.

    ``enqueue`` inserts into history first, so no fact ever enters the
    worklist twice; every insertion counts toward the budget. Worklist
    entries are packed as ``(nt_index * universe + i) * universe + j``.
    """

    def __init__(
        self,
        universe: int,
        nonterminals: Iterable[str],
        backend: Backend = Backend.PLAIN_BITMAP,
        budget: int | None = None,
        symmetric: Iterable[str] = (),
    ):
        self.universe = universe
        self.backend = backend
        self.budget = budget
        symmetric = set(symmetric)
        self.nonterminals = list(nonterminals)
        self._nt_index = {nt: k for k, nt in enumerate(self.nonterminals)}
        self.history: dict[str, PairSet] = {
            nt: PairSet(universe, backend, symmetric=nt in symmetric) for nt in self.nonterminals
        }
        self.worklist = _IntQueue()
        self.stats = StoreStats()

    def enqueue(self, nt: str, i: int, j: int) -> bool:
        if not self.history[nt].insert(i, j):
            return False
        self.stats.enqueued += 1
        self.stats.peak = self.stats.enqueued
        if self.budget is not None and self.stats.enqueued > self.budget:
            raise BudgetExceededError(self.budget, self.stats.enqueued)
        self.worklist.push((self._nt_index[nt] * self.universe + i) * self.universe + j)
        return True

    def pop(self) -> tuple[str, int, int] | None:
        if not len(self.worklist):
            return None
        self.stats.popped += 1
        packed, j = divmod(self.worklist.pop(), self.universe)
        k, i = divmod(packed, self.universe)
        return self.nonterminals[k], i, j

    def contains(self, nt: str, i: int, j: int) -> bool:
        return self.history[nt].contains(i, j)

    def row(self, nt: str, i: int) -> Iterator[int]:
        return self.history[nt].row(i)

    def pairs(self, nt: str) -> Iterator[tuple[int, int]]:
        return self.history[nt].pairs()

    def fact_count(self) -> int:
        return self.stats.enqueued

    def dump_csv(self) -> str:
        """History as ``nonterminal,i,j`` lines, sorted, for test oracles."""
        lines = ["nonterminal,i,j"]
        for nt in sorted(self.history):
            for i, j in sorted(self.history[nt].pairs()):
                lines.append(f"{nt},{i},{j}")
        return "\n".join(lines) + "\n"
