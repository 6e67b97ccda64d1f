"""Suffix-array index over a large token corpus, with an exact binary format.

The indexed text is the concatenation of corpus documents, each followed
by a SEP sentinel, plus one final SEP terminator. SEP never appears inside
documents, so continuations read out of the index can be truncated at SEP
and provably never cross a document boundary.

Retrieval uses a shrinking context: the longest suffix of the supplied
tail that occurs in the text wins, its occurrences are collected, and the
distinct continuations are ranked by occurrence count (ties by ascending
token order).

Binary format v1, all integers little-endian:

    magic "HDSA" (4 bytes), version u32, vocab_size u32, n_tokens u64,
    tokens u32 * n_tokens, suffix array u32 * n_tokens

u32 positions cap the corpus at 2**32 - 1 tokens; the builder refuses
anything larger.
"""

from __future__ import annotations

from pathlib import Path
import struct

import numpy as np

from .corpus import Corpus, SEP

STATS_MAGIC = b"HDSA"
STATS_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_MAX_TOKENS = 2**32 - 1
_FULL_CHECK_LIMIT = 20_000


def build_suffix_array(tokens: np.ndarray) -> np.ndarray:
    """Prefix-doubling construction, O(n log^2 n), deterministic.

    Returns the positions of ``tokens`` sorted by lexicographic order of
    the suffixes starting there.
    """
    n = len(tokens)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    rank = np.asarray(tokens, dtype=np.int64)
    k = 1
    while True:
        second = np.full(n, -1, dtype=np.int64)
        if k < n:
            second[:n - k] = rank[k:]
        order = np.lexsort((second, rank))
        if n == 1:
            return order
        boundary = (np.diff(rank[order]) != 0) | (np.diff(second[order]) != 0)
        new_rank = np.empty(n, dtype=np.int64)
        new_rank[order[0]] = 0
        new_rank[order[1:]] = np.cumsum(boundary)
        rank = new_rank
        if rank[order[-1]] == n - 1:
            return order
        k *= 2


class StatsDB:
    def __init__(self, tokens: np.ndarray, sa: np.ndarray, vocab_size: int):
        self._tokens = np.ascontiguousarray(tokens, dtype=np.uint32)
        self._sa = np.ascontiguousarray(sa, dtype=np.uint32)
        self.vocab_size = vocab_size

    @property
    def n_tokens(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> np.ndarray:
        return self._tokens

    @property
    def suffix_array(self) -> np.ndarray:
        return self._sa

    def _prefix(self, pos: int, length: int) -> list[int]:
        return self._tokens[pos:pos + length].tolist()

    def find_range(self, query: list[int]) -> tuple[int, int]:
        """Half-open slice of the suffix array whose suffixes start with ``query``."""
        if len(query) < 1:
            raise ValueError("query must be non-empty")
        q = [int(t) for t in query]
        length = len(q)
        sa = self._sa
        lo, hi = 0, len(sa)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._prefix(int(sa[mid]), length) < q:
                lo = mid + 1
            else:
                hi = mid
        start = lo
        hi = len(sa)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._prefix(int(sa[mid]), length) <= q:
                lo = mid + 1
            else:
                hi = mid
        return start, lo

    def retrieve(
        self, tail: list[int], draft_len: int, want: int
    ) -> list[tuple[list[int], int]]:
        """Continuations after the longest matching suffix of ``tail``.

        Tries the full tail first, shrinking one token at a time until some
        occurrences exist; collects up to ``draft_len`` following tokens per
        occurrence (truncated at SEP), and returns the ``want`` most frequent
        distinct continuations as (tokens, count) pairs.
        """
        if want < 0:
            raise ValueError("want must be >= 0")
        if draft_len < 1:
            raise ValueError("draft_len must be >= 1")
        tail = [int(t) for t in tail]
        for length in range(len(tail), 0, -1):
            lo, hi = self.find_range(tail[-length:])
            if hi <= lo:
                continue
            return self._rank_continuations(lo, hi, length, draft_len, want)
        return []

    def _rank_continuations(
        self, lo: int, hi: int, match_len: int, draft_len: int, want: int
    ) -> list[tuple[list[int], int]]:
        n = len(self._tokens)
        starts = self._sa[lo:hi].astype(np.int64) + match_len
        grid = starts[:, None] + np.arange(draft_len, dtype=np.int64)[None, :]
        in_range = grid < n
        gathered = np.where(
            in_range, self._tokens[np.minimum(grid, n - 1)].astype(np.int64), SEP
        )
        # Everything at or after the first SEP becomes -1 padding, so rows
        # canonically encode variable-length continuations and sort with
        # shorter prefixes first.
        cut = np.logical_or.accumulate(gathered == SEP, axis=1)
        canon = np.where(cut, -1, gathered)
        canon = canon[canon[:, 0] >= 0]
        if canon.size == 0:
            return []
        rows, counts = np.unique(canon, axis=0, return_counts=True)
        ranked = np.argsort(-counts, kind="stable")[:want]
        out = []
        for idx in ranked:
            row = rows[idx]
            out.append(([int(t) for t in row if t >= 0], int(counts[idx])))
        return out


def build_stats_db(corpus: Corpus) -> StatsDB:
    """Concatenate docs with SEP sentinels and index every suffix."""
    if not corpus.docs:
        raise ValueError("empty corpus")
    text: list[int] = []
    for doc in corpus.docs:
        text.extend(doc)
        text.append(SEP)
    text.append(SEP)
    if len(text) > _MAX_TOKENS:
        raise ValueError("corpus too large for format v1")
    tokens = np.asarray(text, dtype=np.uint32)
    sa = build_suffix_array(tokens)
    return StatsDB(tokens, sa, corpus.vocab.size)


def save_stats_db(db: StatsDB, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(STATS_MAGIC, STATS_VERSION, db.vocab_size, db.n_tokens))
        fh.write(db.tokens.astype("<u4").tobytes())
        fh.write(db.suffix_array.astype("<u4").tobytes())


def load_stats_db(path: str | Path, *, verify: bool = False) -> StatsDB:
    """Read and validate a v1 file; ``verify`` additionally checks invariants."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError("corrupt stats-db file: truncated header")
    magic, version, vocab_size, n_tokens = _HEADER.unpack_from(data, 0)
    if magic != STATS_MAGIC:
        raise ValueError("unsupported stats-db file: bad magic")
    if version != STATS_VERSION:
        raise ValueError(f"unsupported stats-db file: version {version}")
    expected = _HEADER.size + 8 * n_tokens
    if len(data) != expected:
        raise ValueError(
            f"corrupt stats-db file: expected {expected} bytes, found {len(data)}"
        )
    body = np.frombuffer(data, dtype="<u4", offset=_HEADER.size)
    db = StatsDB(body[:n_tokens], body[n_tokens:], vocab_size)
    if verify:
        verify_stats_db(db)
    return db


def _suffix_less(tokens: np.ndarray, i: int, j: int) -> bool:
    n = len(tokens)
    while i < n and j < n:
        a, b = tokens[i], tokens[j]
        if a != b:
            return a < b
        i += 1
        j += 1
    return i == n and j < n


def verify_stats_db(db: StatsDB, *, min_pairs: int = 10_000, seed: int = 0) -> None:
    """Check permutation, token range, and suffix ordering; raise on failure.

    Ordering is checked over every adjacent pair on small indexes and over
    at least ``min_pairs`` sampled adjacent pairs on large ones.
    """
    n = db.n_tokens
    sa = db.suffix_array
    if not np.array_equal(np.sort(sa), np.arange(n, dtype=sa.dtype)):
        raise ValueError("stats-db verification failed: suffix array is not a permutation")
    if n and int(db.tokens.max()) >= db.vocab_size:
        raise ValueError("stats-db verification failed: token id out of vocab range")
    if n < 2:
        return
    if n - 1 <= max(_FULL_CHECK_LIMIT, min_pairs):
        pairs = np.arange(n - 1)
    else:
        rng = np.random.default_rng(seed)
        pairs = rng.choice(n - 1, size=min_pairs, replace=False)
    tokens = db.tokens
    for p in pairs:
        if not _suffix_less(tokens, int(sa[p]), int(sa[p + 1])):
            raise ValueError(
                f"stats-db verification failed: suffixes {int(sa[p])} and "
                f"{int(sa[p + 1])} out of order"
            )
