"""Draft-set assembly by hierarchical database access.

Databases are probed in a configured order (default: context, then model,
then stats — highest temporal locality first). Each probe asks only for
the remaining quota, duplicates keep the copy from the earlier (higher
locality) source, and once the set is full the remaining databases are
not touched at all. The per-database access log feeds both the latency
breakdown and the draft/verify success attribution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .context_db import ContextDB
from .model_db import ModelDB
from .stats_db import StatsDB

DB_LETTERS = "cms"
SOURCE_NAMES = {"c": "context", "m": "model", "s": "stats"}


@dataclass(frozen=True)
class DraftCandidate:
    tokens: tuple[int, ...]
    source: str  # "context" | "model" | "stats"


@dataclass
class HierarchyConfig:
    """Knobs of the drafting hierarchy.

    order: probe order over database letters (subset or permutation of "cms")
    enabled: which databases participate
    set_size: draft-set capacity (candidates verified per step)
    tail_len: how many trailing context tokens the stats index matches on
    draft_len: maximum candidate length / stored value length
    """

    order: str = "cms"
    enabled: str = "cms"
    set_size: int = 7
    tail_len: int = 2
    draft_len: int = 4
    capacity: int = 4096

    def __post_init__(self) -> None:
        if self.set_size < 1 or self.tail_len < 1 or self.draft_len < 1:
            raise ValueError("set_size, tail_len and draft_len must be >= 1")
        for letter in self.enabled:
            if letter not in DB_LETTERS:
                raise ValueError(f"unknown database letter: {letter!r}")
            if self.order.count(letter) != 1:
                raise ValueError(
                    f"order {self.order!r} must contain enabled database "
                    f"{letter!r} exactly once"
                )
        if len(set(self.order)) != len(self.order):
            raise ValueError(f"order {self.order!r} repeats a database")


@dataclass
class AccessRecord:
    attempted: bool = False
    returned: int = 0
    kept: int = 0
    elapsed_ns: int = 0

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "returned": self.returned,
            "kept": self.kept,
            "elapsed_ns": self.elapsed_ns,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AccessRecord":
        return cls(d["attempted"], d["returned"], d["kept"], d["elapsed_ns"])


AccessLog = dict[str, AccessRecord]


@dataclass
class DatabaseSet:
    context: ContextDB | None = None
    model: ModelDB | None = None
    stats: StatsDB | None = None

    def get(self, letter: str):
        return {"c": self.context, "m": self.model, "s": self.stats}[letter]


def hierarchical_draft(
    context: list[int],
    dbs: DatabaseSet,
    config: HierarchyConfig,
) -> tuple[list[DraftCandidate], AccessLog]:
    """Fill a draft set of at most ``set_size`` distinct candidates.

    Context and model databases are keyed on the last context token; the
    stats index matches the last ``tail_len`` tokens with shrinking-prefix
    fallback. Databases later in the order are skipped entirely once the
    set is full, which the access log records as attempted=False.
    """
    if not context:
        raise ValueError("context must be non-empty")
    log: AccessLog = {letter: AccessRecord() for letter in config.order if letter in config.enabled}
    candidates: list[DraftCandidate] = []
    seen: set[tuple[int, ...]] = set()
    key = context[-1]
    for letter in config.order:
        if letter not in config.enabled:
            continue
        if len(candidates) >= config.set_size:
            break
        db = dbs.get(letter)
        if db is None:
            raise ValueError(f"database {SOURCE_NAMES[letter]!r} enabled but not provided")
        want = config.set_size - len(candidates)
        record = log[letter]
        start = time.perf_counter_ns()
        if letter == "c":
            values = db.lookup(key, want)
        elif letter == "m":
            values = db.lookup(key, want)
        else:
            tail = context[-min(config.tail_len, len(context)):]
            values = [seq for seq, _count in db.retrieve(tail, config.draft_len, want)]
        record.elapsed_ns = time.perf_counter_ns() - start
        record.attempted = True
        record.returned = len(values)
        for value in values:
            tokens = tuple(value)
            if tokens in seen:
                continue
            seen.add(tokens)
            candidates.append(DraftCandidate(tokens, SOURCE_NAMES[letter]))
            record.kept += 1
    return candidates, log
