"""Bipartite node universe, the K-matchings cache and cost accounting.

Nodes are addressed by a single integer row: in-node ``u`` is row ``u`` and
out-node ``v`` is row ``n + v``. Edges are ``(u, v)`` tuples, always
oriented from the in-side to the out-side.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

Edge = tuple[int, int]


class InvariantError(Exception):
    """Raised when a cache or stream breaks one of its structural rules."""


class Side(enum.Enum):
    IN = "in"
    OUT = "out"


@dataclass(frozen=True)
class NodeRef:
    side: Side
    index: int

    def row(self, n: int) -> int:
        if not 0 <= self.index < n:
            raise ValueError(f"node index {self.index} outside [0, {n})")
        return self.index if self.side is Side.IN else n + self.index


@dataclass(frozen=True)
class ProblemConfig:
    n: int
    k: int
    h: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.h < 0:
            raise ValueError("h must be non-negative")

    @property
    def K(self) -> int:
        return self.k + self.h


@dataclass
class CostLedger:
    insertions: int = 0
    misses: int = 0
    recolors: int = 0
    anomalies: int = 0
    phases: list[tuple[str, int]] = field(default_factory=list)
    _phase_mark: int = 0

    def close_phase(self, label: str) -> int:
        """Record the insertions made since the previous phase boundary."""
        spent = self.insertions - self._phase_mark
        self.phases.append((label, spent))
        self._phase_mark = self.insertions
        return spent

    def as_dict(self) -> dict:
        return {
            "insertions": self.insertions,
            "misses": self.misses,
            "recolors": self.recolors,
            "anomalies": self.anomalies,
            "phases": [list(p) for p in self.phases],
        }


class MatchingCache:
    """K matchings over an n x n bipartite node set.

    ``slots`` is a dense table with one entry per (row, color); each entry
    holds the incident edge of that color or ``None``.
    """

    def __init__(self, n: int, K: int):
        if n < 1 or K < 1:
            raise ValueError("need n >= 1 and K >= 1")
        self.n = n
        self.K = K
        self.slots: list[Optional[Edge]] = [None] * (2 * n * K)
        self.colors: dict[Edge, int] = {}

    def in_row(self, u: int) -> int:
        return u

    def out_row(self, v: int) -> int:
        return self.n + v

    def at(self, row: int, c: int) -> Optional[Edge]:
        return self.slots[row * self.K + c]

    def color_of(self, e: Edge) -> Optional[int]:
        return self.colors.get(e)

    def __contains__(self, e: Edge) -> bool:
        return e in self.colors

    def __len__(self) -> int:
        return len(self.colors)

    def edges(self) -> Iterator[tuple[Edge, int]]:
        return iter(self.colors.items())

    def degree(self, row: int) -> int:
        base = row * self.K
        return sum(1 for s in self.slots[base:base + self.K] if s is not None)

    def incident(self, row: int) -> list[tuple[int, Edge]]:
        base = row * self.K
        return [(c, s) for c, s in enumerate(self.slots[base:base + self.K]) if s is not None]

    def copy(self) -> "MatchingCache":
        other = MatchingCache(self.n, self.K)
        other.slots = list(self.slots)
        other.colors = dict(self.colors)
        return other

    def check(self) -> None:
        """Verify slots and the edge map agree and every color is a matching."""
        n, K = self.n, self.K
        filled = 0
        for (u, v), c in self.colors.items():
            if not (0 <= u < n and 0 <= v < n and 0 <= c < K):
                raise InvariantError(f"edge {(u, v)} color {c} out of range")
            if self.slots[u * K + c] != (u, v) or self.slots[(n + v) * K + c] != (u, v):
                raise InvariantError(f"slot table disagrees with edge {(u, v)} at color {c}")
            filled += 2
        occupied = sum(1 for s in self.slots if s is not None)
        if occupied != filled:
            raise InvariantError("slot table holds edges missing from the edge map")


def _check_edge(cache: MatchingCache, e: Edge) -> None:
    u, v = e
    if not (0 <= u < cache.n and 0 <= v < cache.n):
        raise ValueError(f"edge {e} outside node range [0, {cache.n})")


def cache_insert(cache: MatchingCache, e: Edge, c: int, ledger: Optional[CostLedger] = None,
                 recolor: bool = False) -> list[Edge]:
    """Put ``e`` into matching ``c``, evicting whatever blocks it there."""
    _check_edge(cache, e)
    if e in cache.colors:
        raise ValueError(f"edge {e} already cached with color {cache.colors[e]}")
    if not 0 <= c < cache.K:
        raise ValueError(f"color {c} outside [0, {cache.K})")
    K = cache.K
    iu = e[0] * K + c
    iv = (cache.n + e[1]) * K + c
    evicted = []
    for idx in (iu, iv):
        old = cache.slots[idx]
        if old is not None:
            cache_evict(cache, old)
            evicted.append(old)
    cache.slots[iu] = e
    cache.slots[iv] = e
    cache.colors[e] = c
    if ledger is not None:
        ledger.insertions += 1
        if recolor:
            ledger.recolors += 1
    return evicted


def cache_evict(cache: MatchingCache, e: Edge) -> int:
    """Remove ``e``; evictions are free, so no ledger is involved."""
    c = cache.colors.pop(e, None)
    if c is None:
        raise KeyError(f"edge {e} is not cached")
    K = cache.K
    cache.slots[e[0] * K + c] = None
    cache.slots[(cache.n + e[1]) * K + c] = None
    return c


def free_colors(cache: MatchingCache, node: NodeRef | int) -> set[int]:
    row = node.row(cache.n) if isinstance(node, NodeRef) else node
    base = row * cache.K
    return {c for c in range(cache.K) if cache.slots[base + c] is None}


def trace_hash(cache: MatchingCache) -> int:
    """Stable 64-bit digest of the edge -> color map."""
    h = hashlib.blake2b(digest_size=8)
    for (u, v), c in sorted(cache.colors.items()):
        h.update(f"{u},{v},{c};".encode())
    return int.from_bytes(h.digest(), "big")


# -- workloads ---------------------------------------------------------------

P1 = "p1"
P3 = "p3"
_KINDS = {P1: {"req"}, P3: {"ins", "del"}}


@dataclass
class Workload:
    """An ordered event stream; events are ``(kind, u, v)`` triples."""

    mode: str
    events: list[tuple[str, int, int]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in _KINDS:
            raise ValueError(f"unknown workload mode {self.mode!r}")
        allowed = _KINDS[self.mode]
        for kind, _, _ in self.events:
            if kind not in allowed:
                raise ValueError(f"event kind {kind!r} not allowed in mode {self.mode}")

    @classmethod
    def requests(cls, edges: Iterable[Edge], **meta) -> "Workload":
        return cls(P1, [("req", u, v) for u, v in edges], dict(meta))

    def edges(self) -> list[Edge]:
        return [(u, v) for _, u, v in self.events]

    def dumps(self) -> str:
        lines = [json.dumps({"mode": self.mode, "meta": self.meta}, sort_keys=True, separators=(",", ":"))]
        for kind, u, v in self.events:
            lines.append(json.dumps({"t": kind, "u": u, "v": v}, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Workload":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty workload")
        head = json.loads(lines[0])
        events = []
        for ln in lines[1:]:
            rec = json.loads(ln)
            events.append((rec["t"], int(rec["u"]), int(rec["v"])))
        return cls(head["mode"], events, head.get("meta", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "Workload":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def check_p3_stream(w: Workload, n: int, k: int) -> None:
    """Reject double inserts, missing deletes and live degrees above ``k``.

    A bipartite graph is k-edge-colorable exactly when its maximum degree is
    at most k, so the degree check is the colorability check.
    """
    if w.mode != P3:
        raise ValueError("expected an insert/delete workload")
    live: set[Edge] = set()
    deg = [0] * (2 * n)
    for i, (kind, u, v) in enumerate(w.events):
        if not (0 <= u < n and 0 <= v < n):
            raise InvariantError(f"event {i}: edge {(u, v)} outside node range")
        e = (u, v)
        if kind == "ins":
            if e in live:
                raise InvariantError(f"event {i}: edge {e} inserted twice")
            live.add(e)
            deg[u] += 1
            deg[n + v] += 1
            if deg[u] > k or deg[n + v] > k:
                raise InvariantError(f"event {i}: live degree exceeds {k}")
        else:
            if e not in live:
                raise InvariantError(f"event {i}: edge {e} deleted while absent")
            live.remove(e)
            deg[u] -= 1
            deg[n + v] -= 1


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 64-bit child seed for a (master, index, ...) path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str((int(master),) + tuple(int(p) for p in path)).encode())
    return int.from_bytes(h.digest(), "big")
