"""Paging policies and the per-node decoupling of connection caching."""

from __future__ import annotations

import math
import random
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Hashable, Optional

from .core import CostLedger, Edge, InvariantError

LRU = "lru"
FIFO = "fifo"
MARK = "mark"


@dataclass(frozen=True)
class PageResult:
    hit: bool
    evicted: Optional[Hashable] = None


class PagingPolicy:
    """Base class: a capacity-bounded page set with a replacement rule."""

    kind = ""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self.pages: OrderedDict = OrderedDict()
        self.misses = 0

    def __contains__(self, page) -> bool:
        return page in self.pages

    def __len__(self) -> int:
        return len(self.pages)

    def request(self, page) -> PageResult:
        if page in self.pages:
            self._touch(page)
            return PageResult(True)
        self.misses += 1
        evicted = None
        if len(self.pages) >= self.capacity:
            evicted = self._victim()
            del self.pages[evicted]
        self.pages[page] = False
        self._admit(page)
        return PageResult(False, evicted)

    def _touch(self, page) -> None:
        pass

    def _admit(self, page) -> None:
        pass

    def _victim(self):
        raise NotImplementedError


class LRUPolicy(PagingPolicy):
    kind = LRU

    def _touch(self, page):
        self.pages.move_to_end(page)

    def _victim(self):
        return next(iter(self.pages))


class FIFOPolicy(PagingPolicy):
    kind = FIFO

    def _victim(self):
        return next(iter(self.pages))


class MarkPolicy(PagingPolicy):
    """Marking: evict a uniformly random unmarked page; new phase when all are marked."""

    kind = MARK

    def __init__(self, capacity: int, rng: random.Random):
        super().__init__(capacity)
        self.rng = rng

    def _touch(self, page):
        self.pages[page] = True

    def _admit(self, page):
        self.pages[page] = True

    def _victim(self):
        unmarked = [p for p, m in self.pages.items() if not m]
        if not unmarked:
            for p in self.pages:
                self.pages[p] = False
            unmarked = list(self.pages)
        return unmarked[self.rng.randrange(len(unmarked))]

    @property
    def marked(self) -> set:
        return {p for p, m in self.pages.items() if m}


def make_policy(kind: str, capacity: int, rng: Optional[random.Random] = None) -> PagingPolicy:
    if kind == LRU:
        return LRUPolicy(capacity)
    if kind == FIFO:
        return FIFOPolicy(capacity)
    if kind == MARK:
        if rng is None:
            raise ValueError("MARK needs an RNG")
        return MarkPolicy(capacity, rng)
    raise ValueError(f"unknown paging policy {kind!r}")


def mark_regime(k: int, r: int) -> str:
    """Which capacity regime (k pages for OPT, r for MARK) a run falls into."""
    if r == k:
        return "equal"
    if k <= (math.e - 1) / math.e * r:
        return "two-competitive"
    if k < r:
        return "intermediate"
    return "undersized"


@dataclass
class ServeResult:
    fetched: list[Edge] = field(default_factory=list)
    evicted: list[Edge] = field(default_factory=list)

    @property
    def hit(self) -> bool:
        return not self.fetched


class DecoupledConnCache:
    """One paging instance per node; an edge is cached iff both ends cache it.

    Row ``u`` stores out-indices, row ``n + v`` stores in-indices.
    """

    def __init__(self, n: int, r: int, kind: str = LRU, rng: Optional[random.Random] = None):
        self.n = n
        self.r = r
        self.kind = kind
        if kind == MARK and rng is None:
            raise ValueError("MARK needs an RNG")
        self.policies: list[PagingPolicy] = []
        for _ in range(2 * n):
            child = random.Random(rng.getrandbits(64)) if kind == MARK else None
            self.policies.append(make_policy(kind, r, child))
        self.M: set[Edge] = set()
        self.cost = 0

    def serve(self, e: Edge, ledger: Optional[CostLedger] = None) -> ServeResult:
        u, v = e
        n = self.n
        res = ServeResult()
        au, av = self.policies[u], self.policies[n + v]
        got_u = au.request(v)
        if got_u.evicted is not None:
            self._drop((u, got_u.evicted), res)
        if not got_u.hit and u in self.policies[n + v]:
            self._add(e, res)
        got_v = av.request(u)
        if got_v.evicted is not None:
            self._drop((got_v.evicted, v), res)
        if not got_v.hit and v in self.policies[u]:
            self._add(e, res)
        if ledger is not None:
            ledger.insertions += len(res.fetched)
            ledger.misses += bool(res.fetched)
        return res

    def _add(self, e, res):
        if e not in self.M:
            self.M.add(e)
            res.fetched.append(e)
            self.cost += 1

    def _drop(self, e, res):
        if e in self.M:
            self.M.remove(e)
            res.evicted.append(e)

    def virtual_costs(self) -> list[int]:
        return [p.misses for p in self.policies]

    def check(self) -> None:
        n = self.n
        for u in range(n):
            for v in self.policies[u].pages:
                if (u in self.policies[n + v]) != ((u, v) in self.M):
                    raise InvariantError(f"decoupling broken at {(u, v)}")
        for (u, v) in self.M:
            if v not in self.policies[u] or u not in self.policies[n + v]:
                raise InvariantError(f"edge {(u, v)} cached without both virtual copies")
        deg = [0] * (2 * n)
        for (u, v) in self.M:
            deg[u] += 1
            deg[n + v] += 1
        if deg and max(deg) > self.r:
            raise InvariantError("connection cache degree above capacity")


def virtual_cost_accounting(dcc: DecoupledConnCache) -> dict:
    """Per-node virtual costs and the check that fetches never exceed their sum."""
    table = dcc.virtual_costs()
    total = sum(table)
    if dcc.cost > total:
        raise InvariantError(f"connection cost {dcc.cost} exceeds virtual total {total}")
    return {"per_node": table, "virtual_total": total, "cost": dcc.cost}
