"""Composed caching-in-matchings algorithms and the insert/delete engine."""

from __future__ import annotations

import logging
import random
from collections import deque
from typing import Optional

from . import coloring as col
from .conncache import LRU, MARK, DecoupledConnCache
from .core import (P1, P3, CostLedger, Edge, InvariantError, MatchingCache, ProblemConfig,
                   Workload, cache_evict, trace_hash)

log = logging.getLogger(__name__)

DET_PATH_FLIP = "det_pathflip"
RAND_PATH_FLIP = "rand_pathflip"
AUG_GREEDY = "aug_greedy"
AUG_BOUNDED_EXTRA = "aug_bounded_extra"
RANDOM_COLOR = "random_color"
VARIANTS = (DET_PATH_FLIP, RAND_PATH_FLIP, AUG_GREEDY, AUG_BOUNDED_EXTRA, RANDOM_COLOR)


def greedy_capacity(k: int, h: int) -> int:
    return (k + h + 1) // 2


class LayeredAlgorithm:
    """A connection-cache layer decides what is cached, a coloring layer places it.

    ``random_color`` has no connection layer: it colors misses directly and
    lets conflicts fall out of the cache.
    """

    def __init__(self, config: ProblemConfig, variant: str, paging: Optional[str] = None,
                 y: Optional[int] = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.config = config
        self.variant = variant
        self.rng = random.Random(config.seed)
        n, k, h, K = config.n, config.k, config.h, config.K
        self.cache = MatchingCache(n, K)
        self.ledger = CostLedger()
        self.state: Optional[col.BoundedExtraState] = None
        self.palette = K
        cap = K
        kind = paging or LRU
        if variant == RAND_PATH_FLIP:
            kind = paging or MARK
        elif variant == AUG_GREEDY:
            cap = greedy_capacity(k, h)
            self.palette = 2 * cap - 1
        elif variant == AUG_BOUNDED_EXTRA:
            if h < 1:
                raise ValueError("bounded-extra coloring needs h >= 1")
            cap = k
            self.state = col.BoundedExtraState.for_size(n, k, h, y)
        self.conn = None
        if variant != RANDOM_COLOR:
            self.conn = DecoupledConnCache(n, cap, kind, self.rng if kind == MARK else None)

    def serve(self, e: Edge) -> int:
        before = self.ledger.insertions
        cache = self.cache
        if self.conn is None:
            if e in cache:
                return 0
            self.ledger.misses += 1
            col.color_insert_random(cache, e, self.rng, self.ledger, prefer_free=True)
            return self.ledger.insertions - before
        res = self.conn.serve(e)
        for x in res.evicted:
            cache_evict(cache, x)
        if res.fetched:
            self.ledger.misses += 1
            if self.variant in (DET_PATH_FLIP, RAND_PATH_FLIP):
                col.color_insert_pathflip(cache, e, self.ledger, self.palette)
            elif self.variant == AUG_GREEDY:
                col.color_insert_greedy(cache, e, self.ledger, self.palette)
            else:
                col.color_insert_bounded_extra(cache, e, self.state, self.ledger)
        return self.ledger.insertions - before

    def run(self, w: Workload, check: bool = False) -> list[int]:
        if w.mode != P1:
            raise ValueError("layered algorithms serve request workloads")
        out = []
        for _, u, v in w.events:
            out.append(self.serve((u, v)))
            if check:
                self.check()
        return out

    def check(self) -> None:
        self.cache.check()
        if self.conn is not None:
            self.conn.check()
            if set(self.cache.colors) != self.conn.M:
                raise InvariantError("matching cache and connection cache disagree")
        if self.state is not None:
            sizes = col.extra_class_sizes(self.cache, self.state)
            if max(sizes) > self.state.y:
                raise InvariantError(f"extra color above quota: {sizes}")

    def cache_hash(self) -> int:
        return trace_hash(self.cache)


class Problem3Engine:
    """Keeps every live edge cached under a coloring policy.

    Deleted edges stay in the cache until a policy decision needs their slot.
    """

    def __init__(self, n: int, K: int, policy: str = col.PATH_FLIP, k: Optional[int] = None,
                 seed: int = 0, y: Optional[int] = None, rerequest_cap: Optional[int] = None):
        if policy not in col.POLICY_KINDS:
            raise ValueError(f"unknown coloring policy {policy!r}")
        self.n, self.K = n, K
        self.k = K if k is None else k
        self.policy = policy
        self.cache = MatchingCache(n, K)
        self.ledger = CostLedger()
        self.live: set[Edge] = set()
        self.rng = random.Random(seed)
        self.pending: list[Edge] = []
        self.state = None
        if policy == col.GREEDY and K < 2 * self.k - 1:
            raise ValueError("greedy coloring needs K >= 2k - 1")
        if policy == col.BOUNDED_EXTRA:
            if K <= self.k:
                raise ValueError("bounded-extra coloring needs K > k")
            self.state = col.BoundedExtraState.for_size(n, self.k, K - self.k, y)
        self.rerequest_cap = n * K if rerequest_cap is None else rerequest_cap

    def insert(self, e: Edge) -> int:
        if e in self.live:
            raise ValueError(f"edge {e} is already live")
        before = self.ledger.insertions
        self.live.add(e)
        if e not in self.cache:
            self.ledger.misses += 1
            self._place(e)
        if self.pending:
            queue, self.pending = self.pending, []
            self._settle(queue)
        return self.ledger.insertions - before

    def delete(self, e: Edge) -> int:
        if e not in self.live:
            raise ValueError(f"edge {e} is not live")
        self.live.remove(e)
        return 0

    def apply(self, kind: str, e: Edge) -> int:
        if kind == "ins":
            return self.insert(e)
        if kind == "del":
            return self.delete(e)
        raise ValueError(f"unknown event kind {kind!r}")

    def run(self, w: Workload, check: bool = False) -> list[int]:
        if w.mode != P3:
            raise ValueError("the engine serves insert/delete workloads")
        out = []
        for kind, u, v in w.events:
            out.append(self.apply(kind, (u, v)))
            if check:
                self.check()
        return out

    def _place(self, e: Edge) -> None:
        cache, live, ledger = self.cache, self.live, self.ledger
        if self.policy == col.PATH_FLIP:
            col.color_insert_pathflip(cache, e, ledger, live=live)
        elif self.policy == col.GREEDY:
            col.color_insert_greedy(cache, e, ledger, live=live)
        elif self.policy == col.BOUNDED_EXTRA:
            col.color_insert_bounded_extra(cache, e, self.state, ledger, live=live)
        else:
            evicted = col.color_insert_random(cache, e, self.rng, ledger, prefer_free=True, live=live)
            self._settle([x for x in evicted if x in live], cache.colors[e])

    def _settle(self, queue, old_color: Optional[int] = None) -> None:
        """Re-request evicted live edges in arrival order until all are back."""
        todo = deque((x, old_color) for x in queue)
        steps = 0
        cache, live = self.cache, self.live
        while todo:
            x, oc = todo.popleft()
            if x in cache or x not in live:
                continue
            if steps >= self.rerequest_cap:
                self.ledger.anomalies += 1
                log.warning("re-request cap %d reached; %d edges left uncached",
                            self.rerequest_cap, len(todo) + 1)
                left = [x] + [y for y, _ in todo if y in live and y not in cache]
                self.pending = list(dict.fromkeys(self.pending + left))
                return
            steps += 1
            evicted = col.color_insert_random(cache, x, self.rng, self.ledger,
                                              prefer_free=True, live=live)
            nc = cache.colors[x]
            if oc is not None and nc != oc:
                self.ledger.recolors += 1
            todo.extend((y, nc) for y in evicted if y in live)

    def live_free(self, row: int) -> list[int]:
        return col._free(self.cache, row, self.K, self.live)

    def check(self) -> None:
        self.cache.check()
        missing = [e for e in self.live if e not in self.cache and e not in self.pending]
        if missing:
            raise InvariantError(f"live edges missing from the cache: {missing[:5]}")

    def cache_hash(self) -> int:
        return trace_hash(self.cache)


def reduce_p3_to_p1(tau: Workload, p1_alg: LayeredAlgorithm, n: int, k: int) -> tuple[Workload, int, int]:
    """Drive a request algorithm with repeated batches and follow it at checkpoints.

    Each insert emits ``n * k`` copies of the current live edge list. The
    follower copies the request algorithm's state the first time it covers
    the live graph within the batch; if that never happens it pays for a
    full rebuild of the live graph plus a copy of the end-of-batch state.
    Returns ``(sigma, follower_cost, leader_cost)``.
    """
    if tau.mode != P3:
        raise ValueError("expected an insert/delete workload")
    reps = n * k
    live: dict[Edge, None] = {}
    sigma: list[Edge] = []
    follower: dict[Edge, int] = {}
    follower_cost = 0
    start = p1_alg.ledger.insertions
    cache = p1_alg.cache

    def covered() -> bool:
        return all(x in cache.colors for x in live)

    def jump() -> int:
        state = cache.colors
        return sum(1 for x, c in state.items() if follower.get(x) != c)

    for kind, u, v in tau.events:
        e = (u, v)
        if kind == "del":
            live.pop(e, None)
            continue
        live[e] = None
        order = list(live)
        reached = False
        if covered():
            follower_cost += jump()
            follower = dict(cache.colors)
            reached = True
        for _ in range(reps):
            for x in order:
                sigma.append(x)
                p1_alg.serve(x)
                if not reached and covered():
                    follower_cost += jump()
                    follower = dict(cache.colors)
                    reached = True
        if not reached:
            follower_cost += len(live) + len(cache.colors)
            follower = dict(cache.colors)
    leader_cost = p1_alg.ledger.insertions - start
    out = Workload.requests(sigma, generator="reduce_p3_to_p1", source=tau.meta)
    return out, follower_cost, leader_cost
