"""Cost references: exhaustive lazy optimum, scripted strategies, random walks."""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .core import CostLedger, Edge, InvariantError, MatchingCache, Workload, cache_evict, cache_insert


class OracleBudgetExceeded(Exception):
    """The search would exceed its configured limits."""


@dataclass(frozen=True)
class OracleLimits:
    max_len: int = 24
    max_edges: int = 16
    max_k: int = 4
    max_states: int = 2_000_000


@dataclass
class OracleResult:
    cost: int
    schedule: list[tuple[int, Edge, int]] = field(default_factory=list)
    states: int = 0


def _as_edges(sigma) -> list[Edge]:
    if isinstance(sigma, Workload):
        return sigma.edges()
    return [tuple(e) for e in sigma]


def _check_limits(seq, k, limits):
    if len(seq) > limits.max_len:
        raise OracleBudgetExceeded(f"sequence length {len(seq)} above {limits.max_len}")
    if len(set(seq)) > limits.max_edges:
        raise OracleBudgetExceeded(f"{len(set(seq))} distinct edges above {limits.max_edges}")
    if k > limits.max_k:
        raise OracleBudgetExceeded(f"k={k} above {limits.max_k}")


def _canon(state: dict) -> tuple:
    """Sorted (edge, color) pairs with colors renamed by first appearance."""
    names: dict[int, int] = {}
    out = []
    for e in sorted(state):
        c = state[e]
        if c not in names:
            names[c] = len(names)
        out.append((e, names[c]))
    return tuple(out)


def _place(state: dict, e: Edge, c: int) -> tuple[dict, list[Edge]]:
    u, v = e
    gone = [x for x, xc in state.items() if xc == c and (x[0] == u or x[1] == v)]
    new = {x: xc for x, xc in state.items() if x not in gone}
    new[e] = c
    return new, gone


def brute_force_opt(sigma, k: int, limits: Optional[OracleLimits] = None,
                    extra_moves: int = 0, cache_dir: Optional[str] = None) -> OracleResult:
    """Minimum insertions over lazy schedules with ``k`` matchings.

    ``extra_moves=1`` additionally lets the schedule recolor one cached edge
    after each request, which is how the lazy restriction is cross-checked.
    """
    seq = _as_edges(sigma)
    limits = limits or OracleLimits()
    _check_limits(seq, k, limits)
    key = None
    if cache_dir and not extra_moves:
        raw = json.dumps({"seq": seq, "k": k}, separators=(",", ":")).encode()
        key = os.path.join(cache_dir, hashlib.sha256(raw).hexdigest() + ".json")
        if os.path.exists(key):
            with open(key, encoding="utf-8") as fh:
                doc = json.load(fh)
            return OracleResult(doc["cost"], [(t, tuple(e), c) for t, e, c in doc["schedule"]], 0)

    T = len(seq)
    memo: dict = {}

    def moves(state):
        yield state, 0
        if extra_moves:
            for x in sorted(state):
                for c in range(k):
                    if c != state[x]:
                        rest = dict(state)
                        del rest[x]
                        yield _place(rest, x, c)[0], 1

    def go(t: int, state: dict) -> int:
        if t == T:
            return 0
        key_ = (t, _canon(state))
        hit = memo.get(key_)
        if hit is not None:
            return hit
        if len(memo) >= limits.max_states:
            raise OracleBudgetExceeded(f"more than {limits.max_states} search states")
        e = seq[t]
        if e in state:
            served = [(state, 0)]
        else:
            served = [(_place(state, e, c)[0], 1) for c in range(k)]
        best = math.inf
        for s, paid in served:
            for s2, extra in moves(s):
                best = min(best, paid + extra + go(t + 1, s2))
        memo[key_] = best
        return best

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * T + 100))
    try:
        cost = go(0, {})
        schedule = [] if extra_moves else _witness(seq, k, go)
    finally:
        sys.setrecursionlimit(limit)
    result = OracleResult(int(cost), schedule, len(memo))
    if key is not None:
        os.makedirs(cache_dir, exist_ok=True)
        with open(key, "w", encoding="utf-8") as fh:
            json.dump({"cost": result.cost, "schedule": [[t, list(e), c] for t, e, c in schedule]}, fh)
    return result


def _witness(seq, k, go) -> list[tuple[int, Edge, int]]:
    state: dict = {}
    out = []
    for t, e in enumerate(seq):
        if e in state:
            continue
        target = go(t, state)
        for c in range(k):
            nxt = _place(state, e, c)[0]
            if 1 + go(t + 1, nxt) == target:
                out.append((t, e, c))
                state = nxt
                break
    return out


def replay_schedule(sigma, k: int, n: int, schedule: Sequence[tuple[int, Edge, int]]) -> int:
    """Run a witness schedule on a real cache and return its cost."""
    seq = _as_edges(sigma)
    cache = MatchingCache(n, k)
    led = CostLedger()
    plan = {t: (e, c) for t, e, c in schedule}
    for t, e in enumerate(seq):
        if t in plan:
            pe, c = plan[t]
            assert pe == e and e not in cache
            cache_insert(cache, e, c, led)
        elif e not in cache:
            raise InvariantError(f"schedule misses request {t}: {e}")
    cache.check()
    return led.insertions


def brute_force_conn(sigma, k: int, limits: Optional[OracleLimits] = None) -> int:
    """Same lazy search when the cache only needs maximum degree ``k``."""
    seq = _as_edges(sigma)
    limits = limits or OracleLimits()
    _check_limits(seq, k, limits)
    T = len(seq)

    @lru_cache(maxsize=None)
    def go(t: int, state: frozenset) -> int:
        if t == T:
            return 0
        if go.cache_info().currsize >= limits.max_states:
            raise OracleBudgetExceeded(f"more than {limits.max_states} search states")
        e = seq[t]
        if e in state:
            return go(t + 1, state)
        u, v = e
        at_u = [x for x in state if x[0] == u]
        at_v = [x for x in state if x[1] == v]
        drop_u = at_u if len(at_u) >= k else [None]
        drop_v = at_v if len(at_v) >= k else [None]
        best = math.inf
        for a in drop_u:
            for b in drop_v:
                nxt = set(state)
                nxt.discard(a)
                nxt.discard(b)
                nxt.add(e)
                best = min(best, 1 + go(t + 1, frozenset(nxt)))
        return best

    return int(go(0, frozenset()))


# -- scripted reference strategies ------------------------------------------


class PlanPlayer:
    """Moves a cache to requested target colors, paying 1 per (re)insertion."""

    def __init__(self, n: int, K: int):
        self.cache = MatchingCache(n, K)
        self.ledger = CostLedger()

    def apply(self, target: dict[Edge, int]) -> int:
        before = self.ledger.insertions
        cache = self.cache
        todo = [(e, c) for e, c in sorted(target.items()) if cache.colors.get(e) != c]
        for e, _ in todo:
            if e in cache:
                cache_evict(cache, e)
        for e, c in todo:
            for x in cache_insert(cache, e, c, self.ledger):
                if x in target:
                    raise InvariantError(f"target coloring is not proper at {e} / {x}")
        return self.ledger.insertions - before

    def replay(self, plan: "PhasePlan", events) -> int:
        before = self.ledger.insertions
        self.apply(plan.initial)
        for kind, u, v in events:
            if kind == "ins":
                self.apply({(u, v): plan.edge_color((u, v))})
        return self.ledger.insertions - before


@dataclass
class PhasePlan:
    initial: dict[Edge, int]
    head_color: dict[int, int]
    tail_color: dict[int, int]

    def edge_color(self, e: Edge) -> int:
        if e[0] in self.head_color:
            return self.head_color[e[0]]
        if e[1] in self.tail_color:
            return self.tail_color[e[1]]
        raise KeyError(f"no planned color for {e}")


def phase_plan(lay, final) -> PhasePlan:
    """Color every initial road like the final merged road that contains it."""
    brick_color = {}
    for p, road in enumerate(final.roads):
        for b in road.bricks:
            brick_color[(b.base_in, b.base_out)] = p
    initial, heads, tails = {}, {}, {}
    for rr in lay.rroads:
        for road in rr.roads:
            c = brick_color[(road.bricks[0].base_in, road.bricks[0].base_out)]
            initial.update(road.coloring(c))
            initial[(road.head, rr.hub)] = c
            heads[road.head] = c
            tails[road.tail] = c
    return PhasePlan(initial, heads, tails)


def reference_b_i(i: int, trace, series: bool = False):
    """Cost of the strategy that keeps a color change at brick ``i`` (1-based).

    Bricks ``1..i`` show color 0 and the rest color 1; brick ``i`` follows
    whichever neighbour a simple step joins it to. Returns the total cost, or
    ``(total, per-step cumulative costs)`` with ``series``.
    """
    cfg, lay = trace.config, trace.layout
    N, L = cfg.N, cfg.L
    if not L < i < N + 1 - L:
        raise ValueError(f"brick index {i} outside ({L}, {N + 1 - L})")
    bi = i - 1
    player = PlanPlayer(lay.n, cfg.k)
    cache = player.cache
    led = player.ledger

    def tone(j):
        return 0 if j <= bi else 1

    base = {}
    for j, b in enumerate(lay.bricks):
        base.update(b.coloring(tone(j)))
    for j in range(N - 1):
        if j not in (bi - 1, bi):
            base[lay.connector(j)] = tone(j)
    base[lay.hub_edge(0)] = 0
    player.apply(base)
    for e in trace.init:
        assert e in cache
    brick_i = lay.bricks[bi]
    out = [] if series else None
    cut_at = N - L - 1
    for kind, at in trace.steps:
        if kind == "simple":
            if at in (bi - 1, bi):
                nb = bi - 1 if at == bi - 1 else bi + 1
                target = brick_i.coloring(tone(nb))
                target[lay.connector(at)] = tone(nb)
                player.apply(target)
            elif lay.connector(at) not in cache:
                raise InvariantError(f"reference lost connector {at}")
        else:
            hub = lay.hub_edge(N - L)
            for j in list(range(L - 1)) + list(range(N - L, N - 1)):
                if lay.connector(j) not in cache:
                    raise InvariantError(f"reference lost connector {j}")
            player.apply({hub: 1})
            if cut_at not in (bi - 1, bi):
                player.apply({lay.connector(cut_at): tone(cut_at)})
        if series:
            out.append(led.insertions)
    return (led.insertions, out) if series else led.insertions


def best_reference(trace) -> tuple[int, int]:
    """``(i, cost)`` of the cheapest B_i over the whole admissible range."""
    cfg = trace.config
    best = None
    for i in range(cfg.L + 1, cfg.N + 1 - cfg.L):
        c = reference_b_i(i, trace)
        if best is None or c < best[1]:
            best = (i, c)
    if best is None:
        raise ValueError("no admissible reference index for this N")
    return best


# -- random walk --------------------------------------------------------------


def walk_expected_steps(a: int, b: int, m_cap: int, trials: int, rng) -> tuple[float, float]:
    """Mean absorption time at ``a`` or ``-b`` of a fair walk, truncated at ``m_cap``.

    Returns ``(mean, standard error)``.
    """
    if a < 1 or b < 1:
        raise ValueError("need a, b >= 1")
    if trials < 1 or m_cap < 1:
        raise ValueError("need trials >= 1 and m_cap >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    pos = np.zeros(trials, dtype=np.int64)
    times = np.full(trials, m_cap, dtype=np.int64)
    alive = np.arange(trials)
    t = 0
    while alive.size and t < m_cap:
        t += 1
        pos[alive] += rng.integers(0, 2, size=alive.size, dtype=np.int64) * 2 - 1
        p = pos[alive]
        done = (p >= a) | (p <= -b)
        times[alive[done]] = t
        alive = alive[~done]
    mean = float(times.mean())
    err = float(times.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, err
