"""Dynamic bipartite edge-coloring engines.

Every engine accepts an optional ``live`` edge set. When given, cached edges
outside it are treated as absent: they never block a color choice and they
are evicted for free when a chosen slot is taken. Without ``live`` every
cached edge counts.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .core import CostLedger, Edge, MatchingCache, cache_evict, cache_insert

log = logging.getLogger(__name__)

PATH_FLIP = "pathflip"
GREEDY = "greedy"
BOUNDED_EXTRA = "bounded_extra"
RANDOM_COLOR = "random"
POLICY_KINDS = (PATH_FLIP, GREEDY, BOUNDED_EXTRA, RANDOM_COLOR)


@dataclass
class ColoringPolicy:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown coloring policy {self.kind!r}")


def _occupant(cache: MatchingCache, row: int, c: int, live) -> Optional[Edge]:
    e = cache.slots[row * cache.K + c]
    if e is None or (live is not None and e not in live):
        return None
    return e


def _free(cache: MatchingCache, row: int, palette: int, live) -> list[int]:
    base = row * cache.K
    slots = cache.slots
    if live is None:
        return [c for c in range(palette) if slots[base + c] is None]
    return [c for c in range(palette) if slots[base + c] is None or slots[base + c] not in live]


def _rows(cache: MatchingCache, e: Edge) -> tuple[int, int]:
    return e[0], cache.n + e[1]


def bichromatic_path(cache: MatchingCache, row: int, first: int, second: int,
                     live=None) -> tuple[list[Edge], list[int]]:
    """Follow edges colored first, second, first, ... starting at ``row``.

    Returns the edges walked and every row visited, the start included.
    """
    n = cache.n
    path: list[Edge] = []
    rows = [row]
    cur, col = row, first
    limit = 2 * n
    while len(path) <= limit:
        e = _occupant(cache, cur, col, live)
        if e is None:
            return path, rows
        path.append(e)
        cur = n + e[1] if cur == e[0] else e[0]
        rows.append(cur)
        col = second if col == first else first
    raise AssertionError("bichromatic walk did not terminate; coloring is not proper")


def flip_path(cache: MatchingCache, path: list[Edge], a: int, b: int,
              ledger: Optional[CostLedger], live=None) -> int:
    """Swap colors ``a`` and ``b`` along ``path``; each re-insertion costs 1."""
    old = [(e, cache_evict(cache, e)) for e in path]
    for e, c in old:
        evicted = cache_insert(cache, e, b if c == a else a, ledger, recolor=True)
        if evicted and live is None:
            raise AssertionError(f"flip of {e} displaced {evicted}")
    if log.isEnabledFor(logging.DEBUG):
        log.debug(json.dumps({"flip": [list(e) for e in path], "colors": [a, b]}))
    return len(path)


def color_insert_pathflip(cache: MatchingCache, e: Edge, ledger: Optional[CostLedger],
                          palette: Optional[int] = None, live=None) -> int:
    """Color ``e``, flipping the shorter bichromatic path if needed.

    Returns the number of recolored edges (at most ``n``).
    """
    if e in cache:
        raise ValueError(f"edge {e} already cached")
    K = cache.K if palette is None else palette
    ru, rv = _rows(cache, e)
    fu = _free(cache, ru, K, live)
    fv = _free(cache, rv, K, live)
    if not fu or not fv:
        raise ValueError(f"an endpoint of {e} has no free color; evict first")
    common = set(fv).intersection(fu)
    if common:
        cache_insert(cache, e, min(common), ledger)
        return 0
    c1, c2 = fu[0], fv[0]
    p_u, rows_u = bichromatic_path(cache, ru, c2, c1, live)
    p_v, rows_v = bichromatic_path(cache, rv, c1, c2, live)
    assert not set(rows_u).intersection(rows_v), "bichromatic paths of the endpoints met"
    if len(p_u) <= len(p_v):
        flipped = flip_path(cache, p_u, c1, c2, ledger, live)
        cache_insert(cache, e, c2, ledger)
    else:
        flipped = flip_path(cache, p_v, c1, c2, ledger, live)
        cache_insert(cache, e, c1, ledger)
    return flipped


def color_insert_greedy(cache: MatchingCache, e: Edge, ledger: Optional[CostLedger],
                        palette: Optional[int] = None, live=None) -> int:
    """Lowest common free color; never recolors. Returns the chosen color."""
    if e in cache:
        raise ValueError(f"edge {e} already cached")
    K = cache.K if palette is None else palette
    ru, rv = _rows(cache, e)
    fv = set(_free(cache, rv, K, live))
    for c in _free(cache, ru, K, live):
        if c in fv:
            cache_insert(cache, e, c, ledger)
            return c
    raise ValueError(f"no common free color for {e}: degree promise violated")


@dataclass
class BoundedExtraState:
    """Bookkeeping for the extra colors, filled one after another up to ``y`` each."""

    base: int
    extra: int
    y: int
    counts: list[int] = field(default_factory=list)
    active: int = 0
    resets: int = 0

    def __post_init__(self):
        if self.base < 1:
            raise ValueError("need at least one base color")
        if self.extra < 1 or self.y < 1:
            raise ValueError("bounded-extra coloring needs extra >= 1 and y >= 1")
        if not self.counts:
            self.counts = [0] * self.extra

    @classmethod
    def for_size(cls, n: int, base: int, extra: int, y: Optional[int] = None) -> "BoundedExtraState":
        if y is None:
            y = default_quota(n, base, extra)
        return cls(base, extra, y)

    @property
    def active_color(self) -> int:
        return self.base + self.active

    def reset(self) -> None:
        self.counts = [0] * self.extra
        self.active = 0
        self.resets += 1


def default_quota(n: int, base: int, extra: int) -> int:
    return max(1, math.ceil(math.sqrt(n * base / extra)))


def _swap_from(cache, row, yellow, palette, ledger, live) -> int:
    c = _free(cache, row, palette, live)[0]
    path, _ = bichromatic_path(cache, row, yellow, c, live)
    return flip_path(cache, path, yellow, c, ledger, live)


def color_insert_bounded_extra(cache: MatchingCache, e: Edge, state: BoundedExtraState,
                               ledger: Optional[CostLedger], live=None) -> int:
    """Base colors first, then the active extra color with at most two swaps.

    Returns the number of recolored edges, including any global rebuild.
    """
    if e in cache:
        raise ValueError(f"edge {e} already cached")
    if cache.K < state.base + state.extra:
        raise ValueError("cache has fewer colors than base + extra")
    ru, rv = _rows(cache, e)
    k = state.base
    fu = _free(cache, ru, k, live)
    fv = _free(cache, rv, k, live)
    if not fu or not fv:
        raise ValueError(f"an endpoint of {e} has no free base color; evict first")
    common = set(fv).intersection(fu)
    if common:
        cache_insert(cache, e, min(common), ledger)
        return 0

    yellow = state.active_color
    recolored = 0
    u_has = _occupant(cache, ru, yellow, live) is not None
    v_has = _occupant(cache, rv, yellow, live) is not None
    if u_has and v_has:
        # swap at u first; v keeps a yellow edge unless the walk ended at v
        recolored += _swap_from(cache, ru, yellow, k, ledger, live)
        v_has = _occupant(cache, rv, yellow, live) is not None
        u_has = False
    if v_has and not u_has:
        recolored += _swap_from(cache, rv, yellow, k, ledger, live)
    elif u_has and not v_has:
        recolored += _swap_from(cache, ru, yellow, k, ledger, live)
    cache_insert(cache, e, yellow, ledger)

    state.counts[state.active] += 1
    if state.counts[state.active] >= state.y:
        state.active += 1
        if state.active >= state.extra:
            recolored += global_recolor_k(cache, ledger, k, live)
            state.reset()
    return recolored


def extra_class_sizes(cache: MatchingCache, state: BoundedExtraState, live=None) -> list[int]:
    sizes = [0] * state.extra
    for e, c in cache.edges():
        if c >= state.base and (live is None or e in live):
            if c - state.base < state.extra:
                sizes[c - state.base] += 1
    return sizes


def global_recolor_k(cache: MatchingCache, ledger: Optional[CostLedger], k: int, live=None) -> int:
    """Recolor the (live) edges so they use colors ``[0, k)`` only.

    Edges already on a base color keep it; the rest are placed by path-flip
    insertion into a scratch cache. Only edges whose color changes are charged.
    """
    edges = [(e, c) for e, c in cache.edges() if live is None or e in live]
    deg: dict[int, int] = {}
    for (u, v), _ in edges:
        for r in (u, cache.n + v):
            deg[r] = deg.get(r, 0) + 1
            if deg[r] > k:
                raise ValueError(f"degree above {k}; cannot recolor with {k} colors")
    scratch = MatchingCache(cache.n, k)
    for e, c in sorted(x for x in edges if x[1] < k):
        cache_insert(scratch, e, c)
    for e, _ in sorted(x for x in edges if x[1] >= k):
        color_insert_pathflip(scratch, e, None)
    changed = [(e, scratch.colors[e]) for e, c in sorted(edges) if scratch.colors[e] != c]
    for e, _ in changed:
        cache_evict(cache, e)
    for e, c in changed:
        cache_insert(cache, e, c, ledger, recolor=True)
    return len(changed)


def color_insert_random(cache: MatchingCache, e: Edge, rng: random.Random,
                        ledger: Optional[CostLedger], palette: Optional[int] = None,
                        prefer_free: bool = False, live=None) -> list[Edge]:
    """Uniform color for ``e``; conflicting edges are evicted and not refetched.

    With ``prefer_free`` a common free color is used when one exists, and the
    draw only happens when no matching can take ``e`` as is.
    """
    if e in cache:
        raise ValueError(f"edge {e} already cached")
    K = cache.K if palette is None else palette
    if prefer_free:
        ru, rv = _rows(cache, e)
        fv = set(_free(cache, rv, K, live))
        for c in _free(cache, ru, K, live):
            if c in fv:
                return cache_insert(cache, e, c, ledger)
    c = rng.randrange(K)
    return cache_insert(cache, e, c, ledger)
