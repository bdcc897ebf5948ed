"""Bricks, roads, r-roads and clique 1-factorizations.

A brick of color ``c`` for ``k`` colors lives on ``w`` in-nodes and ``w``
out-nodes, ``w`` the power of two with ``w/2 < k <= w``. Matching ``c'``
pairs local in-node ``i`` with local out-node ``i ^ c'``; one edge of
color ``c`` is removed, so the brick's two endpoints both miss ``c``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .core import CostLedger, Edge, MatchingCache, cache_evict, cache_insert

ColoredEdges = dict[Edge, int]


def brick_width(k: int) -> int:
    if k < 2:
        raise ValueError("bricks need k >= 2")
    w = 1
    while w < k:
        w *= 2
    return w


@dataclass(frozen=True)
class BrickSpec:
    k: int
    w: int
    base_in: int
    base_out: int
    color: int
    removed_i: int

    @property
    def in_end(self) -> int:
        return self.base_in + self.removed_i

    @property
    def out_end(self) -> int:
        return self.base_out + (self.removed_i ^ self.color)

    def canonical(self) -> ColoredEdges:
        out = {}
        for c in range(self.k):
            for i in range(self.w):
                if c == self.color and i == self.removed_i:
                    continue
                out[(self.base_in + i, self.base_out + (i ^ c))] = c
        return out

    def flip_edges(self, new_color: int) -> list[Edge]:
        """The three edges whose colors swap when the brick changes color."""
        c1, c2, i = self.color, new_color, self.removed_i
        bi, bo = self.base_in, self.base_out
        return [(bi + (i ^ c1 ^ c2), bo + (i ^ c1)),
                (bi + (i ^ c1 ^ c2), bo + (i ^ c2)),
                (bi + i, bo + (i ^ c2))]

    def coloring(self, color: int) -> ColoredEdges:
        """Edge colors of this brick when it is shown as ``color``."""
        out = self.canonical()
        if color != self.color:
            for e in self.flip_edges(color):
                out[e] = color if out[e] == self.color else self.color
        return out

    def edges(self) -> list[Edge]:
        return sorted(self.canonical())


def build_brick(k: int, color: int, base_in: int = 0, base_out: int = 0,
                removed_i: Optional[int] = None) -> tuple[ColoredEdges, BrickSpec]:
    w = brick_width(k)
    if not 0 <= color < k:
        raise ValueError(f"brick color {color} outside [0, {k})")
    if removed_i is None:
        removed_i = w - 1
    if not 0 <= removed_i < w:
        raise ValueError(f"removed index {removed_i} outside [0, {w})")
    spec = BrickSpec(k, w, base_in, base_out, color, removed_i)
    return spec.canonical(), spec


def brick_color_in(cache: MatchingCache, spec: BrickSpec) -> Optional[int]:
    """Which coloring the cache currently shows for the brick, if a known one."""
    canon = spec.canonical()
    current = {e: cache.colors.get(e) for e in canon}
    if current == canon:
        return spec.color
    for c in range(spec.k):
        if c != spec.color and current == spec.coloring(c):
            return c
    return None


def brick_recolor(cache: MatchingCache, spec: BrickSpec, new_color: int,
                  ledger: Optional[CostLedger]) -> list[Edge]:
    """Move a brick to ``new_color`` by swapping three edges.

    Starts from the canonical coloring, or undoes a previous move back to it.
    """
    shown = brick_color_in(cache, spec)
    if shown is None:
        raise ValueError("brick is neither canonical nor one move away from it")
    if new_color == shown:
        raise ValueError("brick already has that color")
    if shown == spec.color:
        path = spec.flip_edges(new_color)
        a, b = spec.color, new_color
    elif new_color == spec.color:
        path = spec.flip_edges(shown)
        a, b = spec.color, shown
    else:
        raise ValueError("undo to the canonical coloring before recoloring again")
    old = [(e, cache_evict(cache, e)) for e in path]
    for e, c in old:
        cache_insert(cache, e, b if c == a else a, ledger, recolor=True)
    return path


class GadgetLayout:
    """Hands out contiguous node ranges on each side."""

    def __init__(self):
        self.next_in = 0
        self.next_out = 0

    def take_in(self, count: int = 1) -> int:
        start = self.next_in
        self.next_in += count
        return start

    def take_out(self, count: int = 1) -> int:
        start = self.next_out
        self.next_out += count
        return start

    @property
    def n(self) -> int:
        return max(self.next_in, self.next_out, 1)

    def brick(self, k: int, color: int, removed_i: Optional[int] = None) -> BrickSpec:
        w = brick_width(k)
        return build_brick(k, color, self.take_in(w), self.take_out(w), removed_i)[1]


@dataclass
class RoadSpec:
    bricks: list[BrickSpec]
    color: int
    connectors: list[Edge] = field(default_factory=list)

    def __post_init__(self):
        if not self.connectors:
            self.connectors = [(b.in_end, a.out_end) for a, b in zip(self.bricks, self.bricks[1:])]

    @property
    def head(self) -> int:
        """In-side end: the first brick's in-endpoint."""
        return self.bricks[0].in_end

    @property
    def tail(self) -> int:
        """Out-side end: the last brick's out-endpoint."""
        return self.bricks[-1].out_end

    def coloring(self, color: Optional[int] = None) -> ColoredEdges:
        c = self.color if color is None else color
        out = {}
        for b in self.bricks:
            out.update(b.coloring(c))
        for e in self.connectors:
            out[e] = c
        return out

    def extended(self, other: "RoadSpec") -> "RoadSpec":
        link = (other.head, self.tail)
        return RoadSpec(self.bricks + other.bricks, self.color,
                        self.connectors + [link] + other.connectors)


def build_road(k: int, color: int, d: int, layout: GadgetLayout) -> tuple[ColoredEdges, RoadSpec]:
    if d < 1:
        raise ValueError("road length must be at least 1")
    road = RoadSpec([layout.brick(k, color) for _ in range(d)], color)
    return road.coloring(), road


@dataclass
class RRoadSpec:
    roads: list[RoadSpec]
    hub: int

    @property
    def hub_edges(self) -> list[Edge]:
        return [(road.head, self.hub) for road in self.roads]

    def coloring(self) -> ColoredEdges:
        out = {}
        for road, e in zip(self.roads, self.hub_edges):
            out.update(road.coloring())
            out[e] = road.color
        return out


def build_r_road(k: int, r: int, d: int, layout: GadgetLayout,
                 colors: Optional[list[int]] = None) -> tuple[ColoredEdges, RRoadSpec]:
    """``r`` roads of length ``d`` whose heads meet at an out-side hub."""
    if not 2 <= r <= k:
        raise ValueError("need 2 <= r <= k")
    colors = list(range(r)) if colors is None else list(colors)
    if len(colors) != r or len(set(colors)) != r:
        raise ValueError("r-road needs r distinct road colors")
    roads = [build_road(k, c, d, layout)[1] for c in colors]
    rr = RRoadSpec(roads, layout.take_out())
    return rr.coloring(), rr


def r_road_node_bound(k: int, r: int, d: int) -> int:
    return 4 * k * d * r + 1


def layout_json(layout: GadgetLayout, edges: ColoredEdges) -> str:
    doc = {
        "in_nodes": layout.next_in,
        "out_nodes": layout.next_out,
        "edges": [[u, v, c] for (u, v), c in sorted(edges.items())],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def one_factorization(n: int) -> list[list[tuple[int, int]]]:
    """Split the n-clique into n-1 perfect matchings (n even)."""
    if n < 2 or n % 2:
        raise ValueError("a 1-factorization of the clique exists only for even n >= 2")
    m = n - 1
    rounds = []
    for i in range(m):
        pairs = [tuple(sorted((i, m)))]
        for j in range(1, n // 2):
            a, b = (i - j) % m, (i + j) % m
            pairs.append(tuple(sorted((a, b))))
        rounds.append(sorted(pairs))
    return rounds
