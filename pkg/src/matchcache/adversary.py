"""Workload generators: random streams and the gadget-based adversaries.

Adaptive generators interleave with a :class:`~matchcache.online.Problem3Engine`
and read its live coloring through ``engine.live_free(row)``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .core import P1, P3, Edge, Workload
from .gadgets import GadgetLayout, RoadSpec, RRoadSpec, build_r_road

# -- plain random streams ----------------------------------------------------


def random_requests(n: int, length: int, rng: random.Random, universe: Optional[int] = None) -> Workload:
    """Uniform requests over the ``universe x universe`` corner of the grid."""
    m = n if universe is None else min(universe, n)
    evs = [("req", rng.randrange(m), rng.randrange(m)) for _ in range(length)]
    return Workload(P1, evs, {"generator": "random_requests", "n": n, "length": length})


def random_insert_delete(n: int, k: int, length: int, rng: random.Random,
                         p_insert: float = 0.6) -> Workload:
    """Insert/delete stream whose live graph keeps maximum degree at most ``k``."""
    live: list[Edge] = []
    where: dict[Edge, int] = {}
    deg_in = [0] * n
    deg_out = [0] * n
    evs = []
    while len(evs) < length:
        if live and (rng.random() >= p_insert or len(live) >= n * k):
            i = rng.randrange(len(live))
            e = live[i]
            last = live.pop()
            if i < len(live):
                live[i] = last
                where[last] = i
            del where[e]
            deg_in[e[0]] -= 1
            deg_out[e[1]] -= 1
            evs.append(("del", e[0], e[1]))
            continue
        for _ in range(4 * n):
            u, v = rng.randrange(n), rng.randrange(n)
            if (u, v) not in where and deg_in[u] < k and deg_out[v] < k:
                where[(u, v)] = len(live)
                live.append((u, v))
                deg_in[u] += 1
                deg_out[v] += 1
                evs.append(("ins", u, v))
                break
        else:
            if not live:
                break
            p_insert = 0.0
    return Workload(P3, evs, {"generator": "random_insert_delete", "n": n, "k": k})


# -- helpers shared by the adaptive generators ------------------------------


def _free_in(engine, u: int) -> list[int]:
    return engine.live_free(u)


def _free_out(engine, v: int) -> list[int]:
    return engine.live_free(engine.n + v)


def ends_clash(engine, in_node: int, out_node: int) -> bool:
    """True when no color is free at both ends, so joining them forces a recolor."""
    return not set(_free_in(engine, in_node)).intersection(_free_out(engine, out_node))


class Recorder:
    """Feeds events to an engine (when present) and keeps the stream."""

    def __init__(self, engine=None):
        self.engine = engine
        self.events: list[tuple[str, int, int]] = []

    def ins(self, e: Edge) -> int:
        self.events.append(("ins", e[0], e[1]))
        return self.engine.insert(e) if self.engine is not None else 0

    def dele(self, e: Edge) -> int:
        self.events.append(("del", e[0], e[1]))
        return self.engine.delete(e) if self.engine is not None else 0


# -- deterministic adversary -----------------------------------------------


@dataclass
class DetAdversaryConfig:
    N: int
    steps: int
    k: int = 2

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("need at least 3 bricks")

    @property
    def L(self) -> int:
        return self.N // 3


@dataclass
class DetLayout:
    bricks: list
    hub: int
    n: int

    def connector(self, j: int) -> Edge:
        """Edge joining brick ``j`` to brick ``j + 1`` (0-based)."""
        return (self.bricks[j + 1].in_end, self.bricks[j].out_end)

    def hub_edge(self, j: int) -> Edge:
        return (self.bricks[j].in_end, self.hub)


def det_layout(config: DetAdversaryConfig) -> DetLayout:
    layout = GadgetLayout()
    bricks = [layout.brick(config.k, 0) for _ in range(config.N)]
    hub = layout.take_out()
    return DetLayout(bricks, hub, layout.n)


def det_adversary_step(engine, config: DetAdversaryConfig, lay: DetLayout) -> tuple[str, Optional[int], list]:
    """Pick the next step from the engine's current brick colors.

    Returns ``(kind, position, [(kind, edge), ...])``; a simple step is
    placed at the lowest mismatching pair.
    """
    N, L = config.N, config.L
    for j in range(N - 1):
        if ends_clash(engine, lay.bricks[j + 1].in_end, lay.bricks[j].out_end):
            e = lay.connector(j)
            return "simple", j, [("ins", e), ("del", e)]
    edges = [lay.connector(j) for j in range(L - 1)]
    edges += [lay.connector(j) for j in range(N - L, N - 1)]
    edges += [lay.hub_edge(0), lay.hub_edge(N - L)]
    return "split", None, [("ins", e) for e in edges] + [("del", e) for e in edges]


@dataclass
class DetTrace:
    config: DetAdversaryConfig
    layout: DetLayout
    init: list[Edge]
    steps: list[tuple[str, Optional[int]]] = field(default_factory=list)
    alg_step_costs: list[int] = field(default_factory=list)
    alg_init_cost: int = 0
    workload: Optional[Workload] = None

    @property
    def alg_cost(self) -> int:
        return self.alg_init_cost + sum(self.alg_step_costs)


def run_det_adversary(config: DetAdversaryConfig, engine, check: bool = False,
                      strict: bool = True) -> DetTrace:
    """Play the adaptive adversary against ``engine`` for ``config.steps`` steps.

    With ``strict`` the forcing claims are asserted on the engine's ledger:
    every simple step costs something, and when the engine has exactly ``k``
    colors every split step recolors at least ``L`` edges.
    """
    lay = det_layout(config)
    if engine.n < lay.n:
        raise ValueError(f"engine has {engine.n} nodes per side, layout needs {lay.n}")
    rec = Recorder(engine)
    init = sorted(e for b in lay.bricks for e in b.canonical())
    trace = DetTrace(config, lay, init)
    led = engine.ledger
    for e in init:
        rec.ins(e)
    trace.alg_init_cost = led.insertions
    tight = engine.K == config.k
    for _ in range(config.steps):
        kind, at, batch = det_adversary_step(engine, config, lay)
        before, rec_before = led.insertions, led.recolors
        for op, e in batch:
            rec.ins(e) if op == "ins" else rec.dele(e)
            if check:
                engine.check()
        spent = led.insertions - before
        if strict:
            if kind == "simple":
                assert spent >= 1, "simple step was free for the engine"
            elif tight:
                assert led.recolors - rec_before >= config.L, "split step recolored fewer than L edges"
        trace.steps.append((kind, at))
        trace.alg_step_costs.append(spent)
    trace.workload = Workload(P3, rec.events, {"generator": "det_adversary", "N": config.N,
                                                "k": config.k, "steps": config.steps})
    return trace


# -- randomized merge adversaries --------------------------------------------

SIMPLE = "simple"
KROAD = "kroad"


@dataclass
class RandPhaseConfig:
    k: int
    variant: str = SIMPLE
    levels: int = 1
    phases: int = 1
    r: Optional[int] = None
    d0: Optional[int] = None

    def __post_init__(self):
        if self.variant == SIMPLE:
            self.r = 2 if self.r is None else self.r
            self.d0 = 1 if self.d0 is None else self.d0
        elif self.variant == KROAD:
            self.r = self.k if self.r is None else self.r
            self.d0 = max(1, math.ceil(math.log2(self.k))) if self.d0 is None else self.d0
        else:
            raise ValueError(f"unknown merge variant {self.variant!r}")
        if self.levels < 1:
            raise ValueError("need at least one level")
        if not 2 <= self.r <= self.k:
            raise ValueError("need 2 <= r <= k")


def levels_for(avail_nodes: int, k: int, d0: int, r: int) -> int:
    """Merge levels that fit: floor(log2(avail / (4 k d0 r + 1)))."""
    per = 4 * k * d0 * r + 1
    if avail_nodes < 2 * per:
        raise ValueError("node budget too small for a single merge level")
    return int(math.floor(math.log2(avail_nodes / per)))


@dataclass
class KRoadMergeState:
    k: int
    bits: list[int] = field(default_factory=list)

    @property
    def B(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    def separated(self, x: int, y: int) -> bool:
        """Did some negative round put ``x`` and ``y`` on the same hub?"""
        return any((x >> i) & 1 and ((y >> i) & 1) == b for i, b in enumerate(self.bits))

    def extension(self) -> list[int]:
        """``ext[y]`` is the X road that Y road ``y`` extends."""
        k = self.k
        direct = [y ^ self.B for y in range(k)]
        if all(x < k for x in direct):
            return direct
        match_x: dict[int, int] = {}

        def augment(y, seen):
            for x in range(k):
                if x in seen or self.separated(x, y):
                    continue
                seen.add(x)
                if x not in match_x or augment(match_x[x], seen):
                    match_x[x] = y
                    return True
            return False

        for y in range(k):
            if not augment(y, set()):
                raise ValueError("no extension consistent with the negative rounds")
        ext = [0] * k
        for x, y in match_x.items():
            ext[y] = x
        return ext


@dataclass
class MergeOutcome:
    merged: RRoadSpec
    freed_hub: int
    connectors: list[Edge]
    cut_hub_edges: list[Edge]
    conflicts: int = 0
    negative_conflicts: list[int] = field(default_factory=list)
    events: list = field(default_factory=list)


def _road_tones(engine, roads: list[RoadSpec]) -> list[frozenset]:
    return [frozenset(_free_out(engine, road.tail)) for road in roads]


def merge_pair_simple(X: RRoadSpec, Y: RRoadSpec, rng: random.Random, engine=None) -> MergeOutcome:
    """Cut Y's roads off its hub one by one, each extending a random unextended X road."""
    if len(X.roads) != len(Y.roads):
        raise ValueError("r-roads must have the same number of roads")
    rec = Recorder(engine)
    open_x = list(range(len(X.roads)))
    chosen: dict[int, int] = {}
    conflicts = 0
    connectors, cut = [], []
    for i, road in enumerate(Y.roads):
        hub_edge = (road.head, Y.hub)
        rec.dele(hub_edge)
        cut.append(hub_edge)
        x = open_x.pop(rng.randrange(len(open_x)))
        chosen[x] = i
        link = (road.head, X.roads[x].tail)
        if engine is not None and ends_clash(engine, road.head, X.roads[x].tail):
            conflicts += 1
        rec.ins(link)
        connectors.append(link)
    roads = [X.roads[x].extended(Y.roads[chosen[x]]) for x in range(len(X.roads))]
    return MergeOutcome(RRoadSpec(roads, X.hub), Y.hub, connectors, cut, conflicts, [], rec.events)


def merge_pair_kroad(X: RRoadSpec, Y: RRoadSpec, rng: random.Random, hub_v: int,
                     engine=None, state: Optional[KRoadMergeState] = None) -> MergeOutcome:
    """Negative rounds on a scratch hub, then one color-consistent extension round.

    The conflict count of a negative round is the number of roads, on either
    side, whose free end color also appears among the other side's roads.
    """
    k = len(X.roads)
    if len(Y.roads) != k:
        raise ValueError("r-roads must have the same number of roads")
    state = KRoadMergeState(k) if state is None else state
    rec = Recorder(engine)
    rounds = int(math.floor(math.log2(k)))
    negative = []
    for i in range(rounds):
        b = rng.randrange(2)
        state.bits.append(b)
        xs = [x for x in range(k) if (x >> i) & 1]
        ys = [y for y in range(k) if ((y >> i) & 1) == b]
        assert len(xs) + len(ys) <= k, "scratch hub would exceed degree k"
        if engine is not None:
            tx = _road_tones(engine, [X.roads[x] for x in xs])
            ty = _road_tones(engine, [Y.roads[y] for y in ys])
            cx = set().union(*tx) if tx else set()
            cy = set().union(*ty) if ty else set()
            clash = sum(1 for t in tx if t & cy) + sum(1 for t in ty if t & cx)
            negative.append(clash)
        spokes = [(hub_v, X.roads[x].tail) for x in xs] + [(hub_v, Y.roads[y].tail) for y in ys]
        for e in spokes:
            rec.ins(e)
        for e in spokes:
            rec.dele(e)
    ext = state.extension()
    conflicts = 0
    connectors, cut = [], []
    for y, road in enumerate(Y.roads):
        hub_edge = (road.head, Y.hub)
        rec.dele(hub_edge)
        cut.append(hub_edge)
        x = ext[y]
        if engine is not None and ends_clash(engine, road.head, X.roads[x].tail):
            conflicts += 1
        link = (road.head, X.roads[x].tail)
        rec.ins(link)
        connectors.append(link)
    inv = {x: y for y, x in enumerate(ext)}
    roads = [X.roads[x].extended(Y.roads[inv[x]]) for x in range(k)]
    return MergeOutcome(RRoadSpec(roads, X.hub), Y.hub, connectors, cut, conflicts, negative, rec.events)


@dataclass
class PhaseLayout:
    rroads: list[RRoadSpec]
    scratch_hub: Optional[int]
    n: int

    def initial_edges(self) -> dict[Edge, int]:
        out = {}
        for rr in self.rroads:
            out.update(rr.coloring())
        return out


def phase_layout(config: RandPhaseConfig) -> PhaseLayout:
    layout = GadgetLayout()
    rroads = [build_r_road(config.k, config.r, config.d0, layout)[1] for _ in range(2 ** config.levels)]
    scratch = layout.take_in() if config.variant == KROAD else None
    return PhaseLayout(rroads, scratch, layout.n)


def phase_driver(config: RandPhaseConfig, engine, rng: random.Random, check: bool = False) -> dict:
    """Repeated phases of pairwise merges down to one long r-road, then reset.

    Reports the engine's cost and a scripted reference's cost per phase.
    """
    from .oracle import PlanPlayer, phase_plan

    lay = phase_layout(config)
    if engine.n < lay.n:
        raise ValueError(f"insufficient nodes: engine has {engine.n}, layout needs {lay.n}")
    led = engine.ledger
    ref = PlanPlayer(engine.n, config.k)
    init = lay.initial_edges()
    events: list = []
    for e in sorted(init):
        engine.insert(e)
        events.append(("ins", e[0], e[1]))
    init_cost = led.insertions
    ref.apply(init)
    ref_init = ref.ledger.insertions
    phases = []
    for p in range(config.phases):
        start = led.insertions
        phase_events: list = []
        groups = list(lay.rroads)
        connectors: list[Edge] = []
        cut: list[Edge] = []
        conflicts: list[int] = []
        negative: list[int] = []
        for _ in range(config.levels):
            nxt = []
            for a in range(0, len(groups), 2):
                X, Y = groups[a], groups[a + 1]
                if config.variant == SIMPLE:
                    out = merge_pair_simple(X, Y, rng, engine)
                else:
                    out = merge_pair_kroad(X, Y, rng, lay.scratch_hub, engine)
                if check:
                    engine.check()
                phase_events += out.events
                connectors += out.connectors
                cut += out.cut_hub_edges
                conflicts.append(out.conflicts)
                negative += out.negative_conflicts
                nxt.append(out.merged)
            groups = nxt
        for e in connectors:
            engine.delete(e)
            phase_events.append(("del", e[0], e[1]))
        for e in cut:
            engine.insert(e)
            phase_events.append(("ins", e[0], e[1]))
        if check:
            engine.check()
        alg = led.insertions - start
        ref_before = ref.ledger.insertions
        ref.replay(phase_plan(lay, groups[0]), phase_events)
        phases.append({
            "phase": p,
            "alg": alg,
            "ref": ref.ledger.insertions - ref_before,
            "merge_conflicts": conflicts,
            "negative_conflicts": negative,
        })
        events += phase_events
    return {
        "config": {"k": config.k, "variant": config.variant, "levels": config.levels,
                   "phases": config.phases, "r": config.r, "d0": config.d0},
        "alg_init": init_cost,
        "ref_init": ref_init,
        "phases": phases,
        "alg_total": led.insertions,
        "ref_total": ref.ledger.insertions,
        "workload": Workload(P3, events, {"generator": f"merge_{config.variant}", "k": config.k}),
    }


# -- coin-flip adversary (k = 2) ----------------------------------------------


@dataclass
class CoinflipLayout:
    first: RoadSpec
    second: RoadSpec
    hub: int
    n: int

    def structure(self, odd: bool) -> dict[Edge, int]:
        """Reference coloring of one phase's structure."""
        out = dict(self.first.coloring(0))
        if odd:
            out.update(self.second.coloring(1))
            out[(self.first.head, self.hub)] = 0
            out[(self.second.head, self.hub)] = 1
        else:
            out.update(self.second.coloring(0))
            out[(self.second.head, self.first.tail)] = 0
        return out


def coinflip_layout(L: int) -> CoinflipLayout:
    if L < 1:
        raise ValueError("need L >= 1")
    layout = GadgetLayout()
    first = RoadSpec([layout.brick(2, 0) for _ in range(L)], 0)
    second = RoadSpec([layout.brick(2, 1) for _ in range(L)], 1)
    hub = layout.take_out()
    return CoinflipLayout(first, second, hub, layout.n)


def coinflip_workload(L: int, m: int, phases: int) -> tuple[Workload, CoinflipLayout]:
    """Phases alternate 2-road (odd) and single road (even); m rounds each."""
    lay = coinflip_layout(L)
    evs = []
    for p in range(phases):
        order = sorted(lay.structure(odd=(p % 2 == 0)))
        for _ in range(m):
            evs += [("req", u, v) for u, v in order]
    meta = {"generator": "coinflip", "L": L, "m": m, "phases": phases, "n": lay.n}
    return Workload(P1, evs, meta), lay


def coinflip_adversary(L: int, m: int, phases: int, alg, rng: Optional[random.Random] = None) -> dict:
    """Run a request algorithm with K = 2 through the alternating phases.

    ``rng`` is accepted for interface symmetry; the stream itself is fixed
    and all randomness lives in ``alg``.
    """
    from .oracle import PlanPlayer

    if alg.config.K != 2:
        raise ValueError("the coin-flip construction needs exactly 2 matchings")
    w, lay = coinflip_workload(L, m, phases)
    if alg.config.n < lay.n:
        raise ValueError(f"algorithm has {alg.config.n} nodes per side, layout needs {lay.n}")
    ref = PlanPlayer(alg.config.n, 2)
    per = len(w.events) // phases if phases else 0
    out = []
    led = alg.ledger
    for p in range(phases):
        odd = p % 2 == 0
        plan = lay.structure(odd)
        start, rstart = led.insertions, ref.ledger.insertions
        ref.apply(plan)
        for _, u, v in w.events[p * per:(p + 1) * per]:
            alg.serve((u, v))
        stable = all(e in alg.cache for e in plan)
        out.append({"phase": p + 1, "odd": odd, "alg": led.insertions - start,
                    "ref": ref.ledger.insertions - rstart, "stable": stable})
    return {"L": L, "m": m, "phases": out, "alg_total": led.insertions,
            "ref_total": ref.ledger.insertions, "workload": w}
