import logging
import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchcache import adversary as adv
from matchcache.core import ProblemConfig, check_p3_stream
from matchcache.gadgets import brick_recolor
from matchcache.online import LayeredAlgorithm, Problem3Engine


def seeded_engine(config, policy="pathflip"):
    lay = adv.det_layout(config)
    eng = Problem3Engine(lay.n, config.k, policy, k=config.k)
    for b in lay.bricks:
        for e in sorted(b.canonical()):
            eng.insert(e)
    return eng, lay


def test_random_requests_in_range():
    w = adv.random_requests(5, 300, random.Random(0), universe=3)
    assert len(w.events) == 300
    assert all(u < 3 and v < 3 for u, v in w.edges())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 10), k=st.integers(1, 5), p=st.floats(0.1, 0.9))
def test_random_insert_delete_respects_degree(seed, n, k, p):
    w = adv.random_insert_delete(n, k, 200, random.Random(seed), p)
    check_p3_stream(w, n, k)


def test_uniform_bricks_trigger_split():
    cfg = adv.DetAdversaryConfig(9, 1)
    eng, lay = seeded_engine(cfg)
    kind, at, batch = adv.det_adversary_step(eng, cfg, lay)
    assert kind == "split" and at is None
    inserted = [e for op, e in batch if op == "ins"]
    assert len(inserted) == 2 * (cfg.L - 1) + 2
    assert [e for op, e in batch if op == "del"] == inserted


def test_mismatch_triggers_simple_step():
    cfg = adv.DetAdversaryConfig(9, 1)
    eng, lay = seeded_engine(cfg)
    for b in lay.bricks[5:]:
        brick_recolor(eng.cache, b, 1, None)
    kind, at, batch = adv.det_adversary_step(eng, cfg, lay)
    assert (kind, at) == ("simple", 4)
    assert batch == [("ins", lay.connector(4)), ("del", lay.connector(4))]


def test_split_step_forces_recolorings():
    cfg = adv.DetAdversaryConfig(7, 1)
    lay = adv.det_layout(cfg)
    eng = Problem3Engine(lay.n, 2, "pathflip")
    trace = adv.run_det_adversary(cfg, eng, check=True)
    assert trace.steps == [("split", None)]
    assert eng.ledger.recolors >= cfg.L


def test_det_adversary_rejects_small_engine():
    cfg = adv.DetAdversaryConfig(7, 1)
    with pytest.raises(ValueError):
        adv.run_det_adversary(cfg, Problem3Engine(3, 2))


def test_det_adversary_ratio_grows():
    from matchcache.oracle import best_reference

    ratios = []
    for N in (12, 24):
        cfg = adv.DetAdversaryConfig(N, 4 * N * N)
        lay = adv.det_layout(cfg)
        trace = adv.run_det_adversary(cfg, Problem3Engine(lay.n, 2, "pathflip"))
        ratios.append(trace.alg_cost / best_reference(trace)[1])
    assert ratios[1] > ratios[0]


def test_det_workload_replays_to_same_cost():
    cfg = adv.DetAdversaryConfig(9, 60)
    lay = adv.det_layout(cfg)
    trace = adv.run_det_adversary(cfg, Problem3Engine(lay.n, 2, "pathflip"))
    replay = Problem3Engine(lay.n, 2, "pathflip")
    replay.run(trace.workload)
    assert replay.ledger.insertions == trace.alg_cost


def test_simple_merge_topology():
    cfg = adv.RandPhaseConfig(2, adv.SIMPLE, levels=1, d0=2)
    lay = adv.phase_layout(cfg)
    X, Y = lay.rroads
    out = adv.merge_pair_simple(X, Y, random.Random(0))
    assert out.freed_hub == Y.hub
    assert all(len(road.bricks) == 4 for road in out.merged.roads)
    assert len(out.connectors) == 2 and len(out.cut_hub_edges) == 2
    live = set(lay.initial_edges())
    for kind, u, v in out.events:
        (live.add if kind == "ins" else live.discard)((u, v))
    assert not any(v == Y.hub for _, v in live)


def test_simple_merge_forced_recolors():
    logging.disable(logging.WARNING)
    try:
        cfg = adv.RandPhaseConfig(2, adv.SIMPLE, levels=1)
        lay = adv.phase_layout(cfg)
        total = 0
        trials = 150
        for t in range(trials):
            eng = Problem3Engine(lay.n, 2, "random", seed=t)
            rep = adv.phase_driver(cfg, eng, random.Random(1000 + t))
            total += sum(rep["phases"][0]["merge_conflicts"])
    finally:
        logging.disable(logging.NOTSET)
    assert total / trials >= 0.4


def test_kroad_negative_rounds_and_extension():
    cfg = adv.RandPhaseConfig(4, adv.KROAD, levels=1, d0=2)
    lay = adv.phase_layout(cfg)
    X, Y = lay.rroads
    state = adv.KRoadMergeState(4)
    out = adv.merge_pair_kroad(X, Y, random.Random(3), lay.scratch_hub, state=state)
    assert len(state.bits) == 2
    assert state.extension() == [y ^ state.B for y in range(4)]
    spokes = [e for kind, *e in out.events if kind == "ins" and e[0] == lay.scratch_hub]
    assert len(spokes) == 8  # per round: two X roads and two Y roads, hub degree k
    assert len(out.merged.roads) == 4


def test_kroad_extension_general_k():
    state = adv.KRoadMergeState(3, [1])
    ext = state.extension()
    assert sorted(ext) == [0, 1, 2]
    assert not any(state.separated(x, y) for y, x in enumerate(ext))


def test_phase_resets_live_graph():
    cfg = adv.RandPhaseConfig(2, adv.SIMPLE, levels=2, phases=3)
    lay = adv.phase_layout(cfg)
    eng = Problem3Engine(lay.n, 2, "pathflip")
    rep = adv.phase_driver(cfg, eng, random.Random(5), check=True)
    assert eng.live == set(lay.initial_edges())
    bound = 8 * 2 ** cfg.levels * cfg.r * cfg.d0
    assert all(p["ref"] <= bound for p in rep["phases"])


def test_many_phases_amortize_initialization():
    k = 2
    cfg = adv.RandPhaseConfig(k, adv.SIMPLE, levels=3, phases=k * k)
    lay = adv.phase_layout(cfg)
    rep = adv.phase_driver(cfg, Problem3Engine(lay.n, k, "pathflip"), random.Random(2))
    assert rep["ref_init"] <= rep["ref_total"] / 2


def test_phase_driver_workload_replays():
    cfg = adv.RandPhaseConfig(2, adv.SIMPLE, levels=2, phases=2)
    lay = adv.phase_layout(cfg)
    rep = adv.phase_driver(cfg, Problem3Engine(lay.n, 2, "pathflip"), random.Random(8))
    check_p3_stream(rep["workload"], lay.n, 2)
    replay = Problem3Engine(lay.n, 2, "pathflip")
    replay.run(rep["workload"])
    assert replay.ledger.insertions == rep["alg_total"]


def test_rand_phase_config_validation():
    with pytest.raises(ValueError):
        adv.RandPhaseConfig(2, "zigzag")
    with pytest.raises(ValueError):
        adv.RandPhaseConfig(2, adv.SIMPLE, levels=0)
    assert adv.levels_for(1000, 2, 1, 2) == 5
    with pytest.raises(ValueError):
        adv.levels_for(10, 2, 1, 2)


def test_coinflip_workload_file_shape():
    w, lay = adv.coinflip_workload(4, 16, 2)
    per = len(lay.structure(True)) * 16 + len(lay.structure(False)) * 16
    assert len(w.events) == per
    assert w.meta["L"] == 4


def test_coinflip_random_color_pays_quadratic():
    L = 4
    lay = adv.coinflip_layout(L)
    even = []
    for t in range(100):
        alg = LayeredAlgorithm(ProblemConfig(lay.n, 2, 0, seed=t), "random_color")
        rep = adv.coinflip_adversary(L, L * L, 2, alg)
        assert rep["phases"][0]["stable"]
        even.append(rep["phases"][1]["alg"])
        assert rep["phases"][1]["ref"] <= 4 * L
    assert statistics.mean(even) >= 0.3 * L * L


def test_coinflip_needs_two_matchings():
    alg = LayeredAlgorithm(ProblemConfig(40, 3), "det_pathflip")
    with pytest.raises(ValueError):
        adv.coinflip_adversary(2, 4, 2, alg)
