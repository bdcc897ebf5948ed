import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchcache.core import (P1, P3, CostLedger, InvariantError, MatchingCache, NodeRef, ProblemConfig, Side,
                             Workload, cache_evict, cache_insert, check_p3_stream, derive_seed, free_colors,
                             trace_hash)


def test_insert_into_empty_cache():
    cache, led = MatchingCache(2, 2), CostLedger()
    assert cache_insert(cache, (0, 0), 0, led) == []
    assert led.insertions == 1
    assert cache.color_of((0, 0)) == 0


def test_insert_evicts_single_conflict():
    cache = MatchingCache(2, 2)
    cache_insert(cache, (0, 1), 0)
    assert cache_insert(cache, (0, 0), 0) == [(0, 1)]
    assert (0, 1) not in cache


def test_insert_evicts_both_conflicts():
    cache = MatchingCache(2, 2)
    cache_insert(cache, (0, 1), 0)
    cache_insert(cache, (1, 0), 0)
    assert sorted(cache_insert(cache, (0, 0), 0)) == [(0, 1), (1, 0)]
    assert len(cache) == 1
    cache.check()


def test_evict_returns_color_and_empties():
    cache = MatchingCache(1, 1)
    cache_insert(cache, (0, 0), 0)
    assert cache_evict(cache, (0, 0)) == 0
    assert len(cache) == 0
    assert all(s is None for s in cache.slots)


def test_evict_missing_edge_raises():
    with pytest.raises(KeyError):
        cache_evict(MatchingCache(1, 1), (0, 0))


def test_refetch_after_evict_is_paid():
    cache, led = MatchingCache(1, 1), CostLedger()
    cache_insert(cache, (0, 0), 0, led)
    cache_evict(cache, (0, 0))
    cache_insert(cache, (0, 0), 0, led)
    assert led.insertions == 2


def test_double_insert_rejected():
    cache = MatchingCache(2, 2)
    cache_insert(cache, (0, 0), 0)
    with pytest.raises(ValueError):
        cache_insert(cache, (0, 0), 1)


@pytest.mark.parametrize("e,c", [((2, 0), 0), ((0, -1), 0), ((0, 0), 2)])
def test_insert_rejects_out_of_range(e, c):
    with pytest.raises(ValueError):
        cache_insert(MatchingCache(2, 2), e, c)


def test_free_colors():
    cache = MatchingCache(3, 3)
    assert free_colors(cache, NodeRef(Side.IN, 0)) == {0, 1, 2}
    cache_insert(cache, (0, 0), 0)
    cache_insert(cache, (0, 1), 2)
    assert free_colors(cache, NodeRef(Side.IN, 0)) == {1}
    cache_insert(cache, (0, 2), 1)
    assert free_colors(cache, 0) == set()
    assert free_colors(cache, NodeRef(Side.OUT, 2)) == {0, 2}


def test_node_rows():
    assert NodeRef(Side.IN, 3).row(5) == 3
    assert NodeRef(Side.OUT, 3).row(5) == 8


def test_check_detects_corruption():
    cache = MatchingCache(2, 2)
    cache_insert(cache, (0, 0), 0)
    cache.slots[cache.out_row(0) * 2 + 1] = (0, 0)
    with pytest.raises(InvariantError):
        cache.check()


def test_problem_config():
    assert ProblemConfig(4, 2, 3).K == 5
    with pytest.raises(ValueError):
        ProblemConfig(0, 1)
    with pytest.raises(ValueError):
        ProblemConfig(2, 1, -1)


def test_ledger_phases():
    led = CostLedger()
    led.insertions = 3
    assert led.close_phase("a") == 3
    led.insertions = 5
    assert led.close_phase("b") == 2
    assert led.as_dict()["phases"] == [["a", 3], ["b", 2]]


def test_trace_hash_is_order_independent():
    a, b = MatchingCache(3, 2), MatchingCache(3, 2)
    cache_insert(a, (0, 1), 0)
    cache_insert(a, (2, 2), 1)
    cache_insert(b, (2, 2), 1)
    cache_insert(b, (0, 1), 0)
    assert trace_hash(a) == trace_hash(b)
    cache_evict(b, (2, 2))
    cache_insert(b, (2, 2), 0)
    assert trace_hash(a) != trace_hash(b)


def test_workload_roundtrip(tmp_path):
    w = Workload(P3, [("ins", 0, 1), ("del", 0, 1)], {"seed": 3})
    path = tmp_path / "w.ndjson"
    w.save(path)
    back = Workload.load(path)
    assert back == w
    assert path.read_text().splitlines()[0] == '{"meta":{"seed":3},"mode":"p3"}'


def test_workload_rejects_wrong_kinds():
    with pytest.raises(ValueError):
        Workload(P1, [("ins", 0, 0)])
    with pytest.raises(ValueError):
        Workload("p2")


def test_check_p3_stream():
    ok = Workload(P3, [("ins", 0, 0), ("ins", 0, 1), ("del", 0, 0), ("ins", 0, 2)])
    check_p3_stream(ok, 3, 2)
    with pytest.raises(InvariantError):
        check_p3_stream(Workload(P3, [("ins", 0, 0), ("ins", 0, 1), ("ins", 0, 2)]), 3, 2)
    with pytest.raises(InvariantError):
        check_p3_stream(Workload(P3, [("del", 0, 0)]), 3, 2)
    with pytest.raises(InvariantError):
        check_p3_stream(Workload(P3, [("ins", 0, 0), ("ins", 0, 0)]), 3, 2)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert len({derive_seed(0, i) for i in range(100)}) == 100
    assert derive_seed(0, 1) != derive_seed(1, 0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 5), K=st.integers(1, 4),
       ops=st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 3), st.booleans()),
                    max_size=60))
def test_random_insert_evict_keeps_invariant(n, K, ops):
    cache, led = MatchingCache(n, K), CostLedger()
    inserts = 0
    for u, v, c, evict in ops:
        e = (u % n, v % n)
        if e in cache:
            if evict:
                cache_evict(cache, e)
            continue
        inserts += 1
        before = len(cache)
        gone = cache_insert(cache, e, c % K, led)
        assert len(gone) <= 2
        assert len(cache) == before + 1 - len(gone)
        cache.check()
    assert led.insertions == inserts


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 6), k=st.integers(1, 4))
def test_workload_json_roundtrip_random(seed, n, k):
    from matchcache.adversary import random_insert_delete

    w = random_insert_delete(n, k, 40, random.Random(seed))
    check_p3_stream(w, n, k)
    assert Workload.loads(w.dumps()) == w
