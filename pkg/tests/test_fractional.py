import itertools
import random

import pytest
from helpers import parse_lp, random_trace_from_seed, solve_lp
from hypothesis import given, settings
from hypothesis import strategies as st

from matchcache.core import Workload
from matchcache.fractional import (check_state, edge_totals, export_lp, movement_cost, node_load, state_from_json,
                                   state_to_json, transform_a_to_b)
from matchcache.oracle import brute_force_opt


def test_single_request_full_grid_counts():
    model = export_lp([(0, 0)], 1, 1, full_grid=True)
    assert model.counts == {"variables": 2, "covering": 1, "packing": 2, "growth": 1}


def test_two_requests_full_grid_counts():
    model = export_lp([(0, 0), (1, 1)], 2, 2, full_grid=True)
    assert model.counts["variables"] == 32
    objective, rows, bounds = parse_lp(model.text)
    assert len(bounds) == 32 and len(objective) == 16
    kinds = [name.split("_")[0] for name, *_ in rows]
    assert (kinds.count("cov"), kinds.count("pack"), kinds.count("grow")) == (2, 16, 16)


def test_packing_rhs_uses_epsilon():
    _, rows, _ = parse_lp(export_lp([(0, 0), (0, 1)], 2, 2, epsilon=0.5).text)
    packs = [r for r in rows if r[0].startswith("pack")]
    assert packs and all(op == "<=" and rhs == 1.5 for _, _, op, rhs in packs)


def test_export_is_bit_stable():
    w = Workload.requests([(0, 1), (1, 0), (0, 1)])
    assert export_lp(w, 2, 2).text == export_lp(w, 2, 2).text


def test_export_validates():
    with pytest.raises(ValueError):
        export_lp([], 2, 2)
    with pytest.raises(ValueError):
        export_lp([(0, 5)], 2, 2)
    with pytest.raises(ValueError):
        export_lp([(0, 0)], 2, 2, epsilon=-0.1)


def test_lp_lower_bounds_integral_optimum():
    pytest.importorskip("scipy")
    rng = random.Random(3)
    for _ in range(12):
        seq = [(rng.randrange(2), rng.randrange(2)) for _ in range(rng.randint(1, 5))]
        for k in (1, 2):
            lp = solve_lp(export_lp(seq, 2, k).text)
            assert lp <= brute_force_opt(seq, k).cost + 1e-7


def test_lp_value_on_thrash_sequence():
    pytest.importorskip("scipy")
    # one color, shared in-node: every request must grow mass to 1
    assert solve_lp(export_lp([(0, 0), (0, 1), (0, 0)], 2, 1).text) == pytest.approx(3.0)


def test_full_edge_survives_transform():
    res = transform_a_to_b([{((0, 0), 1): 1.0}], 1, 2)
    assert res.trace == [{((0, 0), 1): 1.0}]


def test_half_edge_vanishes():
    res = transform_a_to_b([{((0, 0), 0): 0.25, ((0, 0), 1): 0.25}], 1, 2)
    assert res.trace == [{}]


def test_three_quarter_split():
    res = transform_a_to_b([{((0, 0), 0): 0.5, ((0, 0), 1): 0.25}], 1, 2)
    out = res.trace[0]
    assert sum(out.values()) == pytest.approx(0.5)
    assert out[((0, 0), 0)] == pytest.approx(1 / 3)
    assert out[((0, 0), 1)] == pytest.approx(1 / 6)
    assert all(out[key] <= x for key, x in {((0, 0), 0): 0.5, ((0, 0), 1): 0.25}.items())


def test_transform_rejects_infeasible_input():
    with pytest.raises(ValueError):
        transform_a_to_b([{((0, 0), 0): 0.9, ((0, 1), 0): 0.9}], 2, 2)
    with pytest.raises(ValueError):
        transform_a_to_b([{((0, 0), 0): 1.2}], 1, 2)


def test_movement_cost_counts_growth_only():
    trace = [{((0, 0), 0): 0.5}, {((0, 0), 0): 0.2}, {((0, 0), 0): 0.7}]
    assert movement_cost(trace) == pytest.approx(1.0)


def test_state_json_roundtrip():
    trace = [{((0, 1), 0): 0.25}, {}, {((1, 0), 2): 1.0}]
    assert state_from_json(state_to_json(trace)) == trace


def test_check_state_epsilon():
    s = {((0, 0), 0): 0.6, ((0, 1), 0): 0.6}
    check_state(s, 2, 2, 0.25)
    with pytest.raises(ValueError):
        check_state(s, 2, 2, 0.1)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_transform_invariants(seed):
    n, k, eps, trace = random_trace_from_seed(seed)
    res = transform_a_to_b(trace, n, k, eps)
    for a_state, b_state in zip(trace, res.trace):
        for key, x in b_state.items():
            assert x <= a_state[key] + 1e-9
        a_tot, b_tot = edge_totals(a_state), edge_totals(b_state)
        for e, a in a_tot.items():
            assert b_tot.get(e, 0.0) == pytest.approx(max(2 * a - 1, 0.0), abs=1e-9)
        assert all(load <= k + 1e-9 for load in node_load(b_tot, n).values())
    assert res.cost_b <= 2 * res.cost_a + 1e-9


def test_full_grid_edges_cover_every_pair():
    model = export_lp([(0, 0)], 3, 1, full_grid=True)
    assert model.edges == list(itertools.product(range(3), repeat=2))
