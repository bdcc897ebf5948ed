"""LP export for the fractional relaxation and the half-threshold transform.

A fractional state maps ``(edge, color)`` to a mass in ``[0, 1]``. The LP
uses ``x`` variables for the masses at each step and ``d`` variables for
their growth; only growth is charged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .core import Edge, Workload

FracState = dict[tuple[Edge, int], float]


def _xname(t: int, e: Edge, c: int) -> str:
    return f"x_{t}_{e[0]}_{e[1]}_{c}"


def _dname(t: int, e: Edge, c: int) -> str:
    return f"d_{t}_{e[0]}_{e[1]}_{c}"


def _fmt(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


@dataclass
class LpModel:
    T: int
    n: int
    k: int
    edges: list[Edge]
    epsilon: float
    text: str = ""
    counts: dict = field(default_factory=dict)


def export_lp(sigma, n: int, k: int, epsilon: float = 0.0, full_grid: bool = False) -> LpModel:
    """Write the relaxation in CPLEX LP format.

    Edges are those requested in ``sigma``, or the whole ``n x n`` grid with
    ``full_grid``. Packing rows are emitted only for nodes with at least one
    edge; on the full grid that is every node.
    """
    seq = sigma.edges() if isinstance(sigma, Workload) else [tuple(e) for e in sigma]
    if not seq:
        raise ValueError("empty request sequence")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    for u, v in seq:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"request {(u, v)} outside node range")
    T = len(seq)
    edges = [(u, v) for u in range(n) for v in range(n)] if full_grid else sorted(set(seq))
    at_node: dict[int, list[Edge]] = {}
    for e in edges:
        at_node.setdefault(e[0], []).append(e)
        at_node.setdefault(n + e[1], []).append(e)

    lines = ["\\ fractional caching in matchings", "Minimize", " obj:"]
    lines += [f"  + {_dname(t, e, c)}" for t in range(1, T + 1) for e in edges for c in range(k)]
    lines.append("Subject To")
    cov = pack = grow = 0
    rhs = _fmt(1 + epsilon)
    for t in range(1, T + 1):
        e = seq[t - 1]
        lines.append(f" cov_{t}: " + " + ".join(_xname(t, e, c) for c in range(k)) + " >= 1")
        cov += 1
        for row in range(2 * n):
            if row not in at_node:
                continue
            for c in range(k):
                terms = " + ".join(_xname(t, x, c) for x in at_node[row])
                lines.append(f" pack_{t}_{row}_{c}: {terms} <= {rhs}")
                pack += 1
        for x in edges:
            for c in range(k):
                prev = f" + {_xname(t - 1, x, c)}" if t > 1 else ""
                lines.append(f" grow_{t}_{x[0]}_{x[1]}_{c}: {_dname(t, x, c)} - {_xname(t, x, c)}{prev} >= 0")
                grow += 1
    lines.append("Bounds")
    for t in range(1, T + 1):
        for e in edges:
            for c in range(k):
                lines.append(f" 0 <= {_xname(t, e, c)} <= 1")
    for t in range(1, T + 1):
        for e in edges:
            for c in range(k):
                lines.append(f" {_dname(t, e, c)} >= 0")
    lines.append("End")
    counts = {"variables": 2 * T * len(edges) * k, "covering": cov, "packing": pack, "growth": grow}
    return LpModel(T, n, k, edges, epsilon, "\n".join(lines) + "\n", counts)


# -- fractional states -------------------------------------------------------


def edge_totals(state: FracState) -> dict[Edge, float]:
    out: dict[Edge, float] = {}
    for (e, _), x in state.items():
        out[e] = out.get(e, 0.0) + x
    return out


def node_color_load(state: FracState, n: int) -> dict[tuple[int, int], float]:
    out: dict[tuple[int, int], float] = {}
    for ((u, v), c), x in state.items():
        for row in (u, n + v):
            out[(row, c)] = out.get((row, c), 0.0) + x
    return out


def node_load(totals: dict[Edge, float], n: int) -> dict[int, float]:
    out: dict[int, float] = {}
    for (u, v), a in totals.items():
        out[u] = out.get(u, 0.0) + a
        out[n + v] = out.get(n + v, 0.0) + a
    return out


def movement_cost(trace: list[FracState]) -> float:
    """Sum of increases only, starting from the empty state."""
    total = 0.0
    prev: FracState = {}
    for s in trace:
        for key, x in s.items():
            grow = x - prev.get(key, 0.0)
            if grow > 0:
                total += grow
        prev = s
    return total


def check_state(state: FracState, n: int, k: int, epsilon: float, tol: float = 1e-9) -> None:
    for key, x in state.items():
        if x < -tol or x > 1 + tol:
            raise ValueError(f"mass {x} at {key} outside [0, 1]")
    for e, a in edge_totals(state).items():
        if a > 1 + tol:
            raise ValueError(f"edge {e} total {a} above 1")
    for key, load in node_color_load(state, n).items():
        if load > 1 + epsilon + tol:
            raise ValueError(f"packing at {key} is {load}, above 1 + {epsilon}")


@dataclass
class TransformResult:
    trace: list[FracState]
    cost_a: float
    cost_b: float


def transform_a_to_b(trace: list[FracState], n: int, k: int, epsilon: Optional[float] = None,
                     tol: float = 1e-9) -> TransformResult:
    """Map each state through ``b_e = max(2 a_e - 1, 0)``, scaling colors proportionally."""
    eps = 1.0 / (2 * k) if epsilon is None else epsilon
    out = []
    for state in trace:
        check_state(state, n, k, eps, tol)
        totals = edge_totals(state)
        new: FracState = {}
        for (e, c), x in state.items():
            a = totals[e]
            if a <= 0:
                continue
            b = max(2 * a - 1, 0.0)
            if b > 0:
                new[(e, c)] = x * (b / a)
        out.append(new)
    return TransformResult(out, movement_cost(trace), movement_cost(out))


def state_to_json(trace: list[FracState]) -> str:
    doc = [[{"edge": list(e), "color": c, "x": x} for (e, c), x in sorted(s.items())] for s in trace]
    return json.dumps(doc, separators=(",", ":"))


def state_from_json(text: str) -> list[FracState]:
    return [{(tuple(r["edge"]), int(r["color"])): float(r["x"]) for r in step} for step in json.loads(text)]
