"""Shared test utilities: an LP-file reader and random fractional traces."""

import random
import re

from matchcache.fractional import edge_totals, node_color_load

_TERM = re.compile(r"([+-])?\s*([A-Za-z_][\w]*)")


def _terms(expr):
    out = {}
    for sign, name in _TERM.findall(expr):
        out[name] = out.get(name, 0.0) + (-1.0 if sign == "-" else 1.0)
    return out


def parse_lp(text):
    """Read back the subset of CPLEX LP that the exporter writes."""
    section = None
    objective = {}
    rows = []
    bounds = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        if line in ("Minimize", "Subject To", "Bounds", "End"):
            section = line
            continue
        if section == "Minimize":
            objective.update(_terms(line.split(":", 1)[-1]))
        elif section == "Subject To":
            name, body = line.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*([-\d.e]+)$", body.strip())
            rows.append((name.strip(), _terms(m.group(1)), m.group(2), float(m.group(3))))
        elif section == "Bounds":
            parts = line.split()
            if len(parts) == 5:
                bounds[parts[2]] = (float(parts[0]), float(parts[4]))
            else:
                bounds[parts[0]] = (float(parts[2]), None)
    return objective, rows, bounds


def solve_lp(text):
    import numpy as np
    from scipy.optimize import linprog

    objective, rows, bounds = parse_lp(text)
    names = sorted(bounds)
    index = {v: i for i, v in enumerate(names)}
    c = np.zeros(len(names))
    for v, coef in objective.items():
        c[index[v]] = coef
    A, b = [], []
    for _, terms, op, rhs in rows:
        row = np.zeros(len(names))
        for v, coef in terms.items():
            row[index[v]] = coef
        if op == "<=":
            A.append(row)
            b.append(rhs)
        else:
            A.append(-row)
            b.append(-rhs)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=[bounds[v] for v in names], method="highs")
    assert res.status == 0, res.message
    return res.fun


def random_state(rng, n, k, eps, density=0.6):
    state = {}
    for u in range(n):
        for v in range(n):
            if rng.random() < density:
                for c in range(k):
                    if rng.random() < 0.7:
                        state[((u, v), c)] = rng.random()
    for e, a in edge_totals(state).items():
        if a > 1:
            for c in range(k):
                if (e, c) in state:
                    state[(e, c)] /= a
    loads = node_color_load(state, n)
    worst = max(loads.values(), default=0.0)
    if worst > 1 + eps:
        scale = (1 + eps) / worst
        state = {key: x * scale for key, x in state.items()}
    if rng.random() < 0.3 and state:
        # push one edge to full mass on one color where packing allows
        key = rng.choice(sorted(state))
        (u, v), c = key
        others = sum(x for ((uu, vv), cc), x in state.items() if cc == c and key != ((uu, vv), cc) and (uu == u or vv == v))
        room = 1 + eps - others
        if room >= 1:
            for cc in range(k):
                state.pop(((u, v), cc), None)
            state[key] = 1.0
    return state


def random_trace(rng, n, k, eps, steps):
    trace = [random_state(rng, n, k, eps)]
    for _ in range(steps - 1):
        if rng.random() < 0.5:
            trace.append(random_state(rng, n, k, eps))
        else:
            # small perturbation of one entry, kept feasible
            s = dict(trace[-1])
            if s:
                key = rng.choice(sorted(s))
                s[key] = max(0.0, s[key] - rng.random() * 0.5)
            trace.append(s)
    return trace


def random_trace_from_seed(seed):
    rng = random.Random(seed)
    n, k = rng.randint(1, 4), rng.randint(1, 3)
    eps = 1 / (2 * k)
    return n, k, eps, random_trace(rng, n, k, eps, rng.randint(1, 8))
