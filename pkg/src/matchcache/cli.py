"""Experiment harness: ``matchcache run|adversary|oracle|lp|walk|validate``.

Exit codes: 0 ok, 1 usage or configuration error, 2 invariant violation,
3 oracle budget exceeded. ``MATCHCACHE_THREADS`` sets trial-level
parallelism (default 1).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import click

from . import __version__
from . import adversary as adv
from .coloring import POLICY_KINDS
from .core import P1, P3, InvariantError, ProblemConfig, Workload, check_p3_stream, derive_seed
from .fractional import export_lp
from .online import VARIANTS, LayeredAlgorithm, Problem3Engine
from .oracle import (OracleBudgetExceeded, OracleLimits, best_reference, brute_force_opt,
                     reference_b_i, walk_expected_steps)

THREADS_ENV = "MATCHCACHE_THREADS"

DEFAULTS = {
    "n": 8,
    "k": 2,
    "h": 0,
    "algorithm": "det_pathflip",
    "algorithm_params": {},
    "workload": {"generator": "random_requests", "length": 100},
    "trials": 1,
    "seed": 0,
    "additive": 0,
    "out_dir": "out",
    "check": False,
}


def parse_assignments(items) -> dict:
    """``key=value`` pairs; values are read as JSON when they parse."""
    out = {}
    for item in items:
        if "=" not in item:
            raise click.UsageError(f"expected key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def set_path(cfg: dict, dotted: str, value) -> None:
    node = cfg
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def load_config(path: Optional[str], overrides: dict) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if path:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
        for key, value in user.items():
            cfg[key] = value
    for key, value in overrides.items():
        set_path(cfg, key, value)
    validate_config(cfg)
    return cfg


def _mode_of(cfg: dict) -> str:
    wl = cfg["workload"]
    if "replay" in wl:
        return Workload.load(wl["replay"]).mode
    gen = wl.get("generator")
    if gen in ("random_requests", "coinflip"):
        return P1
    if gen in ("random_insert_delete", "det_adversary", "merge"):
        return P3
    raise ValueError(f"unknown workload generator {gen!r}")


def validate_config(cfg: dict) -> None:
    ProblemConfig(cfg["n"], cfg["k"], cfg["h"], cfg["seed"])
    if cfg["trials"] < 1:
        raise ValueError("trials must be at least 1")
    mode = _mode_of(cfg)
    alg = cfg["algorithm"]
    if mode == P1 and alg not in VARIANTS:
        raise ValueError(f"request workloads need one of {VARIANTS}, got {alg!r}")
    if mode == P3 and alg not in POLICY_KINDS:
        raise ValueError(f"insert/delete workloads need one of {POLICY_KINDS}, got {alg!r}")


def _layered(cfg, n, seed) -> LayeredAlgorithm:
    p = cfg.get("algorithm_params", {})
    pc = ProblemConfig(n, cfg["k"], cfg["h"], seed)
    return LayeredAlgorithm(pc, cfg["algorithm"], paging=p.get("paging"), y=p.get("y"))


def _engine(cfg, n, seed) -> Problem3Engine:
    p = cfg.get("algorithm_params", {})
    K = cfg["k"] + cfg["h"]
    return Problem3Engine(n, K, cfg["algorithm"], k=cfg["k"], seed=seed, y=p.get("y"),
                          rerequest_cap=p.get("rerequest_cap"))


def _cumulative(costs, start=0):
    out, total = [], start
    for c in costs:
        total += c
        out.append(total)
    return out


def run_trial(cfg: dict, index: int) -> dict:
    """One isolated trial; every random choice comes from seeds derived from ``index``."""
    wl = cfg["workload"]
    wl_rng = random.Random(derive_seed(cfg["seed"], index, 1))
    alg_seed = derive_seed(cfg["seed"], index, 2)
    n = cfg["n"]
    check = bool(cfg.get("check"))
    alg_series, ref_series, extra = [], None, {}
    ref_cost = None

    gen = wl.get("generator")
    if "replay" in wl or gen in ("random_requests", "random_insert_delete"):
        if "replay" in wl:
            w = Workload.load(wl["replay"])
        elif gen == "random_requests":
            w = adv.random_requests(n, wl.get("length", 100), wl_rng, wl.get("universe"))
        else:
            w = adv.random_insert_delete(n, cfg["k"], wl.get("length", 100), wl_rng, wl.get("p_insert", 0.6))
        if w.mode == P1:
            alg = _layered(cfg, n, alg_seed)
            alg_series = _cumulative(alg.run(w, check=check))
            if wl.get("reference") == "oracle":
                ref = brute_force_opt(w, cfg["k"])
                ref_cost = ref.cost
                extra["witness"] = [[t, list(e), c] for t, e, c in ref.schedule]
        else:
            check_p3_stream(w, n, cfg["k"])
            alg = _engine(cfg, n, alg_seed)
            alg_series = _cumulative(alg.run(w, check=check))
        ledger = alg.ledger
    elif gen == "det_adversary":
        dc = adv.DetAdversaryConfig(wl["N"], wl["steps"], cfg["k"])
        lay = adv.det_layout(dc)
        eng = _engine(cfg, max(n, lay.n), alg_seed)
        trace = adv.run_det_adversary(dc, eng, check=check, strict=wl.get("strict", True))
        alg_series = _cumulative(trace.alg_step_costs, trace.alg_init_cost)
        best_i, ref_cost = best_reference(trace)
        _, ref_series = reference_b_i(best_i, trace, series=True)
        extra["best_i"] = best_i
        extra["split_steps"] = sum(1 for kind, _ in trace.steps if kind == "split")
        extra["simple_steps"] = sum(1 for kind, _ in trace.steps if kind == "simple")
        ledger = eng.ledger
    elif gen == "coinflip":
        L, m, phases = wl["L"], wl.get("m", wl["L"] ** 2), wl.get("phases", 2)
        lay = adv.coinflip_layout(L)
        alg = _layered(cfg, max(n, lay.n), alg_seed)
        rep = adv.coinflip_adversary(L, m, phases, alg)
        alg_series = _cumulative(p["alg"] for p in rep["phases"])
        ref_series = _cumulative(p["ref"] for p in rep["phases"])
        ref_cost = rep["ref_total"]
        extra["phases"] = rep["phases"]
        ledger = alg.ledger
    elif gen == "merge":
        rc = adv.RandPhaseConfig(cfg["k"], wl.get("variant", adv.SIMPLE), wl.get("levels", 1),
                                 wl.get("phases", 1), wl.get("r"), wl.get("d0"))
        lay = adv.phase_layout(rc)
        eng = _engine(cfg, max(n, lay.n), alg_seed)
        rep = adv.phase_driver(rc, eng, wl_rng, check=check)
        alg_series = _cumulative((p["alg"] for p in rep["phases"]), rep["alg_init"])
        ref_series = _cumulative((p["ref"] for p in rep["phases"]), rep["ref_init"])
        ref_cost = rep["ref_total"]
        extra["phases"] = rep["phases"]
        ledger = eng.ledger
    else:
        raise ValueError(f"unknown workload generator {gen!r}")

    alg_cost = ledger.insertions
    ratio = None
    if ref_cost:
        ratio = (alg_cost - cfg.get("additive", 0)) / ref_cost
    return {
        "index": index,
        "seed": alg_seed,
        "ledger": ledger.as_dict(),
        "alg_cost": alg_cost,
        "ref_cost": ref_cost,
        "ratio": ratio,
        "raw_ratio": (alg_cost / ref_cost) if ref_cost else None,
        "series": {"alg": alg_series, "ref": ref_series},
        "extra": extra,
    }


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise click.UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}")


def run_trials(cfg: dict) -> list[dict]:
    idx = list(range(cfg["trials"]))
    workers = min(_threads(), len(idx))
    if workers <= 1:
        return [run_trial(cfg, i) for i in idx]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, [cfg] * len(idx), idx))


def _mean_err(xs):
    if not xs:
        return None, None
    m = sum(xs) / len(xs)
    if len(xs) < 2:
        return m, 0.0
    var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return m, math.sqrt(var / len(xs))


def build_report(cfg: dict, trials: list[dict]) -> dict:
    alg = [t["alg_cost"] for t in trials]
    ratios = [t["ratio"] for t in trials if t["ratio"] is not None]
    mean_alg, err_alg = _mean_err(alg)
    mean_ratio, err_ratio = _mean_err(ratios)
    refs = [t["ref_cost"] for t in trials if t["ref_cost"] is not None]
    return {
        "tool": "matchcache",
        "version": __version__,
        "seed": cfg["seed"],
        # the output location is not part of the experiment
        "config": {k: v for k, v in cfg.items() if k != "out_dir"},
        "trials": [{k: v for k, v in t.items() if k != "series"} for t in trials],
        "summary": {
            "alg_mean": mean_alg,
            "alg_stderr": err_alg,
            "ref_mean": (sum(refs) / len(refs)) if refs else None,
            "ratio_mean": mean_ratio,
            "ratio_stderr": err_ratio,
            "additive": cfg.get("additive", 0),
        },
    }


def series_csv(trial: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "cumulative_alg_cost", "cumulative_ref_cost"])
    alg = trial["series"]["alg"]
    ref = trial["series"]["ref"]
    for i, a in enumerate(alg):
        r = "" if ref is None or i >= len(ref) else ref[i]
        w.writerow([i + 1, a, r])
    return buf.getvalue()


def write_outputs(cfg: dict, trials: list[dict]) -> tuple[Path, Path]:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    report = out / "report.json"
    steps = out / "steps.csv"
    report.write_text(json.dumps(build_report(cfg, trials), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    steps.write_text(series_csv(trials[0]), encoding="utf-8")
    for t in trials[1:]:
        (out / f"steps_trial{t['index']}.csv").write_text(series_csv(t), encoding="utf-8")
    return report, steps


@click.group()
@click.version_option(__version__)
def cli():
    """Caching-in-matchings experiments."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "sets", multiple=True, help="Override a config field, e.g. workload.length=500")
@click.option("--seed", type=int)
@click.option("--trials", type=int)
@click.option("--out-dir", type=click.Path(file_okay=False))
def run(config_path, sets, seed, trials, out_dir):
    """Run trials and write report.json plus steps.csv."""
    overrides = parse_assignments(sets)
    for key, val in (("seed", seed), ("trials", trials), ("out_dir", out_dir)):
        if val is not None:
            overrides[key] = val
    cfg = load_config(config_path, overrides)
    report, steps = write_outputs(cfg, run_trials(cfg))
    click.echo(f"wrote {report} and {steps}")


@cli.command()
@click.argument("generator", type=click.Choice(["random_requests", "random_insert_delete",
                                                "det_adversary", "coinflip", "merge"]))
@click.option("--param", "params", multiple=True, help="Generator parameter key=value")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--policy", default="pathflip", show_default=True,
              help="Coloring policy the adaptive generators play against")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def adversary(generator, params, seed, policy, out_path):
    """Emit a replayable workload file."""
    p = parse_assignments(params)
    rng = random.Random(derive_seed(seed, 0, 1))
    k = p.get("k", 2)
    if generator == "random_requests":
        w = adv.random_requests(p.get("n", 8), p.get("length", 100), rng, p.get("universe"))
    elif generator == "random_insert_delete":
        w = adv.random_insert_delete(p.get("n", 8), k, p.get("length", 100), rng, p.get("p_insert", 0.6))
    elif generator == "det_adversary":
        dc = adv.DetAdversaryConfig(p.get("N", 24), p.get("steps", 100), k)
        lay = adv.det_layout(dc)
        eng = Problem3Engine(lay.n, k + p.get("h", 0), policy, k=k, seed=derive_seed(seed, 0, 2))
        w = adv.run_det_adversary(dc, eng, strict=False).workload
    elif generator == "coinflip":
        L = p.get("L", 4)
        w, _ = adv.coinflip_workload(L, p.get("m", L * L), p.get("phases", 2))
    else:
        rc = adv.RandPhaseConfig(k, p.get("variant", adv.SIMPLE), p.get("levels", 1), p.get("phases", 1))
        lay = adv.phase_layout(rc)
        eng = Problem3Engine(lay.n, k + p.get("h", 0), policy, k=k, seed=derive_seed(seed, 0, 2),
                             rerequest_cap=p.get("rerequest_cap"))
        w = adv.phase_driver(rc, eng, rng)["workload"]
    w.meta = dict(w.meta, seed=seed, params=p, policy=policy)
    w.save(out_path)
    click.echo(f"wrote {len(w.events)} events to {out_path}")


@cli.command()
@click.argument("workload", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, required=True)
@click.option("--max-states", type=int, default=OracleLimits.max_states, show_default=True)
@click.option("--max-len", type=int, default=OracleLimits.max_len, show_default=True)
def oracle(workload, k, max_states, max_len):
    """Exact lazy optimum of a small request file, with a witness."""
    w = Workload.load(workload)
    if w.mode != P1:
        raise click.UsageError("the oracle takes request workloads")
    limits = OracleLimits(max_len=max_len, max_states=max_states)
    res = brute_force_opt(w, k, limits)
    click.echo(json.dumps({"cost": res.cost,
                           "witness": [[t, list(e), c] for t, e, c in res.schedule]}, sort_keys=True))


@cli.command()
@click.argument("workload", type=click.Path(exists=True, dir_okay=False))
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option("--full-grid", is_flag=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def lp(workload, n, k, epsilon, full_grid, out_path):
    """Write the fractional relaxation as an LP file."""
    w = Workload.load(workload)
    model = export_lp(w, n, k, epsilon, full_grid)
    Path(out_path).write_text(model.text, encoding="utf-8")
    click.echo(json.dumps(model.counts, sort_keys=True))


@cli.command()
@click.argument("a", type=int)
@click.argument("b", type=int)
@click.argument("m", type=int)
@click.argument("trials", type=int)
@click.option("--seed", type=int, default=0, show_default=True)
def walk(a, b, m, trials, seed):
    """Mean absorption time of a fair walk at a or -b, truncated at m."""
    mean, err = walk_expected_steps(a, b, m, trials, seed)
    click.echo(json.dumps({"mean": mean, "stderr": err, "exact_untruncated": a * b}, sort_keys=True))


@cli.command()
@click.argument("workload", type=click.Path(exists=True, dir_okay=False))
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, required=True)
def validate(workload, n, k):
    """Check a workload file; exit 2 on a violation."""
    w = Workload.load(workload)
    if w.mode == P3:
        check_p3_stream(w, n, k)
    else:
        for i, (u, v) in enumerate(w.edges()):
            if not (0 <= u < n and 0 <= v < n):
                raise InvariantError(f"request {i}: edge {(u, v)} outside node range")
    click.echo(f"ok: {len(w.events)} events")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="matchcache", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except InvariantError as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        return 2
    except OracleBudgetExceeded as exc:
        click.echo(f"budget exceeded: {exc}", err=True)
        return 3
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
