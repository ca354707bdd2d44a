"""Solver comparisons on a fixed suite of generated instances.

Cost is measured in oracle calls (one greedy sweep costs ``p``).  Every
(instance, solver) pair writes a best-so-far trace CSV; ``summary.json``
collects the calls needed to reach each gap threshold.  Outputs do not
contain wall-clock times (those go to ``timings_<kind>.json``), so identical
configurations give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import InputError, SetFunction, lovasz
from .graph import (
    CutPlusModular,
    chain,
    genrmf_like,
    grid2d,
    st_cut_function,
    two_moons_logdet,
    zipf_cover,
)
from .prox import SeparableProblem, divide_and_conquer, primal_candidates
from .sfm import _identity_reduction, brute_force, conditional_gradient, exact_solver, min_norm_point, minimize, wolfe
from .zoo import ConcaveSpec, add_modular, concave_compose, gaussian_mutual_information, scale, set_cover

SUITES = ("chain", "grid", "genrmf-wide-like", "genrmf-long-like", "two-moons", "cover")
SFM_SOLVERS = ("mnp", "sg", "sg-polyak", "cg", "cg-fixed", "ellipsoid")
PROX_SOLVERS = ("mnp", "cg", "cg-fixed")
DEFAULT_SFM_SOLVERS = ("mnp", "sg", "sg-polyak", "cg", "cg-fixed")
THRESHOLDS = tuple(10.0**-k for k in range(1, 7))
# MNP accuracy used to fix the optimum when no exact method applies
OPT_MNP_TOL = 1e-10
# ellipsoid keeps a dense shape matrix, so it is skipped above this size
ELLIPSOID_MAX_P = 200


@dataclass(frozen=True)
class BenchConfig:
    """One benchmark run.

    ``max_oracle`` caps oracle calls per (instance, solver); when it is
    ``None`` the cap is ``sweeps * p``.  ``max_wall_s`` is a soft per-job
    limit checked between solvers.
    """

    suites: tuple = SUITES
    seed: int = 0
    solvers: tuple = DEFAULT_SFM_SOLVERS
    max_oracle: Optional[int] = None
    sweeps: int = 5000
    max_wall_s: float = 600.0
    out: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if not self.solvers:
            raise InputError("at least one solver is required")
        if not self.suites:
            raise InputError("at least one suite instance is required")
        for s in self.suites:
            if s not in SUITES:
                raise InputError(f"unknown suite {s!r}; choose from {', '.join(SUITES)}")
        if (self.max_oracle is not None and self.max_oracle <= 0) or self.sweeps <= 0 or self.max_wall_s <= 0:
            raise InputError("budgets must be positive")
        if self.jobs < 1:
            raise InputError("jobs must be at least 1")

    def budget(self, p: int) -> int:
        return self.max_oracle if self.max_oracle is not None else self.sweeps * p


@dataclass
class Instance:
    name: str
    F: SetFunction
    spec: dict  # replayable description: a function spec and/or generator parameters
    cut_like: bool = False


def _cut_spec(g, z) -> dict:
    arcs = [[u + 1, v + 1, c] for u, v, c in g.arcs]
    return {"type": "cut", "n": g.n, "symmetric": g.symmetric, "arcs": arcs, "z": [float(x) for x in z]}


def build_instance(name: str, seed: int = 0) -> Instance:
    """Desk-scale versions of the benchmark problems."""
    rng = np.random.default_rng(seed)
    if name == "chain":
        g = chain(100)
        z = rng.standard_normal(100)
        return Instance(name, add_modular(CutPlusModular(g), z), {"function": _cut_spec(g, z)}, True)
    if name == "grid":
        g = grid2d(30, 30)
        z = rng.standard_normal(900)
        return Instance(name, add_modular(CutPlusModular(g), z), {"function": _cut_spec(g, z)}, True)
    if name in ("genrmf-wide-like", "genrmf-long-like"):
        a, b = (8, 7) if name == "genrmf-wide-like" else (4, 36)
        net = genrmf_like(a, b, 1.0, 100.0, seed)
        H = st_cut_function(net)
        gen = {"generator": "genrmf_like", "a": a, "b": b, "c1": 1.0, "c2": 100.0, "seed": seed}
        return Instance(name, add_modular(CutPlusModular(H.graph), H.z), {**gen, "function": _cut_spec(H.graph, H.z)}, True)
    if name == "two-moons":
        tm = two_moons_logdet(400, seed=seed)
        F = add_modular(gaussian_mutual_information(tm.kernel), tm.prior)
        gen = {"generator": "two_moons_logdet", "n": 400, "noise": 0.1, "seed": seed, "ridge": 0.1,
               "label_weight": 100.0, "n_labels": 16, "bandwidth": tm.bandwidth,
               "labeled": [int(i) + 1 for i in tm.labeled]}
        return Instance(name, F, gen)
    if name == "cover":
        # speech-like: lambda * sqrt(cover(A)) - |A| over a Zipf vocabulary
        p, lam = 200, 4.0
        gen = {"generator": "zipf_cover", "p": p, "vocab": 1000, "words": 8, "exponent": 1.2, "seed": seed}
        cov = zipf_cover(p, 1000, 8, 1.2, seed)
        inner = set_cover(cov)
        F = add_modular(scale(concave_compose(inner, ConcaveSpec("sqrt"), assume_monotone=True), lam), -np.ones(p))
        spec = {
            "type": "add_modular",
            "z": [-1.0] * p,
            "f": {
                "type": "scale",
                "lambda": lam,
                "f": {
                    "type": "concave_compose",
                    "assume_monotone": True,
                    "g": {"kind": "sqrt"},
                    "f": {"type": "cover", "p": p, "groups": [[i + 1 for i in gr] for gr in cov.groups],
                          "weights": list(cov.weights)},
                },
            },
        }
        return Instance(name, F, {**gen, "function": spec})
    raise InputError(f"unknown suite {name!r}")


# ---------------------------------------------------------------------------
# file output


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _thr_key(t: float) -> str:
    return f"{t:.0e}"


def _first_calls(calls: np.ndarray, values: np.ndarray, thr: float):
    hit = np.flatnonzero(values <= thr)
    return int(calls[hit[0]]) if hit.size else None


def value_at_budget(calls: np.ndarray, values: np.ndarray, budget: float) -> float:
    """Best-so-far value among trace rows using at most ``budget`` calls (``inf`` if none)."""
    ok = np.flatnonzero(calls <= budget)
    return float(values[ok[-1]]) if ok.size else math.inf


# ---------------------------------------------------------------------------
# minimization benchmark

SFM_TRACE_HEADER = ("iter", "oracle_calls", "primal_best", "dual_best", "gap", "primal_subopt", "dual_subopt")


def optimum(inst: Instance) -> tuple[float, str]:
    """Minimum value and how it was obtained."""
    F = inst.F
    if F.p <= 20:
        return brute_force(F).min_value, "brute_force"
    if inst.cut_like:
        return minimize(F, "mincut").min_value, "max_flow"
    res = min_norm_point(F, tol=OPT_MNP_TOL, max_iter=100 * F.p)
    F.reset_counters()
    return res.min_value, f"mnp(gap={res.gap:.1e})"


def _run_sfm(inst: Instance, solver: str, budget: int):
    F = inst.F
    F.reset_counters()
    steps = max(budget // F.p, 1)
    if solver == "mnp":
        return min_norm_point(F, max_calls=budget, max_iter=steps)
    algo = {"sg": "sg", "sg-polyak": "sg-polyak", "cg": "cg", "cg-fixed": "cg-fixed", "ellipsoid": "ellipsoid"}[solver]
    return minimize(F, algo, budget=budget, steps=steps)


def _sfm_job(cfg: BenchConfig, name: str) -> dict:
    inst = build_instance(name, cfg.seed)
    opt, source = optimum(inst)
    budget = cfg.budget(inst.F.p)
    out = {"p": inst.F.p, "opt": opt, "opt_source": source, "budget": budget, "solvers": {}}
    traces, timings = {}, {}
    t0 = time.perf_counter()
    for solver in cfg.solvers:
        if solver not in SFM_SOLVERS:
            raise InputError(f"unknown solver {solver!r}; choose from {', '.join(SFM_SOLVERS)}")
        if solver == "ellipsoid" and inst.F.p > ELLIPSOID_MAX_P:
            out["solvers"][solver] = {"skipped": f"p > {ELLIPSOID_MAX_P}"}
            continue
        if time.perf_counter() - t0 > cfg.max_wall_s:
            out["solvers"][solver] = {"skipped": "wall-time budget"}
            continue
        ts = time.perf_counter()
        res = _run_sfm(inst, solver, budget)
        timings[solver] = time.perf_counter() - ts
        rows = [(it, calls, pb, db, gap, pb - opt, opt - db) for it, calls, _ms, pb, db, gap in res.trace.rows]
        traces[solver] = _csv(SFM_TRACE_HEADER, rows)
        calls = np.array([r[1] for r in rows], dtype=float)
        gaps = np.array([r[4] for r in rows])
        dual_sub = np.array([r[6] for r in rows])
        out["solvers"][solver] = {
            "calls_to_gap": {_thr_key(t): _first_calls(calls, gaps, t) for t in THRESHOLDS},
            "calls_to_dual_subopt": {_thr_key(t): _first_calls(calls, dual_sub, t) for t in THRESHOLDS},
            "final_gap": float(gaps[-1]),
            "final_primal_subopt": float(rows[-1][5]),
            "final_dual_subopt": float(rows[-1][6]),
            "oracle_calls": int(calls[-1]),
            "iterations": len(rows),
            "status": res.status,
            "minimizer_value": res.min_value,
        }
    return {"name": name, "summary": out, "traces": traces, "spec": inst.spec, "timings": timings}


def _run_jobs(cfg: BenchConfig, job) -> list:
    if cfg.jobs == 1:
        return [job(cfg, name) for name in cfg.suites]
    with ThreadPoolExecutor(cfg.jobs) as pool:
        return list(pool.map(lambda n: job(cfg, n), cfg.suites))


def _emit(cfg: BenchConfig, kind: str, results: list) -> dict:
    report = {"kind": kind, "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items() if k != "out"},
              "instances": {r["name"]: r["summary"] for r in results}}
    if cfg.out is not None:
        out = Path(cfg.out)
        prefix = "trace" if kind == "sfm" else "prox_trace"
        for r in results:
            for solver, text in r["traces"].items():
                _write_atomic(out / f"{prefix}_{r['name']}_{solver}.csv", text)
            _write_atomic(out / "instances" / f"{r['name']}.json", _dumps(r["spec"]))
        _write_atomic(out / ("summary.json" if kind == "sfm" else "prox_summary.json"), _dumps(report))
        timing = {r["name"]: r["timings"] for r in results}
        _write_atomic(out / f"timings_{kind}.json", _dumps(timing))
    return report


def run_sfm_bench(cfg: BenchConfig) -> dict:
    """Run every requested solver on every suite instance; returns the summary."""
    return _emit(cfg, "sfm", _run_jobs(cfg, _sfm_job))


# ---------------------------------------------------------------------------
# proximal benchmark: min f(w) + |w|^2 / 2

PROX_TRACE_HEADER = (
    "iter", "oracle_calls", "dual_best", "primal_naive_best", "primal_pava_best",
    "gap_naive", "gap_pava", "dual_subopt",
)


def prox_optimum(inst: Instance) -> tuple[float, str, np.ndarray]:
    """Optimal value of ``f(w) + |w|^2 / 2`` and the optimal ``w``."""
    F = inst.F
    if inst.cut_like:
        res = divide_and_conquer(F, SeparableProblem.quadratic(np.zeros(F.p)), exact_solver("mincut"))
        source = "divide_and_conquer(max_flow)"
    else:
        st = wolfe(F, tol=1e-14, max_iter=100 * F.p)
        w = -st.x
        source = f"mnp(status={st.status})"
        F.reset_counters()
        return float(lovasz(F, w) + 0.5 * w @ w), source, w
    w = res.w
    F.reset_counters()
    return float(lovasz(F, w) + 0.5 * w @ w), source, w


def _prox_rows(F: SetFunction, iterates: list, calls: list, opt: float) -> list:
    rows = []
    best_d = best_n = best_p = None
    for it, (s, c) in enumerate(zip(iterates, calls)):
        d = -0.5 * float(s @ s)
        _, g_pava, g_naive = primal_candidates(F, s)
        best_d = d if best_d is None else max(best_d, d)
        best_n = d + g_naive if best_n is None else min(best_n, d + g_naive)
        best_p = d + g_pava if best_p is None else min(best_p, d + g_pava)
        rows.append((it, int(c), best_d, best_n, best_p, g_naive, g_pava, opt - best_d))
    return rows


def _run_prox(F: SetFunction, solver: str, budget: int):
    F.reset_counters()
    steps = max(budget // F.p, 1)
    iterates, calls = [], []
    if solver == "mnp":
        def observe(it, x):
            iterates.append(x.copy())
            calls.append(F.calls)

        st = wolfe(F, tol=1e-14, max_iter=steps, observer=observe)
        status = st.status
    else:
        rule = "line_search" if solver == "cg" else "fixed_2_over_t"
        res = conditional_gradient(F, steps, rule, budget, 0.0, _identity_reduction(F), history=True)
        iterates = res.info["iterates"]
        calls = [r[1] for r in res.trace.rows]
        status = res.status
    return iterates, calls, status


def _prox_job(cfg: BenchConfig, name: str) -> dict:
    inst = build_instance(name, cfg.seed)
    opt, source, _ = prox_optimum(inst)
    budget = cfg.budget(inst.F.p)
    out = {"p": inst.F.p, "opt": opt, "opt_source": source, "budget": budget, "solvers": {}}
    traces, timings = {}, {}
    for solver in cfg.solvers:
        if solver not in PROX_SOLVERS:
            raise InputError(f"unknown prox solver {solver!r}; choose from {', '.join(PROX_SOLVERS)}")
        ts = time.perf_counter()
        iterates, calls, status = _run_prox(inst.F, solver, budget)
        rows = _prox_rows(inst.F, iterates, calls, opt)
        timings[solver] = time.perf_counter() - ts
        traces[solver] = _csv(PROX_TRACE_HEADER, rows)
        c = np.array([r[1] for r in rows], dtype=float)
        gp = np.minimum.accumulate(np.array([r[6] for r in rows]))
        out["solvers"][solver] = {
            "calls_to_gap": {_thr_key(t): _first_calls(c, gp, t) for t in THRESHOLDS},
            "final_gap_naive": float(min(r[5] for r in rows)),
            "final_gap_pava": float(gp[-1]),
            "final_dual_subopt": float(rows[-1][7]),
            "oracle_calls": int(c[-1]),
            "iterations": len(rows),
            "status": status,
        }
    return {"name": name, "summary": out, "traces": traces, "spec": inst.spec, "timings": timings}


def run_prox_bench(cfg: BenchConfig) -> dict:
    """Minimum-norm point against both conditional-gradient variants on ``f(w) + |w|^2 / 2``."""
    return _emit(cfg, "prox", _run_jobs(cfg, _prox_job))
