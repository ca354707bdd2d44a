"""Command-line entry point: ``subq <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, graph, maxds, prox, sfm
from .core import SubqError, format_subset, parse_subset
from .zoo import load_spec


def _read_vector(path, p=None) -> np.ndarray:
    v = np.loadtxt(path, dtype=float, ndmin=1)
    if p is not None and v.shape != (p,):
        raise SystemExit(f"error: {path} holds {v.size} values, expected {p}")
    return v


def _write_vector(path: Path, v):
    path.write_text("".join(f"{x!r}\n" for x in np.asarray(v, dtype=float).tolist()))


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_bench(args):
    suites = bench.SUITES if args.suite == "all" else tuple(args.suite.split(","))
    default = bench.PROX_SOLVERS if args.prox else bench.DEFAULT_SFM_SOLVERS
    solvers = tuple(args.solvers.split(",")) if args.solvers else default
    cfg = bench.BenchConfig(suites=suites, seed=args.seed, solvers=solvers, max_oracle=args.max_oracle,
                            sweeps=args.sweeps, out=args.out, jobs=args.jobs)
    report = bench.run_prox_bench(cfg) if args.prox else bench.run_sfm_bench(cfg)
    for name, inst in report["instances"].items():
        for solver, row in inst["solvers"].items():
            if "skipped" in row:
                print(f"{name:18s} {solver:10s} skipped ({row['skipped']})")
                continue
            gap = row.get("final_gap", row.get("final_gap_pava"))
            print(f"{name:18s} {solver:10s} calls={row['oracle_calls']:>9d} gap={gap:.3e} "
                  f"calls@1e-6={row['calls_to_gap']['1e-06']}")


def cmd_minimize(args):
    F = load_spec(args.spec)
    res = sfm.minimize(F, args.algo, budget=args.budget, steps=args.steps)
    _print_json(res.to_json())


def cmd_prox(args):
    F = load_spec(args.spec)
    z = _read_vector(args.z, F.p) if args.z else np.zeros(F.p)
    problem = prox.SeparableProblem.quadratic(z)
    if args.polyhedron == "absP":
        res = prox.prox_abs(F, problem)
    else:
        res = prox.prox_quadratic(F, z, method=args.method)
        if args.polyhedron == "P":
            res = prox.transfer_to_P(F, res, problem)
        elif args.polyhedron == "P+":
            res = prox.transfer_to_Pplus(F, res, problem)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_vector(out / "w.csv", res.w)
    _write_vector(out / "s.csv", res.s)
    report = {"gap": res.gap, "polyhedron": args.polyhedron, "method": args.method,
              **{k: v for k, v in res.info.items() if isinstance(v, (int, float, str))}}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _print_json(report)


def cmd_isotonic(args):
    z = _read_vector(args.z)
    pairs = []
    if args.constraints:
        for line in Path(args.constraints).read_text().splitlines():
            if line.strip():
                i, j = line.split()
                pairs.append((int(i) - 1, int(j) - 1))
    w = prox.isotonic_general(z, pairs) if pairs else z
    print("".join(f"{x!r}\n" for x in w.tolist()), end="")


def cmd_maximize(args):
    F = load_spec(args.spec)
    if args.algo == "greedy":
        if args.k is None:
            raise SystemExit("error: --k is required for greedy")
        res = maxds.greedy_max_cardinality(F, args.k)
    else:
        start = parse_subset(args.start, F.p) if args.start else None
        res = maxds.local_search_max(F, start, args.budget)
    _print_json(res.to_json())


def cmd_ds_min(args):
    F = load_spec(args.f)
    G = load_spec(args.g)
    start = parse_subset(args.start, F.p) if args.start else None
    A, trace = maxds.ds_minimize(F, G, start, max_rounds=args.max_rounds)
    _print_json({"set": format_subset(A), "value": trace[-1], "trace": trace})


def cmd_generate(args):
    if args.kind in bench.SUITES:
        spec = bench.build_instance(args.kind, args.seed).spec
        if "function" not in spec:
            raise SystemExit(f"error: {args.kind} has no compact spec; use 'bench' to run it")
        spec = spec["function"]
    elif args.kind == "chain-cut":
        g = graph.chain(args.p)
        z = np.random.default_rng(args.seed).standard_normal(args.p)
        spec = bench._cut_spec(g, z)
    elif args.kind == "random-cover":
        cov = graph.random_cover(args.p, args.groups, args.seed)
        spec = {"type": "cover", "p": cov.p, "groups": [[i + 1 for i in g] for g in cov.groups],
                "weights": list(cov.weights)}
    else:
        raise SystemExit(f"error: unknown kind {args.kind!r}")
    text = json.dumps(spec, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subq", description="Submodular minimization, proximal and maximization tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run the solver comparison suite")
    b.add_argument("--suite", default="all", help="comma-separated instances or 'all'")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--solvers", default=None, help="comma-separated solver names")
    b.add_argument("--max-oracle", type=int, default=None, help="oracle calls per solver (default: sweeps * p)")
    b.add_argument("--sweeps", type=int, default=5000)
    b.add_argument("--out", default=None)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--prox", action="store_true", help="benchmark f(w) + |w|^2/2 instead of minimization")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("minimize", help="minimize a function given as a JSON spec")
    m.add_argument("--spec", required=True)
    m.add_argument("--algo", default="auto", choices=sfm.ALGORITHMS)
    m.add_argument("--budget", type=int, default=None)
    m.add_argument("--steps", type=int, default=None)
    m.set_defaults(func=cmd_minimize)

    p = sub.add_parser("prox", help="solve 1/2|w - z|^2 + f(w) and write w, s and a gap report")
    p.add_argument("--spec", required=True)
    p.add_argument("--z", default=None, help="file with one value per line (default: zeros)")
    p.add_argument("--method", default="mnp", choices=("mnp", "dc"))
    p.add_argument("--polyhedron", default="B", choices=("B", "P", "P+", "absP"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prox)

    i = sub.add_parser("isotonic", help="project onto {w_i >= w_j} for the given pairs")
    i.add_argument("--z", required=True)
    i.add_argument("--constraints", default=None, help="file of 'i j' lines (1-based)")
    i.set_defaults(func=cmd_isotonic)

    x = sub.add_parser("maximize", help="greedy or local-search maximization")
    x.add_argument("--spec", required=True)
    x.add_argument("--k", type=int, default=None)
    x.add_argument("--algo", default="greedy", choices=("greedy", "local"))
    x.add_argument("--start", default=None, help="comma-separated 1-based start set for local search")
    x.add_argument("--budget", type=int, default=10_000)
    x.set_defaults(func=cmd_maximize)

    d = sub.add_parser("ds-min", help="minimize F - G for submodular F and G")
    d.add_argument("--f", required=True)
    d.add_argument("--g", required=True)
    d.add_argument("--start", default=None)
    d.add_argument("--max-rounds", type=int, default=100)
    d.set_defaults(func=cmd_ds_min)

    g = sub.add_parser("generate", help="write a JSON function spec")
    g.add_argument("--kind", required=True, help="a suite name, chain-cut or random-cover")
    g.add_argument("--p", type=int, default=10)
    g.add_argument("--groups", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SubqError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
