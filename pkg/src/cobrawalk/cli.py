"""Command-line entry point.

Exit codes: 0 success / property verified, 1 property violated, 2 usage
error, 3 too many censored trials.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import exact, experiments, graphs, process, spectral
from .graphs import GraphError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_CENSORED = 0, 1, 2, 3
VERIFY_TOL = 1e-9


class UsageError(Exception):
    pass


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def _config_line(args) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    cfg["log_base"] = experiments.LOG_BASE
    return "# config " + json.dumps(cfg, sort_keys=True, default=str)


def _load(spec: str) -> graphs.Graph:
    return graphs.resolve_graph(spec)


def _branching(args) -> process.BranchingSpec:
    if getattr(args, "rho", None) is not None:
        return process.BranchingSpec.fractional(args.rho)
    return process.BranchingSpec.integer(args.k)


def _fmt(x: float) -> str:
    s = f"{x:.9f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def _check_connected(g, warn_bipartite=True):
    if not graphs.is_connected(g):
        raise UsageError("graph is disconnected; the processes need a connected graph")
    if warn_bipartite and graphs.is_bipartite(g):
        print("warning: bipartite: theorems do not apply", file=sys.stderr)


# -- generate -------------------------------------------------------------------

def cmd_generate(args) -> int:
    kind = args.kind
    if kind == "complete":
        g = graphs.gen_complete(_need(args.n, "-n"))
    elif kind == "cycle":
        g = graphs.gen_cycle(_need(args.n, "-n"))
    elif kind == "hypercube":
        g = graphs.gen_hypercube(_need(args.d, "-d"))
    elif kind == "petersen":
        g = graphs.gen_petersen()
    else:
        g = graphs.gen_random_regular(_need(args.n, "-n"), _need(args.r, "-r"), args.seed,
                                      max_restarts=args.max_restarts)
    with _open_out(args.output) as fh:
        graphs.write_edge_list(g, fh)
    info = sys.stderr if args.output in (None, "-") else sys.stdout
    print(_config_line(args), file=info)
    print(f"n={g.n}\nr={g.r}\nconnected={str(graphs.is_connected(g)).lower()}\n"
          f"bipartite={str(graphs.is_bipartite(g)).lower()}", file=info)
    return EXIT_OK


def _need(value, flag):
    if value is None:
        raise UsageError(f"{flag} is required for this generator")
    return value


# -- spectral -------------------------------------------------------------------

def cmd_spectral(args) -> int:
    g = _load(args.graph)
    _check_connected(g)
    s = spectral.lambda_max(g, args.mode, seed=args.seed)
    print(_config_line(args))
    print(f"n={g.n}\nr={g.r}\nlambda={_fmt(s.lam)}\ngap={_fmt(s.gap)}\n"
          f"method={s.method}\nresidual={s.residual:.3e}\nseed={args.seed}")
    return EXIT_OK


# -- simulate -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    g = _load(args.graph)
    _check_connected(g)
    b = _branching(args)
    max_steps = args.max_steps
    if max_steps is None:
        lam = spectral.lambda_max(g).lam
        if lam >= 1.0:
            raise UsageError("lambda = 1 (bipartite graph): pass --max-steps explicitly")
        max_steps = process.default_max_steps(g.n, lam)
    if max_steps < 1:
        raise UsageError("--max-steps must be positive")
    start = args.start if args.start is not None else 0
    spec = experiments.ExperimentSpec(
        g, args.process, b, start_policy="all" if args.all_starts else "fixed", start=start,
        trials=args.trials, max_steps=max_steps, seed=args.seed,
        count_start=args.count_start, workers=args.workers)
    records = experiments.run_trials(spec, g)
    with _open_out(args.output) as fh:
        for rec in records:
            fh.write(rec.to_json(hitting=not args.no_hitting,
                                 trajectory=not args.no_trajectory) + "\n")
    summ = experiments.summarize(records)
    print(_config_line(args), file=sys.stderr)
    print(json.dumps({"summary": summ.as_dict(), "max_steps": max_steps}, sort_keys=True),
          file=sys.stderr)
    try:
        experiments.check_censoring(summ, args.censor_limit)
    except experiments.CensoringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CENSORED
    return EXIT_OK


# -- verify ---------------------------------------------------------------------

def _random_subset_masks(n, count, rng, must_contain=None):
    """Random subsets with uniformly random size (>= 1), as a boolean matrix."""
    masks = np.zeros((count, n), dtype=bool)
    for i in range(count):
        size = int(rng.integers(1, n + 1))
        if must_contain is None:
            masks[i, rng.choice(n, size, replace=False)] = True
        else:
            others = np.delete(np.arange(n), must_contain)
            masks[i, must_contain] = True
            masks[i, rng.choice(others, size - 1, replace=False)] = True
    return masks


def _all_masks(n):
    return ((np.arange(1, 1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)


def cmd_verify_duality(args) -> int:
    g = _load(args.graph)
    _check_connected(g, warn_bipartite=False)
    if g.n > exact.MAX_COBRA_KERNEL_N:
        raise exact.CapExceeded(
            f"duality check enumerates COBRA sets and is capped at n <= "
            f"{exact.MAX_COBRA_KERNEL_N}, got n={g.n}")
    if args.pairs is not None:
        rng = graphs.make_rng(args.seed)
        pairs = []
        for _ in range(args.pairs):
            v = int(rng.integers(g.n))
            size = int(rng.integers(1, args.max_c_size + 1))
            others = np.delete(np.arange(g.n), v)
            pairs.append((sum(1 << int(x) for x in rng.choice(others, size, replace=False)), v))
    else:
        pairs = [(sum(1 << x for x in c), v) for v in range(g.n)
                 for size in range(1, args.max_c_size + 1)
                 for c in itertools.combinations(range(g.n), size)]
    results = exact.duality_sweep(g, pairs, args.t_max, args.k)
    if args.csv:
        with open(args.csv, "w", newline="\n") as fh:
            fh.write("c,v,t,cobra_survival,bips_avoidance,abs_diff\n")
            for c, v, _ in results:
                for t, a, b, d in exact.duality_table(g, c, v, args.t_max, args.k):
                    fh.write(f"{c},{v},{t},{a!r},{b!r},{d!r}\n")
    worst = max(results, key=lambda x: x[2])
    print(_config_line(args))
    print(f"pairs={len(results)}\nt_max={args.t_max}\nmax_deviation={worst[2]:.3e}")
    if worst[2] > VERIFY_TOL:
        c = sorted(graphs.VertexSet.from_bits(g.n, worst[0]))
        print(f"violation: C={c} v={worst[1]} deviation={worst[2]:.3e}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_verify_growth(args) -> int:
    g = _load(args.graph)
    _check_connected(g, warn_bipartite=False)
    b = _branching(args)
    lam = spectral.lambda_max(g).lam
    worst = (math.inf, None, None)
    rng = graphs.make_rng(args.seed)
    sources = range(g.n) if args.exhaustive else [args.source]
    for v in sources:
        if args.exhaustive:
            if g.n > exact.MAX_EXACT_N:
                raise exact.CapExceeded(f"exhaustive enumeration capped at n <= {exact.MAX_EXACT_N}")
            masks = _all_masks(g.n)
            masks = masks[masks[:, v]]
        else:
            masks = _random_subset_masks(g.n, args.samples, rng, must_contain=v)
        got = exact.expected_growth_table(g, masks, v, b)
        sizes = masks.sum(axis=1)
        bound = np.array([exact.growth_bound(int(s), g.n, lam, b) for s in sizes])
        slack = got - bound
        i = int(np.argmin(slack))
        if slack[i] < worst[0]:
            worst = (float(slack[i]), v, np.flatnonzero(masks[i]).tolist())
    print(_config_line(args))
    print(f"lambda={_fmt(lam)}\nworst_slack={worst[0]:.6e}")
    if worst[0] < -VERIFY_TOL:
        print(f"violation: v={worst[1]} A={worst[2]}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_verify_norm(args) -> int:
    g = _load(args.graph)
    _check_connected(g, warn_bipartite=False)
    lam = spectral.lambda_max(g).lam
    if args.exhaustive:
        if g.n > exact.MAX_EXACT_N:
            raise exact.CapExceeded(f"exhaustive enumeration capped at n <= {exact.MAX_EXACT_N}")
        masks = _all_masks(g.n)
    else:
        masks = _random_subset_masks(g.n, args.samples, graphs.make_rng(args.seed))
    lhs, rhs = spectral.projection_norm_table(g, masks, lam)
    slack = rhs - lhs
    i = int(np.argmin(slack))
    print(_config_line(args))
    print(f"lambda={_fmt(lam)}\nsets={len(masks)}\nworst_slack={slack[i]:.6e}")
    if slack[i] < -VERIFY_TOL:
        print(f"violation: A={np.flatnonzero(masks[i]).tolist()}")
        return EXIT_VIOLATION
    return EXIT_OK


# -- experiment -----------------------------------------------------------------

def _apply_spec_file(args):
    if not getattr(args, "spec_file", None):
        return
    with open(args.spec_file) as fh:
        values = experiments.parse_spec_file(fh.read())
    for key, raw in values.items():
        if not hasattr(args, key):
            raise UsageError(f"unknown key {key!r} in spec file")
        current = getattr(args, key)
        if key == "sizes":
            value = raw
        elif isinstance(current, bool):
            value = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        setattr(args, key, value)


def _write_experiment(args, text, meta):
    with _open_out(args.output) as fh:
        fh.write(text)
    meta_path = args.meta or (None if args.output in (None, "-") else args.output + ".meta.json")
    if meta_path:
        with open(meta_path, "w", newline="\n") as fh:
            fh.write(meta)
    else:
        sys.stderr.write(meta)


def cmd_experiment_scaling(args) -> int:
    _apply_spec_file(args)
    try:
        sizes = [int(s) for s in str(args.sizes).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    b = _branching(args)
    rows = experiments.scaling_study(sizes, args.r, b, args.trials, args.seed,
                                     process=args.process, workers=args.workers,
                                     censor_limit=args.censor_limit)
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    _write_experiment(args, experiments.rows_to_csv(rows, experiments.SCALING_COLUMNS),
                      experiments.metadata(**cfg, branching=b.describe()))
    return EXIT_OK


def cmd_experiment_phases(args) -> int:
    _apply_spec_file(args)
    rows, bounds, lam = experiments.phase_study(
        args.n, args.r, args.trials, args.seed, args.C, args.K, args.source,
        workers=args.workers, censor_limit=args.censor_limit)
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    meta = experiments.metadata(**cfg, **{"lambda": lam, "m": bounds.m,
                                          "phase1_threshold": bounds.phase1_threshold,
                                          "T1": bounds.T1, "T2": bounds.T2, "T3": bounds.T3})
    _write_experiment(args, experiments.rows_to_csv(rows, experiments.PHASE_COLUMNS), meta)
    violations = sum(1 for r in rows if False in (r["phase1_ok"], r["phase2_ok"], r["phase3_ok"]))
    if violations:
        print(f"violation: {violations} trial(s) exceeded a phase budget", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_branching(p):
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--k", type=_positive_int, default=2, help="integer branching factor")
    grp.add_argument("--rho", type=float, default=None,
                     help="fractional branching 1+rho (0 <= rho <= 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cobrawalk",
                                     description="COBRA walks and BIPS epidemics on regular graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a regular graph as an edge list")
    p.add_argument("--kind", required=True,
                   choices=["complete", "cycle", "hypercube", "petersen", "random-regular"])
    p.add_argument("-n", type=int)
    p.add_argument("-r", type=int)
    p.add_argument("-d", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-restarts", type=int, default=graphs.DEFAULT_MAX_RESTARTS)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("spectral", help="second-largest absolute walk eigenvalue")
    p.add_argument("--graph", required=True)
    p.add_argument("--mode", choices=["auto", "dense", "iterative"], default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("simulate", help="Monte Carlo trials as JSON lines")
    p.add_argument("process", choices=["cobra", "bips"])
    p.add_argument("--graph", required=True)
    p.add_argument("--start", "--source", dest="start", type=int, default=None)
    p.add_argument("--all-starts", action="store_true")
    _add_branching(p)
    p.add_argument("--trials", type=_positive_int, default=1)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-start", action="store_true",
                   help="count the start vertex as covered at round 0")
    p.add_argument("--no-hitting", action="store_true")
    p.add_argument("--no-trajectory", action="store_true")
    p.add_argument("--censor-limit", type=float, default=experiments.CENSOR_LIMIT)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check duality, growth and norm bounds")
    vsub = p.add_subparsers(dest="check", required=True)
    q = vsub.add_parser("duality")
    q.add_argument("--graph", required=True)
    q.add_argument("--t-max", type=int, default=6)
    q.add_argument("--pairs", type=_positive_int, default=None,
                   help="random (C, v) pairs; default is every C with |C| <= --max-c-size")
    q.add_argument("--max-c-size", type=_positive_int, default=3)
    q.add_argument("--k", type=_positive_int, default=2)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--csv", default=None, help="write survival curves")
    q.set_defaults(func=cmd_verify_duality)
    for name, func in (("growth", cmd_verify_growth), ("norm", cmd_verify_norm)):
        q = vsub.add_parser(name)
        q.add_argument("--graph", required=True)
        mode = q.add_mutually_exclusive_group(required=True)
        mode.add_argument("--exhaustive", action="store_true")
        mode.add_argument("--samples", type=_positive_int)
        q.add_argument("--seed", type=int, default=0)
        if name == "growth":
            _add_branching(q)
            q.add_argument("--source", type=int, default=0)
        q.set_defaults(func=func)

    p = sub.add_parser("experiment", help="scaling tables and phase traces as CSV")
    esub = p.add_subparsers(dest="study", required=True)
    q = esub.add_parser("scaling")
    q.add_argument("--sizes", default="1024,2048,4096")
    q.add_argument("--r", type=int, default=3)
    q.add_argument("--process", choices=["cobra", "bips"], default="cobra")
    _add_branching(q)
    q.add_argument("--trials", type=_positive_int, default=50)
    q.set_defaults(func=cmd_experiment_scaling)
    q2 = esub.add_parser("phases")
    q2.add_argument("--n", type=int, default=4096)
    q2.add_argument("--r", type=int, default=3)
    q2.add_argument("--trials", type=_positive_int, default=20)
    q2.add_argument("--C", type=float, default=3.0)
    q2.add_argument("--K", type=float, default=4000.0)
    q2.add_argument("--source", type=int, default=0)
    q2.set_defaults(func=cmd_experiment_phases)
    for q in (q, q2):
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--workers", type=_positive_int, default=1)
        q.add_argument("--censor-limit", type=float, default=experiments.CENSOR_LIMIT)
        q.add_argument("--spec-file", default=None, help="key=value file overriding flags")
        q.add_argument("-o", "--output", default="-")
        q.add_argument("--meta", default=None, help="metadata sidecar path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except experiments.CensoringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CENSORED
    except (UsageError, GraphError, exact.CapExceeded, spectral.SpectralError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
