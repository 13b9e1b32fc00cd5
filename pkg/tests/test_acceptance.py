"""Acceptance criteria, one test each; results are echoed in the pytest summary.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import math
import time

import numpy as np
import pytest

from cobrawalk import exact, experiments, graphs, process, spectral
from cobrawalk.cli import main
from cobrawalk.process import BranchingSpec

from conftest import ACCEPTANCE_RESULTS

K2 = BranchingSpec.integer(2)
TOL = 1e-9
SCALING_SIZES = [1024, 2048, 4096, 8192, 16384]


def report(name, ok, detail):
    ACCEPTANCE_RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print(ACCEPTANCE_RESULTS[-1])
    assert ok, detail


def small_fixtures():
    return [graphs.gen_complete(3), graphs.gen_complete(4), graphs.gen_complete(5),
            graphs.gen_cycle(5), graphs.gen_cycle(7), graphs.gen_hypercube(3)]


def _all_masks(n):
    return ((np.arange(1, 1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)


@pytest.fixture(scope="module")
def scaling_graphs():
    out = {}
    for n in SCALING_SIZES:
        g = graphs.gen_random_regular(n, 3, seed=n)
        out[n] = (g, spectral.lambda_max(g).lam)
    return out


def test_1_duality_exact_small_fixtures():
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    for g in small_fixtures():
        pairs = [(sum(1 << x for x in c), v) for v in range(g.n) for size in (1, 2, 3)
                 for c in itertools.combinations(range(g.n), size)]
        for _, _, dev in exact.duality_sweep(g, pairs, 6, 2):
            worst = max(worst, dev)
            count += 1
    elapsed = time.perf_counter() - t0
    report("1 duality exact (n<=8 fixtures, |C|<=3, t<=6)", worst <= TOL and elapsed < 60,
           f"{count} (C,v) pairs, max deviation {worst:.2e}, {elapsed:.1f}s")


def test_2_duality_petersen_and_monte_carlo(petersen):
    rng = graphs.make_rng(2024)
    pairs = []
    for _ in range(100):
        v = int(rng.integers(10))
        size = int(rng.integers(1, 10))
        others = np.delete(np.arange(10), v)
        pairs.append((sum(1 << int(x) for x in rng.choice(others, size, replace=False)), v))
    worst = max(dev for _, _, dev in exact.duality_sweep(petersen, pairs, 5, 2))

    c, v, t = (1 << 1) | (1 << 7), 0, 3
    exact_val = exact.cobra_hitting_survival(petersen, c, v, t)[t]
    trials = 1_000_000
    cobra_mc = process.mc_hitting_survival(petersen, c, v, t, K2, trials, seed=11)[t]
    bips_mc = process.mc_avoidance(petersen, v, c, t, K2, trials, seed=12)[t]
    se = math.sqrt(exact_val * (1 - exact_val) / trials)
    z_cobra = abs(cobra_mc - exact_val) / se
    z_bips = abs(bips_mc - exact_val) / se
    ok = worst <= TOL and z_cobra <= 4 and z_bips <= 4
    report("2 duality Petersen (100 pairs, t<=5) + 1e6-trial Monte Carlo", ok,
           f"max deviation {worst:.2e}; exact {exact_val:.6f}, COBRA MC z={z_cobra:.2f}, "
           f"BIPS MC z={z_bips:.2f}")


def test_3_growth_bound():
    t0 = time.perf_counter()
    fixtures = small_fixtures() + [graphs.gen_petersen(), graphs.gen_cycle(9),
                                   graphs.gen_complete(10), graphs.gen_random_regular(10, 3, 1),
                                   graphs.gen_random_regular(10, 4, 2)]
    branchings = [K2] + [BranchingSpec.fractional(r) for r in (0.25, 0.5, 1.0)]
    worst, checked = math.inf, 0
    for g in fixtures:
        lam = spectral.lambda_max(g).lam
        masks = _all_masks(g.n)
        sizes = masks.sum(axis=1)
        for b in branchings:
            bound = np.array([np.nan] + [exact.growth_bound(s, g.n, lam, b)
                                         for s in range(1, g.n + 1)])
            for v in range(g.n):
                sub = masks[:, v]
                got = exact.expected_growth_table(g, masks[sub], v, b)
                worst = min(worst, float((got - bound[sizes[sub]]).min()))
                checked += int(sub.sum())
    g = graphs.gen_random_regular(100, 3, seed=7)
    lam = spectral.lambda_max(g).lam
    rng = graphs.make_rng(8)
    for _ in range(10_000):
        v = int(rng.integers(100))
        mask = rng.random(100) < rng.random()
        mask[v] = True
        for b in branchings[:2]:
            got = exact.expected_growth_exact(g, mask, v, b)
            worst = min(worst, got - exact.growth_bound(int(mask.sum()), 100, lam, b))
        checked += 2
    elapsed = time.perf_counter() - t0
    report("3 growth lower bound (exhaustive n<=10 + 1e4 random sets, n=100)",
           worst >= -TOL and elapsed < 120,
           f"{checked} checks, min slack {worst:.3e}, {elapsed:.1f}s")


def test_4_projection_norm_inequality():
    fixtures = [graphs.gen_complete(4), graphs.gen_petersen(), graphs.gen_random_regular(12, 3, 3),
                graphs.gen_cycle(11), graphs.gen_hypercube(3), graphs.gen_complete(12)]
    worst, checked = math.inf, 0
    for g in fixtures:
        lam = spectral.lambda_max(g).lam
        lhs, rhs = spectral.projection_norm_table(g, _all_masks(g.n), lam)
        worst = min(worst, float((rhs - lhs).min()))
        checked += lhs.size
    g = graphs.gen_random_regular(500, 3, seed=5)
    lam = spectral.lambda_max(g).lam
    rng = graphs.make_rng(6)
    masks = rng.random((1000, 500)) < rng.random((1000, 1))
    masks[:, 0] = True
    lhs, rhs = spectral.projection_norm_table(g, masks, lam)
    worst = min(worst, float((rhs - lhs).min()))
    checked += lhs.size
    report("4 spectral norm inequality (exhaustive n<=12 + 1e3 sets, n=500)", worst >= -TOL,
           f"{checked} sets, min slack {worst:.3e}")


def test_5_spectral_correctness():
    kn = max(abs(spectral.lambda_max(graphs.gen_complete(n)).lam - 1 / (n - 1))
             for n in range(3, 51))
    pet = abs(spectral.lambda_max(graphs.gen_petersen()).lam - 2 / 3)
    fixtures = ([graphs.gen_complete(n) for n in (3, 10, 50, 200)]
                + [graphs.gen_cycle(n) for n in (5, 8, 51, 100, 199)]
                + [graphs.gen_hypercube(d) for d in range(2, 8)]
                + [graphs.gen_petersen()]
                + [graphs.gen_random_regular(n, r, s) for n, r, s in
                   ((12, 3, 3), (100, 3, 1), (200, 3, 2), (200, 4, 3), (150, 6, 4))])
    agree = max(abs(spectral.lambda_max(g, "dense").lam - spectral.lambda_max(g, "iterative").lam)
                for g in fixtures)
    ok = kn <= TOL and pet <= TOL and agree <= 1e-6
    report("5 spectral correctness", ok,
           f"K_n err {kn:.1e}, Petersen err {pet:.1e}, dense/iterative gap {agree:.1e} "
           f"over {len(fixtures)} fixtures")


def test_6_cover_time_scaling(scaling_graphs):
    rows = []
    for n, (g, lam) in scaling_graphs.items():
        spec = experiments.ExperimentSpec(g, "cobra", K2, trials=50, seed=6,
                                          max_steps=process.default_max_steps(n, lam))
        summ = experiments.summarize(experiments.run_trials(spec, g))
        rows.append((n, summ.censored, summ.median / math.log(n)))
    censored = sum(r[1] for r in rows)
    ratios = [r[2] for r in rows]
    spread = max(ratios) / min(ratios)
    report("6 cover-time scaling (k=2, 50 trials, n=2^10..2^14)", censored == 0 and spread <= 2,
           f"censored {censored}, median cov/ln n = "
           + ", ".join(f"{n}:{x:.2f}" for n, _, x in rows) + f", max/min {spread:.3f}")


def test_7_bips_phase_bounds(scaling_graphs):
    violations, censored, total = 0, 0, 0
    worst = {"T1": 0.0, "T2": 0.0, "T3": 0.0}
    for n, (g, lam) in scaling_graphs.items():
        bounds = experiments.phase_bounds(n, lam, C=3, K=4000)
        spec = experiments.ExperimentSpec(g, "bips", K2, trials=20, seed=7,
                                          max_steps=process.default_max_steps(n, lam))
        for rec in experiments.run_trials(spec, g):
            rep = experiments.phase_trace(rec, bounds)
            total += 1
            censored += rec.censored
            violations += rep.violated
            if not rec.censored:
                worst["T1"] = max(worst["T1"], rep.t_a / bounds.T1)
                worst["T2"] = max(worst["T2"], (rep.t_b - rep.t_a) / bounds.T2)
                worst["T3"] = max(worst["T3"], (rep.t_c - rep.t_b) / bounds.T3)
    report("7 BIPS phase bounds (C=3, K=4000)", violations == 0 and censored == 0,
           f"{total} trials, {violations} violations, {censored} censored; worst usage "
           + ", ".join(f"{k} {v:.3f}" for k, v in worst.items()))


def test_8_fractional_branching():
    g = graphs.gen_random_regular(4096, 3, seed=4096)
    lam = spectral.lambda_max(g).lam
    max_steps = process.default_max_steps(g.n, lam)
    medians, censored = [], 0
    for rho in (0.25, 0.5, 1.0):
        spec = experiments.ExperimentSpec(g, "cobra", BranchingSpec.fractional(rho), trials=50,
                                          seed=8, max_steps=max_steps)
        summ = experiments.summarize(experiments.run_trials(spec, g))
        censored += summ.censored
        medians.append(summ.median)
    monotone = all(a >= b for a, b in zip(medians, medians[1:]))
    c_const = max(medians) / math.log(g.n)

    identity = 0.0
    for h in (graphs.gen_petersen(), graphs.gen_random_regular(50, 3, 1), graphs.gen_complete(7)):
        rng = graphs.make_rng(h.n)
        for _ in range(200):
            mask = rng.random(h.n) < rng.random()
            mask[0] = True
            p_frac = exact.join_probabilities(h, mask, BranchingSpec.fractional(1.0))
            p_k2 = exact.join_probabilities(h, mask, K2)
            identity = max(identity, float(np.abs(p_frac - p_k2).max()),
                           abs(exact.expected_growth_exact(h, mask, 0, BranchingSpec.fractional(1.0))
                               - exact.expected_growth_exact(h, mask, 0, K2)))
    ok = censored == 0 and monotone and identity <= 1e-12
    report("8 fractional branching (n=4096, rho=0.25/0.5/1)", ok,
           f"medians {medians}, censored {censored}, max median/ln n = {c_const:.2f}, "
           f"rho=1 vs k=2 gap {identity:.1e}")


def _run_capture(capsys, argv):
    code = main(argv)
    out, _ = capsys.readouterr()
    return code, out


def test_9_cli_determinism(tmp_path, capsys):
    graph_file = tmp_path / "g.txt"
    commands = {
        "generate": (["generate", "--kind", "random-regular", "-n", "200", "-r", "3",
                      "--seed", "3", "-o", "{d}/gen.txt"], "gen.txt"),
        "spectral": (["spectral", "--graph", str(graph_file)], None),
        "simulate-cobra": (["simulate", "cobra", "--graph", str(graph_file), "--start", "0",
                            "--k", "2", "--trials", "20", "--seed", "7", "-o", "{d}/c.jsonl"],
                           "c.jsonl"),
        "simulate-bips": (["simulate", "bips", "--graph", str(graph_file), "--source", "0",
                           "--rho", "0.5", "--trials", "10", "-o", "{d}/b.jsonl"], "b.jsonl"),
        "verify-duality": (["verify", "duality", "--graph", "petersen", "--t-max", "5",
                            "--pairs", "20", "--seed", "1", "--csv", "{d}/d.csv"], "d.csv"),
        "verify-growth": (["verify", "growth", "--graph", "petersen", "--exhaustive"], None),
        "verify-norm": (["verify", "norm", "--graph", "petersen", "--exhaustive"], None),
        "experiment-scaling": (["experiment", "scaling", "--r", "3", "--sizes", "256,512",
                                "--trials", "10", "--seed", "9", "-o", "{d}/s.csv"], "s.csv"),
        "experiment-phases": (["experiment", "phases", "--n", "512", "--r", "3", "--trials", "5",
                               "--C", "3", "-o", "{d}/p.csv"], "p.csv"),
    }
    graphs.save_graph(graphs.gen_random_regular(200, 3, 3), graph_file)
    mismatched = []
    for name, (argv, fname) in commands.items():
        outputs = []
        for rep in ("a", "b"):
            d = tmp_path / rep
            d.mkdir(exist_ok=True)
            code, out = _run_capture(capsys, [a.replace("{d}", str(d)) for a in argv])
            assert code == 0, (name, code)
            blob = out.encode()
            if fname:
                blob += (d / fname).read_bytes()
                meta = d / (fname + ".meta.json")
                if meta.exists():
                    blob += meta.read_bytes().replace(str(d).encode(), b"<dir>")
            outputs.append(blob.replace(str(d).encode(), b"<dir>"))
        if outputs[0] != outputs[1]:
            mismatched.append(name)
    report("9 determinism (CLI reruns byte-identical)", not mismatched,
           f"{len(commands)} commands, mismatched: {mismatched or 'none'}")
