"""Batch trials, summary statistics, scaling tables and BIPS phase traces.

All logarithms are natural. Every trial draws from its own Philox stream
seeded by ``(master seed, trial index, start vertex)``, so results do not
depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .graphs import Graph, gen_random_regular, make_rng, resolve_graph
from .process import BranchingSpec, TrialRecord, bips_run, cobra_run, default_max_steps
from .spectral import lambda_max

LOG_BASE = "e"
CENSOR_LIMIT = 0.01


class CensoringError(RuntimeError):
    """Too many trials hit the step budget."""


@dataclass
class ExperimentSpec:
    graph: object
    process: str = "cobra"
    branching: BranchingSpec = field(default_factory=lambda: BranchingSpec.integer(2))
    start_policy: str = "fixed"
    start: int = 0
    sample_size: int = 1
    trials: int = 1
    max_steps: Optional[int] = None
    seed: int = 0
    count_start: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.process not in ("cobra", "bips"):
            raise ValueError(f"unknown process {self.process!r}")
        if self.start_policy not in ("fixed", "all", "sample"):
            raise ValueError(f"unknown start policy {self.start_policy!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def resolve_graph(self) -> Graph:
        return self.graph if isinstance(self.graph, Graph) else resolve_graph(str(self.graph))

    def starts(self, n: int) -> list[int]:
        if self.start_policy == "fixed":
            if not 0 <= self.start < n:
                raise ValueError(f"start vertex {self.start} out of range for n={n}")
            return [self.start]
        if self.start_policy == "all":
            return list(range(n))
        if not 1 <= self.sample_size <= n:
            raise ValueError(f"sample size {self.sample_size} out of range for n={n}")
        rng = make_rng([self.seed, 0x5A4D])
        return sorted(int(u) for u in rng.choice(n, size=self.sample_size, replace=False))


def _one_trial(args):
    g, process, b, start, trial, seed, max_steps, count_start = args
    s = [seed, trial, start]
    if process == "cobra":
        return cobra_run(g, start, b, max_steps, s, count_start=count_start, trial=trial)
    return bips_run(g, start, b, max_steps, s, trial=trial)


def run_trials(spec: ExperimentSpec, graph: Optional[Graph] = None) -> list[TrialRecord]:
    """All trials of ``spec``, sorted by (start, trial index)."""
    g = graph if graph is not None else spec.resolve_graph()
    max_steps = spec.max_steps
    if max_steps is None:
        max_steps = default_max_steps(g.n, lambda_max(g).lam)
    jobs = [(g, spec.process, spec.branching, u, i, spec.seed, max_steps, spec.count_start)
            for u in spec.starts(g.n) for i in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(_one_trial, jobs, chunksize=8))
    else:
        records = [_one_trial(j) for j in jobs]
    records.sort(key=lambda rec: (rec.start, rec.trial))
    return records


@dataclass(frozen=True)
class Summary:
    count: int
    censored: int
    mean: float
    median: float
    q05: float
    q95: float
    stderr: float

    @property
    def any_censored(self) -> bool:
        return self.censored > 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["any_censored"] = self.any_censored
        return d


def summarize(records: Iterable) -> Summary:
    """Order statistics over uncensored times; censored runs are only counted.

    Accepts TrialRecords or raw times (``None`` meaning censored).
    """
    times = [rec.time if isinstance(rec, TrialRecord) else rec for rec in records]
    if not times:
        raise ValueError("cannot summarise an empty set of records")
    done = np.array([t for t in times if t is not None], dtype=float)
    censored = len(times) - done.size
    if done.size == 0:
        nan = float("nan")
        return Summary(0, censored, nan, nan, nan, nan, nan)
    se = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else 0.0
    q05, med, q95 = np.quantile(done, [0.05, 0.5, 0.95])
    return Summary(int(done.size), censored, float(done.mean()), float(med),
                   float(q05), float(q95), se)


def check_censoring(summary: Summary, limit: float = CENSOR_LIMIT) -> None:
    total = summary.count + summary.censored
    if summary.censored > limit * total:
        raise CensoringError(
            f"{summary.censored}/{total} trials censored (limit {limit:.0%}); raise max_steps")


# -- phase bounds for the BIPS infection ------------------------------------

@dataclass(frozen=True)
class PhaseBounds:
    n: int
    lam: float
    C: float
    K: float
    m: float
    T1: float
    T2: float
    T3: float

    @property
    def phase1_threshold(self) -> float:
        # the small-set phase needs m <= n/2
        return min(self.m, self.n / 2)


def phase_bounds(n: int, lam: float, C: float = 3.0, K: float = 4000.0) -> PhaseBounds:
    """Round budgets of the three infection phases.

    m = K ln n/(1-lam)^2 is the small-phase target size;
    T1 = 13m/(1-lam) + 24 C ln n/(1-lam)^2, T2 = 23 ln n/(1-lam),
    T3 = 8 ln n/(1-lam).
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"phase bounds need 0 < lambda < 1, got {lam}")
    gap = 1.0 - lam
    ln = math.log(n)
    m = K * ln / gap ** 2
    return PhaseBounds(n, lam, C, K, m,
                       T1=13.0 * m / gap + 24.0 * C * ln / gap ** 2,
                       T2=23.0 * ln / gap,
                       T3=8.0 * ln / gap)


@dataclass(frozen=True)
class PhaseReport:
    t_a: Optional[int]
    t_b: Optional[int]
    t_c: Optional[int]
    phase1_ok: Optional[bool]
    phase2_ok: Optional[bool]
    phase3_ok: Optional[bool]

    @property
    def violated(self) -> bool:
        return False in (self.phase1_ok, self.phase2_ok, self.phase3_ok)


def _first(sizes: np.ndarray, cond) -> Optional[int]:
    hits = np.flatnonzero(cond(sizes))
    return int(hits[0]) if hits.size else None


def phase_trace(record: TrialRecord, bounds: PhaseBounds) -> PhaseReport:
    """Milestones of a BIPS trajectory checked against the phase budgets.

    t_a: first round with |A_t| above the small-phase threshold; t_b: first
    round with |A_t| >= 0.9 n; t_c: infection time. Unreached milestones are
    ``None`` and so are the checks that depend on them.
    """
    if record.size_trajectory is None:
        raise ValueError("phase trace needs a size trajectory")
    sizes = np.asarray(record.size_trajectory)
    n = record.n
    t_a = _first(sizes, lambda s: s > bounds.phase1_threshold)
    t_b = _first(sizes, lambda s: s >= 0.9 * n)
    t_c = record.time
    ok1 = None if t_a is None else t_a <= bounds.T1
    ok2 = None if t_a is None or t_b is None else t_b - t_a <= bounds.T2
    ok3 = None if t_b is None or t_c is None else t_c - t_b <= bounds.T3
    return PhaseReport(t_a, t_b, t_c, ok1, ok2, ok3)


# -- studies ------------------------------------------------------------------

SCALING_COLUMNS = ["n", "r", "lambda", "gap", "trials", "censored", "median", "mean",
                   "q05", "q95", "ln_n", "median_over_ln_n", "ratio"]


def scaling_study(sizes: Sequence[int], r: int, branching: BranchingSpec, trials: int,
                  seed: int = 0, process: str = "cobra", workers: int = 1,
                  censor_limit: float = CENSOR_LIMIT) -> list[dict]:
    """One row per n: a fresh random r-regular graph, its lambda and time statistics.

    ``ratio`` is median * (1 - lambda)^3 / ln n.
    """
    rows = []
    for n in sizes:
        g = gen_random_regular(n, r, seed)
        lam = lambda_max(g).lam
        spec = ExperimentSpec(g, process, branching, trials=trials, seed=seed,
                              max_steps=default_max_steps(n, lam), workers=workers)
        summ = summarize(run_trials(spec, g))
        check_censoring(summ, censor_limit)
        ln = math.log(n)
        rows.append({
            "n": n, "r": r, "lambda": lam, "gap": 1.0 - lam, "trials": trials,
            "censored": summ.censored, "median": summ.median, "mean": summ.mean,
            "q05": summ.q05, "q95": summ.q95, "ln_n": ln,
            "median_over_ln_n": summ.median / ln,
            "ratio": summ.median * (1.0 - lam) ** 3 / ln,
        })
    return rows


PHASE_COLUMNS = ["trial", "source", "infec", "t_a", "t_b", "t_c", "T1", "T2", "T3",
                 "phase1_ok", "phase2_ok", "phase3_ok"]


def phase_study(n: int, r: int, trials: int, seed: int = 0, C: float = 3.0,
                K: float = 4000.0, source: int = 0, branching: Optional[BranchingSpec] = None,
                workers: int = 1, censor_limit: float = CENSOR_LIMIT):
    """Per-trial phase reports for BIPS on a random r-regular graph.

    Returns ``(rows, bounds, lam)``.
    """
    g = gen_random_regular(n, r, seed)
    lam = lambda_max(g).lam
    bounds = phase_bounds(n, lam, C, K)
    spec = ExperimentSpec(g, "bips", branching or BranchingSpec.integer(2), start=source,
                          trials=trials, seed=seed, max_steps=default_max_steps(n, lam),
                          workers=workers)
    records = run_trials(spec, g)
    check_censoring(summarize(records), censor_limit)
    rows = []
    for rec in records:
        rep = phase_trace(rec, bounds)
        rows.append({"trial": rec.trial, "source": rec.start, "infec": rec.time,
                     "t_a": rep.t_a, "t_b": rep.t_b, "t_c": rep.t_c,
                     "T1": bounds.T1, "T2": bounds.T2, "T3": bounds.T3,
                     "phase1_ok": rep.phase1_ok, "phase2_ok": rep.phase2_ok,
                     "phase3_ok": rep.phase3_ok})
    return rows, bounds, lam


# -- output -------------------------------------------------------------------

def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def metadata(**config) -> str:
    """JSON sidecar text; always records the log base."""
    config.setdefault("log_base", LOG_BASE)
    return json.dumps(config, sort_keys=True, indent=2, default=str) + "\n"


def parse_spec_file(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
