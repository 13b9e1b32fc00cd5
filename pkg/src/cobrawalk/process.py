"""Monte Carlo simulation of the COBRA walk and the BIPS epidemic.

COBRA: every active vertex pushes to ``k`` neighbours drawn uniformly with
replacement; the pushed-to vertices form the next active set.
BIPS: every vertex other than the persistent source redraws ``k`` neighbours
each round and is infected iff it drew an infected one.

Fractional branching ``1 + rho`` means one mandatory draw plus a second,
independent draw with probability ``rho``, per active vertex (COBRA) or per
non-source vertex (BIPS).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .graphs import Graph, VertexSet, as_vertex_set, make_rng


@dataclass(frozen=True)
class BranchingSpec:
    kind: str = "integer"
    k: int = 2
    rho: float = 0.0

    def __post_init__(self):
        if self.kind == "integer":
            if int(self.k) != self.k or self.k < 1:
                raise ValueError(f"integer branching needs k >= 1, got {self.k}")
        elif self.kind == "fractional":
            if not 0.0 <= self.rho <= 1.0:
                raise ValueError(f"fractional branching needs 0 <= rho <= 1, got {self.rho}")
        else:
            raise ValueError(f"unknown branching kind {self.kind!r}")

    @classmethod
    def integer(cls, k: int) -> "BranchingSpec":
        return cls("integer", k=k)

    @classmethod
    def fractional(cls, rho: float) -> "BranchingSpec":
        return cls("fractional", k=1, rho=float(rho))

    def join_probability(self, p):
        """Probability that a vertex's draws hit a set it sees with probability ``p`` per draw."""
        p = np.asarray(p, dtype=float)
        if self.kind == "integer":
            return 1.0 - (1.0 - p) ** self.k
        return (1.0 + self.rho) * p - self.rho * p ** 2

    def describe(self) -> dict:
        if self.kind == "integer":
            return {"kind": "integer", "k": self.k}
        return {"kind": "fractional", "rho": self.rho}


def default_max_steps(n: int, lam: float) -> int:
    """``ceil(200 ln n / (1 - lam)^3)``; undefined for bipartite graphs."""
    if lam >= 1.0:
        raise ValueError("default step budget needs lambda < 1; pass max_steps explicitly")
    return math.ceil(200.0 * math.log(n) / (1.0 - lam) ** 3)


@dataclass
class TrialRecord:
    process: str
    graph: str
    n: int
    start: int
    branching: dict
    seed: list
    steps_run: int
    time: Optional[int]
    trial: int = 0
    hitting_times: Optional[list] = None
    size_trajectory: Optional[list] = None

    @property
    def censored(self) -> bool:
        return self.time is None

    def to_dict(self, hitting: bool = True, trajectory: bool = True) -> dict:
        d = asdict(self)
        d["censored"] = self.censored
        if not hitting:
            d.pop("hitting_times")
        if not trajectory:
            d.pop("size_trajectory")
        return d

    def to_json(self, hitting: bool = True, trajectory: bool = True) -> str:
        return json.dumps(self.to_dict(hitting, trajectory), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        d = dict(d)
        d.pop("censored", None)
        return cls(**d)


def _seed_list(seed) -> list:
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [int(seed)]


# -- single-trial simulation on index/mask arrays ---------------------------

def _draw_targets(adj: np.ndarray, idx: np.ndarray, b: BranchingSpec, rng) -> np.ndarray:
    r = adj.shape[1]
    m = idx.size
    if b.kind == "integer":
        draws = rng.integers(0, r, size=(m, b.k))
        return adj[idx[:, None], draws].ravel()
    first = rng.integers(0, r, size=m)
    second = rng.integers(0, r, size=m)
    extra = rng.random(m) < b.rho
    return np.concatenate([adj[idx, first], adj[idx[extra], second[extra]]])


def _bips_next(adj: np.ndarray, infected: np.ndarray, v: int, b: BranchingSpec, rng) -> np.ndarray:
    n, r = adj.shape
    rows = np.arange(n)
    if b.kind == "integer":
        draws = rng.integers(0, r, size=(n, b.k))
        nxt = infected[adj[rows[:, None], draws]].any(axis=1)
    else:
        first = rng.integers(0, r, size=n)
        second = rng.integers(0, r, size=n)
        extra = rng.random(n) < b.rho
        nxt = infected[adj[rows, first]] | (extra & infected[adj[rows, second]])
    nxt[v] = True
    return nxt


def cobra_step(g: Graph, c, b: BranchingSpec, rng) -> VertexSet:
    """One COBRA round from active set ``c``."""
    c = as_vertex_set(g.n, c)
    if len(c) == 0:
        raise ValueError("COBRA step needs a nonempty active set")
    targets = _draw_targets(g.adj, c.indices(), b, rng)
    out = np.zeros(g.n, dtype=bool)
    out[targets] = True
    return VertexSet(out)


def bips_step(g: Graph, a, v: int, b: BranchingSpec, rng) -> VertexSet:
    """One BIPS round from infected set ``a`` with persistent source ``v``."""
    a = as_vertex_set(g.n, a)
    if v not in a:
        raise ValueError(f"source {v} must belong to the infected set")
    return VertexSet(_bips_next(g.adj, a.mask, v, b, rng))


def cobra_run(g: Graph, u: int, b: BranchingSpec, max_steps: int, seed=0, *,
              count_start: bool = False, trial: int = 0) -> TrialRecord:
    """Run COBRA from ``{u}`` until cover or ``max_steps`` rounds.

    Cover time is the first T with C_1 u ... u C_T = V, so the start vertex
    has to be revisited; ``count_start=True`` counts C_0 in the union.
    ``hitting_times[w]`` is the first t with w in C_t (0 for ``u``, -1 if
    never reached).
    """
    if not 0 <= u < g.n:
        raise ValueError(f"start vertex {u} out of range")
    rng = make_rng(seed)
    hit = np.full(g.n, -1, dtype=np.int64)
    hit[u] = 0
    covered = np.zeros(g.n, dtype=bool)
    if count_start:
        covered[u] = True
    n_cov = int(covered.sum())
    cur = np.array([u])
    sizes = [1]
    t = 0
    cover = None
    while t < max_steps:
        mark = np.zeros(g.n, dtype=bool)
        mark[_draw_targets(g.adj, cur, b, rng)] = True
        cur = np.flatnonzero(mark)
        t += 1
        sizes.append(int(cur.size))
        hit[cur[hit[cur] < 0]] = t
        fresh = cur[~covered[cur]]
        covered[fresh] = True
        n_cov += fresh.size
        if n_cov == g.n:
            cover = t
            break
    return TrialRecord("cobra", g.name, g.n, u, b.describe(), _seed_list(seed), t, cover,
                       trial=trial, hitting_times=hit.tolist(), size_trajectory=sizes)


def bips_run(g: Graph, v: int, b: BranchingSpec, max_steps: int, seed=0, *,
             initial=None, trial: int = 0) -> TrialRecord:
    """Run BIPS with source ``v`` until every vertex is infected."""
    if not 0 <= v < g.n:
        raise ValueError(f"source vertex {v} out of range")
    rng = make_rng(seed)
    if initial is None:
        infected = np.zeros(g.n, dtype=bool)
    else:
        infected = as_vertex_set(g.n, initial).mask.copy()
    infected[v] = True
    size = int(infected.sum())
    sizes = [size]
    t = 0
    infec = 0 if size == g.n else None
    while infec is None and t < max_steps:
        infected = _bips_next(g.adj, infected, v, b, rng)
        t += 1
        size = int(infected.sum())
        sizes.append(size)
        if size == g.n:
            infec = t
    return TrialRecord("bips", g.name, g.n, v, b.describe(), _seed_list(seed), t, infec,
                       trial=trial, size_trajectory=sizes)


# -- many independent trials at once on small graphs (bit-packed states) ----

def _check_small(g: Graph):
    if g.n > 64:
        raise ValueError("bit-packed batch simulation supports n <= 64")


def _draw_bits(g: Graph, x: int, b: BranchingSpec, m: int, rng) -> np.ndarray:
    nb = g.adj[x].astype(np.uint64)
    one = np.uint64(1)
    if b.kind == "integer":
        draws = rng.integers(0, g.r, size=(m, b.k))
        bits = one << nb[draws]
        return np.bitwise_or.reduce(bits, axis=1)
    first = one << nb[rng.integers(0, g.r, size=m)]
    second = one << nb[rng.integers(0, g.r, size=m)]
    extra = rng.random(m) < b.rho
    return first | np.where(extra, second, np.uint64(0))


def cobra_step_batch(g: Graph, states: np.ndarray, b: BranchingSpec, rng) -> np.ndarray:
    """Advance many independent COBRA states (uint64 bit patterns) by one round."""
    _check_small(g)
    states = np.asarray(states, dtype=np.uint64)
    out = np.zeros_like(states)
    for x in range(g.n):
        active = ((states >> np.uint64(x)) & np.uint64(1)).astype(bool)
        if not active.any():
            continue
        bits = _draw_bits(g, x, b, int(active.sum()), rng)
        out[active] |= bits
    return out


def bips_step_batch(g: Graph, states: np.ndarray, v: int, b: BranchingSpec, rng) -> np.ndarray:
    """Advance many independent BIPS states (uint64 bit patterns) by one round."""
    _check_small(g)
    states = np.asarray(states, dtype=np.uint64)
    out = np.full_like(states, np.uint64(1) << np.uint64(v))
    for u in range(g.n):
        if u == v:
            continue
        hits = _draw_bits(g, u, b, states.size, rng) & states
        out |= (hits != 0).astype(np.uint64) << np.uint64(u)
    return out


def mc_hitting_survival(g: Graph, c0: int, v: int, t_max: int, b: BranchingSpec,
                        trials: int, seed=0) -> np.ndarray:
    """Empirical P(Hit_{C0}(v) > t) for t = 0..t_max; ``c0`` is a bit pattern."""
    rng = make_rng(seed)
    states = np.full(trials, c0, dtype=np.uint64)
    vbit = np.uint64(1) << np.uint64(v)
    alive = (states & vbit) == 0
    out = [alive.mean()]
    for _ in range(t_max):
        states = cobra_step_batch(g, states, b, rng)
        alive &= (states & vbit) == 0
        out.append(alive.mean())
    return np.array(out)


def mc_avoidance(g: Graph, v: int, c: int, t_max: int, b: BranchingSpec,
                 trials: int, seed=0) -> np.ndarray:
    """Empirical P(C n A_t = {} | A_0 = {v}) for t = 0..t_max; ``c`` is a bit pattern."""
    rng = make_rng(seed)
    states = np.full(trials, np.uint64(1) << np.uint64(v), dtype=np.uint64)
    cm = np.uint64(c)
    out = [((states & cm) == 0).mean()]
    for _ in range(t_max):
        states = bips_step_batch(g, states, v, b, rng)
        out.append(((states & cm) == 0).mean())
    return np.array(out)
