"""Exact laws of the COBRA and BIPS set processes on small graphs.

A distribution over subsets of ``range(n)`` is a length ``2**n`` vector
indexed by bit pattern (vertex ``i`` is bit ``i``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graphs import Graph, as_vertex_set
from .process import BranchingSpec

MAX_EXACT_N = 20
MAX_COBRA_KERNEL_N = 12
_NEG_TOL = 1e-15
_SUM_TOL = 1e-12
_CHUNK = 1 << 22


class CapExceeded(ValueError):
    """The graph is too large for exact subset enumeration."""


def _check_cap(n: int, cap: int = MAX_EXACT_N):
    if n > cap:
        raise CapExceeded(f"exact computation over 2^n subsets is capped at n <= {cap}, got n={n}")


def _branching(b) -> BranchingSpec:
    if isinstance(b, BranchingSpec):
        return b
    return BranchingSpec.integer(int(b))


@dataclass(frozen=True, eq=False)
class SubsetDistribution:
    n: int
    prob: np.ndarray

    def __post_init__(self):
        _check_cap(self.n)
        p = np.array(self.prob, dtype=float)
        if p.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} probabilities, got shape {p.shape}")
        if p.min() < -_NEG_TOL:
            raise ValueError(f"negative probability mass {p.min():.3e}")
        p[p < 0] = 0.0
        total = p.sum()
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p /= total
        p.setflags(write=False)
        object.__setattr__(self, "prob", p)

    @classmethod
    def point(cls, n: int, bits: int) -> "SubsetDistribution":
        _check_cap(n)
        p = np.zeros(1 << n)
        p[bits] = 1.0
        return cls(n, p)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.prob)

    def __getitem__(self, bits: int) -> float:
        return float(self.prob[bits])

    def as_dict(self) -> dict[int, float]:
        return {int(s): float(self.prob[s]) for s in self.support()}


def _member_matrix(n: int, sets: np.ndarray) -> np.ndarray:
    """Boolean ``(len(sets), n)`` membership matrix for bit patterns."""
    return ((np.asarray(sets, dtype=np.int64)[:, None] >> np.arange(n)) & 1).astype(bool)


def _contains(n: int, bit: int) -> np.ndarray:
    return ((np.arange(1 << n) >> bit) & 1).astype(bool)


# -- COBRA ------------------------------------------------------------------

def draw_set_law(g: Graph, x: int, b) -> tuple[np.ndarray, np.ndarray]:
    """Law of the set of neighbours ``x`` pushes to in one round.

    Returns parallel arrays of bit patterns and probabilities. For ``k = 2``
    a singleton ``{a}`` has mass 1/r^2 and a pair ``{a, b}`` has 2/r^2.
    """
    b = _branching(b)
    single = {1 << int(w): 1.0 / g.r for w in g.adj[x]}

    def fold(law):
        out: dict[int, float] = {}
        for s, p in law.items():
            for w, q in single.items():
                out[s | w] = out.get(s | w, 0.0) + p * q
        return out

    if b.kind == "integer":
        law = {0: 1.0}
        for _ in range(b.k):
            law = fold(law)
    else:
        law = {s: (1.0 - b.rho) * p for s, p in single.items()}
        for s, p in fold(single).items():
            law[s] = law.get(s, 0.0) + b.rho * p
    keys = sorted(law)
    return np.array(keys, dtype=np.int64), np.array([law[s] for s in keys])


def _or_convolve(vec: np.ndarray, masks: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Law of ``S | X`` for independent ``S ~ vec`` and ``X ~ (masks, probs)``."""
    nz = np.flatnonzero(vec)
    idx = (nz[None, :] | masks[:, None]).ravel()
    w = (probs[:, None] * vec[nz][None, :]).ravel()
    return np.bincount(idx, weights=w, minlength=vec.size)


def _fold_set_law(laws, n: int, c: int) -> np.ndarray:
    # union of the independent draw sets of every vertex in c, one vertex at a time
    out = np.zeros(1 << n)
    out[0] = 1.0
    for x in range(n):
        if (c >> x) & 1:
            out = _or_convolve(out, *laws[x])
    return out


def cobra_set_law(g: Graph, c: int, b=2) -> np.ndarray:
    """Exact law of the next COBRA active set from active set ``c`` (bit pattern)."""
    _check_cap(g.n)
    return _fold_set_law([draw_set_law(g, x, b) for x in range(g.n)], g.n, c)


def cobra_exact_step(g: Graph, dist: SubsetDistribution, k=2) -> SubsetDistribution:
    """Push a distribution of COBRA active sets forward one round."""
    _check_cap(g.n)
    if dist.n != g.n:
        raise ValueError("distribution width does not match graph")
    if dist.prob[0] > 0:
        raise ValueError("COBRA distribution must not charge the empty set")
    laws = [draw_set_law(g, x, k) for x in range(g.n)]
    out = np.zeros(1 << g.n)
    for c in dist.support():
        out += dist.prob[c] * _fold_set_law(laws, g.n, c)
    return SubsetDistribution(g.n, out)


@lru_cache(maxsize=4)
def _kernel_cache(g: Graph, b: BranchingSpec) -> np.ndarray:
    laws = [draw_set_law(g, x, b) for x in range(g.n)]
    size = 1 << g.n
    kern = np.zeros((size, size))
    kern[0, 0] = 1.0
    for c in range(1, size):
        low = (c & -c).bit_length() - 1
        kern[c] = _or_convolve(kern[c & (c - 1)], *laws[low])
    kern.setflags(write=False)
    return kern


def cobra_kernel(g: Graph, b=2) -> np.ndarray:
    """Full ``2^n x 2^n`` COBRA transition matrix (row = current set)."""
    _check_cap(g.n, MAX_COBRA_KERNEL_N)
    return _kernel_cache(g, _branching(b))


def cobra_hitting_survival(g: Graph, c0, v: int, t_max: int, k=2) -> np.ndarray:
    """``P(Hit_{C0}(v) > t)`` for ``t = 0..t_max``."""
    _check_cap(g.n)
    c0 = as_vertex_set(g.n, c0).bits
    if c0 == 0:
        raise ValueError("COBRA start set must be nonempty")
    out = np.zeros(t_max + 1)
    if (c0 >> v) & 1:
        return out
    hit = _contains(g.n, v)
    dist = np.zeros(1 << g.n)
    dist[c0] = 1.0
    out[0] = 1.0
    if g.n <= MAX_COBRA_KERNEL_N:
        kern = cobra_kernel(g, k)
        step = lambda d: d @ kern
    else:
        laws = [draw_set_law(g, x, k) for x in range(g.n)]

        def step(d):
            nxt = np.zeros_like(d)
            for c in np.flatnonzero(d):
                nxt += d[c] * _fold_set_law(laws, g.n, c)
            return nxt
    for t in range(1, t_max + 1):
        dist = step(dist)
        dist[hit] = 0.0
        out[t] = dist.sum()
    return out


# -- BIPS -------------------------------------------------------------------

def join_probabilities(g: Graph, a, b=2) -> np.ndarray:
    """Per-vertex probability of drawing into ``a`` in one BIPS round.

    With ``d_A(u)`` neighbours of ``u`` in ``A`` this is
    ``1 - (1 - d_A(u)/r)^k``, or ``(1+rho)p - rho p^2`` for fractional
    branching (source override not applied).
    """
    s = as_vertex_set(g.n, a)
    p = s.mask[g.adj].sum(axis=1) / g.r
    return _branching(b).join_probability(p)


def _product_rows(p: np.ndarray) -> np.ndarray:
    """Rows of independent-Bernoulli product laws over ``2^n`` bit patterns."""
    m, n = p.shape
    rows = np.ones((m, 1))
    for u in range(n):
        pu = p[:, u:u + 1]
        rows = np.concatenate([rows * (1.0 - pu), rows * pu], axis=1)
    return rows


def bips_exact_step(g: Graph, dist: SubsetDistribution, v: int, k=2) -> SubsetDistribution:
    """Push a distribution of BIPS infected sets forward one round."""
    _check_cap(g.n)
    if dist.n != g.n:
        raise ValueError("distribution width does not match graph")
    b = _branching(k)
    sup = dist.support()
    if np.any(((sup >> v) & 1) == 0):
        raise ValueError(f"every support set must contain the source {v}")
    size = 1 << g.n
    out = np.zeros(size)
    chunk = max(1, _CHUNK // size)
    for lo in range(0, sup.size, chunk):
        sets = sup[lo:lo + chunk]
        member = _member_matrix(g.n, sets)
        p = b.join_probability(member[:, g.adj].sum(axis=2) / g.r)
        p[:, v] = 1.0
        out += dist.prob[sets] @ _product_rows(p)
    return SubsetDistribution(g.n, out)


def bips_distributions(g: Graph, v: int, t_max: int, k=2) -> list[SubsetDistribution]:
    """Exact laws of ``A_0 .. A_{t_max}`` from ``A_0 = {v}``."""
    dists = [SubsetDistribution.point(g.n, 1 << v)]
    for _ in range(t_max):
        dists.append(bips_exact_step(g, dists[-1], v, k))
    return dists


def _avoid_from(dists, n: int, c: int) -> np.ndarray:
    avoid = (np.arange(1 << n) & c) == 0
    return np.array([d.prob[avoid].sum() for d in dists])


def bips_avoidance(g: Graph, v: int, c, t_max: int, k=2) -> np.ndarray:
    """``P(C n A_t = {} | A_0 = {v})`` for ``t = 0..t_max``."""
    _check_cap(g.n)
    c = as_vertex_set(g.n, c).bits
    if (c >> v) & 1:
        return np.zeros(t_max + 1)
    return _avoid_from(bips_distributions(g, v, t_max, k), g.n, c)


def duality_table(g: Graph, c, v: int, t_max: int, k=2) -> list[tuple[int, float, float, float]]:
    """Rows ``(t, cobra_survival, bips_avoidance, abs_diff)``."""
    _check_cap(g.n, MAX_COBRA_KERNEL_N)
    lhs = cobra_hitting_survival(g, c, v, t_max, k)
    rhs = bips_avoidance(g, v, c, t_max, k)
    return [(t, float(a), float(b), float(abs(a - b))) for t, (a, b) in enumerate(zip(lhs, rhs))]


def duality_check(g: Graph, c, v: int, t_max: int, k=2) -> float:
    """Largest gap between COBRA survival and BIPS avoidance over ``t <= t_max``."""
    return max(row[3] for row in duality_table(g, c, v, t_max, k))


def duality_sweep(g: Graph, pairs, t_max: int, k=2) -> list[tuple[int, int, float]]:
    """``(C bits, v, max deviation)`` for many pairs, sharing the BIPS laws per source."""
    _check_cap(g.n, MAX_COBRA_KERNEL_N)
    by_source: dict[int, list] = {}
    out = []
    for c, v in pairs:
        c = as_vertex_set(g.n, c).bits
        if v not in by_source:
            by_source[v] = bips_distributions(g, v, t_max, k)
        rhs = np.zeros(t_max + 1) if (c >> v) & 1 else _avoid_from(by_source[v], g.n, c)
        lhs = cobra_hitting_survival(g, c, v, t_max, k)
        out.append((c, v, float(np.max(np.abs(lhs - rhs)))))
    return out


# -- one-step growth ---------------------------------------------------------

def expected_growth_exact(g: Graph, a, v: int, b=2) -> float:
    """``E(|A_{t+1}| | A_t = A)`` = 1 + sum over u != v of the join probability."""
    s = as_vertex_set(g.n, a)
    if v not in s:
        raise ValueError(f"source {v} must belong to A")
    p = join_probabilities(g, s, b)
    return 1.0 + float(p.sum() - p[v])


def expected_growth_table(g: Graph, masks: np.ndarray, v: int, b=2) -> np.ndarray:
    """Vectorised :func:`expected_growth_exact` over rows of a boolean matrix."""
    masks = np.asarray(masks, dtype=bool)
    if not masks[:, v].all():
        raise ValueError(f"source {v} must belong to every A")
    p = _branching(b).join_probability(masks[:, g.adj].sum(axis=2) / g.r)
    return 1.0 + p.sum(axis=1) - p[:, v]


def growth_bound(size_a: int, n: int, lam: float, b=2) -> float:
    """Lower bound ``|A|(1 + rho (1 - lam^2)(1 - |A|/n))`` on the expected next size.

    ``rho`` is the fractional extra-draw probability; integer ``k >= 2`` uses
    ``rho = 1`` and ``k = 1`` uses ``rho = 0``.
    """
    if not 1 <= size_a <= n:
        raise ValueError(f"need 1 <= |A| <= n, got |A|={size_a}, n={n}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    b = _branching(b)
    rho = b.rho if b.kind == "fractional" else min(b.k - 1, 1)
    return size_a * (1.0 + rho * (1.0 - lam ** 2) * (1.0 - size_a / n))
