"""Regular graphs: construction, validation and edge-list I/O.

Vertices are dense 0-based integers and each neighbour list is sorted
ascending, so that neighbour sampling is reproducible for a given seed.
"""

from __future__ import annotations

import io
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

DEFAULT_MAX_RESTARTS = 10_000


class GraphError(ValueError):
    """Raised for invalid graph parameters or malformed graph files."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple r-regular undirected graph.

    ``adj`` is an ``(n, r)`` read-only integer array; row ``u`` holds the
    sorted neighbours of ``u``.
    """

    adj: np.ndarray
    name: str = field(default="graph")

    def __post_init__(self):
        adj = np.array(self.adj, dtype=np.int64, copy=True)
        if adj.ndim != 2 or adj.shape[0] == 0:
            raise GraphError("adjacency must be a non-empty (n, r) array")
        adj.sort(axis=1)
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)
        _validate(adj)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def r(self) -> int:
        return self.adj.shape[1]

    @property
    def num_edges(self) -> int:
        return self.n * self.r // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.adj[u]

    def edges(self) -> list[tuple[int, int]]:
        """Sorted list of edges ``(u, v)`` with ``u < v``."""
        return [(u, int(v)) for u in range(self.n) for v in self.adj[u] if u < v]

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[np.repeat(np.arange(self.n), self.r), self.adj.ravel()] = 1.0
        return a

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.adj.shape == other.adj.shape and bool(np.all(self.adj == other.adj))

    def __hash__(self):
        return hash((self.adj.shape, self.adj.tobytes()))

    def __repr__(self):
        return f"Graph(name={self.name!r}, n={self.n}, r={self.r})"


def _validate(adj: np.ndarray) -> None:
    n, r = adj.shape
    if adj.min() < 0 or adj.max() >= n:
        raise GraphError("neighbour index out of range")
    if np.any(adj == np.arange(n)[:, None]):
        raise GraphError("not simple: self-loop")
    if r > 1 and np.any(adj[:, 1:] == adj[:, :-1]):
        raise GraphError("not simple: parallel edge")
    # symmetry: the multiset of directed arcs must equal its reverse
    src = np.repeat(np.arange(n), r)
    fwd = np.sort(src * n + adj.ravel())
    rev = np.sort(adj.ravel() * n + src)
    if not np.array_equal(fwd, rev):
        raise GraphError("adjacency is not symmetric")


def from_edges(n: int, edges: Iterable[tuple[int, int]], name: str = "graph") -> Graph:
    """Build a regular graph from an undirected edge list."""
    if n < 1:
        raise GraphError("n must be positive")
    nbrs: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise GraphError(f"not simple: self-loop at {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"not simple: duplicate edge {key}")
        seen.add(key)
        nbrs[u].append(v)
        nbrs[v].append(u)
    degrees = {len(x) for x in nbrs}
    if len(degrees) != 1 or 0 in degrees:
        raise GraphError(f"not regular: degrees {sorted(degrees)}")
    return Graph(np.array(nbrs, dtype=np.int64).reshape(n, -1), name=name)


def gen_complete(n: int) -> Graph:
    if n < 2:
        raise GraphError("complete graph needs n >= 2")
    adj = [[w for w in range(n) if w != u] for u in range(n)]
    return Graph(np.array(adj), name=f"complete-{n}")


def gen_cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    u = np.arange(n)
    return Graph(np.stack([(u - 1) % n, (u + 1) % n], axis=1), name=f"cycle-{n}")


def gen_hypercube(d: int) -> Graph:
    if d < 1:
        raise GraphError("hypercube needs d >= 1")
    u = np.arange(1 << d)
    return Graph(np.stack([u ^ (1 << i) for i in range(d)], axis=1), name=f"hypercube-{d}")


def gen_petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return from_edges(10, outer + spokes + inner, name="petersen")


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator; ``seed`` may be an int or a sequence of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def gen_random_regular(n: int, r: int, seed: int = 0,
                       max_restarts: int = DEFAULT_MAX_RESTARTS) -> Graph:
    """Connected simple r-regular graph from the configuration model.

    Any pairing with a loop or multi-edge is discarded entirely, as is any
    disconnected outcome; the output is a deterministic function of
    ``(n, r, seed)``.
    """
    if (n * r) % 2:
        raise GraphError("n*r must be even")
    if not 3 <= r <= n - 1:
        raise GraphError(f"need 3 <= r <= n-1, got r={r}, n={n}")
    rng = make_rng(seed)
    stubs = np.repeat(np.arange(n), r)
    for _ in range(max_restarts):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        a, b = pairs[:, 0], pairs[:, 1]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        if np.unique(lo * n + hi).size != lo.size:
            continue
        adj = np.empty((n, r), dtype=np.int64)
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        order = np.argsort(src, kind="stable")
        adj[:] = dst[order].reshape(n, r)
        g = Graph(adj, name=f"random-regular-{n}-{r}-s{seed}")
        if is_connected(g):
            return g
    raise GraphError(f"retry budget of {max_restarts} restarts exhausted")


def is_connected(g: Graph) -> bool:
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    frontier = np.array([0])
    while frontier.size:
        nxt = np.unique(g.adj[frontier].ravel())
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return bool(seen.all())


def is_bipartite(g: Graph) -> bool:
    color = np.full(g.n, -1, dtype=np.int64)
    for s in range(g.n):
        if color[s] >= 0:
            continue
        color[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.adj[u]:
                if color[w] < 0:
                    color[w] = 1 - color[u]
                    queue.append(w)
                elif color[w] == color[u]:
                    return False
    return True


def write_edge_list(g: Graph, fh) -> None:
    fh.write(f"{g.n} {g.r}\n")
    for u, v in g.edges():
        fh.write(f"{u} {v}\n")


def save_graph(g: Graph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        write_edge_list(g, fh)


def read_edge_list(fh, name: str = "graph") -> Graph:
    lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise GraphError("malformed: empty file")
    try:
        header = [int(x) for x in lines[0]]
        body = [tuple(int(x) for x in ln) for ln in lines[1:]]
    except ValueError as exc:
        raise GraphError(f"malformed: {exc}") from None
    if len(header) != 2:
        raise GraphError("malformed: header must be 'n r'")
    n, r = header
    for e in body:
        if len(e) != 2:
            raise GraphError(f"malformed edge line: {' '.join(map(str, e))}")
        if e[0] > e[1]:
            raise GraphError(f"malformed: edge {e} not written as u < v")
    g = from_edges(n, body, name=name)
    if g.r != r:
        raise GraphError(f"not regular: header says r={r}, edges give r={g.r}")
    return g


def load_graph(path) -> Graph:
    with open(path) as fh:
        return read_edge_list(fh, name=os.path.splitext(os.path.basename(str(path)))[0])


def loads_graph(text: str, name: str = "graph") -> Graph:
    return read_edge_list(io.StringIO(text), name=name)


def resolve_graph(spec: str) -> Graph:
    """Graph from a short name or an edge-list path.

    Accepted names: ``petersen``, ``kN`` / ``complete:N``, ``cN`` /
    ``cycle:N``, ``cube:D``, ``random:N:R[:SEED]``. Anything else is read as
    a file path.
    """
    s = spec.strip().lower()
    parts = s.split(":")
    try:
        if s == "petersen":
            return gen_petersen()
        if parts[0] == "complete" and len(parts) == 2:
            return gen_complete(int(parts[1]))
        if parts[0] == "cycle" and len(parts) == 2:
            return gen_cycle(int(parts[1]))
        if parts[0] in ("cube", "hypercube") and len(parts) == 2:
            return gen_hypercube(int(parts[1]))
        if parts[0] == "random" and len(parts) in (3, 4):
            seed = int(parts[3]) if len(parts) == 4 else 0
            return gen_random_regular(int(parts[1]), int(parts[2]), seed)
        if len(s) > 1 and s[0] in "kc" and s[1:].isdigit() and not os.path.exists(spec):
            k = int(s[1:])
            return gen_complete(k) if s[0] == "k" else gen_cycle(k)
    except ValueError as exc:
        raise GraphError(f"bad graph spec {spec!r}: {exc}") from None
    if not os.path.exists(spec):
        raise GraphError(f"unknown graph {spec!r} (not a generator name or file)")
    return load_graph(spec)


class VertexSet:
    """Immutable subset of ``range(n)`` stored as a boolean membership mask."""

    __slots__ = ("_mask",)

    def __init__(self, mask):
        m = np.array(mask, dtype=bool, copy=True)
        if m.ndim != 1:
            raise ValueError("mask must be one-dimensional")
        m.setflags(write=False)
        self._mask = m

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "VertexSet":
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError(f"vertex index out of range for n={n}")
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        return cls(m)

    @classmethod
    def from_bits(cls, n: int, bits: int) -> "VertexSet":
        if bits < 0 or bits >> n:
            raise ValueError(f"bit pattern {bits:#x} has members >= n={n}")
        return cls([(bits >> i) & 1 for i in range(n)])

    @classmethod
    def full(cls, n: int) -> "VertexSet":
        return cls(np.ones(n, dtype=bool))

    @property
    def n(self) -> int:
        return self._mask.size

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def bits(self) -> int:
        return sum(1 << int(i) for i in np.flatnonzero(self._mask))

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self._mask)

    def __len__(self):
        return int(self._mask.sum())

    def __contains__(self, u):
        return 0 <= u < self.n and bool(self._mask[u])

    def __iter__(self):
        return iter(int(i) for i in np.flatnonzero(self._mask))

    def __eq__(self, other):
        if not isinstance(other, VertexSet):
            return NotImplemented
        return np.array_equal(self._mask, other._mask)

    def __hash__(self):
        return hash(self._mask.tobytes())

    def __repr__(self):
        return f"VertexSet(n={self.n}, {sorted(self)})"


def as_vertex_set(n: int, a) -> VertexSet:
    """Coerce a VertexSet, bit pattern, boolean mask or index list."""
    if isinstance(a, VertexSet):
        if a.n != n:
            raise ValueError(f"vertex set has width {a.n}, graph has n={n}")
        return a
    if isinstance(a, (int, np.integer)):
        return VertexSet.from_bits(n, int(a))
    arr = np.asarray(a)
    if arr.dtype == bool:
        if arr.size != n:
            raise ValueError(f"mask length {arr.size} != n={n}")
        return VertexSet(arr)
    return VertexSet.from_indices(n, arr.ravel())
