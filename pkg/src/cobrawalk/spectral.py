"""Second-largest absolute eigenvalue of the random-walk matrix P = A/r."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, as_vertex_set, is_connected, make_rng

DENSE_THRESHOLD = 2048
POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
_CLAMP_TOL = 1e-9


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralSummary:
    lam: float
    method: str
    residual: float

    @property
    def gap(self) -> float:
        return 1.0 - self.lam


def walk_apply(g: Graph, x) -> np.ndarray:
    """Return ``P x``, i.e. the average of ``x`` over each vertex's neighbours."""
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"vector length {x.shape} does not match n={g.n}")
    return x[g.adj].mean(axis=1)


def _clamp(lam: float) -> float:
    if lam > 1.0 + _CLAMP_TOL:
        raise SpectralError(f"eigenvalue {lam!r} exceeds 1; walk matrix is stochastic")
    return min(max(lam, 0.0), 1.0)


def _dense(g: Graph) -> SpectralSummary:
    p = g.adjacency_matrix() / g.r
    w, v = np.linalg.eigh(p)
    # w ascending; w[-1] is the stationary eigenvalue 1
    i = g.n - 2 if w[-2] >= -w[0] else 0
    resid = float(np.linalg.norm(p @ v[:, i] - w[i] * v[:, i]))
    return SpectralSummary(_clamp(abs(float(w[i]))), "dense", resid)


def _power_top(g: Graph, sign: float, rng, tol: float, max_iter: int):
    """Top eigenpair of (I + sign*P)/2 on the complement of the constant vector.

    Both shifted operators are positive semidefinite, so plain power iteration
    converges to the largest algebraic eigenvalue of ``sign * P``.
    """
    x = rng.standard_normal(g.n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    mu_prev = np.inf
    for it in range(1, max_iter + 1):
        y = 0.5 * (x + sign * walk_apply(g, x))
        y -= y.mean()
        mu = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            # x lies in the kernel: eigenvalue -sign of P
            return -sign, x, it
        x = y / norm
        if abs(mu - mu_prev) < tol / 2:
            return sign * (2.0 * mu - 1.0), x, it
        mu_prev = mu
    raise SpectralError(f"power iteration did not converge in {max_iter} iterations")


def _iterative(g: Graph, tol: float, max_iter: int, seed: int) -> SpectralSummary:
    rng = make_rng(seed)
    lam2, x2, _ = _power_top(g, 1.0, rng, tol, max_iter)
    lamn, xn, _ = _power_top(g, -1.0, rng, tol, max_iter)
    lam, x = (lam2, x2) if lam2 >= -lamn else (lamn, xn)
    resid = float(np.linalg.norm(walk_apply(g, x) - lam * x))
    return SpectralSummary(_clamp(abs(lam)), "iterative", resid)


def lambda_max(g: Graph, mode: str = "auto", *, dense_threshold: int = DENSE_THRESHOLD,
               tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
               seed: int = 0) -> SpectralSummary:
    """max_{i>=2} |lambda_i| of the walk matrix.

    ``mode`` is ``"dense"``, ``"iterative"`` or ``"auto"`` (dense up to
    ``dense_threshold`` vertices).
    """
    if mode not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown mode {mode!r}")
    if not is_connected(g):
        raise SpectralError("graph is disconnected")
    if g.n == 2:
        return SpectralSummary(1.0, "dense", 0.0)
    if mode == "dense" or (mode == "auto" and g.n <= dense_threshold):
        return _dense(g)
    return _iterative(g, tol, max_iter, seed)


def projection_norm_check(g: Graph, a, lam: float) -> tuple[float, float]:
    """``(||P 1_A||^2, (1-lam^2)|A|^2/n + lam^2 |A|)``; the first never exceeds the second."""
    s = as_vertex_set(g.n, a)
    size = len(s)
    if size == 0:
        raise ValueError("vertex set must be nonempty")
    px = walk_apply(g, s.mask.astype(float))
    lhs = float(px @ px)
    rhs = (1.0 - lam ** 2) * size ** 2 / g.n + lam ** 2 * size
    return lhs, rhs


def projection_norm_table(g: Graph, masks: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`projection_norm_check` over rows of a boolean matrix."""
    masks = np.asarray(masks, dtype=float)
    px = masks[:, g.adj].mean(axis=2)
    lhs = (px ** 2).sum(axis=1)
    size = masks.sum(axis=1)
    rhs = (1.0 - lam ** 2) * size ** 2 / g.n + lam ** 2 * size
    return lhs, rhs
