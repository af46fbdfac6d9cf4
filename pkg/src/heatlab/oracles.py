"""Brute-force reference values for the optimal metrics on tiny graphs.

Both metrics are suprema of psi(x) - psi(y) over sets cut out by quadratic
forms q_k(psi) <= 1 (energy densities, plus squared edge increments / S^2 for
the jump cap of rho_S).  Pinning psi(x) - psi(y) = 1 gives value^-2 =
min_psi max_k q_k, and exchanging min and max over the simplex of weights
lambda turns this into

    value^2 = min_{lambda in simplex} R_eff(x, y; beta(lambda)),

an effective resistance whose edge conductances beta are linear in lambda.
That objective is smooth and convex with a closed-form gradient, so a
bound-constrained quasi-Newton descent followed by a mesh polish converges;
every lambda gives an upper bound.  The primal mesh over
pinned potentials gives matching lower bounds.  Neither route touches the conic
solver in ``optimal``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from .graph import Graph
from .metrics import combinatorial_distance

MAX_DAVIES_VERTICES = 8
MAX_RHO_S_VERTICES = 6


def mesh_search_min(F, x0: np.ndarray, h0: float = 0.5, h_min: float = 1e-11,
                    seed: int = 0, frames: int = 6, max_iter: int = 200000) -> tuple[np.ndarray, float]:
    """Minimise a (batched) function by polling a rotating grid around the incumbent."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=float)
    d = x.size
    fx = float(F(x[None, :])[0])
    if d == 0:
        return x, fx
    h = h0
    it = 0
    while h > h_min and it < max_iter:
        moved = False
        for _ in range(frames):
            it += 1
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            dirs = np.concatenate([q.T, -q.T, (q.T + q.T[::-1]) / math.sqrt(2)])
            steps = np.concatenate([dirs * h, dirs * (2 * h)])
            cand = x[None, :] + steps
            vals = F(cand)
            k = int(np.argmin(vals))
            if vals[k] < fx:
                x, fx = cand[k], float(vals[k])
                moved = True
                break
        if moved:
            h = min(h * 2.0, h0)
        else:
            h *= 0.5
    return x, fx


def _pinned(graph: Graph, hi: int, lo: int):
    free = np.array([k for k in range(graph.n) if k not in (hi, lo)], dtype=np.int64)

    def embed(z: np.ndarray) -> np.ndarray:
        psi = np.zeros((z.shape[0], graph.n))
        psi[:, hi] = 1.0
        psi[:, free] = z
        return psi

    dx = combinatorial_distance(graph, hi).astype(float)
    dy = combinatorial_distance(graph, lo).astype(float)
    start = (dy / (dx + dy))[free]
    return embed, start


def _edge_sq(graph: Graph, psi: np.ndarray) -> np.ndarray:
    return (psi[:, graph.edge_u] - psi[:, graph.edge_v]) ** 2


def _vertex_sums(graph: Graph, per_edge: np.ndarray) -> np.ndarray:
    out = np.zeros((per_edge.shape[0], graph.n))
    np.add.at(out, (slice(None), graph.edge_u), per_edge)
    np.add.at(out, (slice(None), graph.edge_v), per_edge)
    return out


def davies_oracle_lower(graph: Graph, x: str | int, y: str | int, seed: int = 0) -> float:
    """Lower bound for rho_E(x, y): 1 / sqrt(min max_z Gamma(psi)(z)), psi(x)=1, psi(y)=0."""
    if graph.n > MAX_DAVIES_VERTICES:
        raise ValueError(f"oracle limited to {MAX_DAVIES_VERTICES} vertices")
    i = graph.index[x] if isinstance(x, str) else int(x)
    j = graph.index[y] if isinstance(y, str) else int(y)
    if i == j:
        return 0.0
    embed, start = _pinned(graph, i, j)

    def F(z):
        psi = embed(z)
        gam = _vertex_sums(graph, _edge_sq(graph, psi) * graph.edge_b) / (2 * graph.m)
        return gam.max(axis=1)

    _, f = mesh_search_min(F, start, seed=seed)
    return 1.0 / math.sqrt(f)


def max_intrinsic_oracle_lower(graph: Graph, x: str | int, y: str | int, S: float, seed: int = 0) -> float:
    """Lower bound for rho_S(x, y) from its potential form."""
    if graph.n > MAX_RHO_S_VERTICES:
        raise ValueError(f"oracle limited to {MAX_RHO_S_VERTICES} vertices")
    i = graph.index[x] if isinstance(x, str) else int(x)
    j = graph.index[y] if isinstance(y, str) else int(y)
    if i == j:
        return 0.0
    embed, start = _pinned(graph, j, i)

    def F(z):
        pi = embed(z)
        sq = _edge_sq(graph, pi)
        q = _vertex_sums(graph, sq * graph.edge_b) / graph.m
        return np.maximum(np.sqrt(q.max(axis=1)), np.sqrt(sq.max(axis=1)) / S)

    _, f = mesh_search_min(F, start, seed=seed)
    return 1.0 / f


def _reff_and_grad(graph: Graph, beta: np.ndarray, hi: int, lo: int) -> tuple[float, np.ndarray]:
    """R_eff(hi, lo) for edge conductances beta and its gradient -(dv_e)^2."""
    n = graph.n
    u, v = graph.edge_u, graph.edge_v
    L = np.zeros((n, n))
    np.add.at(L, (u, v), -beta)
    np.add.at(L, (v, u), -beta)
    L[np.arange(n), np.arange(n)] = -L.sum(axis=1)
    keep = np.array([a for a in range(n) if a != lo])
    rhs = np.zeros(n - 1)
    rhs[int(np.flatnonzero(keep == hi)[0])] = 1.0
    try:
        sol = np.linalg.solve(L[np.ix_(keep, keep)], rhs)
    except np.linalg.LinAlgError:
        return math.inf, np.zeros_like(beta)
    pot = np.zeros(n)
    pot[keep] = sol
    r = float(pot[hi])
    if not (np.isfinite(r) and r > 0):
        return math.inf, np.zeros_like(beta)
    return r, -(pot[u] - pot[v]) ** 2


def dual_multiplier_min(graph: Graph, B: np.ndarray, hi: int, lo: int,
                        polish_iter: int = 300) -> float:
    """min over lambda >= 0 of sum(lambda) * R_eff(beta = B @ lambda).

    The objective is 0-homogeneous, smooth and convex in the direction of the
    simplex; a quasi-Newton descent with the exact gradient does the bulk of the
    work and a bounded compass search over mass transfers polishes the result.
    """
    dim = B.shape[1]

    def G(lam):
        s = lam.sum()
        r, dr = _reff_and_grad(graph, B @ lam, hi, lo)
        if not np.isfinite(r):
            return 1e300, np.zeros(dim)
        return s * r, r + s * (B.T @ dr)

    res = minimize(G, np.full(dim, 1.0 / dim), jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * dim,
                   options=dict(ftol=1e-15, gtol=1e-13, maxiter=5000))
    lam = np.maximum(res.x, 0.0)
    lam /= lam.sum()
    f = G(lam)[0]
    pairs = [(a, b) for a in range(dim) for b in range(dim) if a != b]
    h = 1e-3
    for _ in range(polish_iter):
        if h < 1e-14:
            break
        best = None
        for a, b in pairs:
            step = min(h, lam[b])
            if step <= 0:
                continue
            cand = lam.copy()
            cand[a] += step
            cand[b] -= step
            val = G(cand)[0]
            if val < f and (best is None or val < best[0]):
                best = (val, cand)
        if best is None:
            h *= 0.5
        else:
            f, lam = best
            h *= 2.0
    return float(f)


def _index_pair(graph: Graph, x, y) -> tuple[int, int]:
    i = graph.index[x] if isinstance(x, str) else int(x)
    j = graph.index[y] if isinstance(y, str) else int(y)
    return i, j


def davies_oracle(graph: Graph, x: str | int, y: str | int) -> float:
    """rho_E(x, y) = sqrt(min R_eff) over multipliers on the vertex constraints."""
    if graph.n > MAX_DAVIES_VERTICES:
        raise ValueError(f"oracle limited to {MAX_DAVIES_VERTICES} vertices")
    i, j = _index_pair(graph, x, y)
    if i == j:
        return 0.0
    E = graph.n_edges
    B = np.zeros((E, graph.n))
    rows = np.arange(E)
    B[rows, graph.edge_u] += graph.edge_b / (2 * graph.m[graph.edge_u])
    B[rows, graph.edge_v] += graph.edge_b / (2 * graph.m[graph.edge_v])
    return math.sqrt(dual_multiplier_min(graph, B, i, j))


def max_intrinsic_oracle(graph: Graph, x: str | int, y: str | int, S: float) -> float:
    """rho_S(x, y) = sqrt(min R_eff) over vertex and jump-cap multipliers."""
    if graph.n > MAX_RHO_S_VERTICES:
        raise ValueError(f"oracle limited to {MAX_RHO_S_VERTICES} vertices")
    i, j = _index_pair(graph, x, y)
    if i == j:
        return 0.0
    E, n = graph.n_edges, graph.n
    B = np.zeros((E, n + E))
    rows = np.arange(E)
    B[rows, graph.edge_u] += graph.edge_b / graph.m[graph.edge_u]
    B[rows, graph.edge_v] += graph.edge_b / graph.m[graph.edge_v]
    B[rows, n + rows] = 1.0 / S ** 2
    return math.sqrt(dual_multiplier_min(graph, B, i, j))
