"""Optimal metrics: Davies' form metric, the maximal intrinsic metric and the
regularity constant.  All three are convex programs on finite graphs.

Each problem is compiled once per graph (the objective enters as a parameter)
and solved with Clarabel through cvxpy.  Returned values are always made
exactly feasible first (rescaling, metric closure), so they are certified lower
bounds; for the form metric a Lagrangian dual bound closes the gap from above.
"""

from __future__ import annotations

import math
import threading
import warnings
import weakref
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import Graph, VertexSet
from .metrics import intrinsic_ratio

SOLVER_OPTS = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=300)


class SolverError(RuntimeError):
    def __init__(self, message: str, certificate: "SolverCertificate | None" = None):
        super().__init__(message)
        self.certificate = certificate


@dataclass
class SolverCertificate:
    objective: float
    residual: float
    iterations: int
    gap: float | None
    tol: float
    status: str
    gap_kind: str = "dual"
    extra: dict = field(default_factory=dict)


def _directed_edges(graph: Graph):
    """Both orientations of every edge: (tail, head, weight)."""
    g = graph
    tail = np.concatenate([g.edge_u, g.edge_v])
    head = np.concatenate([g.edge_v, g.edge_u])
    w = np.concatenate([g.edge_b, g.edge_b])
    return tail, head, w


def energy_density(graph: Graph, psi: np.ndarray) -> np.ndarray:
    """Gamma(psi)(z) = (1/2m(z)) sum_w b(z,w) (psi(z) - psi(w))^2, batched on the last axis."""
    psi = np.asarray(psi, dtype=float)
    d2 = (psi[..., graph.edge_u] - psi[..., graph.edge_v]) ** 2 * graph.edge_b
    out = np.zeros(psi.shape[:-1] + (graph.n,))
    np.add.at(out, (..., graph.edge_u), d2)
    np.add.at(out, (..., graph.edge_v), d2)
    return out / (2.0 * graph.m)


class FormMetricProblem:
    """sup{psi(x) - psi(y) : ||Gamma(psi)||_inf <= 1} on a finite graph.

    With ``support`` given, psi vanishes outside it (compactly supported test
    functions on a truncation); the energy constraint is imposed at every vertex.
    """

    def __init__(self, graph: Graph, support: VertexSet | None = None):
        self.graph = graph
        n = graph.n
        if support is None:
            free = np.arange(n)
        else:
            free = support.array()
        self.free = free
        col = -np.ones(n, dtype=np.int64)
        col[free] = np.arange(len(free))
        self._col = col
        tail, head, w = _directed_edges(graph)
        keep = (col[tail] >= 0) | (col[head] >= 0)
        tail, head, w = tail[keep], head[keep], w[keep]
        rows, cols, vals = [], [], []
        for r, (a, b_, ww) in enumerate(zip(tail, head, w)):
            s = math.sqrt(ww)
            if col[a] >= 0:
                rows.append(r); cols.append(col[a]); vals.append(s)
            if col[b_] >= 0:
                rows.append(r); cols.append(col[b_]); vals.append(-s)
        D = sp.csr_matrix((vals, (rows, cols)), shape=(len(tail), len(free)))
        cons_vertices = np.unique(tail)
        cmap = -np.ones(n, dtype=np.int64)
        cmap[cons_vertices] = np.arange(len(cons_vertices))
        Agg = sp.csr_matrix((np.ones(len(tail)), (cmap[tail], np.arange(len(tail)))),
                            shape=(len(cons_vertices), len(tail)))
        self.cons_vertices = cons_vertices
        self._psi = cp.Variable(len(free))
        self._c = cp.Parameter(len(free))
        self._con = Agg @ cp.square(D @ self._psi) <= 2.0 * graph.m[cons_vertices]
        cons = [self._con]
        if support is None:
            cons.append(cp.sum(self._psi) == 0)
        self._prob = cp.Problem(cp.Maximize(self._c @ self._psi), cons)
        self._lock = threading.Lock()

    def _objective_vector(self, i: int, j: int) -> np.ndarray:
        c = np.zeros(len(self.free))
        if self._col[i] >= 0:
            c[self._col[i]] += 1.0
        if self._col[j] >= 0:
            c[self._col[j]] -= 1.0
        return c

    def full_psi(self, psi_free: np.ndarray) -> np.ndarray:
        psi = np.zeros(self.graph.n)
        psi[self.free] = psi_free
        return psi

    def dual_bound(self, mu: np.ndarray, i: int, j: int) -> float:
        """Weak-duality upper bound 2 sum mu m + c^T L_beta^+ c / 4."""
        g = self.graph
        mu_full = np.zeros(g.n)
        mu_full[self.cons_vertices] = np.maximum(mu, 0.0)
        beta = g.edge_b * (mu_full[g.edge_u] + mu_full[g.edge_v])
        n = g.n
        L = sp.csr_matrix((np.concatenate([-beta, -beta]),
                           (np.concatenate([g.edge_u, g.edge_v]), np.concatenate([g.edge_v, g.edge_u]))),
                          shape=(n, n))
        L = L + sp.diags(-np.asarray(L.sum(axis=1)).ravel())
        c = np.zeros(n)
        c[i] += 1.0
        c[j] -= 1.0
        if len(self.free) < n:
            keep = self.free
            rhs = c[keep]
        else:
            keep = np.setdiff1d(np.arange(n), [j])
            rhs = c[keep]
        Lr = L[keep][:, keep]
        try:
            if Lr.shape[0] <= 3000:
                Ld = Lr.toarray()
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                    v = scipy.linalg.solve(Ld, rhs, assume_a="sym")
                if not np.all(np.isfinite(v)) or np.abs(Ld @ v - rhs).max() > 1e-8:
                    return math.inf
            else:
                v = spla.spsolve(Lr.tocsc(), rhs)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, RuntimeError):
            return math.inf
        reff = float(rhs @ v)
        return 2.0 * float(mu_full @ g.m) + reff / 4.0

    def solve(self, x: str | int, y: str | int, tol: float = 1e-8) -> tuple[float, SolverCertificate]:
        # the parametrized problem is shared state; one solve at a time
        with self._lock:
            return self._solve(x, y, tol)

    def _solve(self, x: str | int, y: str | int, tol: float = 1e-8) -> tuple[float, SolverCertificate]:
        g = self.graph
        i = g.index[x] if isinstance(x, str) else int(x)
        j = g.index[y] if isinstance(y, str) else int(y)
        if i == j:
            return 0.0, SolverCertificate(0.0, 0.0, 0, 0.0, tol, "trivial")
        self._c.value = self._objective_vector(i, j)
        try:
            with warnings.catch_warnings():
                # an inaccurate status is recorded in the certificate instead
                warnings.simplefilter("ignore", UserWarning)
                self._prob.solve(solver=cp.CLARABEL, **SOLVER_OPTS)
        except cp.error.SolverError as exc:
            raise SolverError(f"form metric solve failed: {exc}") from exc
        status = self._prob.status
        iters = int(self._prob.solver_stats.num_iters or 0)
        if self._psi.value is None:
            raise SolverError(f"form metric solve returned status {status}")
        psi = self.full_psi(self._psi.value)
        gam = energy_density(g, psi)
        excess = max(0.0, float(gam.max()) - 1.0)
        scale = 1.0 / math.sqrt(max(1.0, float(gam.max())))
        value = scale * (psi[i] - psi[j])
        mu = self._con.dual_value
        upper = self.dual_bound(np.asarray(mu, dtype=float), i, j) if mu is not None else math.inf
        gap = upper - value
        cert = SolverCertificate(float(value), excess, iters, float(gap), tol, status,
                                 extra={"upper": float(upper), "psi": psi * scale})
        if status not in ("optimal", "optimal_inaccurate") or gap > tol:
            raise SolverError(f"form metric not certified to tol={tol:g} (status={status}, gap={gap:.3g})",
                              cert)
        return float(value), cert


class MaxIntrinsicProblem:
    """sup{rho(x,y) : rho intrinsic pseudo-metric with jump size <= S}.

    Variables are the pair values rho(u,v), u < v; constraints are
    nonnegativity, all triangle inequalities, the per-vertex intrinsic
    inequality and the jump cap on edges.
    """

    def __init__(self, graph: Graph, S: float):
        if not S > 0:
            raise ValueError("S must be positive")
        n = graph.n
        self.graph = graph
        self.S = float(S)
        pid = -np.ones((n, n), dtype=np.int64)
        iu, ju = np.triu_indices(n, 1)
        pid[iu, ju] = np.arange(len(iu))
        pid[ju, iu] = np.arange(len(iu))
        self.pid = pid
        npairs = len(iu)
        self._iu, self._ju = iu, ju
        rows, cols, vals = [], [], []
        r = 0
        for u in range(n):
            for w in range(u + 1, n):
                for v in range(n):
                    if v == u or v == w:
                        continue
                    rows += [r, r, r]
                    cols += [pid[u, w], pid[u, v], pid[v, w]]
                    vals += [1.0, -1.0, -1.0]
                    r += 1
        T = sp.csr_matrix((vals, (rows, cols)), shape=(r, npairs))
        tail, head, w = _directed_edges(graph)
        E = sp.csr_matrix((np.sqrt(w), (np.arange(len(tail)), pid[tail, head])),
                          shape=(len(tail), npairs))
        Agg = sp.csr_matrix((np.ones(len(tail)), (tail, np.arange(len(tail)))), shape=(n, len(tail)))
        edge_pairs = pid[graph.edge_u, graph.edge_v]
        self._r = cp.Variable(npairs)
        self._c = cp.Parameter(npairs)
        cons = [self._r >= 0, Agg @ cp.square(E @ self._r) <= graph.m,
                self._r[edge_pairs] <= self.S]
        if r:
            cons.append(T @ self._r <= 0)
        self._prob = cp.Problem(cp.Maximize(self._c @ self._r), cons)
        self._lock = threading.Lock()

    def table_from(self, r: np.ndarray) -> np.ndarray:
        n = self.graph.n
        t = np.zeros((n, n))
        t[self._iu, self._ju] = r
        t[self._ju, self._iu] = r
        return t

    def repair(self, table: np.ndarray) -> tuple[np.ndarray, float]:
        """Metric closure then rescale into the feasible set; returns (table, residual)."""
        g = self.graph
        t = np.maximum(table, 0.0)
        np.fill_diagonal(t, 0.0)
        tri = 0.0
        for k in range(g.n):
            tri = max(tri, float((t - (t[:, [k]] + t[[k], :])).max()))
        d = t.copy()
        for k in range(g.n):
            d = np.minimum(d, d[:, [k]] + d[[k], :])
        ratio = float(intrinsic_ratio(g, table).max())
        jump = float(table[g.edge_u, g.edge_v].max())
        residual = max(0.0, tri, ratio - 1.0, jump - self.S)
        scale = min(1.0, 1.0 / math.sqrt(max(float(intrinsic_ratio(g, d).max()), 1e-300)),
                    self.S / max(float(d[g.edge_u, g.edge_v].max()), 1e-300))
        return d * scale, residual

    def solve(self, x: str | int, y: str | int, tol: float = 1e-8) -> tuple[float, SolverCertificate]:
        # the parametrized problem is shared state; one solve at a time
        with self._lock:
            return self._solve(x, y, tol)

    def _solve(self, x: str | int, y: str | int, tol: float = 1e-8) -> tuple[float, SolverCertificate]:
        g = self.graph
        i = g.index[x] if isinstance(x, str) else int(x)
        j = g.index[y] if isinstance(y, str) else int(y)
        if i == j:
            return 0.0, SolverCertificate(0.0, 0.0, 0, 0.0, tol, "trivial", gap_kind="repair")
        c = np.zeros(len(self._iu))
        c[self.pid[i, j]] = 1.0
        self._c.value = c
        try:
            with warnings.catch_warnings():
                # an inaccurate status is recorded in the certificate instead
                warnings.simplefilter("ignore", UserWarning)
                self._prob.solve(solver=cp.CLARABEL, **SOLVER_OPTS)
        except cp.error.SolverError as exc:
            raise SolverError(f"max intrinsic metric solve failed: {exc}") from exc
        status = self._prob.status
        if self._r.value is None:
            raise SolverError(f"max intrinsic metric solve returned status {status}")
        raw = self.table_from(self._r.value)
        table, residual = self.repair(raw)
        value = float(table[i, j])
        gap = abs(float(raw[i, j]) - value)
        cert = SolverCertificate(value, residual, int(self._prob.solver_stats.num_iters or 0),
                                 gap, tol, status, gap_kind="repair", extra={"table": table})
        if status not in ("optimal", "optimal_inaccurate") or residual > tol or gap > tol:
            raise SolverError(f"max intrinsic metric not certified to tol={tol:g} "
                              f"(status={status}, residual={residual:.3g})", cert)
        return value, cert


_FORM_CACHE: "weakref.WeakKeyDictionary[Graph, dict]" = weakref.WeakKeyDictionary()
_MAXI_CACHE: "weakref.WeakKeyDictionary[Graph, dict]" = weakref.WeakKeyDictionary()
# problems are cached per graph and per support / S; each problem serialises its own solves
_CACHE_LOCK = threading.Lock()


def _form_problem(graph: Graph, support: VertexSet | None) -> FormMetricProblem:
    key = None if support is None else support.indices
    with _CACHE_LOCK:
        per = _FORM_CACHE.setdefault(graph, {})
        if key not in per:
            per[key] = FormMetricProblem(graph, support)
        return per[key]


def davies_metric(graph: Graph, x: str | int, y: str | int, tol: float = 1e-8,
                  support: VertexSet | None = None) -> tuple[float, SolverCertificate]:
    """rho_E(x, y) with a certificate (feasibility residual and duality gap)."""
    return _form_problem(graph, support).solve(x, y, tol)


def davies_metric_anchored(graph: Graph, x: str | int, y: str | int,
                           tol: float = 1e-8) -> float:
    """Same program with psi(y) = 0 pinned instead of a zero-mean constraint."""
    i = graph.index[x] if isinstance(x, str) else int(x)
    j = graph.index[y] if isinstance(y, str) else int(y)
    psi = cp.Variable(graph.n)
    tail, head, w = _directed_edges(graph)
    Dm = sp.csr_matrix((np.concatenate([np.sqrt(w), -np.sqrt(w)]),
                        (np.concatenate([np.arange(len(tail))] * 2), np.concatenate([tail, head]))),
                       shape=(len(tail), graph.n))
    Agg = sp.csr_matrix((np.ones(len(tail)), (tail, np.arange(len(tail)))), shape=(graph.n, len(tail)))
    prob = cp.Problem(cp.Maximize(psi[i] - psi[j]),
                      [Agg @ cp.square(Dm @ psi) <= 2.0 * graph.m, psi[j] == 0])
    prob.solve(solver=cp.CLARABEL, **SOLVER_OPTS)
    p = np.asarray(psi.value)
    scale = 1.0 / math.sqrt(max(1.0, float(energy_density(graph, p).max())))
    return float(scale * (p[i] - p[j]))


def max_intrinsic_metric(graph: Graph, x: str | int, y: str | int, S: float,
                         tol: float = 1e-8) -> tuple[float, SolverCertificate]:
    """rho_S(x, y): the largest value any intrinsic metric with jump size <= S takes."""
    with _CACHE_LOCK:
        per = _MAXI_CACHE.setdefault(graph, {})
        if S not in per:
            per[S] = MaxIntrinsicProblem(graph, S)
        problem = per[S]
    return problem.solve(x, y, tol)


def regularity_detail(graph: Graph, tol: float = 1e-8) -> tuple[float, tuple[str, str], SolverCertificate]:
    best = (-1.0, None, None)
    for u, v in zip(graph.edge_u, graph.edge_v):
        val, cert = davies_metric(graph, int(u), int(v), tol)
        if val > best[0]:
            best = (val, (graph.ids[u], graph.ids[v]), cert)
    return best


def regularity_constant(graph: Graph, tol: float = 1e-8) -> float:
    """S_reg = max over edges (u, v) of rho_E(u, v)."""
    return regularity_detail(graph, tol)[0]


def regularity_upper_estimate(graph: Graph) -> float:
    """sup over edges of sqrt(2 m(x) / b(x, y)), both orientations."""
    g = graph
    a = np.sqrt(2 * g.m[g.edge_u] / g.edge_b)
    b = np.sqrt(2 * g.m[g.edge_v] / g.edge_b)
    return float(max(a.max(), b.max()))
