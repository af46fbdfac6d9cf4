"""Path pseudo-metrics on graphs and the intrinsic-metric diagnostic."""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .graph import Graph

DENSE_LIMIT = 5000
TRIANGLE_TOL = 1e-9


class PseudoMetric:
    """Symmetric pairwise distances on a graph's vertex set.

    Dense (full table) up to ``DENSE_LIMIT`` vertices, otherwise rows are
    produced lazily by ``row_fn`` and cached.
    """

    def __init__(self, graph: Graph, provenance: str, *, table: np.ndarray | None = None,
                 row_fn: Callable[[int], np.ndarray] | None = None,
                 jump_bound: float | None = None):
        if table is None and row_fn is None:
            raise ValueError("PseudoMetric needs a table or a row function")
        self.graph = graph
        self.provenance = provenance
        self.jump_bound = jump_bound
        self._table = None
        if table is not None:
            t = np.asarray(table, dtype=float)
            if t.shape != (graph.n, graph.n):
                raise ValueError("metric table shape does not match the graph")
            t.setflags(write=False)
            self._table = t
        self._row_fn = row_fn
        self._rows: dict[int, np.ndarray] = {}

    @property
    def is_dense(self) -> bool:
        return self._table is not None

    def row(self, i: int) -> np.ndarray:
        if self._table is not None:
            return self._table[i]
        if i not in self._rows:
            r = np.asarray(self._row_fn(i), dtype=float)
            r.setflags(write=False)
            self._rows[i] = r
        return self._rows[i]

    def value(self, x: str | int, y: str | int) -> float:
        i = self.graph.index[x] if isinstance(x, str) else int(x)
        j = self.graph.index[y] if isinstance(y, str) else int(y)
        return float(self.row(i)[j])

    def table(self) -> np.ndarray:
        if self._table is None:
            return np.vstack([self.row(i) for i in range(self.graph.n)])
        return self._table

    def submatrix(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self._table is not None:
            return self._table[np.ix_(rows, cols)]
        return np.vstack([self.row(i)[cols] for i in rows])

    def edge_values(self) -> np.ndarray:
        g = self.graph
        if self._table is not None:
            return self._table[g.edge_u, g.edge_v]
        return np.array([self.row(u)[v] for u, v in zip(g.edge_u, g.edge_v)])

    def jump_size(self) -> float:
        ev = self.edge_values()
        return float(ev.max()) if len(ev) else 0.0

    def scaled(self, factor: float, provenance: str | None = None) -> "PseudoMetric":
        jb = None if self.jump_bound is None else self.jump_bound * factor
        if self._table is not None:
            return PseudoMetric(self.graph, provenance or f"{self.provenance}*{factor:g}",
                                table=self._table * factor, jump_bound=jb)
        fn = self._row_fn
        return PseudoMetric(self.graph, provenance or f"{self.provenance}*{factor:g}",
                            row_fn=lambda i: fn(i) * factor, jump_bound=jb)

    def volume(self, x: int, radii) -> np.ndarray:
        """m(B_x(r)) for each r in ``radii`` (closed balls)."""
        row = self.row(x)
        order = np.argsort(row, kind="stable")
        cum = np.cumsum(self.graph.m[order])
        k = np.searchsorted(row[order], np.asarray(radii, dtype=float), side="right")
        return np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)

    def check_axioms(self, sample: int | None = None, seed: int = 0,
                     tol: float = TRIANGLE_TOL) -> float:
        """Largest violation of symmetry/identity/triangle on (sampled) triples."""
        t = self.table()
        worst = max(float(np.abs(t - t.T).max()), float(np.abs(np.diag(t)).max()),
                    float(max(0.0, -t.min())))
        n = t.shape[0]
        if sample is None and n <= 200:
            for k in range(n):
                worst = max(worst, float((t - (t[:, [k]] + t[[k], :])).max()))
        else:
            rng = np.random.default_rng(seed)
            tri = rng.integers(0, n, size=(sample or 20000, 3))
            a, b, c = tri.T
            worst = max(worst, float((t[a, c] - t[a, b] - t[b, c]).max()))
        return worst

    def to_csv(self, pairs=None, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        buf.write(f"# provenance={self.provenance}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_id", "y_id", "value"])
        ids = self.graph.ids
        if pairs is None:
            pairs = [(i, j) for i in range(self.graph.n) for j in range(self.graph.n)]
        for i, j in pairs:
            w.writerow([ids[i], ids[j], repr(float(self.row(i)[j]))])
        return buf.getvalue()


def _weighted_metric(graph: Graph, edge_w: np.ndarray, provenance: str,
                     jump_bound: float | None) -> PseudoMetric:
    n = graph.n
    W = sp.csr_matrix((edge_w, (graph.edge_u, graph.edge_v)), shape=(n, n))
    if n <= DENSE_LIMIT:
        table = dijkstra(W, directed=False)
        table = np.minimum(table, table.T)
        return PseudoMetric(graph, provenance, table=table, jump_bound=jump_bound)
    return PseudoMetric(graph, provenance, jump_bound=jump_bound,
                        row_fn=lambda i: dijkstra(W, directed=False, indices=i))


def combinatorial_distance(graph: Graph, source: str | int) -> np.ndarray:
    """Hop distances d(x, .) by breadth-first search."""
    s = graph.index[source] if isinstance(source, str) else int(source)
    dist = np.full(graph.n, -1, dtype=np.int64)
    dist[s] = 0
    q = deque([s])
    a = graph.adjacency
    while q:
        u = q.popleft()
        for v in a.indices[a.indptr[u]:a.indptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def combinatorial_metric(graph: Graph) -> PseudoMetric:
    return _weighted_metric(graph, np.ones(graph.n_edges), "combinatorial", None)


def path_degree_weights(graph: Graph, S: float) -> np.ndarray:
    """Per-edge lengths S ∧ sqrt(m/deg)(x) ∧ sqrt(m/deg)(y)."""
    if not S > 0:
        raise ValueError("jump size S must be positive")
    r = np.sqrt(graph.m / graph.deg)
    return np.minimum(S, np.minimum(r[graph.edge_u], r[graph.edge_v]))


def path_degree_metric(graph: Graph, S: float) -> PseudoMetric:
    """Intrinsic path metric with jump size at most S."""
    return _weighted_metric(graph, path_degree_weights(graph, S), "path-degree", S)


def chemical_distance(graph: Graph) -> PseudoMetric:
    """Path metric with edge lengths sqrt((m(x) ∧ m(y)) / b(x, y))."""
    m = graph.m
    w = np.sqrt(np.minimum(m[graph.edge_u], m[graph.edge_v]) / graph.edge_b)
    return _weighted_metric(graph, w, "chemical", None)


@dataclass(frozen=True)
class IntrinsicReport:
    max_ratio: float
    jump_size: float
    worst_vertex: str
    is_intrinsic: bool


def check_intrinsic(graph: Graph, metric: PseudoMetric, tol: float = 1e-12) -> IntrinsicReport:
    """max_x sum_y b(x,y) rho(x,y)^2 / m(x) and the measured jump size."""
    ev = metric.edge_values()
    contrib = graph.edge_b * ev ** 2
    s = np.bincount(graph.edge_u, contrib, graph.n) + np.bincount(graph.edge_v, contrib, graph.n)
    ratio = s / graph.m
    k = int(np.argmax(ratio))
    mx = float(ratio[k])
    return IntrinsicReport(mx, float(ev.max()) if len(ev) else 0.0, graph.ids[k], mx <= 1 + tol)


def intrinsic_ratio(graph: Graph, table: np.ndarray) -> np.ndarray:
    """Per-vertex sum_y b rho^2 / m for an arbitrary dense table."""
    ev = table[graph.edge_u, graph.edge_v]
    contrib = graph.edge_b * ev ** 2
    s = np.bincount(graph.edge_u, contrib, graph.n) + np.bincount(graph.edge_v, contrib, graph.n)
    return s / graph.m


def is_finite_metric(metric: PseudoMetric) -> bool:
    return bool(np.isfinite(metric.row(0)).all())


def floyd_warshall(graph: Graph, edge_w: np.ndarray) -> np.ndarray:
    """Plain O(n^3) all-pairs shortest paths; used as an independent check."""
    n = graph.n
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w in zip(graph.edge_u, graph.edge_v, edge_w):
        if w < d[u, v]:
            d[u, v] = d[v, u] = w
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d
