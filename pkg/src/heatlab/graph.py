"""Finite weighted graphs (X, b, m) and the standard families used by the lab.

Graphs are immutable once built.  Vertices carry opaque string ids; internally
everything is indexed by position in ``Graph.ids``.  Undirected edges are stored
once under the canonical key (min index, max index) and the symmetric adjacency
matrix is materialised from that list, so symmetry holds by construction.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Raised when a vertex/edge specification violates a graph invariant."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Graph:
    """Locally finite connected graph ``b`` over the measure space ``(X, m)``."""

    def __init__(self, ids: Sequence[str], m: np.ndarray, eu: np.ndarray,
                 ev: np.ndarray, eb: np.ndarray, *, check_connected: bool = True):
        self.ids: tuple[str, ...] = tuple(ids)
        self.index: dict[str, int] = {v: i for i, v in enumerate(self.ids)}
        n = len(self.ids)
        self.m = _readonly(np.asarray(m, dtype=float).copy())
        self.edge_u = _readonly(np.asarray(eu, dtype=np.int64).copy())
        self.edge_v = _readonly(np.asarray(ev, dtype=np.int64).copy())
        self.edge_b = _readonly(np.asarray(eb, dtype=float).copy())
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        vals = np.concatenate([self.edge_b, self.edge_b])
        adj = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        self.adjacency = adj
        self.deg = _readonly(np.asarray(adj.sum(axis=1)).ravel())
        if check_connected and n > 1:
            ncomp, _ = connected_components(adj, directed=False)
            if ncomp != 1:
                raise GraphError(f"disconnected graph ({ncomp} components)")
        elif check_connected and n == 0:
            raise GraphError("empty vertex set")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_b)

    @property
    def Deg(self) -> np.ndarray:
        """Weighted vertex degree deg(x)/m(x)."""
        return self.deg / self.m

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.adjacency
        lo, hi = a.indptr[i], a.indptr[i + 1]
        return a.indices[lo:hi], a.data[lo:hi]

    def weight(self, u: str, v: str) -> float:
        return float(self.adjacency[self.index[u], self.index[v]])

    def indices(self, ids: Iterable[str]) -> np.ndarray:
        try:
            return np.array([self.index[v] for v in ids], dtype=np.int64)
        except KeyError as exc:
            raise GraphError(f"unknown vertex {exc.args[0]!r}") from None

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": v, "m": float(mm)} for v, mm in zip(self.ids, self.m)],
            "edges": [
                {"u": self.ids[u], "v": self.ids[v], "b": float(b)}
                for u, v, b in zip(self.edge_u, self.edge_v, self.edge_b)
            ],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), separators=(",", ":"))
        if path is not None:
            Path(path).write_text(text)
        return text

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.n_edges})"


def build_graph(vertex_spec: Mapping[str, float] | Iterable[tuple[str, float]],
                edge_spec: Iterable[tuple[str, str, float]]) -> Graph:
    """Validate a vertex/edge specification and return a :class:`Graph`.

    Duplicate entries for the same unordered pair are merged when their weights
    agree and rejected otherwise.
    """
    items = list(vertex_spec.items()) if isinstance(vertex_spec, Mapping) else list(vertex_spec)
    if not items:
        raise GraphError("empty vertex set")
    ids: list[str] = []
    index: dict[str, int] = {}
    m = np.empty(len(items))
    for i, (vid, mv) in enumerate(items):
        vid = str(vid)
        if vid in index:
            raise GraphError(f"duplicate vertex {vid!r}")
        mv = float(mv)
        if not (mv > 0 and math.isfinite(mv)):
            raise GraphError(f"nonpositive measure at {vid!r}")
        index[vid] = i
        ids.append(vid)
        m[i] = mv

    seen: dict[tuple[int, int], float] = {}
    for u, v, w in edge_spec:
        u, v, w = str(u), str(v), float(w)
        if u not in index or v not in index:
            missing = u if u not in index else v
            raise GraphError(f"unknown vertex {missing!r}")
        if u == v:
            raise GraphError(f"loop edge at {u!r}")
        if not (w > 0 and math.isfinite(w)):
            raise GraphError(f"nonpositive weight on ({u!r}, {v!r})")
        iu, iv = index[u], index[v]
        key = (iu, iv) if iu < iv else (iv, iu)
        if key in seen:
            if seen[key] != w:
                raise GraphError(f"asymmetric duplicate on ({u!r}, {v!r}): {seen[key]} != {w}")
            continue
        seen[key] = w
    if not seen and len(ids) > 1:
        raise GraphError("disconnected graph (no edges)")
    keys = sorted(seen)
    eu = np.array([k[0] for k in keys], dtype=np.int64)
    ev = np.array([k[1] for k in keys], dtype=np.int64)
    eb = np.array([seen[k] for k in keys], dtype=float)
    return Graph(ids, m, eu, ev, eb)


def graph_from_dict(data: Mapping) -> Graph:
    return build_graph([(v["id"], v["m"]) for v in data["vertices"]],
                       [(e["u"], e["v"], e["b"]) for e in data["edges"]])


def load_graph(path: str | Path) -> Graph:
    return graph_from_dict(json.loads(Path(path).read_text()))


# -- standard families ---------------------------------------------------------

@dataclass(frozen=True)
class IidUniform:
    """i.i.d. uniform conductances on [lo, hi], reproducible per edge key."""

    lo: float
    hi: float
    seed: int

    def __post_init__(self):
        if not self.lo > 0:
            raise GraphError("iid conductances need lo > 0 (weights must be positive)")
        if self.hi < self.lo:
            raise GraphError("iid conductances need hi >= lo")

    def __call__(self, u: str, v: str) -> float:
        return self.lo + (self.hi - self.lo) * keyed_uniform(self.seed, f"{u}|{v}")


def keyed_uniform(seed: int, key: str) -> float:
    """Uniform [0, 1) draw from a 64-bit keyed hash of ``(seed, key)``.

    Counter-based: the value depends only on the key, never on call order.
    """
    h = hashlib.blake2b(key.encode(), digest_size=8, key=str(int(seed)).encode())
    return (int.from_bytes(h.digest(), "little") >> 11) * 2.0 ** -53


def lattice_id(coords: Sequence[int]) -> str:
    return ",".join(str(int(c)) for c in coords)


def build_lattice_box(n: int, R: int, conductance: float | IidUniform = 1.0,
                      measure: float | str = 1.0) -> Graph:
    """Box {-R..R}^n of Z^n with nearest-neighbour edges.

    ``measure`` is a positive constant or ``"deg"`` for the normalizing measure.
    """
    if n < 1 or R < 1:
        raise GraphError("lattice box needs n >= 1 and R >= 1")
    side = np.arange(-R, R + 1)
    grids = np.meshgrid(*([side] * n), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    ids = [lattice_id(c) for c in coords]
    shape = (2 * R + 1,) * n
    flat = np.arange(coords.shape[0]).reshape(shape)
    eu, ev = [], []
    for axis in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        eu.append(flat[tuple(lo)].ravel())
        ev.append(flat[tuple(hi)].ravel())
    eu = np.concatenate(eu)
    ev = np.concatenate(ev)
    if isinstance(conductance, IidUniform):
        eb = np.array([conductance(ids[a], ids[b]) for a, b in zip(eu, ev)])
    else:
        c = float(conductance)
        if not c > 0:
            raise GraphError("conductance must be positive")
        eb = np.full(len(eu), c)
    order = np.lexsort((ev, eu))
    eu, ev, eb = eu[order], ev[order], eb[order]
    if isinstance(measure, str):
        if measure not in ("deg", "normalizing"):
            raise GraphError(f"unknown measure rule {measure!r}")
        deg = np.bincount(eu, eb, len(ids)) + np.bincount(ev, eb, len(ids))
        m = deg
    else:
        if not float(measure) > 0:
            raise GraphError("measure must be positive")
        m = np.full(len(ids), float(measure))
    return Graph(ids, m, eu, ev, eb)


@dataclass(frozen=True)
class SphereFunction:
    """s_k = floor(k^gamma) for k >= 1, s_0 = 1, s_{-1} = 0."""

    gamma: float

    def __post_init__(self):
        if not 0 < self.gamma < 2:
            raise GraphError("anti-tree gamma must lie in (0, 2)")

    def __call__(self, k: int) -> int:
        if k < 0:
            return 0
        if k == 0:
            return 1
        return max(1, int(math.floor(k ** self.gamma + 1e-9)))

    def sizes(self, K: int) -> list[int]:
        return [self(k) for k in range(K + 1)]


def antitree_id(k: int, i: int) -> str:
    return f"{k}:{i}"


def build_anti_tree(gamma: float, K: int) -> Graph:
    """Anti-tree with sphere function floor(k^gamma), standard weights, m = 1.

    Spheres S_0..S_K are present; vertices beyond level K are absent.
    """
    s = SphereFunction(gamma)
    if K < 1:
        raise GraphError("anti-tree needs K >= 1")
    sizes = s.sizes(K)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    ids = [antitree_id(k, i) for k in range(K + 1) for i in range(sizes[k])]
    eu, ev = [], []
    for k in range(K):
        a = np.arange(offsets[k], offsets[k + 1])
        b = np.arange(offsets[k + 1], offsets[k + 2])
        eu.append(np.repeat(a, len(b)))
        ev.append(np.tile(b, len(a)))
    eu = np.concatenate(eu)
    ev = np.concatenate(ev)
    return Graph(ids, np.ones(len(ids)), eu, ev, np.ones(len(eu)))


def antitree_level(vid: str) -> int:
    return int(vid.split(":", 1)[0])


# -- vertex sets ----------------------------------------------------------------

@dataclass(frozen=True)
class VertexSet:
    """Subset U of a host graph: sorted vertex indices plus cached m(U)."""

    graph: Graph = field(repr=False, compare=False)
    indices: tuple[int, ...]
    measure: float

    @classmethod
    def of(cls, graph: Graph, members: Iterable[int | str]) -> "VertexSet":
        idx = set()
        for v in members:
            i = graph.index[v] if isinstance(v, str) else int(v)
            if not 0 <= i < graph.n:
                raise GraphError(f"vertex index {i} outside graph")
            idx.add(i)
        ordered = tuple(sorted(idx))
        return cls(graph, ordered, float(graph.m[list(ordered)].sum()) if ordered else 0.0)

    @property
    def ids(self) -> list[str]:
        return [self.graph.ids[i] for i in self.indices]

    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, v) -> bool:
        i = self.graph.index[v] if isinstance(v, str) else int(v)
        return i in set(self.indices)

    def issubset(self, other: "VertexSet") -> bool:
        return set(self.indices) <= set(other.indices)


def ball(graph: Graph, metric, x: str | int, r: float) -> VertexSet:
    """Closed ball B_x(r) = {y : rho(x, y) <= r}."""
    if r < 0:
        raise GraphError("ball radius must be nonnegative")
    i = graph.index[x] if isinstance(x, str) else int(x)
    row = metric.row(i)
    return VertexSet.of(graph, np.flatnonzero(row <= r))
