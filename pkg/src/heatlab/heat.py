"""Heat kernels of graph Laplacians: finite graphs, Dirichlet exhaustion, exact Z.

Two independent finite backends are provided:

* ``dense``: eigendecomposition of the m-symmetrised Laplacian;
* ``expm``: uniformization, p_t = sum_k Pois(k; lam t) P^k (delta_y / m_y) with
  P = I - Delta / lam and lam = 2 max Deg + 1.  P is entrywise nonnegative, so
  every term is nonnegative and small entries keep full relative precision.
  Entries that would underflow are recomputed with log-domain propagation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, ive, logsumexp, pdtrc

from .families import AntiTreeFamily, LatticeFamily
from .graph import Graph, SphereFunction, VertexSet

DENSE_MAX = 2000
EXHAUST_MAX_VERTICES = 2 ** 16
UNDERFLOW = 1e-290
BACKENDS = ("dense", "expm")


class KernelError(ValueError):
    pass


def _as_indices(graph: Graph, items) -> np.ndarray:
    if items is None:
        return np.arange(graph.n)
    if isinstance(items, VertexSet):
        return np.asarray(items.indices, dtype=np.int64)
    out = [graph.index[v] if isinstance(v, str) else int(v) for v in items]
    return np.asarray(out, dtype=np.int64)


class LaplacianOperator:
    """Delta f(x) = (1/m(x)) sum_y b(x,y)(f(x) - f(y)), optionally restricted to U.

    The restriction keeps the full degree on the diagonal (Dirichlet condition).
    Vectors live on the support, indexed by ``support`` order.
    """

    def __init__(self, graph: Graph, support=None):
        self.graph = graph
        idx = np.arange(graph.n) if support is None else np.unique(_as_indices(graph, support))
        if idx.size == 0:
            raise KernelError("empty support")
        self.support = idx
        self.m = graph.m[idx]
        self.Deg = graph.Deg[idx]
        B = graph.adjacency[idx][:, idx].tocsr()
        self.B = B
        inv_m = sp.diags(1.0 / self.m)
        self.matrix = (sp.diags(self.Deg) - inv_m @ B).tocsr()
        r = sp.diags(1.0 / np.sqrt(self.m))
        self.symmetric = (sp.diags(self.Deg) - r @ B @ r).tocsr()

    @property
    def size(self) -> int:
        return int(self.support.size)

    def local(self, global_idx) -> np.ndarray:
        pos = np.searchsorted(self.support, global_idx)
        if np.any(pos >= self.size) or np.any(self.support[np.minimum(pos, self.size - 1)] != global_idx):
            raise KernelError("vertex outside the support")
        return pos

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.sum(self.m * f * g))

    def energy(self, f: np.ndarray) -> float:
        """E(f) = <Delta f, f>_m for f supported in U."""
        return self.inner(self.apply(f), f)


@dataclass
class HeatKernelSlice:
    """log p_t(x, y) on a (t, source, target) grid; values are exp(log_values)."""

    t: np.ndarray
    source_ids: list[str]
    target_ids: list[str]
    log_values: np.ndarray
    backend: str
    truncation: dict | None = None
    log_domain_t: list[float] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    def log_value(self, t_index: int, x: str, y: str) -> float:
        return float(self.log_values[t_index, self.source_ids.index(x), self.target_ids.index(y)])

    def value(self, t_index: int, x: str, y: str) -> float:
        return math.exp(self.log_value(t_index, x, y))

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x_id", "y_id", "value", "log_value", "backend", "radius"])
        radius = "" if not self.truncation else self.truncation.get("radius", "")
        for a, t in enumerate(self.t):
            for i, x in enumerate(self.source_ids):
                for j, y in enumerate(self.target_ids):
                    lv = float(self.log_values[a, i, j])
                    w.writerow([repr(float(t)), x, y, repr(math.exp(lv)), repr(lv), self.backend, radius])
        return buf.getvalue()


def _check_times(t_list) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t_list, dtype=float))
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise KernelError("times must be finite and nonnegative")
    return t


def _dense_kernel(op: LaplacianOperator, t: np.ndarray, cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
    lam, phi = np.linalg.eigh(op.symmetric.toarray())
    lam = np.maximum(lam, 0.0)
    scale = 1.0 / np.sqrt(np.outer(op.m[cols], op.m[rows]))
    out = np.empty((t.size, cols.size, rows.size))
    for a, tt in enumerate(t):
        if tt == 0:
            # exact delta / m instead of the rounded eigenbasis product
            out[a] = (cols[:, None] == rows[None, :]) / op.m[cols][:, None]
        else:
            out[a] = ((phi[cols] * np.exp(-tt * lam)) @ phi[rows].T) * scale
    return out


def log_poisson_tail(k: int, mean: float) -> float:
    """log P(N > k) for N ~ Poisson(mean), valid far into the tail."""
    if mean <= 0:
        return -math.inf
    if k + 1 > mean:
        j = k + 1
        lpmf = -mean + j * math.log(mean) - gammaln(j + 1)
        return lpmf - math.log1p(-mean / (j + 1))
    return math.log(max(pdtrc(k, mean), 1e-320))


def _uniformization_setup(op: LaplacianOperator):
    lam = 2.0 * float(op.Deg.max()) + 1.0
    P = (sp.identity(op.size, format="csr") - op.matrix / lam).tocsr()
    P.eliminate_zeros()
    return lam, P


def _coupled(P: sp.csr_matrix, cols, rows) -> np.ndarray:
    """(rows, cols) mask of pairs in one component; other entries are exactly zero."""
    _, label = connected_components(P, directed=False)
    return label[rows][:, None] == label[cols][None, :]


def _max_steps(lam: float, t_max: float) -> int:
    mu = lam * t_max
    return int(mu + 60 * math.sqrt(mu + 1) + 4000)


def _expm_linear(op, t, cols, rows, rtol):
    """Linear-domain uniformization; returns values and a per-t underflow flag."""
    lam, P = _uniformization_setup(op)
    coupled = _coupled(P, cols, rows)
    T = t.size
    v = np.zeros((op.size, cols.size))
    v[cols, np.arange(cols.size)] = 1.0 / op.m[cols]
    acc = np.zeros((T, rows.size, cols.size))
    mu = lam * t
    log_mu = np.log(np.where(mu > 0, mu, 1.0))
    done = mu == 0
    if done.any():
        acc[done] = v[rows]
    log_rtol = math.log(rtol)
    under = np.zeros(T, dtype=bool)
    kmax = _max_steps(lam, float(t.max()))
    for k in range(kmax + 1):
        live = ~done
        if not live.any():
            break
        lw = -mu + k * log_mu - gammaln(k + 1)
        active = live & (lw > -745.0)
        if active.any():
            vr = v[rows]
            for a in np.flatnonzero(active):
                acc[a] += math.exp(lw[a]) * vr
        if k % 8 == 0 or k == kmax:
            # P >= 0 with row sums <= 1, so every later iterate is bounded by max(P^k v)
            vmax = float(v.max())
            log_sup = math.log(vmax) if vmax > 0 else -math.inf
            for a in np.flatnonzero(live):
                if k + 1 < mu[a]:
                    continue
                tail = log_poisson_tail(k, mu[a]) + log_sup
                floor = float(acc[a][coupled].min(initial=math.inf))
                if tail <= log_rtol + math.log(max(floor, UNDERFLOW)):
                    done[a] = True
                    under[a] = floor < UNDERFLOW
        v = P @ v
    else:
        if not done.all():
            raise KernelError("uniformization did not converge within the step budget")
    return np.transpose(acc, (0, 2, 1)), under


def _padded_log_neighbors(P: sp.csr_matrix):
    n = P.shape[0]
    counts = np.diff(P.indptr)
    width = int(counts.max())
    nbr = np.zeros((n, width), dtype=np.int64)
    logw = np.full((n, width), -np.inf)
    for i in range(n):
        lo, hi = P.indptr[i], P.indptr[i + 1]
        nbr[i, : hi - lo] = P.indices[lo:hi]
        logw[i, : hi - lo] = np.log(P.data[lo:hi])
    return nbr, logw


def _expm_log(op, t, cols, rows, rtol):
    """Log-domain uniformization; exact in relative terms down to any magnitude."""
    lam, P = _uniformization_setup(op)
    nbr, logw = _padded_log_neighbors(P)
    coupled = _coupled(P, cols, rows)
    T = t.size
    lv = np.full((op.size, cols.size), -np.inf)
    lv[cols, np.arange(cols.size)] = -np.log(op.m[cols])
    acc = np.full((T, rows.size, cols.size), -np.inf)
    mu = lam * t
    log_mu = np.log(np.where(mu > 0, mu, 1.0))
    done = mu == 0
    if done.any():
        acc[done] = lv[rows][None]
    log_rtol = math.log(rtol)
    kmax = _max_steps(lam, float(t.max()))
    for k in range(kmax + 1):
        live = ~done
        if not live.any():
            break
        lw = -mu + k * log_mu - gammaln(k + 1)
        lr = lv[rows]
        for a in np.flatnonzero(live):
            np.logaddexp(acc[a], lw[a] + lr, out=acc[a])
        if k % 8 == 0 or k == kmax:
            log_sup = float(lv.max())
            for a in np.flatnonzero(live):
                if k + 1 < mu[a]:
                    continue
                floor = float(acc[a][coupled].min(initial=math.inf))
                if floor > -math.inf and log_poisson_tail(k, mu[a]) + log_sup <= log_rtol + floor:
                    done[a] = True
        with np.errstate(invalid="ignore"):
            lv = logsumexp(logw[:, :, None] + lv[nbr], axis=1)
    else:
        if not done.all():
            raise KernelError("log-domain uniformization did not converge")
    return np.transpose(acc, (0, 2, 1))


def heat_kernel_finite(graph: Graph, t_list, sources=None, targets=None, backend: str = "expm",
                       support=None, domain: str = "auto", rtol: float = 1e-14) -> HeatKernelSlice:
    """p_t(x, y) for x in ``sources``, y in ``targets`` (Dirichlet on ``support``).

    ``domain`` applies to the expm backend: ``linear``, ``log`` or ``auto``
    (linear first, log-domain recomputation for times where entries underflow).
    """
    if backend not in BACKENDS:
        raise KernelError(f"unknown backend {backend!r}")
    t = _check_times(t_list)
    op = LaplacianOperator(graph, support)
    src = _as_indices(graph, sources)
    tgt = _as_indices(graph, targets)
    cols, rows = op.local(src), op.local(tgt)
    log_t: list[float] = []
    if backend == "dense":
        if op.size > DENSE_MAX:
            raise KernelError(f"dense backend limited to {DENSE_MAX} vertices (got {op.size})")
        vals = _dense_kernel(op, t, cols, rows)
        with np.errstate(divide="ignore"):
            logs = np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), -np.inf)
    else:
        if domain == "log":
            logs = _expm_log(op, t, cols, rows, rtol)
            log_t = [float(x) for x in t]
        else:
            vals, under = _expm_linear(op, t, cols, rows, rtol)
            with np.errstate(divide="ignore"):
                logs = np.log(vals)
            if domain == "auto" and under.any():
                sel = np.flatnonzero(under)
                logs[sel] = _expm_log(op, t[sel], cols, rows, rtol)
                log_t = [float(x) for x in t[sel]]
    ids = graph.ids
    return HeatKernelSlice(t, [ids[i] for i in src], [ids[j] for j in tgt], logs, backend,
                           None, log_t)


@dataclass(frozen=True)
class TruncationRecord:
    family: dict
    radius: int
    previous_radius: int | None
    radii: tuple[int, ...]
    max_abs_gap: float
    max_rel_gap: float
    tol: float
    rtol: float | None
    converged: bool
    monotone: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def heat_kernel_exhaustion(family: LatticeFamily | AntiTreeFamily, t_list, sources, targets,
                           tol: float = 1e-12, rtol: float | None = None, start: int = 8,
                           max_vertices: int = EXHAUST_MAX_VERTICES,
                           kernel_rtol: float = 1e-14) -> tuple[HeatKernelSlice, TruncationRecord]:
    """Dirichlet kernels on a doubling schedule of truncations until two agree.

    Convergence: |p^{B_R} - p^{B_{R/2}}| <= tol (and <= rtol p^{B_R} when rtol
    is given) on every requested entry.  Values must not decrease along the
    schedule; a decrease raises ``KernelError``.
    """
    t = _check_times(t_list)
    sources, targets = list(sources), list(targets)
    need = family.radius_needed(sources + targets)
    R = start
    while R < need:
        R *= 2
    prev, prev_R, radii = None, None, []
    gap_abs = gap_rel = math.inf
    monotone = True
    while True:
        if family.size(R) > max_vertices:
            if prev is None:
                raise KernelError("no truncation fits the vertex budget")
            break
        host, support = family.truncation(R)
        cur = heat_kernel_finite(host, t, sources, targets, "expm", support, "auto", kernel_rtol)
        radii.append(R)
        if prev is not None:
            a, b = cur.values, prev.values
            if np.any(cur.log_values < prev.log_values + math.log1p(-1e-10)):
                raise KernelError(f"Dirichlet kernels decreased between radius {prev_R} and {R}")
            gap_abs = float(np.max(np.abs(a - b)))
            with np.errstate(invalid="ignore"):
                gap_rel = float(np.max(np.expm1(cur.log_values - prev.log_values)))
            ok = gap_abs <= tol and (rtol is None or gap_rel <= rtol)
            if ok:
                record = TruncationRecord(family.describe(), R, radii[-2], tuple(radii), gap_abs,
                                          gap_rel, tol, rtol, True, monotone)
                cur.truncation = record.to_dict()
                return cur, record
        elif np.all(t == 0):
            record = TruncationRecord(family.describe(), R, None, tuple(radii), 0.0, 0.0, tol,
                                      rtol, True, monotone)
            cur.truncation = record.to_dict()
            return cur, record
        prev, prev_R = cur, R
        R *= 2
    record = TruncationRecord(family.describe(), prev_R, radii[-2] if len(radii) > 1 else None,
                              tuple(radii), gap_abs, gap_rel, tol, rtol, False, monotone)
    prev.truncation = record.to_dict()
    return prev, record


# ---------------------------------------------------------------------------
# exact kernel of Z with b = 1, m = 1

_GL_NODES = {}


def _gauss_legendre(n: int):
    if n not in _GL_NODES:
        _GL_NODES[n] = np.polynomial.legendre.leggauss(n)
    return _GL_NODES[n]


def _composite_gl(f, a: float, b: float, pieces: int = 16, order: int = 20) -> float:
    x, w = _gauss_legendre(order)
    edges = np.linspace(a, b, pieces + 1)
    mid, half = (edges[:-1] + edges[1:]) / 2, (edges[1:] - edges[:-1]) / 2
    return float(np.sum(half[:, None] * w[None, :] * f(mid[:, None] + half[:, None] * x[None, :])))


def adaptive_gauss_legendre(f, a: float, b: float, rtol: float = 1e-12, order: int = 20,
                            max_depth: int = 30, scale: float | None = None) -> float:
    """Integrate f on [a, b] by bisection until each piece matches its halves.

    The error budget is rtol * scale spread over [a, b] in proportion to length;
    ``scale`` defaults to a coarse estimate of the integral itself.
    """
    x, w = _gauss_legendre(order)

    def rule(lo, hi):
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        return half * float(np.dot(w, f(mid + half * x)))

    if scale is None:
        scale = abs(_composite_gl(f, a, b))
    budget = rtol * max(scale, 1e-300) / (b - a)
    stack = [(a, b, rule(a, b), 0)]
    total = 0.0
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = (lo + hi) / 2
        left, right = rule(lo, mid), rule(mid, hi)
        err = abs(left + right - whole)
        if err <= budget * (hi - lo) or err <= 64 * np.finfo(float).eps * abs(left + right) \
                or depth >= max_depth:
            total += left + right
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return total


def log_exact_integer_line_kernel(d: int, t: float, rtol: float = 1e-12) -> float:
    """log p_t(0, d) on Z from the integral representation.

    With z = sin(theta) and phi = pi/2 - theta,
    p = t^d / (sqrt(pi) Gamma(d + 1/2)) * int_0^pi sin^{2d}(phi) e^{-4t sin^2(phi/2)} dphi,
    a form free of cancellation near the peak.  The integrand is normalised by
    its maximum so the quadrature never underflows.
    """
    d = int(d)
    if d < 0:
        raise KernelError("distance must be a nonnegative integer")
    if not t > 0:
        raise KernelError("t must be positive")
    if d == 0:
        peak, g_star, sin_peak = 0.0, 0.0, 1.0
    else:
        root = math.sqrt(d * d + 4 * t * t)
        c = 2 * t / (d + root)                       # cos(peak)
        one_minus_c = (d + d * d / (root + 2 * t)) / (d + root)
        sin_peak = math.sqrt(one_minus_c * (1 + c))
        peak = math.atan2(sin_peak, c)
        g_star = 2 * d * math.log(sin_peak) - 2 * t * one_minus_c

    def g(phi):
        # g(phi) - g(peak), each difference formed without cancellation
        out = -4 * t * np.sin((phi - peak) / 2) * np.sin((phi + peak) / 2)
        if d:
            sn = np.sin(phi) / sin_peak
            with np.errstate(divide="ignore"):
                out = out + 2 * d * np.log(np.where(sn > 0, sn, 0.0))
        return np.exp(out)

    curv = 2 * d / max(math.sin(peak), 1e-300) ** 2 + 2 * t * math.cos(peak) if d else 2 * t
    width = 1.0 / math.sqrt(max(curv, 1e-12))
    lo, hi = 0.0, math.pi
    cuts = sorted({min(hi, max(lo, peak + k * width)) for k in (-40, -10, -3, 0, 3, 10, 40)} | {lo, hi})
    pieces = [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]
    rough = sum(_composite_gl(g, a, b) for a, b in pieces)
    # the error budget is shared across pieces, relative to the whole integral
    J = sum(adaptive_gauss_legendre(g, a, b, rtol / 4, scale=rough * (b - a) / (hi - lo))
            for a, b in pieces)
    return d * math.log(t) - 0.5 * math.log(math.pi) - gammaln(d + 0.5) + g_star + math.log(J)


def exact_integer_line_kernel(d: int, t: float, rtol: float = 1e-12) -> float:
    """p_t(x, y) on Z (b = 1, m = 1) with |x - y| = d."""
    return math.exp(log_exact_integer_line_kernel(d, t, rtol))


def bessel_line_kernel(d: int, t: float) -> float:
    """Same value through the modified Bessel identity e^{-2t} I_d(2t)."""
    return float(ive(d, 2 * t))


# ---------------------------------------------------------------------------
# Dirichlet eigenvalues


def lanczos_smallest(A, tol: float = 1e-11, max_dim: int | None = None, seed: int = 0) -> float:
    """Smallest eigenvalue of a symmetric operator by Lanczos with full reorthogonalization."""
    n = A.shape[0]
    k = n if max_dim is None else min(n, max_dim)
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, k))
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    alphas, betas = [], []
    theta = math.nan
    for j in range(k):
        Q[:, j] = q
        w = A @ q
        a = float(q @ w)
        w = w - a * q - (betas[-1] * Q[:, j - 1] if j else 0.0)
        for _ in range(2):
            w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        b = float(np.linalg.norm(w))
        alphas.append(a)
        if j % 5 == 4 or j == k - 1 or b < 1e-13:
            vals, vecs = eigh_tridiagonal(np.array(alphas), np.array(betas),
                                          select="i", select_range=(0, 0))
            theta = float(vals[0])
            if b * abs(vecs[-1, 0]) < tol or b < 1e-13:
                return theta
        betas.append(b)
        q = w / b
    return theta


def dirichlet_lambda(graph: Graph, U, method: str = "auto") -> float:
    """Bottom of the spectrum of the Laplacian restricted to functions on U."""
    idx = _as_indices(graph, U)
    if idx.size == 0:
        raise KernelError("U must be nonempty")
    op = LaplacianOperator(graph, idx)
    if method == "auto":
        method = "dense" if op.size <= DENSE_MAX else "lanczos"
    if method == "dense":
        return float(max(np.linalg.eigvalsh(op.symmetric.toarray())[0], 0.0))
    if method == "lanczos":
        return max(lanczos_smallest(op.symmetric), 0.0)
    raise KernelError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# anti-tree kernels through radial lumping


def antitree_quotient(gamma: float, K: int, source_level: int) -> tuple[Graph, np.ndarray]:
    """Quotient graph of the anti-tree cut at level K, seen from one vertex x.

    Vertices on a sphere are interchangeable, so with x split off as its own
    cell the partition {x}, S_k minus x, S_j (j != k) is equitable.  The cells
    form a weighted graph with m(A) = |A| and b(A, C) = |A||C| for cells on
    adjacent spheres; its Laplacian is the lumped one, so p_t(x, y) equals the
    quotient kernel p'_t(x, [y]).  Sphere K+1 is included as a host layer and
    the returned support (cells up to level K) gives the Dirichlet truncation.
    """
    if not 0 <= source_level <= K:
        raise KernelError("source level outside the truncation")
    s = SphereFunction(gamma).sizes(K + 1)
    ids, m, level = [], [], []
    for j in range(K + 2):
        if j == source_level:
            ids.append("x")
            m.append(1.0)
            level.append(j)
            if s[j] > 1:
                ids.append(f"S{j}-x")
                m.append(float(s[j] - 1))
                level.append(j)
        else:
            ids.append(f"S{j}")
            m.append(float(s[j]))
            level.append(j)
    level = np.array(level)
    mm = np.array(m)
    eu, ev = np.nonzero(np.triu(np.abs(level[:, None] - level[None, :]) == 1))
    q = Graph(ids, mm, eu, ev, mm[eu] * mm[ev])
    return q, np.flatnonzero(level <= K)


def antitree_lumped_kernel(gamma: float, K: int, source_level: int, t_list,
                           backend: str = "dense") -> dict:
    """log p_t(x, .) on the Dirichlet-truncated anti-tree, x on ``source_level``.

    Keys: "diag" (y = x), "same" (y on x's sphere) and the integer level of y.
    The dense backend loses relative accuracy on values far below the largest
    entries; use ``expm`` when those matter.
    """
    q, support = antitree_quotient(gamma, K, source_level)
    targets = [q.ids[i] for i in support]
    sl = heat_kernel_finite(q, t_list, ["x"], targets, backend, support)
    out: dict = {"t": sl.t}
    for j, cid in enumerate(targets):
        key = "diag" if cid == "x" else ("same" if cid.endswith("-x") else int(cid[1:]))
        out[key] = sl.log_values[:, 0, j]
    if backend == "dense" and not np.all(np.isfinite(out["diag"])):
        raise KernelError("lumped kernel lost positivity")
    return out
