"""Composite campaigns assembled from the verifier primitives.

Each campaign fixes a graph family, a metric and a grid, computes kernels
and metric values, and returns a report with a verdict and the measured
constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bounds import ErrorParams, phi, regular_function_check, tau_rho_and_psi, zeta
from .families import AntiTreeRadial, LatticeFamily, antitree_dimension, line_ball_volume
from .graph import Graph, IidUniform, VertexSet, antitree_id, build_graph, build_lattice_box, lattice_id
from .heat import (HeatKernelSlice, antitree_lumped_kernel, heat_kernel_exhaustion,
                   heat_kernel_finite)
from .metrics import PseudoMetric, chemical_distance, check_intrinsic, path_degree_metric
from .optimal import davies_metric, max_intrinsic_metric, regularity_constant
from .oracles import (MAX_DAVIES_VERTICES, MAX_RHO_S_VERTICES, davies_oracle,
                      max_intrinsic_oracle)
from .parallel import pmap
from .verify import (LOG_TOL, TRUNCATION_NOTE, BoundReport, PreconditionError, _kernel_for_pairs,
                     build_report, g_report, jsonable, log_grid, vd_report, verify_g)

ANTITREE_T_MIN = 2 * 72 ** 2


def minimal_constant(v, a) -> np.ndarray:
    """Per point, the least C > 0 with ln C - a / C >= v (a >= 0).

    ln C - a / C is increasing in C, so bisection in u = ln C converges; the
    bracket [v, max(v, ln a) + 1] always contains the root.
    """
    v = np.asarray(v, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), v.shape)
    out = np.exp(v)
    pos = a > 0
    if not pos.any():
        return out
    vv, aa = v[pos], a[pos]
    lo = vv.copy()
    hi = np.maximum(vv, np.log(aa)) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ok = mid - aa * np.exp(-mid) >= vv
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(hi - lo <= 1e-14 * np.maximum(1.0, np.abs(hi))):
            break
    out[pos] = np.exp(hi)
    return out


# ---------------------------------------------------------------------------
# FK => G and VD with error functions


@dataclass
class MainForwardReport:
    g: BoundReport
    vd: BoundReport
    psi_limit: dict
    relaxed: bool
    c_max: float
    single_constant: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable({"g": self.g.to_dict(), "vd": self.vd.to_dict(), "psi_limit": self.psi_limit,
                         "hypothesis_relaxed": self.relaxed, "c_max": self.c_max,
                         "single_constant": self.single_constant, "passed": self.passed,
                         "extra": self.extra})


def psi_limit_sweep(params: ErrorParams, rho: float, Deg_x: float, Deg_y: float, t_values,
                    limit_tol: float = 1e-2) -> dict:
    """log Psi along increasing t: nonincreasing and below ``limit_tol`` at the end."""
    t = np.asarray(t_values, dtype=float)
    lp = np.asarray(tau_rho_and_psi(t, rho, params.S, Deg_x, Deg_y, params)[1], dtype=float)
    mono = bool(np.all(np.diff(lp) <= 1e-15))
    return {"t": t.tolist(), "log_psi": lp.tolist(), "nonincreasing": mono,
            "final_log_psi": float(lp[-1]), "limit_tol": limit_tol,
            "passed": mono and float(lp[-1]) <= limit_tol}


def _compose_main(g: BoundReport, vd: BoundReport, psi: dict, relaxed: bool, c_max: float,
                  extra: dict | None = None) -> MainForwardReport:
    single = max(g.fitted_constant or 0.0, vd.fitted_constant or 0.0)
    for rep in (g, vd):
        if relaxed:
            rep.notes.append("hypothesis relaxed: r < 1000 S")
    return MainForwardReport(g, vd, psi, relaxed, c_max, single,
                             bool(g.passed and vd.passed and psi["passed"] and single <= c_max),
                             dict(extra or {}))


def theorem_main_forward(graph: Graph, metric: PseudoMetric, S: float, r: float, n: float,
                         t_grid, pairs, *, c_max: float = 1e3, vd_radii=None,
                         kernel: HeatKernelSlice | None = None) -> MainForwardReport:
    """Fit C in G(C Psi, n) and VD(C Phi, n) on a finite graph (its own space X)."""
    params = ErrorParams(n, r, S)
    t = np.asarray(t_grid, dtype=float)
    t = t[t > 0]
    if kernel is None:
        kernel, _ = _kernel_for_pairs(graph, t, pairs, None, "expm")
    g = verify_g(graph, kernel, metric, S, n, pairs, psi=params, fit=True, c_max=c_max,
                 campaign="main-forward-g")
    centers = list(dict.fromkeys([p[0] for p in pairs] + [p[1] for p in pairs]))
    if vd_radii is None:
        ev = metric.edge_values()
        diam = float(metric.table().max()) if metric.is_dense else float(ev.sum())
        vd_radii = np.logspace(math.log10(ev[ev > 0].min()), math.log10(max(diam, ev.max())), 30)
    Deg = graph.Deg

    def log_phi(c, rad):
        return phi(params, Deg[graph.index[c]], rad)

    def log_volume(c, rad):
        return np.log(metric.volume(graph.index[c], rad))

    vd = vd_report("main-forward-vd", centers, vd_radii, log_volume, n, log_phi, fit=True,
                   c_max=c_max, provenance={"graph_hash": graph.content_hash(),
                                            "metric": metric.provenance})
    far = max(pairs, key=lambda p: metric.value(*p))
    psi = psi_limit_sweep(params, metric.value(*far), Deg[graph.index[far[0]]],
                          Deg[graph.index[far[1]]], np.logspace(math.log10(t.max()), 24, 41))
    return _compose_main(g, vd, psi, r < 1000 * S, c_max)


def theorem_main_forward_line(r: float = 750.0, S: float = 1 / math.sqrt(2), n: float = 1.0,
                              t_grid=None, window: int = 200, c_max: float = 1e3,
                              tol: float = 1e-12, rtol: float = 1e-9) -> MainForwardReport:
    """FK => G & VD on Z with unit weights and measure, kernels by Dirichlet exhaustion.

    Z is translation invariant, so pairs with |x|, |y| <= window reduce to the
    column from 0 with d = |x - y| <= 2 window.  The path-degree metric is
    d * min(S, 2^{-1/2}) and balls are intervals, so volumes are analytic.
    """
    if t_grid is None:
        t_grid = log_grid(1.0, 1e4, 10)
    t = np.asarray(t_grid, dtype=float)
    params = ErrorParams(n, r, S)
    d = np.arange(2 * window + 1)
    targets = [str(k) for k in d]
    kernel, record = heat_kernel_exhaustion(LatticeFamily(1), t, ["0"], targets, tol=tol, rtol=rtol)
    step = min(S, 1 / math.sqrt(2))
    host, support = LatticeFamily(1).truncation(64)
    pd_row = path_degree_metric(host, S).row(host.index["0"])
    pd_check = float(max(abs(pd_row[host.index[str(k)]] - k * step) for k in range(40)))
    rho = d * step
    pairs = [("0", s) for s in targets]
    vol = line_ball_volume(np.sqrt(t), step)[:, None]
    log_psi = tau_rho_and_psi(t[:, None], rho[None, :], S, 2.0, 2.0, params)[1]
    prov = {"family": "Z, b = 1, m = 1", "metric": "path-degree", "truncation": record.to_dict(),
            "kernel_backend": "expm (exhaustion)"}
    notes = [TRUNCATION_NOTE, "pairs reduced to d = |x - y| by translation invariance"]
    g = g_report("main-forward-g", t, pairs, kernel.log_values[:, 0, :], vol, vol, rho, S, log_psi,
                 n, fit=True, c_max=c_max, provenance=prov, notes=notes)

    def log_volume(c, rad):
        return np.log(line_ball_volume(rad, step))

    vd = vd_report("main-forward-vd", ["0"], np.logspace(-1, 4, 51), log_volume, n,
                   lambda c, rad: phi(params, 2.0, rad), fit=True, c_max=c_max,
                   provenance={"family": "Z, b = 1, m = 1", "metric": "path-degree"})
    psi = psi_limit_sweep(params, float(rho[-1]), 2.0, 2.0, np.logspace(4, 24, 41))
    return _compose_main(g, vd, psi, r < 1000 * S, c_max,
                         {"path_degree_step": step, "path_degree_check": pd_check})


# ---------------------------------------------------------------------------
# comparison of rho_S and rho_E


def random_connected_graph(n: int, seed: int, p: float = 0.35, b_range=(0.5, 2.0),
                           m_range=(0.5, 2.0)) -> Graph:
    """Random spanning tree plus independent extra edges; weights uniform in the ranges."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = {}
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges[(min(a, b), max(a, b))] = None
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) not in edges and rng.random() < p:
                edges[(a, b)] = None
    keys = sorted(edges)
    bw = rng.uniform(*b_range, size=len(keys))
    mw = rng.uniform(*m_range, size=n)
    return build_graph({str(k): float(mw[k]) for k in range(n)},
                       [(str(a), str(b), float(w)) for (a, b), w in zip(keys, bw)])


@dataclass
class LemmaReport:
    S: float
    tol: float
    regularity_constant: float
    reverse_applies: bool
    pairs: list
    violations_lower: list
    violations_reverse: list
    oracle_gaps: dict
    graph_hash: str

    @property
    def passed(self) -> bool:
        return not self.violations_lower and not self.violations_reverse

    def to_dict(self) -> dict:
        return jsonable({**self.__dict__, "passed": self.passed})


def lemma_metric_comparison(graph: Graph, S: float = 1.0, tol: float = 1e-5,
                            solver_tol: float = 1e-7, reg_tol: float = 1e-6,
                            oracle_pair: tuple[str, str] | None = None) -> LemmaReport:
    """sqrt 2 rho_S <= rho_E on all pairs; rho_E <= sqrt 2 rho_S when S_reg <= sqrt 2 S."""
    reg = regularity_constant(graph, solver_tol)
    reverse = reg <= math.sqrt(2) * S + reg_tol
    rows, low, rev = [], [], []
    ids = graph.ids
    for i in range(graph.n):
        for j in range(i + 1, graph.n):
            rs = max_intrinsic_metric(graph, ids[i], ids[j], S, solver_tol)[0]
            re = davies_metric(graph, ids[i], ids[j], solver_tol)[0]
            row = {"x": ids[i], "y": ids[j], "rho_S": rs, "rho_E": re,
                   "gap_lower": re - math.sqrt(2) * rs, "gap_reverse": math.sqrt(2) * rs - re}
            rows.append(row)
            if row["gap_lower"] < -tol:
                low.append(row)
            if reverse and row["gap_reverse"] < -tol:
                rev.append(row)
    gaps = {}
    if oracle_pair is not None:
        x, y = oracle_pair
        if graph.n <= MAX_DAVIES_VERTICES:
            gaps["davies"] = abs(davies_oracle(graph, x, y) - davies_metric(graph, x, y, solver_tol)[0])
        if graph.n <= MAX_RHO_S_VERTICES:
            gaps["max_intrinsic"] = abs(max_intrinsic_oracle(graph, x, y, S)
                                        - max_intrinsic_metric(graph, x, y, S, solver_tol)[0])
    return LemmaReport(S, tol, reg, reverse, rows, low, rev, gaps, graph.content_hash())


def lemma_campaign(count: int = 20, max_vertices: int = 12, S: float = 1.0, seed: int = 0,
                   tol: float = 1e-5, reg_tol: float = 1e-6) -> list[LemmaReport]:
    """Seeded random connected graphs with 3..max_vertices vertices.

    Odd-numbered graphs use m = 1 and b in [1, 2], which makes them
    sqrt(2)-regular, so the reverse inequality is exercised too.
    """
    rng = np.random.default_rng(seed)
    sizes = rng.integers(3, max_vertices + 1, size=count)
    specs = []
    for k, n in enumerate(sizes):
        if k % 2:
            specs.append((int(n), seed * 1000 + k, (1.0, 2.0), (1.0, 1.0)))
        else:
            specs.append((int(n), seed * 1000 + k, (0.5, 2.0), (0.5, 2.0)))

    def run(spec):
        n, s, br, mr = spec
        g = random_connected_graph(n, s, b_range=br, m_range=mr)
        return lemma_metric_comparison(g, S, tol, reg_tol=reg_tol,
                                       oracle_pair=("0", str(n - 1)) if n <= MAX_DAVIES_VERTICES else None)

    return pmap(run, specs)


# ---------------------------------------------------------------------------
# Davies' metric on Z^2


@dataclass
class TrendReport:
    rows: list
    band: tuple
    in_band: bool
    nonincreasing: bool
    lower_bound_ok: bool
    truncation_ok: bool

    @property
    def passed(self) -> bool:
        return self.in_band and self.nonincreasing and self.lower_bound_ok and self.truncation_ok

    def to_dict(self) -> dict:
        return jsonable({**self.__dict__, "passed": self.passed})


def _z2_form_metric(k: int, radius: int, tol: float):
    """rho_E(0, (k, k)) with psi supported on the box of given radius inside a host one layer larger."""
    host = build_lattice_box(2, radius + 1, 1.0, 1.0)
    coords = np.array([[int(c) for c in v.split(",")] for v in host.ids])
    support = VertexSet.of(host, np.flatnonzero(np.abs(coords).max(axis=1) <= radius))
    x, y = lattice_id((0, 0)), lattice_id((k, k))
    val, cert = davies_metric(host, x, y, tol, support=support)
    return host, x, y, val, cert


def davies_z2_trend(k_list: Sequence[int] = (2, 4, 6, 8), tol: float = 1e-6,
                    band: tuple[float, float] = (0.9, 1.5)) -> TrendReport:
    """rho_E(0, (k, k)) / (sqrt 2 k) with psi supported on the box of radius 2k.

    The host box has one more layer so every energy constraint next to the
    support is present.  Each value is repeated on the box of radius 3k; the
    truncation gap between the two must be nonnegative.  Lower reference:
    sqrt 2 times the path-degree metric (S = 1) on the host.
    """
    rows = []
    for k in k_list:
        host, x, y, val, cert = _z2_form_metric(k, 2 * k, tol)
        larger = _z2_form_metric(k, 3 * k, tol)[3]
        pd = path_degree_metric(host, 1.0).value(x, y)
        rows.append({"k": k, "rho_E": val, "ratio": val / (math.sqrt(2) * k),
                     "duality_gap": cert.gap, "rho_E_larger_box": larger,
                     "truncation_gap": larger - val, "sqrt2_path_degree": math.sqrt(2) * pd,
                     "lower_ok": val >= math.sqrt(2) * pd - tol})
    ratios = [r["ratio"] for r in rows]
    return TrendReport(rows, band, all(band[0] <= q <= band[1] for q in ratios),
                       all(b <= a + tol for a, b in zip(ratios, ratios[1:])),
                       all(r["lower_ok"] for r in rows),
                       all(r["truncation_gap"] >= -tol for r in rows))


# ---------------------------------------------------------------------------
# two-point transfer of on-diagonal bounds


@dataclass
class TransferReport:
    hypotheses: dict
    rho: float
    frontier: list
    best: dict | None

    @property
    def passed(self) -> bool:
        return all(self.hypotheses.values()) and self.best is not None

    def to_dict(self) -> dict:
        return jsonable({**self.__dict__, "passed": self.passed})


def transfer_fit(t, lhs_xy, lhs_xx, lhs_yy, m_x: float, m_y: float, rho: float,
                 f_x: Callable, f_y: Callable, *, A: float, gamma: float, delta: float,
                 c2_values=(0.25, 0.5, 1.0, 2.0), c3_values=(0.05, 0.1, 0.2, 0.4)) -> TransferReport:
    """Check the hypotheses on the grid, then c1(c2, c3) for t >= rho."""
    t = np.asarray(t, dtype=float)
    lfx, lfy = np.log(f_x(t)), np.log(f_y(t))
    hyp = {
        "regular_x": regular_function_check(f_x, t, A, gamma).holds,
        "regular_y": regular_function_check(f_y, t, A, gamma).holds,
        "exponential_growth": bool(np.all(np.isfinite(lfx - delta * t))
                                   and np.all(np.isfinite(lfy - delta * t))),
        "on_diagonal_x": bool(np.all(lhs_xx <= -math.log(m_x) - lfx + LOG_TOL)),
        "on_diagonal_y": bool(np.all(lhs_yy <= -math.log(m_y) - lfy + LOG_TOL)),
    }
    if not all(hyp.values()):
        return TransferReport(hyp, rho, [], None)
    sel = t >= rho
    if not sel.any():
        return TransferReport(hyp, rho, [], None)
    ts, lp = t[sel], np.asarray(lhs_xy, dtype=float)[sel]
    frontier = []
    for c2 in c2_values:
        base = lp + 0.5 * math.log(m_x * m_y) + 0.5 * (np.log(f_x(c2 * ts)) + np.log(f_y(c2 * ts)))
        for c3 in c3_values:
            ln_c1 = float(np.max(base + c3 * rho ** 2 / ts))
            frontier.append({"c1": math.exp(ln_c1), "c2": c2, "c3": c3})
    best = min(frontier, key=lambda e: e["c1"])
    return TransferReport(hyp, rho, frontier, best)


def two_point_transfer_check(graph: Graph, metric: PseudoMetric, x: str, y: str, f_x: Callable,
                             f_y: Callable, t_grid, *, A: float, gamma: float, delta: float = 0.0,
                             **fit_kw) -> TransferReport:
    """Finite-graph version: kernel columns from the expm backend."""
    rep = check_intrinsic(graph, metric)
    if not rep.is_intrinsic or rep.jump_size > 1 + 1e-12:
        raise PreconditionError("the transfer needs an intrinsic metric with jump size <= 1")
    t = np.asarray(t_grid, dtype=float)
    sl = heat_kernel_finite(graph, t, [x, y], [x, y])
    lv = sl.log_values
    return transfer_fit(t, lv[:, 0, 1], lv[:, 0, 0], lv[:, 1, 1], graph.m[graph.index[x]],
                        graph.m[graph.index[y]], metric.value(x, y), f_x, f_y, A=A, gamma=gamma,
                        delta=delta, **fit_kw)


def transfer_line_campaign(distances: Sequence[int] = (0, 1, 2, 5, 10, 20, 40), t_grid=None,
                           gamma: float = 2.0) -> dict:
    """Z, b = 1, m = 1, path-degree metric (S = 1): f(t) = kappa min(1, sqrt t).

    kappa is calibrated so that p_t(0, 0) <= 1 / f(t) on the grid; min(1, sqrt t)
    is (sqrt gamma, gamma)-regular and bounded, so delta = 0.
    """
    t = log_grid(0.1, 100.0, 20) if t_grid is None else np.asarray(t_grid, dtype=float)
    kernel, record = heat_kernel_exhaustion(LatticeFamily(1), t, ["0"], [str(d) for d in distances],
                                            tol=1e-13)
    diag = kernel.log_values[:, 0, list(distances).index(0)] if 0 in distances else \
        heat_kernel_exhaustion(LatticeFamily(1), t, ["0"], ["0"], tol=1e-13)[0].log_values[:, 0, 0]
    shape = np.minimum(1.0, np.sqrt(t))
    kappa = float(np.min(np.exp(-diag) / shape)) * (1 - 1e-12)

    def f(s):
        return kappa * np.minimum(1.0, np.sqrt(np.asarray(s, dtype=float)))

    out = {}
    for j, d in enumerate(distances):
        out[d] = transfer_fit(t, kernel.log_values[:, 0, j], diag, diag, 1.0, 1.0, d / math.sqrt(2),
                              f, f, A=math.sqrt(gamma), gamma=gamma, delta=0.0)
    return {"kappa": kappa, "reports": out, "truncation": record.to_dict()}


# ---------------------------------------------------------------------------
# anti-trees


@dataclass
class AntiTreeReport:
    gamma: float
    K: int
    n: float
    level_pairs: list
    first: BoundReport
    second: BoundReport
    min_pairs: int

    @property
    def passed(self) -> bool:
        return self.first.passed and len(self.level_pairs) >= self.min_pairs

    def to_dict(self) -> dict:
        return jsonable({"gamma": self.gamma, "K": self.K, "n": self.n,
                         "level_pairs": self.level_pairs, "first": self.first.to_dict(),
                         "second": self.second.to_dict(), "min_pairs": self.min_pairs,
                         "passed": self.passed})


def sample_level_pairs(K: int, count: int, seed: int) -> list[tuple[int, int]]:
    """Distinct unordered sphere pairs k < l in 0..K."""
    rng = np.random.default_rng(seed)
    total = K * (K + 1) // 2
    if count > total:
        raise ValueError("more pairs requested than exist")
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        k, l = sorted(int(v) for v in rng.integers(0, K + 1, size=2))
        if k != l:
            chosen.add((k, l))
    return sorted(chosen)


def verify_antitree(gamma: float = 0.5, K: int = 600, t_grid=(10368.0, 1.5e4, 2e4),
                    n_pairs: int = 60, seed: int = 0, min_pairs: int = 50,
                    backend: str = "dense") -> AntiTreeReport:
    """Fit C in both anchored anti-tree bounds for the Dirichlet kernel on levels <= K.

    x and y lie on spheres |x| != |y|; the kernel is taken from the exact radial
    quotient.  rho is the path-degree metric (S = 1) and m(B_o(sqrt t)) the ball
    volume of the infinite anti-tree; both are radial.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < ANTITREE_T_MIN):
        raise PreconditionError(f"the first bound needs t >= {ANTITREE_T_MIN}")
    n = antitree_dimension(gamma)
    pairs = sample_level_pairs(K, n_pairs, seed)
    sources = sorted({k for k, _ in pairs})
    kernels = dict(zip(sources, pmap(lambda k: antitree_lumped_kernel(gamma, K, k, t, backend),
                                     sources)))
    rad = AntiTreeRadial.covering(gamma, float(np.sqrt(t.max())), 1.0)
    if rad.L < K:
        rad = AntiTreeRadial(gamma, K, 1.0)
    ro = rad.root_distance
    vol = np.array([rad.ball_volume(float(np.sqrt(s))) for s in t])
    k_arr = np.array([k for k, _ in pairs])
    l_arr = np.array([l for _, l in pairs])
    lhs = np.stack([kernels[k][l] for k, l in pairs], axis=1)  # (T, P)
    rho = np.abs(ro[l_arr] - ro[k_arr])
    tt = t[:, None]
    excess = rho[None, :] ** 2 / (np.sqrt(tt ** 2 + rho[None, :] ** 2) + tt)
    rhs1 = (n / 2) * np.log1p((ro[k_arr] ** 2 + ro[l_arr] ** 2)[None, :] / tt) \
        + (n / 2) * np.log(np.maximum(1.0, excess)) - np.log(vol)[:, None] \
        - tt * zeta(rho[None, :] / tt)
    labels = [(antitree_id(k, 0), antitree_id(l, 0)) for k, l in pairs]
    flat_t = np.repeat(t, len(pairs))
    xs = [a for a, _ in labels] * len(t)
    ys = [b for _, b in labels] * len(t)
    prov = {"family": "anti-tree", "gamma": gamma, "K": K, "kernel_backend": f"{backend} (radial quotient)",
            "metric": "path-degree S=1 (infinite-graph radial)", "volume": "infinite-graph radial"}
    first = build_report("antitree-first", "antitree-first", {"n": n, "C": "fitted"}, flat_t, xs, ys,
                         lhs.ravel(), rhs1.ravel(), fit=True, provenance=prov,
                         notes=[TRUNCATION_NOTE], extra={"level_pairs": pairs})
    # second display: combinatorial distance to the root; the exponent written d is read as n
    a_exp = (2 - gamma) / 2
    D = np.abs(k_arr.astype(float) ** a_exp - l_arr.astype(float) ** a_exp) ** 2
    base = np.log1p((k_arr.astype(float) ** (2 * (gamma + 1)) + l_arr.astype(float) ** (2 * (gamma + 1)))[None, :]
                    / tt ** n) - (n / 2) * np.log(tt)
    admissible = tt > 2 * D[None, :]
    need = minimal_constant(lhs - base, D[None, :] / tt)
    C2 = float(need[admissible].max()) if admissible.any() else math.nan
    rhs2 = math.log(C2) + base - D[None, :] / (C2 * tt) if math.isfinite(C2) else base
    rhs2 = np.where(admissible, rhs2, np.inf)
    second = build_report("antitree-second", "antitree-second", {"n": n, "C": C2}, flat_t, xs, ys,
                          lhs.ravel(), rhs2.ravel(), tol=1e-9, provenance=prov,
                          notes=[TRUNCATION_NOTE, "the exponent written d in t^d, t^(d/2) is read as n",
                                 "inadmissible points (t <= 2 D) carry rhs = +inf"],
                          extra={"n_admissible": int(admissible.sum())})
    second.fitted_constant = C2
    return AntiTreeReport(gamma, K, n, [list(p) for p in pairs], first, second, min_pairs)


# ---------------------------------------------------------------------------
# bound forms on lattices


def jump_one_form_check(graph: Graph, metric: PseudoMetric, t_grid, pairs, n: int = 2, *,
                     t_max: float | None = None, kernel: HeatKernelSlice | None = None,
                     campaign: str = "jump-one") -> BoundReport:
    """Fit the least c with p_t <= c t^{-n/2} exp(-rho^2 / (c t)) for t >= rho(x, y)."""
    t = np.asarray(t_grid, dtype=float)
    if t_max is not None:
        t = t[t <= t_max]
    kernel, lhs = _kernel_for_pairs(graph, t, pairs, kernel, "expm")
    rho = np.array([metric.value(a, b) for a, b in pairs])
    tt = t[:, None]
    admissible = tt >= rho[None, :]
    v = lhs + (n / 2) * np.log(tt)
    need = minimal_constant(v, rho[None, :] ** 2 / tt)
    c = float(need[admissible].max())
    rhs = np.where(admissible, math.log(c) - (n / 2) * np.log(tt) - rho[None, :] ** 2 / (c * tt), np.inf)
    flat_t = np.repeat(t, len(pairs))
    xs = [p[0] for p in pairs] * len(t)
    ys = [p[1] for p in pairs] * len(t)
    rep = build_report(campaign, "jump-one", {"n": n, "c": c}, flat_t, xs, ys, lhs.ravel(),
                       np.broadcast_to(rhs, lhs.shape).ravel(), tol=1e-9,
                       provenance={"graph_hash": graph.content_hash(), "metric": metric.provenance,
                                   "kernel_backend": kernel.backend},
                       notes=["points with t < rho(x, y) carry rhs = +inf"],
                       extra={"n_admissible": int(admissible.sum())})
    rep.fitted_constant = c
    rep.passed = rep.passed and math.isfinite(c)
    return rep


def jump_one_z2_campaign(radius: int = 30, lo: float = 0.5, hi: float = 2.0, seed: int = 11,
                      t_grid=None, t_max: float = 100.0, window: int = 15,
                      sources: Sequence[tuple[int, int]] = ((0, 0), (7, -4))) -> BoundReport:
    """Z^2 box with iid conductances, m = 1, path-degree metric with S = 1."""
    g = build_lattice_box(2, radius, IidUniform(lo, hi, seed), 1.0)
    metric = path_degree_metric(g, 1.0)
    t = log_grid(0.1, t_max, 20) if t_grid is None else np.asarray(t_grid, dtype=float)
    targets = [v for v in g.ids if max(abs(int(c)) for c in v.split(",")) <= window]
    pairs = [(lattice_id(s), y) for s in sources for y in targets]
    return jump_one_form_check(g, metric, t, pairs, 2, t_max=t_max)


@dataclass
class FrontierReport:
    gammas: list
    constants: list
    D: int
    n: float
    reports: list

    def to_dict(self) -> dict:
        return jsonable({"gammas": self.gammas, "constants": self.constants, "D": self.D, "n": self.n,
                         "reports": [r.to_dict() for r in self.reports]})


def chemical_frontier(graph: Graph, t_grid, pairs, n: float, gammas=(0.0, 0.5, 1.0, 2.0, 4.0), *,
                 kernel: HeatKernelSlice | None = None) -> FrontierReport:
    """Least C(gamma) in p_t <= C (1 + d_ch/t)^gamma t^{-n/2} exp(-2Dt zeta(d_ch / 2Dt))."""
    t = np.asarray(t_grid, dtype=float)
    t = t[t > 0]
    kernel, lhs = _kernel_for_pairs(graph, t, pairs, kernel, "expm")
    D = int(np.diff(graph.adjacency.indptr).max())
    dch = chemical_distance(graph)
    d = np.array([dch.value(a, b) for a, b in pairs])[None, :]
    tt = t[:, None]
    core = -(n / 2) * np.log(tt) - 2 * D * tt * zeta(d / (2 * D * tt))
    reports, consts = [], []
    flat_t = np.repeat(t, len(pairs))
    xs = [p[0] for p in pairs] * len(t)
    ys = [p[1] for p in pairs] * len(t)
    for gm in gammas:
        rhs = core + gm * np.log1p(d / tt)
        rep = build_report(f"chemical-gamma-{gm:g}", "chemical-frontier", {"gamma": gm, "n": n, "D": D}, flat_t, xs, ys,
                           lhs.ravel(), rhs.ravel(), fit=True,
                           provenance={"graph_hash": graph.content_hash(), "metric": "chemical"})
        reports.append(rep)
        consts.append(rep.fitted_constant)
    return FrontierReport(list(gammas), consts, D, n, reports)
