"""Bound verification: kernels against right-hand sides on (t, x, y) grids.

Every comparison is a log-domain difference ``lhs_log - rhs_log``.  A report
either passes when the worst difference stays below a tolerance, or (for bound
forms with an unspecified multiplicative constant) fits the smallest constant
that makes the bound hold on the grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .bounds import (ErrorParams, davies_rhs, fk_rhs, g_rhs, pang_envelope, tau_rho_and_psi,
                     universal_rhs, vd_rhs)
from .graph import Graph, VertexSet, ball
from .heat import (HeatKernelSlice, dirichlet_lambda, heat_kernel_finite,
                   log_exact_integer_line_kernel)
from .metrics import PseudoMetric, check_intrinsic, combinatorial_distance, path_degree_metric
from .optimal import davies_metric, max_intrinsic_metric, regularity_detail
from .parallel import pmap

LOG_TOL = 1e-10
CSV_COLUMNS = ("campaign", "t", "x", "y", "lhs_log", "rhs_log", "ratio_log")
TRUNCATION_NOTE = ("LHS is a Dirichlet-truncated kernel, which under-approximates the kernel of "
                   "the infinite graph; a PASS is necessary but not sufficient there.")


class PreconditionError(ValueError):
    """A campaign's hypothesis does not hold, so no verdict is produced."""


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class BoundReport:
    """Outcome of one bound campaign on one grid."""

    campaign: str
    kind: str
    params: dict
    grid: dict
    worst_log_ratio: float
    worst_point: dict | None
    tol: float
    passed: bool
    fitted_constant: float | None = None
    violations: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)

    @property
    def worst_ratio(self) -> float:
        return math.exp(self.worst_log_ratio) if self.worst_log_ratio < 700 else math.inf

    def to_dict(self, include_rows: bool = False) -> dict:
        out = {
            "campaign": self.campaign, "kind": self.kind, "params": self.params,
            "grid": self.grid, "worst_log_ratio": self.worst_log_ratio,
            "worst_point": self.worst_point, "tol": self.tol, "passed": self.passed,
            "fitted_constant": self.fitted_constant, "violations": self.violations,
            "n_violations": len(self.violations), "provenance": self.provenance,
            "notes": self.notes, "extra": self.extra, "n_points": len(self.rows),
        }
        if include_rows:
            out["rows"] = self.rows
        return jsonable(out)

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([row[0], repr(float(row[1])), row[2], row[3]] + [repr(float(v)) for v in row[4:]])
        return buf.getvalue()


def build_report(campaign: str, kind: str, params: dict, t, x, y, lhs, rhs, *,
                 tol: float = LOG_TOL, fit: bool = False, c_max: float | None = None,
                 grid: dict | None = None, provenance: dict | None = None,
                 notes: Iterable[str] = (), extra: dict | None = None) -> BoundReport:
    """Fold flat (t, x, y, lhs, rhs) arrays into a report, preserving input order.

    Without ``fit`` a point violates when lhs - rhs > tol.  With ``fit`` the
    fitted constant is exp(max(lhs - rhs)); the report passes when that
    constant is at most ``c_max`` (or is finite when no cap is given), and the
    violations are the points that would need more than ``c_max``.
    """
    t = np.asarray(t, dtype=float).ravel()
    lhs = np.asarray(lhs, dtype=float).ravel()
    rhs = np.asarray(rhs, dtype=float).ravel()
    x, y = list(x), list(y)
    if not (len(t) == len(x) == len(y) == len(lhs) == len(rhs)):
        raise ValueError("grid arrays must have equal length")
    with np.errstate(invalid="ignore"):
        ratio = lhs - rhs
    # 0 <= anything and anything <= +inf both hold
    ratio = np.where(np.isnan(ratio), -np.inf, ratio)
    rows = [(campaign, float(a), str(b), str(c), float(d), float(e), float(f))
            for a, b, c, d, e, f in zip(t, x, y, lhs, rhs, ratio)]
    if len(ratio):
        k = int(np.argmax(ratio))
        worst = float(ratio[k])
        worst_point = {"t": float(t[k]), "x": str(x[k]), "y": str(y[k]),
                       "lhs_log": float(lhs[k]), "rhs_log": float(rhs[k])}
    else:
        worst, worst_point = -math.inf, None
    fitted = None
    if fit:
        fitted = math.exp(worst) if worst < 700 else math.inf
        limit = math.inf if c_max is None else math.log(c_max) + tol
        bad = np.flatnonzero(ratio > limit)
        passed = math.isfinite(worst) or worst == -math.inf
        passed = passed and (c_max is None or fitted <= c_max * math.exp(tol))
    else:
        bad = np.flatnonzero(ratio > tol)
        passed = bad.size == 0
    violations = [{"t": float(t[i]), "x": str(x[i]), "y": str(y[i]),
                   "lhs_log": float(lhs[i]), "rhs_log": float(rhs[i]),
                   "ratio_log": float(ratio[i])} for i in bad]
    if grid is None:
        ut = np.unique(t)
        grid = {"t_min": float(ut.min()) if len(ut) else None,
                "t_max": float(ut.max()) if len(ut) else None,
                "n_t": int(len(ut)), "n_points": int(len(t))}
    return BoundReport(campaign, kind, dict(params), grid, worst, worst_point, tol, bool(passed),
                       fitted, violations, dict(provenance or {}), list(notes), dict(extra or {}),
                       rows)


# ---------------------------------------------------------------------------
# grids


def log_grid(t_min: float, t_max: float, per_decade: int = 40) -> np.ndarray:
    """Log-spaced points from t_min to t_max inclusive, ``per_decade`` steps per decade."""
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    steps = max(1, int(round(per_decade * math.log10(t_max / t_min))))
    return np.logspace(math.log10(t_min), math.log10(t_max), steps + 1)


def product_pairs(xs: Sequence[str], ys: Sequence[str]) -> list[tuple[str, str]]:
    return [(a, b) for a in xs for b in ys]


def _kernel_for_pairs(graph: Graph, t: np.ndarray, pairs, kernel: HeatKernelSlice | None,
                      backend: str) -> tuple[HeatKernelSlice, np.ndarray]:
    srcs = list(dict.fromkeys(a for a, _ in pairs))
    tgts = list(dict.fromkeys(b for _, b in pairs))
    if kernel is None:
        kernel = heat_kernel_finite(graph, t, srcs, tgts, backend)
    si = {s: i for i, s in enumerate(kernel.source_ids)}
    ti = {s: i for i, s in enumerate(kernel.target_ids)}
    a = np.array([si[p[0]] for p in pairs], dtype=np.int64)
    b = np.array([ti[p[1]] for p in pairs], dtype=np.int64)
    return kernel, kernel.log_values[:, a, b]


def _flatten(t: np.ndarray, pairs, *arrays):
    """Expand (T, P) arrays and pair labels into flat t-major sequences."""
    T, P = len(t), len(pairs)
    tt = np.repeat(t, P)
    xs = [p[0] for p in pairs] * T
    ys = [p[1] for p in pairs] * T
    flat = [np.broadcast_to(np.asarray(a, dtype=float), (T, P)).ravel() for a in arrays]
    return (tt, xs, ys, *flat)


def _graph_provenance(graph: Graph, **more) -> dict:
    return {"graph_hash": graph.content_hash(), "n_vertices": graph.n, **more}


# ---------------------------------------------------------------------------
# universal Gaussian


def _universal_report(graph, rho, S, t, pairs, kernel, backend, tol, campaign, provenance, notes,
                      extra=None) -> BoundReport:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    kernel, lhs = _kernel_for_pairs(graph, t, pairs, kernel, backend)
    ix = graph.indices([p[0] for p in pairs])
    iy = graph.indices([p[1] for p in pairs])
    rhs = universal_rhs(graph.m[ix][None, :], graph.m[iy][None, :], np.asarray(rho)[None, :],
                        t[:, None], S)
    rhs = np.broadcast_to(rhs, lhs.shape)
    tt, xs, ys, l_, r_ = _flatten(t, pairs, lhs, rhs)
    prov = _graph_provenance(graph, kernel_backend=kernel.backend, **provenance)
    if kernel.truncation:
        prov["truncation"] = kernel.truncation
    return build_report(campaign, "universal", {"S": S}, tt, xs, ys, l_, r_, tol=tol,
                        provenance=prov, notes=notes, extra=extra)


def verify_universal(graph: Graph, metric: PseudoMetric, S: float, t_grid, pairs, *,
                     kernel: HeatKernelSlice | None = None, backend: str = "expm",
                     tol: float = LOG_TOL, campaign: str = "universal") -> BoundReport:
    """p_t(x, y) against the universal Gaussian of an intrinsic metric with jump size <= S."""
    rep = check_intrinsic(graph, metric)
    if not rep.is_intrinsic:
        raise PreconditionError(f"metric {metric.provenance!r} is not intrinsic: "
                                f"sum b rho^2 / m reaches {rep.max_ratio:.6g} at {rep.worst_vertex}")
    if rep.jump_size > S * (1 + 1e-12):
        raise PreconditionError(f"jump size {rep.jump_size:.6g} exceeds S = {S:g}")
    rho = np.array([metric.value(a, b) for a, b in pairs])
    return _universal_report(graph, rho, S, t_grid, pairs, kernel, backend, tol, campaign,
                             {"metric": metric.provenance, "intrinsic_ratio": rep.max_ratio,
                              "jump_size": rep.jump_size}, [])


def verify_max_intrinsic(graph: Graph, S: float, t_grid, pairs, *, solver_tol: float = 1e-8,
                         kernel: HeatKernelSlice | None = None, backend: str = "expm",
                         tol: float = LOG_TOL, campaign: str = "universal-max-intrinsic") -> BoundReport:
    """Universal Gaussian with rho_S values from the convex solver.

    Each solve returns a repaired table that is itself intrinsic with jump
    size <= S, so the bound applies to the value used without extra slack.
    The report also compares against the path-degree metric (a feasible point).
    """
    pd = path_degree_metric(graph, S)
    rho, pd_vals, certified = [], [], True
    for a, b in pairs:
        val, cert = max_intrinsic_metric(graph, a, b, S, solver_tol)
        if "table" in cert.extra:
            table = PseudoMetric(graph, "max-intrinsic", table=cert.extra["table"])
            rep = check_intrinsic(graph, table, tol=1e-9)
            certified &= rep.is_intrinsic and rep.jump_size <= S * (1 + 1e-9)
        rho.append(val)
        pd_vals.append(pd.value(a, b))
    rho, pd_vals = np.array(rho), np.array(pd_vals)
    extra = {"tables_intrinsic": bool(certified),
             "dominates_path_degree": bool(np.all(rho >= pd_vals - solver_tol)),
             "max_gain_over_path_degree": float(np.max(rho - pd_vals)) if len(rho) else 0.0}
    report = _universal_report(graph, rho, S, t_grid, pairs, kernel, backend, tol, campaign,
                               {"metric": "max-intrinsic", "solver_tol": solver_tol}, [], extra)
    report.passed = report.passed and certified
    return report


# ---------------------------------------------------------------------------
# Davies' form-metric bound


def verify_davies(graph: Graph, t_grid, pairs, *, solver_tol: float = 1e-6,
                  kernel: HeatKernelSlice | None = None, backend: str = "expm",
                  campaign: str = "davies") -> BoundReport:
    """p_t against the Davies Gaussian with S = regularity constant and rho = rho_E.

    Solver values are feasible points, so rho_E is never overestimated; the
    regularity constant is a maximum of such values and may sit up to the
    solver tolerance below its true value, hence the 10 * solver_tol slack.
    """
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    S, edge, cert = regularity_detail(graph, solver_tol)
    cache: dict[frozenset, float] = {}
    rho = []
    for a, b in pairs:
        key = frozenset((a, b))
        if key not in cache:
            cache[key] = 0.0 if a == b else davies_metric(graph, a, b, solver_tol)[0]
        rho.append(cache[key])
    rho = np.array(rho)
    kernel, lhs = _kernel_for_pairs(graph, t, pairs, kernel, backend)
    ix = graph.indices([p[0] for p in pairs])
    iy = graph.indices([p[1] for p in pairs])
    rhs = davies_rhs(graph.m[ix][None, :], graph.m[iy][None, :], rho[None, :], t[:, None], S)
    rhs = np.broadcast_to(rhs, lhs.shape)
    tt, xs, ys, l_, r_ = _flatten(t, pairs, lhs, rhs)
    prov = _graph_provenance(graph, kernel_backend=kernel.backend, metric="davies",
                             solver_tol=solver_tol)
    return build_report(campaign, "davies", {"S_reg": S, "S_reg_edge": list(edge)}, tt, xs, ys,
                        l_, r_, tol=math.log1p(10 * solver_tol), provenance=prov,
                        extra={"n_metric_solves": len(cache)})


# ---------------------------------------------------------------------------
# Pang's two-sided estimate on Z


def fit_pang_constant(d_max: int, t_grid, rtol: float = 1e-12,
                      campaign: str = "pang") -> BoundReport:
    """Smallest c >= 1 with c^-1 E <= p_t(0, d) <= c E on the grid, E the Pang envelope."""
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    d = np.arange(d_max + 1)
    lhs = np.array(pmap(lambda k: [log_exact_integer_line_kernel(int(k), float(s), rtol) for s in t],
                        d))  # (D, T)
    core = pang_envelope(d[:, None], t[None, :], 1.0)[1]
    dev = lhs - core
    k = np.unravel_index(int(np.argmax(np.abs(dev))), dev.shape)
    ln_c = max(0.0, float(np.abs(dev[k])))
    c = math.exp(ln_c)
    lo, hi = pang_envelope(d[:, None], t[None, :], c)
    slack = 1e-12
    upper_bad = int(np.sum(lhs > hi + slack))
    lower_bad = int(np.sum(lhs < lo - slack))
    tt = np.tile(t, len(d))
    xs = ["0"] * dev.size
    ys = [str(int(v)) for v in np.repeat(d, len(t))]
    extra = {"binding_point": {"d": int(d[k[0]]), "t": float(t[k[1]])},
             "binding_side": "upper" if dev[k] > 0 else "lower",
             "upper_violations_at_c": upper_bad, "lower_violations_at_c": lower_bad}
    rep = build_report(campaign, "pang", {"d_max": d_max}, tt, xs, ys, lhs.ravel(), core.ravel(),
                       provenance={"lhs": "exact Z kernel (adaptive Gauss-Legendre)", "rtol": rtol},
                       extra=extra)
    rep.fitted_constant = c
    rep.passed = upper_bad == 0 and lower_bad == 0 and math.isfinite(c)
    rep.violations = []
    return rep


# ---------------------------------------------------------------------------
# Faber-Krahn sampling


@dataclass(frozen=True)
class SubsetFamily:
    """Subsets U of a host ball: all (clipped) metric balls, random subsets or heat level sets."""

    tag: str
    count: int = 0
    seed: int = 0
    thresholds: tuple[float, ...] = ()
    t: float = 1.0

    TAGS = ("all-balls", "random-subsets", "heat-sublevel")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown subset family {self.tag!r}")

    def realize(self, graph: Graph, metric: PseudoMetric, x: str, B: VertexSet) -> list[VertexSet]:
        members = B.array()
        inside = np.zeros(graph.n, dtype=bool)
        inside[members] = True
        found: dict[tuple, VertexSet] = {}

        def add(idx):
            idx = np.asarray(idx, dtype=np.int64)
            idx = idx[inside[idx]]
            if idx.size:
                vs = VertexSet.of(graph, idx)
                found.setdefault(vs.indices, vs)

        if self.tag == "all-balls":
            for z in members:
                row = metric.row(int(z))
                for r in np.unique(row[members]):
                    add(np.flatnonzero(row <= r))
        elif self.tag == "random-subsets":
            rng = np.random.default_rng(self.seed)
            for _ in range(self.count):
                size = int(rng.integers(1, len(members) + 1))
                add(rng.choice(members, size=size, replace=False))
        else:
            sl = heat_kernel_finite(graph, [self.t], [x], [graph.ids[i] for i in members])
            logs = sl.log_values[0, 0]
            top = float(logs.max())
            for th in self.thresholds:
                add(members[logs >= top + math.log(th)])
        return list(found.values())

    def describe(self) -> dict:
        return {"tag": self.tag, "count": self.count, "seed": self.seed,
                "thresholds": list(self.thresholds), "t": self.t}


def verify_fk(graph: Graph, metric: PseudoMetric, x: str, R: float, n: float,
              families: SubsetFamily | Sequence[SubsetFamily], *, a: float | None = None,
              campaign: str = "fk") -> BoundReport:
    """a_est = min over sampled U of lambda(U) R^2 (m(U)/m(B))^{2/n}, B = B_x(R).

    a_est is an upper estimate of the best Faber-Krahn constant: sampling cannot
    certify the inequality for every U.  Rows: t holds R, y labels the subset,
    lhs_log = log lambda(U), rhs_log = log of the right-hand side with a = 1,
    so ratio_log is the log of U's contribution.  When ``a`` is given, the
    report passes iff no sampled U violates FK with that a.
    """
    if isinstance(families, SubsetFamily):
        families = [families]
    B = ball(graph, metric, x, R)
    subsets: dict[tuple, VertexSet] = {}
    for fam in families:
        for U in fam.realize(graph, metric, x, B):
            subsets.setdefault(U.indices, U)
    if not subsets:
        raise ValueError("the subset family is empty")
    Us = list(subsets.values())
    lams = pmap(lambda U: dirichlet_lambda(graph, U.array()), Us)
    with np.errstate(divide="ignore"):
        lhs = np.log(np.array(lams))
    rhs = np.array([fk_rhs(1.0, n, R, B.measure, U.measure) for U in Us])
    labels = [f"U{k}[{len(U)}]" for k, U in enumerate(Us)]
    contrib = lhs - rhs
    k = int(np.argmin(contrib))
    a_est = float(math.exp(contrib[k])) if np.isfinite(contrib[k]) else 0.0
    rep = build_report(campaign, "fk", {"R": R, "n": n, "a": a}, np.full(len(Us), float(R)),
                       [x] * len(Us), labels, lhs, rhs, tol=0.0,
                       provenance=_graph_provenance(graph, metric=metric.provenance),
                       notes=["a_est is an upper estimate of the true Faber-Krahn constant "
                              "(subsets are sampled)"],
                       extra={"a_est": a_est, "minimizer": Us[k].ids, "n_subsets": len(Us),
                              "ball_measure": B.measure, "ball_size": len(B),
                              "families": [f.describe() for f in families]})
    rep.fitted_constant = a_est
    rep.worst_log_ratio = float(contrib[k])
    rep.worst_point = {"t": float(R), "x": x, "y": labels[k], "lhs_log": float(lhs[k]),
                       "rhs_log": float(rhs[k])}
    if a is None:
        rep.violations, rep.passed = [], True
    else:
        bad = np.flatnonzero(contrib < math.log(a) - LOG_TOL)
        rep.violations = [{"subset": labels[i], "members": Us[i].ids,
                           "contribution": float(math.exp(contrib[i]))} for i in bad]
        rep.passed = bad.size == 0
    return rep


# ---------------------------------------------------------------------------
# volume doubling and Gaussian bound forms


def vd_report(campaign: str, centers: Sequence[str], radii, log_volume: Callable[[str, np.ndarray], np.ndarray],
              N: float, log_phi: Callable[[str, np.ndarray], np.ndarray] | None = None, *,
              constant: float = 1.0, fit: bool = False, c_max: float | None = None,
              tol: float = LOG_TOL, provenance: dict | None = None,
              notes: Iterable[str] = ()) -> BoundReport:
    """m(B_x(R)) / m(B_x(r)) against Phi_x(r) (R/r)^N for all r <= R in ``radii``.

    ``log_phi`` maps (center, r array) to log Phi; without it Phi is the
    constant ``constant``.  Rows: t holds R and y holds r.
    """
    radii = np.unique(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    ri, Ri = np.triu_indices(len(radii))
    r, R = radii[ri], radii[Ri]
    ts, xs, ys, lhs_all, rhs_all = [], [], [], [], []
    for c in centers:
        lv = np.asarray(log_volume(c, radii), dtype=float)
        lphi = (np.full(len(r), math.log(constant)) if log_phi is None
                else np.asarray(log_phi(c, r), dtype=float) * np.ones(len(r)))
        lhs_all.append(lv[Ri] - lv[ri])
        rhs_all.append(vd_rhs(lphi, N, r, R))
        ts.append(R)
        xs += [c] * len(r)
        ys += [repr(float(v)) for v in r]
    return build_report(campaign, "vd", {"N": N, "phi": "error-function" if log_phi else constant},
                        np.concatenate(ts), xs, ys, np.concatenate(lhs_all),
                        np.concatenate(rhs_all), tol=tol, fit=fit, c_max=c_max,
                        grid={"radii": radii.tolist(), "centers": list(centers)},
                        provenance=provenance, notes=notes)


def verify_vd(graph: Graph, metric: PseudoMetric, centers: Sequence[str], radii, N: float, *,
              log_phi: Callable[[str, np.ndarray], np.ndarray] | None = None, constant: float = 1.0,
              fit: bool = False, c_max: float | None = None, campaign: str = "vd") -> BoundReport:
    """Volume doubling on a finite graph with ball volumes from ``metric``."""

    def log_volume(c, rad):
        return np.log(metric.volume(graph.index[c], rad))

    return vd_report(campaign, centers, radii, log_volume, N, log_phi, constant=constant, fit=fit,
                     c_max=c_max, provenance=_graph_provenance(graph, metric=metric.provenance))


def g_report(campaign: str, t, pairs, lhs, vol_x, vol_y, rho, S: float, log_psi, N: float, *,
             fit: bool = True, c_max: float | None = None, tol: float = LOG_TOL,
             provenance: dict | None = None, notes: Iterable[str] = (),
             extra: dict | None = None) -> BoundReport:
    """(T, P) kernel logs against the (G) right-hand side; volumes are (T, P) or broadcastable."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("(G) is compared at t > 0")
    rhs = g_rhs(vol_x, vol_y, np.asarray(rho, float)[None, :], t[:, None], S, log_psi, N)
    rhs = np.broadcast_to(rhs, np.shape(lhs))
    tt, xs, ys, l_, r_ = _flatten(t, pairs, lhs, rhs)
    return build_report(campaign, "g", {"S": S, "N": N}, tt, xs, ys, l_, r_, tol=tol, fit=fit,
                        c_max=c_max, provenance=provenance, notes=notes, extra=extra)


def verify_g(graph: Graph, kernel: HeatKernelSlice, metric: PseudoMetric, S: float, N: float,
             pairs, *, psi: float | ErrorParams = 1.0, max_radius: float | None = None,
             fit: bool = True, c_max: float | None = None,
             campaign: str = "g") -> BoundReport:
    """(G) on a finite graph: volumes m(B(sqrt t)) from ``metric``; t = 0 rows are dropped.

    ``psi`` is a constant or ``ErrorParams`` for the error function Psi.
    ``max_radius`` guards truncations: sqrt t beyond it is a domain error.
    """
    keep = kernel.t > 0
    t = kernel.t[keep]
    if max_radius is not None and np.any(np.sqrt(t) > max_radius):
        raise ValueError(f"sqrt t = {np.sqrt(t).max():.4g} exceeds the safe radius {max_radius:g}")
    _, lhs = _kernel_for_pairs(graph, kernel.t, pairs, kernel, kernel.backend)
    lhs = lhs[keep]
    ix = graph.indices([p[0] for p in pairs])
    iy = graph.indices([p[1] for p in pairs])
    rho = np.array([metric.value(a, b) for a, b in pairs])
    st = np.sqrt(t)
    vol = {i: metric.volume(int(i), st) for i in np.unique(np.concatenate([ix, iy]))}
    vx = np.stack([vol[i] for i in ix], axis=1)
    vy = np.stack([vol[i] for i in iy], axis=1)
    if isinstance(psi, ErrorParams):
        Deg = graph.Deg
        log_psi = tau_rho_and_psi(t[:, None], rho[None, :], S, Deg[ix][None, :], Deg[iy][None, :],
                                  psi)[1]
        psi_desc = {"error_function": {"n": psi.n, "r": psi.r, "S": psi.S}}
    else:
        log_psi = math.log(psi)
        psi_desc = {"constant": psi}
    prov = _graph_provenance(graph, metric=metric.provenance, kernel_backend=kernel.backend, psi=psi_desc)
    notes = [TRUNCATION_NOTE] if kernel.truncation else []
    return g_report(campaign, t, pairs, lhs, vx, vy, rho, S, log_psi, N, fit=fit, c_max=c_max,
                    provenance=prov, notes=notes)


# ---------------------------------------------------------------------------
# Nash probe


@dataclass
class NashReport:
    n: float
    c_min: float
    argmax: str | None
    contributions: list
    skipped: list
    provenance: dict

    def to_dict(self) -> dict:
        return jsonable(self.__dict__)


def nash_contribution(graph: Graph, f: np.ndarray, n: float) -> float:
    """||f||_2^{2+4/n} / (E(f) ||f||_1^{4/n}); nan when E(f) = 0."""
    f = np.asarray(f, dtype=float)
    energy = float(np.sum(graph.edge_b * (f[graph.edge_u] - f[graph.edge_v]) ** 2))
    l2sq = float(np.sum(graph.m * f * f))
    l1 = float(np.sum(graph.m * np.abs(f)))
    if energy <= 0 or l1 <= 0:
        return math.nan
    return math.exp((1 + 2 / n) * math.log(l2sq) - math.log(energy) - (4 / n) * math.log(l1))


def nash_probe(graph: Graph, n: float, members: Sequence[tuple[str, np.ndarray]]) -> NashReport:
    """Largest Nash ratio over the members: a lower bound on any valid Nash constant."""
    contribs, skipped = [], []
    for label, f in members:
        v = nash_contribution(graph, f, n)
        if math.isnan(v):
            skipped.append(label)
        else:
            contribs.append((label, v))
    if not contribs:
        raise ValueError("every member has zero energy")
    label, best = max(contribs, key=lambda p: p[1])
    return NashReport(n, best, label, contribs, skipped, _graph_provenance(graph))


def nash_members(graph: Graph, center: str, *, radii: Sequence[int] = (),
                 heat_times: Sequence[float] = (), support=None) -> list[tuple[str, np.ndarray]]:
    """delta_center, indicators of combinatorial balls and Dirichlet heat columns.

    With ``support`` (vertex indices), members vanish outside it, so on a host
    that contains every neighbour of the support their energy equals the
    energy in any larger graph.
    """
    n = graph.n
    keep = np.ones(n, dtype=bool) if support is None else np.zeros(n, dtype=bool)
    if support is not None:
        keep[np.asarray(support, dtype=np.int64)] = True
    c = graph.index[center]
    delta = np.zeros(n)
    delta[c] = 1.0
    out = [("delta", delta)]
    dist = combinatorial_distance(graph, c)
    for r in radii:
        out.append((f"ball[{r}]", ((dist <= r) & keep).astype(float)))
    if heat_times:
        sup = np.flatnonzero(keep)
        sl = heat_kernel_finite(graph, heat_times, [center], [graph.ids[i] for i in sup],
                                support=None if support is None else sup)
        for a, t in enumerate(sl.t):
            f = np.zeros(n)
            f[sup] = sl.values[a, 0]
            out.append((f"heat[{t:g}]", f))
    return out
