"""Command-line front end: build | kernel | metric | verify | report.

Exit codes: 0 when a verification passes (or a non-verifying command
succeeds), 2 when a bound is violated, 1 on any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import ErrorParams, phi
from .campaigns import (chemical_frontier, jump_one_z2_campaign, davies_z2_trend, lemma_campaign,
                        lemma_metric_comparison, theorem_main_forward, theorem_main_forward_line,
                        transfer_line_campaign, verify_antitree)
from .graph import GraphError, IidUniform, build_anti_tree, build_lattice_box, graph_from_dict, load_graph
from .heat import heat_kernel_finite
from .metrics import (chemical_distance, combinatorial_metric, path_degree_metric, PseudoMetric)
from .optimal import davies_metric, max_intrinsic_metric
from .parallel import thread_count
from .verify import (SubsetFamily, fit_pang_constant, jsonable, log_grid, nash_members, nash_probe,
                     product_pairs, verify_davies, verify_fk, verify_g, verify_max_intrinsic,
                     verify_universal, verify_vd)

EXIT_PASS, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class CliError(Exception):
    """Invalid input; reported on stderr with exit code 1."""


class Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage errors; here 2 means a violated bound."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# campaign configuration

GROUPS = ("graph", "metric", "kernel", "bound", "grids", "seed", "outputs")


@dataclass
class CampaignConfig:
    """Everything a campaign run depends on, grouped; outputs do not enter the hash."""

    campaign: str
    graph: dict = field(default_factory=dict)
    metric: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    seed: int | None = None
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable(asdict(self))

    def config_hash(self) -> str:
        body = {k: v for k, v in self.to_dict().items() if k != "outputs"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        unknown = set(data) - {"campaign", *GROUPS}
        if unknown:
            raise CliError(f"config schema violation: unknown keys {sorted(unknown)}")
        if "campaign" not in data:
            raise CliError("config schema violation: missing 'campaign'")
        for g in GROUPS:
            if g != "seed" and not isinstance(data.get(g, {}), dict):
                raise CliError(f"config schema violation: '{g}' must be an object")
        return cls(**data)


def _header(cfg: CampaignConfig) -> str:
    return f"heatlab {__version__} config={cfg.config_hash()} seed={cfg.seed}"


# argument dest -> config group, filled by _arg
_DEST_GROUP: dict[str, str] = {}


# campaign -> dests that must be set by a flag or the config file
_REQUIRED: dict[str, list[str]] = {}


def _arg(p: argparse.ArgumentParser, group: str, *flags, required: bool = False, **kw):
    action = p.add_argument(*flags, **kw)
    _DEST_GROUP[action.dest] = group
    if required:
        _REQUIRED.setdefault(p.get_default("campaign"), []).append(action.dest)
    return action


def _check_required(args: argparse.Namespace) -> None:
    missing = [d for d in _REQUIRED.get(args.campaign, []) if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + d.replace("_", "-") for d in missing)
        raise CliError(f"missing required options for {args.campaign}: {flags}")


def _config_from_args(campaign: str, args: argparse.Namespace) -> CampaignConfig:
    cfg = CampaignConfig(campaign)
    for dest, value in sorted(vars(args).items()):
        group = _DEST_GROUP.get(dest)
        if group is None:
            continue
        if group == "seed":
            cfg.seed = value
        else:
            getattr(cfg, group)[dest] = value
    return cfg


def _apply_config(cfg: CampaignConfig, args: argparse.Namespace) -> None:
    for g in GROUPS[:-1]:  # outputs are recorded, not replayed
        items = {"seed": cfg.seed} if g == "seed" else getattr(cfg, g)
        for dest, value in items.items():
            if (g == "graph" and dest == "hash") or (g == "seed" and value is None):
                continue
            if dest not in _DEST_GROUP or not hasattr(args, dest):
                raise CliError(f"config schema violation: {dest!r} is not a {args.campaign} option")
            setattr(args, dest, value)


# ---------------------------------------------------------------------------
# shared helpers


def _times(args) -> np.ndarray:
    if getattr(args, "t", None):
        return np.asarray(args.t, dtype=float)
    return log_grid(args.tmin, args.tmax, args.per_decade)


def _load(path) -> "Graph":
    if not path:
        raise CliError("--graph is required for this campaign")
    try:
        return load_graph(path)
    except FileNotFoundError:
        raise CliError(f"graph file not found: {path}") from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid graph file {path}: {exc}") from None


def _metric(graph, kind: str, S: float | None) -> PseudoMetric:
    if kind == "path-degree":
        if S is None:
            raise CliError("--S is required for the path-degree metric")
        return path_degree_metric(graph, S)
    if kind == "combinatorial":
        return combinatorial_metric(graph)
    if kind == "chemical":
        return chemical_distance(graph)
    raise CliError(f"metric {kind!r} has no table form; use the metric command")


def _ids(graph, given) -> list[str]:
    if not given:
        return list(graph.ids)
    missing = [v for v in given if v not in graph.index]
    if missing:
        raise CliError(f"unknown vertices: {missing}")
    return list(given)


def _add_time_args(p, tmin=0.1, tmax=50.0):
    _arg(p, "grids", "--t", type=float, nargs="+", help="explicit times (overrides the log grid)")
    _arg(p, "grids", "--tmin", type=float, default=tmin)
    _arg(p, "grids", "--tmax", type=float, default=tmax)
    _arg(p, "grids", "--per-decade", type=int, default=40)


def _add_pair_args(p):
    _arg(p, "grids", "--x", nargs="+", help="source vertex ids (default: all)")
    _arg(p, "grids", "--y", nargs="+", help="target vertex ids (default: all)")


def _add_graph_arg(p, required=True):
    _arg(p, "graph", "--graph", required=required, help="graph JSON file")


# ---------------------------------------------------------------------------
# build / kernel / metric


def cmd_build(args) -> int:
    try:
        if args.builder == "lattice":
            if args.b_iid:
                lo, hi = args.b_iid
                cond = IidUniform(lo, hi, args.seed)
            else:
                cond = args.b
            meas = "deg" if args.m == "deg" else float(args.m)
            g = build_lattice_box(args.dim, args.radius, cond, meas)
            params = {"dim": args.dim, "radius": args.radius, "b": args.b, "b_iid": args.b_iid,
                      "m": args.m, "seed": args.seed}
        elif args.builder == "anti-tree":
            g = build_anti_tree(args.gamma, args.levels)
            params = {"gamma": args.gamma, "levels": args.levels}
        else:
            g = graph_from_dict(json.loads(Path(args.spec).read_text()))
            params = {"spec": args.spec}
    except (GraphError, ValueError) as exc:
        raise CliError(str(exc)) from None
    cfg = CampaignConfig("build", graph={"builder": args.builder, **params}, seed=args.seed)
    data = g.to_dict()
    data["meta"] = {"tool": "heatlab", "version": __version__, "config_hash": cfg.config_hash(),
                    "seed": cfg.seed}
    Path(args.output).write_text(json.dumps(data, separators=(",", ":")))
    print(f"vertices={g.n} edges={g.n_edges} hash={g.content_hash()} -> {args.output}")
    return EXIT_PASS


def cmd_kernel(args) -> int:
    g = _load(args.graph)
    t = np.asarray(args.t, dtype=float) if args.t else log_grid(args.tmin, args.tmax, args.per_decade)
    cfg = CampaignConfig("kernel", graph={"path": args.graph, "hash": g.content_hash()},
                         kernel={"backend": args.backend}, grids={"t": t, "x": args.x, "y": args.y})
    try:
        sl = heat_kernel_finite(g, t, _ids(g, args.x), _ids(g, args.y), args.backend)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _emit(sl.to_csv(header=_header(cfg)), args.output)
    return EXIT_PASS


def cmd_metric(args) -> int:
    g = _load(args.graph)
    cfg = CampaignConfig("metric", graph={"path": args.graph, "hash": g.content_hash()},
                         metric={"kind": args.kind, "S": args.S, "tol": args.tol},
                         grids={"x": args.x, "y": args.y})
    xs, ys = _ids(g, args.x), _ids(g, args.y)
    if args.kind in ("davies", "max-intrinsic"):
        lines = [f"# {_header(cfg)}", f"# provenance={args.kind}", "x_id,y_id,value,residual,gap"]
        for a in xs:
            for b in ys:
                if args.kind == "davies":
                    val, cert = davies_metric(g, a, b, args.tol)
                else:
                    if args.S is None:
                        raise CliError("--S is required for max-intrinsic")
                    val, cert = max_intrinsic_metric(g, a, b, args.S, args.tol)
                lines.append(f"{a},{b},{val!r},{cert.residual!r},{cert.gap!r}")
        _emit("\n".join(lines) + "\n", args.output)
        return EXIT_PASS
    metric = _metric(g, args.kind, args.S)
    pairs = [(g.index[a], g.index[b]) for a in xs for b in ys]
    _emit(metric.to_csv(pairs, header=_header(cfg)), args.output)
    return EXIT_PASS


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verify campaigns; each returns (passed, payload dict, csv rows)


def run_universal(args):
    g = _load(args.graph)
    t = _times(args)
    pairs = product_pairs(_ids(g, args.x), _ids(g, args.y))
    if args.metric == "max-intrinsic":
        rep = verify_max_intrinsic(g, args.S, t, pairs, solver_tol=args.solver_tol)
    else:
        rep = verify_universal(g, _metric(g, args.metric, args.S), args.S, t, pairs)
    return rep.passed, rep.to_dict(), rep.rows


def run_davies(args):
    g = _load(args.graph)
    pairs = product_pairs(_ids(g, args.x), _ids(g, args.y))
    rep = verify_davies(g, _times(args), pairs, solver_tol=args.solver_tol)
    return rep.passed, rep.to_dict(), rep.rows


def run_pang(args):
    rep = fit_pang_constant(args.d_max, _times(args))
    return rep.passed, rep.to_dict(), rep.rows


def run_fk(args):
    g = _load(args.graph)
    metric = _metric(g, args.metric, args.S)
    fams = [SubsetFamily("all-balls")]
    if args.random_count:
        fams.append(SubsetFamily("random-subsets", count=args.random_count, seed=args.seed or 0))
    if args.thresholds:
        fams.append(SubsetFamily("heat-sublevel", thresholds=tuple(args.thresholds), t=args.heat_t))
    rep = verify_fk(g, metric, args.center, args.R, args.n, fams, a=args.a)
    return rep.passed, rep.to_dict(), rep.rows


def _radii(args):
    if args.radii:
        return np.asarray(args.radii, dtype=float)
    return np.logspace(math.log10(args.rmin), math.log10(args.rmax), args.n_radii)


def run_vd(args):
    g = _load(args.graph)
    metric = _metric(g, args.metric, args.S)
    log_phi = None
    if args.error_r is not None:
        params = ErrorParams(args.N, args.error_r, args.S or 1.0)
        log_phi = lambda c, r: phi(params, g.Deg[g.index[c]], r)  # noqa: E731
    rep = verify_vd(g, metric, _ids(g, args.centers), _radii(args), args.N, log_phi=log_phi,
                    constant=args.C, fit=args.fit, c_max=args.c_max)
    return rep.passed, rep.to_dict(), rep.rows


def run_g(args):
    g = _load(args.graph)
    metric = _metric(g, args.metric, args.S)
    pairs = product_pairs(_ids(g, args.x), _ids(g, args.y))
    t = _times(args)
    sl = heat_kernel_finite(g, t[t > 0], list(dict.fromkeys(p[0] for p in pairs)),
                            list(dict.fromkeys(p[1] for p in pairs)))
    psi = ErrorParams(args.N, args.error_r, args.S) if args.error_r is not None else args.psi
    rep = verify_g(g, sl, metric, args.S, args.N, pairs, psi=psi, fit=args.fit, c_max=args.c_max)
    return rep.passed, rep.to_dict(), rep.rows


def run_main_forward(args):
    if args.line:
        rep = theorem_main_forward_line(args.r, args.S, args.n, _times(args), args.window, args.c_max)
    else:
        g = _load(args.graph)
        metric = path_degree_metric(g, args.S)
        pairs = product_pairs(_ids(g, args.x), _ids(g, args.y))
        rep = theorem_main_forward(g, metric, args.S, args.r, args.n, _times(args), pairs,
                                   c_max=args.c_max)
    return rep.passed, rep.to_dict(), rep.g.rows + rep.vd.rows


def run_lemma(args):
    if args.graph:
        reps = [lemma_metric_comparison(_load(args.graph), args.S, args.tol)]
    else:
        reps = lemma_campaign(args.random, args.max_vertices, args.S, args.seed or 0, args.tol)
    rows = []
    for k, r in enumerate(reps):
        for p in r.pairs:
            lhs = math.log(math.sqrt(2) * p["rho_S"]) if p["rho_S"] > 0 else -math.inf
            rhs = math.log(p["rho_E"]) if p["rho_E"] > 0 else -math.inf
            rows.append(("lemma", float(k), p["x"], p["y"], lhs, rhs, lhs - rhs))
    payload = {"graphs": [r.to_dict() for r in reps],
               "violations_lower": sum(len(r.violations_lower) for r in reps),
               "violations_reverse": sum(len(r.violations_reverse) for r in reps),
               "reverse_applies": sum(r.reverse_applies for r in reps)}
    return all(r.passed for r in reps), payload, rows


def run_z2_trend(args):
    rep = davies_z2_trend(args.k, args.solver_tol)
    rows = [("z2-trend", float(r["k"]), "0,0", f"{r['k']},{r['k']}", math.log(r["rho_E"]),
             math.log(math.sqrt(2) * r["k"]), math.log(r["ratio"])) for r in rep.rows]
    return rep.passed, rep.to_dict(), rows


def run_transfer(args):
    out = transfer_line_campaign(args.distances, _times(args))
    reports = {str(d): r.to_dict() for d, r in out["reports"].items()}
    passed = all(r.passed for r in out["reports"].values())
    return passed, {"kappa": out["kappa"], "reports": reports, "truncation": out["truncation"]}, []


def run_antitree(args):
    rep = verify_antitree(args.gamma, args.levels, _times(args), args.pairs, args.seed or 0,
                          args.min_pairs)
    return rep.passed, rep.to_dict(), rep.first.rows + rep.second.rows


def run_nash(args):
    if args.graph:
        g = _load(args.graph)
        support = None
    else:
        g = build_lattice_box(1, args.radius, 1.0, 1.0)
        support = [i for i, v in enumerate(g.ids) if abs(int(v)) < args.radius]
    center = args.center if args.center is not None else ("0" if "0" in g.index else g.ids[0])
    members = nash_members(g, center, radii=args.ball_radii or (), heat_times=args.heat_times or (),
                           support=support)
    rep = nash_probe(g, args.n, members)
    rows = [("nash", 0.0, center, label, math.log(v), math.log(rep.c_min), math.log(v / rep.c_min))
            for label, v in rep.contributions]
    return True, rep.to_dict(), rows


def run_jump_one(args):
    rep = jump_one_z2_campaign(args.radius, args.lo, args.hi, args.seed if args.seed is not None else 11,
                            _times(args), args.tmax, args.window)
    return rep.passed, rep.to_dict(), rep.rows


def run_chemical_frontier(args):
    g = _load(args.graph)
    pairs = product_pairs(_ids(g, args.x), _ids(g, args.y))
    rep = chemical_frontier(g, _times(args), pairs, args.n, tuple(args.gammas))
    rows = [row for r in rep.reports for row in r.rows]
    return all(math.isfinite(c) for c in rep.constants), rep.to_dict(), rows


CAMPAIGNS = {}


def _campaign(sub, name, runner, help_text):
    p = sub.add_parser(name, help=help_text)
    p.set_defaults(runner=runner, campaign=name)
    p.add_argument("--config", help="campaign config JSON or a previous report (replaces the flags)")
    p.add_argument("--out-dir", default=".", help="directory for <campaign>.json and .csv")
    p.add_argument("--name", help="output file stem (default: campaign name)")
    CAMPAIGNS[name] = p
    return p


def _verify_parsers(sub):
    p = _campaign(sub, "universal", run_universal, "universal Gaussian of an intrinsic metric")
    _add_graph_arg(p)
    _arg(p, "metric", "--metric", default="path-degree",
         choices=["path-degree", "combinatorial", "chemical", "max-intrinsic"])
    _arg(p, "metric", "--S", type=float, default=1.0)
    _arg(p, "kernel", "--solver-tol", type=float, default=1e-8)
    _add_time_args(p)
    _add_pair_args(p)

    p = _campaign(sub, "davies", run_davies, "Davies' bound with rho_E and the regularity constant")
    _add_graph_arg(p)
    _arg(p, "kernel", "--solver-tol", type=float, default=1e-6)
    _add_time_args(p, 0.5, 20.0)
    _add_pair_args(p)

    p = _campaign(sub, "pang", run_pang, "fit the constant of Pang's two-sided estimate on Z")
    _arg(p, "bound", "--d-max", type=int, default=30)
    _add_time_args(p, 0.1, 100.0)

    p = _campaign(sub, "fk", run_fk, "sampled Faber-Krahn constant")
    _add_graph_arg(p)
    _arg(p, "metric", "--metric", default="combinatorial", choices=["path-degree", "combinatorial", "chemical"])
    _arg(p, "metric", "--S", type=float)
    _arg(p, "bound", "--center", required=True)
    _arg(p, "bound", "--R", type=float, required=True)
    _arg(p, "bound", "--n", type=float, required=True)
    _arg(p, "bound", "--a", type=float)
    _arg(p, "grids", "--random-count", type=int, default=0)
    _arg(p, "grids", "--thresholds", type=float, nargs="+")
    _arg(p, "grids", "--heat-t", type=float, default=1.0)
    _arg(p, "seed", "--seed", type=int)

    p = _campaign(sub, "vd", run_vd, "volume doubling")
    _add_graph_arg(p)
    _arg(p, "metric", "--metric", default="combinatorial", choices=["path-degree", "combinatorial", "chemical"])
    _arg(p, "metric", "--S", type=float)
    _arg(p, "bound", "--N", type=float, required=True)
    _arg(p, "bound", "--C", type=float, default=1.0, help="constant Phi")
    _arg(p, "bound", "--error-r", type=float, help="use the error function Phi with this r")
    _arg(p, "bound", "--fit", action="store_true")
    _arg(p, "bound", "--c-max", type=float)
    _arg(p, "grids", "--centers", nargs="+")
    _arg(p, "grids", "--radii", type=float, nargs="+")
    _arg(p, "grids", "--rmin", type=float, default=1.0)
    _arg(p, "grids", "--rmax", type=float, default=10.0)
    _arg(p, "grids", "--n-radii", type=int, default=20)

    p = _campaign(sub, "g", run_g, "Gaussian upper bound form (G)")
    _add_graph_arg(p)
    _arg(p, "metric", "--metric", default="path-degree", choices=["path-degree", "combinatorial", "chemical"])
    _arg(p, "metric", "--S", type=float, default=1.0)
    _arg(p, "bound", "--N", type=float, required=True)
    _arg(p, "bound", "--psi", type=float, default=1.0, help="constant Psi")
    _arg(p, "bound", "--error-r", type=float, help="use the error function Psi with this r")
    _arg(p, "bound", "--fit", action="store_true")
    _arg(p, "bound", "--c-max", type=float)
    _add_time_args(p, 1.0, 100.0)
    _add_pair_args(p)

    p = _campaign(sub, "main-forward", run_main_forward, "FK => G(C Psi) and VD(C Phi): fitted C")
    _add_graph_arg(p, required=False)
    _arg(p, "graph", "--line", action="store_true", help="Z with unit weights, exhaustion kernels")
    _arg(p, "metric", "--S", type=float, default=1 / math.sqrt(2))
    _arg(p, "bound", "--r", type=float, default=750.0)
    _arg(p, "bound", "--n", type=float, default=1.0)
    _arg(p, "bound", "--c-max", type=float, default=1e3)
    _arg(p, "grids", "--window", type=int, default=200)
    _add_time_args(p, 1.0, 1e4)
    _add_pair_args(p)

    p = _campaign(sub, "lemma", run_lemma, "sqrt 2 rho_S <= rho_E (and the reverse when regular)")
    _add_graph_arg(p, required=False)
    _arg(p, "metric", "--S", type=float, default=1.0)
    _arg(p, "bound", "--tol", type=float, default=1e-5)
    _arg(p, "graph", "--random", type=int, default=20, help="number of random graphs without --graph")
    _arg(p, "graph", "--max-vertices", type=int, default=12)
    _arg(p, "seed", "--seed", type=int)

    p = _campaign(sub, "z2-trend", run_z2_trend, "rho_E(0, (k, k)) / (sqrt 2 k) on Z^2 boxes")
    _arg(p, "grids", "--k", type=int, nargs="+", default=[2, 4, 6, 8])
    _arg(p, "kernel", "--solver-tol", type=float, default=1e-6)

    p = _campaign(sub, "transfer", run_transfer, "two-point transfer of on-diagonal bounds on Z")
    _arg(p, "grids", "--distances", type=int, nargs="+", default=[0, 1, 2, 5, 10, 20, 40])
    _add_time_args(p, 0.1, 100.0)

    p = _campaign(sub, "antitree", run_antitree, "anchored anti-tree bounds, Dirichlet kernels")
    _arg(p, "graph", "--gamma", type=float, default=0.5)
    _arg(p, "graph", "--levels", type=int, default=600)
    _arg(p, "grids", "--pairs", type=int, default=60)
    _arg(p, "grids", "--min-pairs", type=int, default=50)
    _arg(p, "seed", "--seed", type=int)
    _add_time_args(p, 10368.0, 2e4)

    p = _campaign(sub, "nash", run_nash, "empirical lower bound on the Nash constant")
    _add_graph_arg(p, required=False)
    _arg(p, "graph", "--radius", type=int, default=64, help="Z box radius without --graph")
    _arg(p, "bound", "--n", type=float, default=1.0)
    _arg(p, "grids", "--center")
    _arg(p, "grids", "--ball-radii", type=int, nargs="+")
    _arg(p, "grids", "--heat-times", type=float, nargs="+")

    p = _campaign(sub, "jump-one", run_jump_one, "p_t <= c t^-1 exp(-rho^2/(c t)) on a random Z^2 box")
    _arg(p, "graph", "--radius", type=int, default=30)
    _arg(p, "graph", "--lo", type=float, default=0.5)
    _arg(p, "graph", "--hi", type=float, default=2.0)
    _arg(p, "graph", "--window", type=int, default=15)
    _arg(p, "seed", "--seed", type=int)
    _add_time_args(p, 0.1, 100.0)

    p = _campaign(sub, "chemical-frontier", run_chemical_frontier, "frontier C(gamma) of the chemical-distance bound form")
    _add_graph_arg(p)
    _arg(p, "bound", "--n", type=float, default=2.0)
    _arg(p, "bound", "--gammas", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.0, 4.0])
    _add_time_args(p, 1.0, 100.0)
    _add_pair_args(p)


def cmd_verify(args) -> int:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config: {exc}") from None
        if isinstance(data, dict) and data.get("tool") == "heatlab" and "config" in data:
            data = data["config"]  # a report written by verify replays its own config
        cfg = CampaignConfig.from_dict(data)
        if cfg.campaign != args.campaign:
            raise CliError(f"config is for campaign {cfg.campaign!r}, not {args.campaign!r}")
        _apply_config(cfg, args)
    _check_required(args)
    cfg = _config_from_args(args.campaign, args)
    if cfg.graph.get("graph"):
        cfg.graph["hash"] = _load(cfg.graph["graph"]).content_hash()
    passed, payload, rows = args.runner(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.name or args.campaign
    cfg.outputs = {"json": str(out / f"{stem}.json"), "csv": str(out / f"{stem}.csv")}
    doc = {"tool": "heatlab", "version": __version__, "config_hash": cfg.config_hash(),
           "seed": cfg.seed, "config": cfg.to_dict(), "passed": bool(passed), "report": payload}
    (out / f"{stem}.json").write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    lines = [f"# {_header(cfg)}", ",".join(("campaign", "t", "x", "y", "lhs_log", "rhs_log", "ratio_log"))]
    lines += [",".join([r[0], repr(float(r[1])), r[2], r[3]] + [repr(float(v)) for v in r[4:]])
              for r in rows]
    (out / f"{stem}.csv").write_text("\n".join(lines) + "\n")
    print(f"{args.campaign}: {'PASS' if passed else 'FAIL'} -> {out / stem}.json")
    return EXIT_PASS if passed else EXIT_VIOLATION


def cmd_report(args) -> int:
    ok = True
    for path in args.reports:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read report {path}: {exc}") from None
        rep = doc.get("report", {})
        bits = [f"{doc.get('config', {}).get('campaign', '?')}",
                "PASS" if doc.get("passed") else "FAIL", f"config={doc.get('config_hash')}"]
        for key in ("worst_log_ratio", "fitted_constant", "n_violations", "n_points"):
            if key in rep:
                bits.append(f"{key}={rep[key]}")
        print(" ".join(str(b) for b in bits))
        ok &= bool(doc.get("passed"))
    return EXIT_PASS if ok else EXIT_VIOLATION


def build_parser() -> Parser:
    parser = Parser(prog="heatlab", description="Heat kernels and Gaussian bounds on weighted graphs.")
    parser.add_argument("--version", action="version", version=f"heatlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    b = sub.add_parser("build", help="write a graph JSON file")
    bsub = b.add_subparsers(dest="builder", required=True, parser_class=Parser)
    lat = bsub.add_parser("lattice")
    lat.add_argument("--dim", type=int, required=True)
    lat.add_argument("--radius", type=int, required=True)
    lat.add_argument("--b", type=float, default=1.0, help="constant conductance")
    lat.add_argument("--b-iid", type=float, nargs=2, metavar=("LO", "HI"),
                     help="iid uniform conductances (keyed by --seed)")
    lat.add_argument("--m", default="1", help="constant measure or 'deg'")
    lat.add_argument("--seed", type=int, default=0)
    lat.add_argument("-o", "--output", required=True)
    at = bsub.add_parser("anti-tree")
    at.add_argument("--gamma", type=float, required=True)
    at.add_argument("--levels", type=int, required=True)
    at.add_argument("--seed", type=int)
    at.add_argument("-o", "--output", required=True)
    cu = bsub.add_parser("custom")
    cu.add_argument("--spec", required=True, help="graph JSON to validate")
    cu.add_argument("--seed", type=int)
    cu.add_argument("-o", "--output", required=True)
    b.set_defaults(func=cmd_build)

    k = sub.add_parser("kernel", help="heat kernel values as CSV")
    k.add_argument("graph")
    k.add_argument("--t", type=float, nargs="+")
    k.add_argument("--tmin", type=float, default=0.1)
    k.add_argument("--tmax", type=float, default=10.0)
    k.add_argument("--per-decade", type=int, default=10)
    k.add_argument("--x", nargs="+")
    k.add_argument("--y", nargs="+")
    k.add_argument("--backend", choices=["expm", "dense"], default="expm")
    k.add_argument("-o", "--output")
    k.set_defaults(func=cmd_kernel)

    m = sub.add_parser("metric", help="metric values as CSV")
    m.add_argument("graph")
    m.add_argument("--kind", required=True,
                   choices=["path-degree", "combinatorial", "chemical", "davies", "max-intrinsic"])
    m.add_argument("--S", type=float)
    m.add_argument("--tol", type=float, default=1e-8)
    m.add_argument("--x", nargs="+")
    m.add_argument("--y", nargs="+")
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_metric)

    v = sub.add_parser("verify", help="run a verification campaign")
    vsub = v.add_subparsers(dest="campaign", required=True, parser_class=Parser)
    _verify_parsers(vsub)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="summarise report JSON files")
    r.add_argument("reports", nargs="+")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        thread_count()
        return args.func(args)
    except CliError as exc:
        print(f"heatlab: error: {exc}", file=sys.stderr)
    except Exception as exc:  # every failure maps to the tool-error exit code
        print(f"heatlab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
