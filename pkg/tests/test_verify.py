import json
import math

import numpy as np
import pytest

from heatlab.bounds import ErrorParams
from heatlab.graph import build_anti_tree, build_graph, build_lattice_box
from heatlab.heat import heat_kernel_finite
from heatlab.metrics import combinatorial_metric, path_degree_metric
from heatlab.verify import (CSV_COLUMNS, PreconditionError, SubsetFamily, build_report, jsonable,
                            log_grid, nash_contribution, nash_members, nash_probe, product_pairs,
                            verify_davies, verify_fk, verify_g, verify_max_intrinsic,
                            verify_universal, verify_vd)


def test_log_grid():
    g = log_grid(0.1, 100, 40)
    assert len(g) == 121
    assert g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(100)
    assert np.allclose(np.diff(np.log10(g)), 1 / 40)


def test_build_report_pass_fail_and_fit():
    t = np.array([1.0, 2.0])
    rep = build_report("c", "k", {}, t, ["a", "a"], ["b", "b"], np.log([1.0, 3.0]),
                       np.log([2.0, 2.0]), tol=1e-10)
    assert not rep.passed
    assert len(rep.violations) == 1
    assert rep.worst_log_ratio == pytest.approx(math.log(1.5))
    fit = build_report("c", "k", {}, t, ["a", "a"], ["b", "b"], np.log([1.0, 3.0]),
                       np.log([2.0, 2.0]), fit=True, c_max=2.0)
    assert fit.fitted_constant == pytest.approx(1.5)
    assert fit.passed
    tight = build_report("c", "k", {}, t, ["a", "a"], ["b", "b"], np.log([1.0, 3.0]),
                         np.log([2.0, 2.0]), fit=True, c_max=1.2)
    assert not tight.passed


def test_report_serialisation():
    rep = build_report("c", "k", {"x": np.float64(1.0)}, np.array([1.0]), ["a"], ["b"],
                       np.array([-1.0]), np.array([np.inf]))
    d = json.loads(rep.to_json())
    assert d["passed"] and d["n_points"] == 1
    lines = rep.to_csv(header="h").splitlines()
    assert lines[0] == "# h" and lines[1] == ",".join(CSV_COLUMNS)
    assert jsonable({"a": np.array([1, 2]), "b": -math.inf, "c": (np.int64(3),)}) == \
        {"a": [1, 2], "b": "-inf", "c": [3]}


def test_universal_passes_and_refuses_non_intrinsic():
    g = build_lattice_box(1, 15)
    pairs = product_pairs(["0", "7"], list(g.ids))
    rep = verify_universal(g, path_degree_metric(g, 1.0), 1.0, log_grid(0.1, 20, 10), pairs)
    assert rep.passed and rep.worst_log_ratio <= 1e-10
    with pytest.raises(PreconditionError, match="not intrinsic"):
        verify_universal(g, combinatorial_metric(g), 1.0, [1.0], pairs)
    with pytest.raises(PreconditionError):
        verify_universal(g, path_degree_metric(g, 1.0), 0.5, [1.0], pairs)


def test_universal_fails_on_inflated_metric():
    # a metric three times too large must be caught as a violation once the precondition is bypassed
    g = build_lattice_box(1, 10)
    big = path_degree_metric(g, 1.0).scaled(3.0)
    from heatlab.verify import _universal_report
    rep = _universal_report(g, np.array([big.value("0", "6")]), 3.0, log_grid(0.1, 10, 10),
                            product_pairs(["0"], ["6"]), None, "expm", 1e-10, "u", {}, [])
    assert not rep.passed


def test_max_intrinsic_and_davies_on_small_graph():
    g = build_graph({"a": 1.0, "b": 2.0, "c": 1.0, "d": 1.5},
                    [("a", "b", 1.0), ("b", "c", 0.5), ("c", "d", 2.0), ("d", "a", 1.0)])
    pairs = product_pairs(["a"], ["b", "c", "d"])
    t = log_grid(0.1, 10, 5)
    assert verify_max_intrinsic(g, 1.0, t, pairs).passed
    assert verify_davies(g, t, pairs).passed


def test_fk_rows_and_threshold():
    g = build_lattice_box(1, 10)
    rho = combinatorial_metric(g)
    fams = [SubsetFamily("all-balls"), SubsetFamily("random-subsets", count=20, seed=1),
            SubsetFamily("heat-sublevel", thresholds=(0.1, 0.5), t=2.0)]
    rep = verify_fk(g, rho, "0", 5.0, 1.0, fams)
    a_est = rep.fitted_constant
    assert a_est > 0
    ok = verify_fk(g, rho, "0", 5.0, 1.0, fams, a=a_est * 0.999)
    bad = verify_fk(g, rho, "0", 5.0, 1.0, fams, a=a_est * 1.5)
    assert ok.passed and not bad.passed
    with pytest.raises(ValueError):
        SubsetFamily("bogus")


def test_vd_constant_and_fit():
    g = build_lattice_box(1, 30)
    rho = combinatorial_metric(g)
    radii = np.arange(1, 11, dtype=float)
    # (2R + 1) / (2r + 1) <= R / r for r <= R, with equality at R = r
    ok = verify_vd(g, rho, ["0"], radii, 1.0, fit=True)
    assert ok.passed and ok.fitted_constant == pytest.approx(1.0)
    # N = 1/2 needs Phi = 21 / (3 sqrt 10) at r = 1, R = 10
    assert not verify_vd(g, rho, ["0"], radii, 0.5).passed
    fit = verify_vd(g, rho, ["0"], radii, 0.5, fit=True)
    assert fit.fitted_constant == pytest.approx(7 / math.sqrt(10))
    assert verify_vd(g, rho, ["0"], radii, 0.5, constant=7 / math.sqrt(10) * (1 + 1e-9)).passed


def test_g_with_error_function():
    g = build_lattice_box(1, 40)
    S = 2 ** -0.5
    rho = path_degree_metric(g, S)
    kern = heat_kernel_finite(g, log_grid(1, 100, 5), ["0"], list(g.ids))
    rep = verify_g(g, kern, rho, S, 1.0, product_pairs(["0"], list(g.ids)),
                   psi=ErrorParams(1.0, 750.0, S), fit=True, c_max=1e3)
    assert rep.passed and rep.fitted_constant <= 1e3
    with pytest.raises(ValueError, match="safe radius"):
        verify_g(g, kern, rho, S, 1.0, [("0", "1")], max_radius=5.0)


def test_nash_delta_on_line():
    g = build_lattice_box(1, 20)
    delta = np.zeros(g.n)
    delta[g.index["0"]] = 1.0
    # ||delta||_2^6 / (E(delta) ||delta||_1^4) = 1 / 2 with m = b = 1
    assert nash_contribution(g, delta, 1.0) == pytest.approx(0.5)
    support = [i for i, v in enumerate(g.ids) if abs(int(v)) < 20]
    rep = nash_probe(g, 1.0, nash_members(g, "0", radii=(1, 2, 3), heat_times=(1.0,), support=support))
    assert rep.c_min == pytest.approx(0.5) and rep.argmax == "delta"
    const = np.ones(g.n)
    assert math.isnan(nash_contribution(g, const, 1.0))


def test_fk_on_anti_tree():
    g = build_anti_tree(0.5, 8)
    rho = path_degree_metric(g, 1.0)
    rep = verify_fk(g, rho, "0:0", 3.0, 2.0, SubsetFamily("all-balls"))
    assert rep.fitted_constant > 0 and len(rep.rows) > 0
