import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatlab.campaigns import (chemical_frontier, jump_one_form_check, davies_z2_trend, lemma_campaign,
                               lemma_metric_comparison, minimal_constant, random_connected_graph,
                               sample_level_pairs, theorem_main_forward, transfer_fit,
                               transfer_line_campaign, two_point_transfer_check, verify_antitree)
from heatlab.graph import build_lattice_box
from heatlab.metrics import combinatorial_metric, path_degree_metric
from heatlab.verify import PreconditionError, log_grid, product_pairs


@given(st.floats(-50, 50), st.floats(0, 1e4))
def test_minimal_constant_is_least_root(v, a):
    C = float(minimal_constant(np.array([v]), np.array([a]))[0])
    assert math.log(C) - a / C >= v - 1e-12
    smaller = C * (1 - 1e-9)
    assert math.log(smaller) - a / smaller < v + 1e-12


def test_minimal_constant_without_gaussian_term():
    np.testing.assert_allclose(minimal_constant(np.array([0.0, 1.0]), 0.0), [1.0, math.e])


def test_random_connected_graph_is_seeded():
    a, b = random_connected_graph(9, 4), random_connected_graph(9, 4)
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != random_connected_graph(9, 5).content_hash()


def test_sample_level_pairs():
    pairs = sample_level_pairs(20, 30, 1)
    assert len(pairs) == len(set(pairs)) == 30
    assert all(0 <= k < l <= 20 for k, l in pairs)
    with pytest.raises(ValueError):
        sample_level_pairs(3, 100, 0)


def test_lemma_small():
    rep = lemma_metric_comparison(random_connected_graph(5, 2), oracle_pair=("0", "4"))
    assert rep.passed
    assert all(v < 1e-4 for v in rep.oracle_gaps.values())
    reps = lemma_campaign(count=2, max_vertices=5, seed=3)
    assert all(r.passed for r in reps)
    # odd-indexed graphs have m = 1, b in [1, 2]: sqrt 2-regular
    assert reps[1].reverse_applies


def test_z2_trend_small():
    rep = davies_z2_trend((1, 2))
    assert rep.lower_bound_ok and rep.nonincreasing and rep.truncation_ok


def test_transfer_fit_detects_bad_hypotheses():
    t = log_grid(0.1, 10, 10)
    lhs = np.zeros_like(t)
    rep = transfer_fit(t, lhs, lhs, lhs, 1.0, 1.0, 1.0, lambda s: np.ones_like(s) * 10.0,
                       lambda s: np.ones_like(s) * 10.0, A=1.0, gamma=2.0, delta=0.0)
    # p_t(x, x) = 1 is not below 1 / f = 0.1
    assert not rep.hypotheses["on_diagonal_x"] and not rep.passed


def test_transfer_line_campaign_small():
    out = transfer_line_campaign((0, 2), log_grid(0.1, 10, 10))
    assert out["kappa"] > 0
    assert all(r.passed for r in out["reports"].values())


def test_two_point_transfer_needs_intrinsic_metric():
    g = build_lattice_box(1, 10)
    f = lambda s: np.minimum(1, np.sqrt(s))  # noqa: E731
    with pytest.raises(PreconditionError):
        two_point_transfer_check(g, combinatorial_metric(g), "0", "3", f, f, [1.0], A=2.0, gamma=2.0)
    rep = two_point_transfer_check(g, path_degree_metric(g, 1.0), "0", "3", f, f,
                                   log_grid(0.1, 10, 10), A=math.sqrt(2), gamma=2.0)
    assert rep.hypotheses["regular_x"]


def test_antitree_small():
    rep = verify_antitree(0.5, 40, (10368.0,), n_pairs=12, min_pairs=10)
    assert rep.passed and len(rep.level_pairs) == 12
    with pytest.raises(PreconditionError):
        verify_antitree(0.5, 80, (100.0,))


def test_jump_one_and_chemical_frontier_small():
    g = build_lattice_box(2, 6)
    pairs = product_pairs(["0,0"], list(g.ids))
    rep = jump_one_form_check(g, path_degree_metric(g, 1.0), log_grid(0.1, 20, 5), pairs, 2, t_max=20)
    assert rep.passed and math.isfinite(rep.fitted_constant)
    fr = chemical_frontier(g, log_grid(0.5, 20, 5), pairs, 2.0, (0.0, 1.0))
    assert fr.D == 4 and all(math.isfinite(c) for c in fr.constants)
    # a larger polynomial prefactor can only lower the needed constant
    assert fr.constants[1] <= fr.constants[0] * (1 + 1e-12)


def test_main_forward_finite():
    g = build_lattice_box(1, 30)
    S = 2 ** -0.5
    rep = theorem_main_forward(g, path_degree_metric(g, S), S, 750.0, 1.0, log_grid(1, 100, 5),
                               product_pairs(["0"], list(g.ids)))
    # r = 750 exceeds 1000 S = 707, so the hypothesis holds unrelaxed
    assert rep.passed and not rep.relaxed
    assert rep.psi_limit["nonincreasing"]
