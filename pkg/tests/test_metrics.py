import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatlab.graph import ball, build_anti_tree, build_graph, build_lattice_box
from heatlab.metrics import (check_intrinsic, chemical_distance, combinatorial_distance,
                             combinatorial_metric, floyd_warshall, path_degree_metric,
                             path_degree_weights)

from conftest import weighted_graphs


@given(weighted_graphs(), st.floats(0.1, 3.0))
def test_path_degree_metric_is_intrinsic_with_jump_S(g, S):
    rho = path_degree_metric(g, S)
    rep = check_intrinsic(g, rho)
    assert rep.is_intrinsic
    assert rep.jump_size <= S * (1 + 1e-12)
    assert rho.check_axioms() <= 1e-9


@given(weighted_graphs())
def test_dijkstra_matches_floyd_warshall(g):
    w = path_degree_weights(g, 1.0)
    np.testing.assert_allclose(path_degree_metric(g, 1.0).table(), floyd_warshall(g, w), rtol=1e-12)


def test_line_path_degree_values():
    g = build_lattice_box(1, 5)
    rho = path_degree_metric(g, 1.0)
    # interior vertices have m / deg = 1/2
    assert rho.value("0", "3") == pytest.approx(3 / math.sqrt(2))
    # the end vertex has deg 1, but the neighbour caps the edge length
    assert rho.value("4", "5") == pytest.approx(1 / math.sqrt(2))
    assert rho.value("-5", "5") == pytest.approx(10 / math.sqrt(2))


def test_jump_cap_binds():
    g = build_graph({"a": 100.0, "b": 100.0}, [("a", "b", 1.0)])
    assert path_degree_metric(g, 0.5).value("a", "b") == 0.5
    assert path_degree_metric(g, 50.0).value("a", "b") == 10.0


def test_combinatorial_metric_is_not_intrinsic_on_lattice():
    g = build_lattice_box(1, 4)
    rep = check_intrinsic(g, combinatorial_metric(g))
    assert not rep.is_intrinsic
    assert rep.max_ratio == pytest.approx(2.0)


def test_chemical_distance_values():
    g = build_graph({"a": 1.0, "b": 4.0, "c": 9.0}, [("a", "b", 4.0), ("b", "c", 1.0)])
    d = chemical_distance(g)
    assert d.value("a", "b") == pytest.approx(0.5)
    assert d.value("b", "c") == pytest.approx(2.0)
    assert d.value("a", "c") == pytest.approx(2.5)


def test_bfs_on_anti_tree():
    g = build_anti_tree(0.5, 6)
    dist = combinatorial_distance(g, "0:0")
    assert dist.max() == 6
    np.testing.assert_array_equal(dist, combinatorial_metric(g).row(0))


def test_ball_and_volume():
    g = build_lattice_box(2, 3)
    rho = combinatorial_metric(g)
    o = g.index["0,0"]
    assert len(ball(g, rho, "0,0", 2)) == 13
    np.testing.assert_array_equal(rho.volume(o, [0, 0.5, 1, 2]), [1, 1, 5, 13])


def test_scaled_metric():
    g = build_lattice_box(1, 3)
    rho = path_degree_metric(g, 1.0)
    half = rho.scaled(0.5)
    assert half.value("0", "2") == pytest.approx(rho.value("0", "2") / 2)
    assert half.jump_bound == 0.5


def test_csv_output():
    g = build_lattice_box(1, 1)
    text = combinatorial_metric(g).to_csv([(0, 2)], header="h")
    assert text.splitlines() == ["# h", "# provenance=combinatorial", "x_id,y_id,value", "-1,1,2.0"]


def test_invalid_S():
    with pytest.raises(ValueError):
        path_degree_metric(build_lattice_box(1, 2), 0.0)
