import math

import pytest

from heatlab.graph import VertexSet, build_graph, build_lattice_box
from heatlab.metrics import path_degree_metric
from heatlab.optimal import (davies_metric, max_intrinsic_metric, regularity_constant,
                             regularity_detail)
from heatlab.oracles import (davies_oracle, davies_oracle_lower, max_intrinsic_oracle,
                             max_intrinsic_oracle_lower)
from heatlab.parallel import pmap

from conftest import random_graph

TWO = build_graph({"a": 1.0, "b": 1.0}, [("a", "b", 1.0)])
THREE = build_graph({"a": 1.0, "b": 1.0, "c": 1.0}, [("a", "b", 1.0), ("b", "c", 1.0)])


def test_closed_forms():
    assert davies_metric(TWO, "a", "b")[0] == pytest.approx(math.sqrt(2), abs=1e-6)
    assert davies_metric(THREE, "a", "c")[0] == pytest.approx(2.0, abs=1e-6)
    assert max_intrinsic_metric(TWO, "a", "b", 1.0)[0] == pytest.approx(1.0, abs=1e-6)
    assert max_intrinsic_metric(TWO, "a", "b", 0.25)[0] == pytest.approx(0.25, abs=1e-6)
    assert max_intrinsic_metric(THREE, "a", "c", 1.0)[0] == pytest.approx(math.sqrt(2), abs=1e-6)


def test_oracles_closed_forms():
    assert davies_oracle(TWO, "a", "b") == pytest.approx(math.sqrt(2), abs=1e-6)
    assert davies_oracle(THREE, "a", "c") == pytest.approx(2.0, abs=1e-6)
    assert max_intrinsic_oracle(THREE, "a", "c", 1.0) == pytest.approx(math.sqrt(2), abs=1e-6)


def test_zero_distance_and_symmetry():
    g = random_graph(5, 1)
    assert davies_metric(g, "2", "2")[0] == 0.0
    assert davies_metric(g, "0", "3")[0] == pytest.approx(davies_metric(g, "3", "0")[0], abs=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_solver_between_oracle_bounds(seed):
    g = random_graph(5, 100 + seed)
    value, cert = davies_metric(g, "0", "4", 1e-8)
    assert davies_oracle_lower(g, "0", "4") <= value + 1e-6
    assert value <= cert.extra["upper"] + 1e-9
    assert cert.gap is not None and cert.gap <= 1e-6
    rs = max_intrinsic_metric(g, "0", "4", 1.0, 1e-8)[0]
    assert max_intrinsic_oracle_lower(g, "0", "4", 1.0) <= rs + 1e-6
    assert rs == pytest.approx(max_intrinsic_oracle(g, "0", "4", 1.0), abs=1e-4)


def test_max_intrinsic_dominates_path_degree():
    g = random_graph(6, 5)
    pd = path_degree_metric(g, 1.0)
    value, cert = max_intrinsic_metric(g, "0", "5", 1.0)
    assert value >= pd.value("0", "5") - 1e-7
    table = cert.extra["table"]
    assert table.shape == (6, 6)


def test_davies_on_line_with_support():
    g = build_lattice_box(1, 6)
    support = VertexSet.of(g, [str(i) for i in range(-5, 6)])
    value, _ = davies_metric(g, "0", "3", 1e-8, support=support)
    # increments d1, d2, d3 with d1^2, d3^2 <= 2 and consecutive squares summing to <= 2:
    # d1 = d3 = a, d2 = sqrt(2 - a^2) maximised at a^2 = 8/5, total sqrt 10
    assert value == pytest.approx(math.sqrt(10), abs=1e-6)


def test_regularity_on_line():
    g = build_lattice_box(1, 5)
    S, pair, cert = regularity_detail(g)
    assert S == pytest.approx(math.sqrt(2), abs=1e-5)
    assert pair[0] in g.index and pair[1] in g.index
    assert regularity_constant(g) == pytest.approx(S)


def test_threaded_solves_agree(monkeypatch):
    g = random_graph(7, 9)
    pairs = [("0", str(k)) for k in range(1, 7)]
    serial = [davies_metric(g, a, b)[0] for a, b in pairs]
    monkeypatch.setenv("HEATLAB_THREADS", "4")
    threaded = pmap(lambda p: davies_metric(g, *p)[0], pairs)
    assert threaded == pytest.approx(serial, abs=1e-9)
