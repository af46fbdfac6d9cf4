import contextlib
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from heatlab.graph import build_graph, build_lattice_box

settings.register_profile("heatlab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("heatlab")


@st.composite
def weighted_graphs(draw, min_n=2, max_n=8, lo=0.2, hi=5.0):
    """Connected graphs: a random spanning tree plus random extra edges."""
    n = draw(st.integers(min_n, max_n))
    weight = st.floats(lo, hi, allow_nan=False)
    m = {str(k): draw(weight) for k in range(n)}
    edges = {}
    for k in range(1, n):
        parent = draw(st.integers(0, k - 1))
        edges[(parent, k)] = draw(weight)
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    for a, b in extra:
        if a != b:
            edges.setdefault((min(a, b), max(a, b)), draw(weight))
    return build_graph(m, [(str(a), str(b), w) for (a, b), w in edges.items()])


def random_graph(n, seed, p=0.5, lo=0.5, hi=2.0):
    rng = np.random.default_rng(seed)
    while True:
        edges = [(str(a), str(b), float(rng.uniform(lo, hi)))
                 for a in range(n) for b in range(a + 1, n) if rng.random() < p]
        try:
            return build_graph({str(k): float(rng.uniform(lo, hi)) for k in range(n)}, edges)
        except ValueError:
            continue


@pytest.fixture(scope="session")
def line20():
    return build_lattice_box(1, 20, 1.0, 1.0)


@pytest.fixture(scope="session")
def path3():
    return build_graph({"a": 1.0, "b": 1.0, "c": 1.0}, [("a", "b", 1.0), ("b", "c", 1.0)])


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Context manager recording one PASS/FAIL line per acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        note: dict = {}
        start = time.perf_counter()
        try:
            yield note
        except BaseException as exc:
            ACCEPTANCE[number] = f"criterion {number:2d} FAIL  {title}: {type(exc).__name__}: {exc}"
            raise
        finally:
            if number not in ACCEPTANCE:
                detail = ", ".join(f"{k}={v}" for k, v in note.items())
                ACCEPTANCE[number] = (f"criterion {number:2d} PASS  {title} "
                                      f"({time.perf_counter() - start:.1f}s) {detail}").rstrip()
            print(ACCEPTANCE[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k].splitlines()[0])
