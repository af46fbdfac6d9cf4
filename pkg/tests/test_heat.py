import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from heatlab.families import AntiTreeFamily, LatticeFamily
from heatlab.graph import VertexSet, build_anti_tree, build_lattice_box
from heatlab.heat import (DENSE_MAX, KernelError, LaplacianOperator, antitree_lumped_kernel,
                          bessel_line_kernel, dirichlet_lambda, exact_integer_line_kernel,
                          heat_kernel_exhaustion, heat_kernel_finite, lanczos_smallest,
                          log_exact_integer_line_kernel)

from conftest import random_graph, weighted_graphs

times = st.floats(0.01, 20.0)


def full_kernel(g, t, backend="expm", support=None):
    return heat_kernel_finite(g, [t], None if support is None else support,
                              None if support is None else support, backend, support).values[0]


def reference_kernel(g, t, support=None):
    """exp(-t Delta) as a matrix, divided by m(y); independent of the package."""
    idx = np.arange(g.n) if support is None else np.asarray(support)
    A = g.adjacency.toarray()[np.ix_(idx, idx)]
    L = np.diag(g.Deg[idx]) - A / g.m[idx][:, None]
    return expm(-t * L) / g.m[idx][None, :]


@given(weighted_graphs(), times)
def test_expm_matches_reference(g, t):
    np.testing.assert_allclose(full_kernel(g, t), reference_kernel(g, t), rtol=1e-9, atol=1e-14)


@given(weighted_graphs(), times)
def test_symmetry(g, t):
    p = full_kernel(g, t, "expm")
    np.testing.assert_allclose(p, p.T, rtol=1e-9, atol=1e-300)
    # the eigenbasis product is accurate normwise, not entrywise
    q = full_kernel(g, t, "dense")
    np.testing.assert_allclose(q, q.T, rtol=0, atol=1e-12 * q.max())


@given(weighted_graphs(), times, times)
def test_chapman_kolmogorov(g, s, t):
    ps, pt, pst = (full_kernel(g, u) for u in (s, t, s + t))
    np.testing.assert_allclose((ps * g.m[None, :]) @ pt, pst, rtol=1e-9)


@given(weighted_graphs(), times, st.data())
def test_sub_stochastic_and_stochastic(g, t, data):
    p = full_kernel(g, t)
    np.testing.assert_allclose(p @ g.m, 1.0, rtol=1e-10)
    k = data.draw(st.integers(1, g.n))
    U = list(range(k))
    pu = full_kernel(g, t, support=U)
    assert np.all(pu @ g.m[U] <= 1 + 1e-12)
    assert np.all(pu >= 0)


@given(weighted_graphs())
def test_identity_at_zero(g):
    for backend in ("expm", "dense"):
        np.testing.assert_allclose(full_kernel(g, 0.0, backend), np.diag(1 / g.m), atol=1e-15)


@given(weighted_graphs(min_n=3), times, st.data())
def test_domain_monotonicity(g, t, data):
    k = data.draw(st.integers(1, g.n - 1))
    small = list(range(k))
    large = list(range(k + 1))
    p_small = full_kernel(g, t, support=small)
    p_large = full_kernel(g, t, support=large)[:k, :k]
    p_full = full_kernel(g, t)[:k, :k]
    assert np.all(p_small <= p_large * (1 + 1e-10) + 1e-300)
    assert np.all(p_large <= p_full * (1 + 1e-10) + 1e-300)


@given(weighted_graphs(), st.data())
def test_laplacian_self_adjoint(g, data):
    k = data.draw(st.integers(1, g.n))
    op = LaplacianOperator(g, list(range(k)))
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 31)))
    f, h = rng.standard_normal((2, k))
    assert op.inner(op.apply(f), h) == pytest.approx(op.inner(f, op.apply(h)), rel=1e-10, abs=1e-10)
    assert op.energy(f) >= -1e-12


@pytest.mark.parametrize("seed", range(5))
def test_lanczos_matches_dense(seed):
    g = build_lattice_box(2, 8, 1.0, 1.0)
    rng = np.random.default_rng(seed)
    U = VertexSet.of(g, rng.choice(g.n, size=int(rng.integers(20, 201)), replace=False))
    dense = dirichlet_lambda(g, U, "dense")
    assert dirichlet_lambda(g, U, "lanczos") == pytest.approx(dense, rel=1e-8, abs=1e-12)


def test_lanczos_on_random_matrix():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((120, 120))
    A = M + M.T
    assert lanczos_smallest(A) == pytest.approx(np.linalg.eigvalsh(A)[0], rel=1e-9)


def test_dirichlet_lambda_of_a_segment():
    # U = {1..k} in a path: eigenvalues 2 - 2 cos(pi j / (k + 1))
    g = build_lattice_box(1, 10)
    U = [str(i) for i in range(-3, 4)]
    assert dirichlet_lambda(g, U) == pytest.approx(2 - 2 * math.cos(math.pi / 8), rel=1e-12)


@pytest.mark.parametrize("d", [0, 1, 5, 20])
@pytest.mark.parametrize("t", [0.5, 1.0, 5.0, 20.0, 300.0])
def test_exact_line_kernel_matches_bessel(d, t):
    assert exact_integer_line_kernel(d, t) == pytest.approx(bessel_line_kernel(d, t), rel=1e-11)


def test_exact_line_kernel_tiny_values():
    # far in the tail the Bessel form underflows; the log form stays finite
    lv = log_exact_integer_line_kernel(400, 0.01)
    ref = 400 * math.log(0.01) - math.lgamma(401) - 0.02
    assert lv == pytest.approx(ref, rel=1e-6)


def test_exhaustion_converges_and_is_monotone():
    sl, rec = heat_kernel_exhaustion(LatticeFamily(1), [1.0, 10.0], ["0"], ["0", "3"], tol=1e-12)
    assert rec.converged and rec.monotone
    assert rec.radii[0] == 8
    for a, t in enumerate(sl.t):
        for j, d in enumerate((0, 3)):
            assert sl.values[a, 0, j] == pytest.approx(exact_integer_line_kernel(d, t), rel=1e-8)


def test_exhaustion_budget():
    _, rec = heat_kernel_exhaustion(LatticeFamily(1), [1e4], ["0"], ["0"], rtol=1e-8,
                                    max_vertices=100)
    assert not rec.converged
    assert rec.radii == (8, 16, 32)


def test_log_domain_far_tail():
    g = build_lattice_box(1, 200)
    sl = heat_kernel_finite(g, [0.01], ["0"], ["150"])
    assert sl.log_domain_t == [0.01]
    assert sl.log_values[0, 0, 0] == pytest.approx(log_exact_integer_line_kernel(150, 0.01), rel=1e-8)


def test_dense_guard():
    g = build_lattice_box(1, DENSE_MAX)
    with pytest.raises(KernelError, match="dense"):
        heat_kernel_finite(g, [1.0], ["0"], ["0"], "dense")


def test_rejects_negative_time(line20):
    with pytest.raises(KernelError):
        heat_kernel_finite(line20, [-1.0], ["0"], ["0"])


def test_antitree_quotient_matches_full_graph():
    K = 12
    g = build_anti_tree(0.5, K + 1)
    support = [i for i, v in enumerate(g.ids) if int(v.split(":")[0]) <= K]
    x = "5:1"
    targets = [g.ids[i] for i in support]
    full = heat_kernel_finite(g, [0.5, 3.0], [x], targets, support=support)
    lumped = antitree_lumped_kernel(0.5, K, 5, [0.5, 3.0], backend="expm")
    for j, y in enumerate(targets):
        lv = full.log_values[:, 0, j]
        key = "diag" if y == x else ("same" if y.startswith("5:") else int(y.split(":")[0]))
        np.testing.assert_allclose(lv, lumped[key], rtol=1e-9)


def test_antitree_exhaustion_runs():
    sl, rec = heat_kernel_exhaustion(AntiTreeFamily(0.5), [1.0], ["0:0"], ["3:0"], tol=1e-12)
    assert rec.converged


def test_kernel_csv_is_deterministic(line20):
    a = heat_kernel_finite(line20, [1.0, 2.0], ["0"], ["1"]).to_csv("hdr")
    b = heat_kernel_finite(line20, [1.0, 2.0], ["0"], ["1"]).to_csv("hdr")
    assert a == b
    assert a.splitlines()[1] == "t,x_id,y_id,value,log_value,backend,radius"


def test_random_graphs_against_reference():
    for seed in range(3):
        g = random_graph(30, seed, p=0.2)
        np.testing.assert_allclose(full_kernel(g, 2.0), reference_kernel(g, 2.0), rtol=1e-9)


def test_disconnected_support():
    # two Dirichlet segments of length 2: eigenvalues 1 and 3, no coupling across the gap
    g = build_lattice_box(1, 10)
    U = [g.index[v] for v in ("-5", "-4", "4", "5")]
    p = full_kernel(g, 1.0, support=U)
    diag, off = (math.exp(-1) + math.exp(-3)) / 2, (math.exp(-1) - math.exp(-3)) / 2
    block = np.array([[diag, off], [off, diag]])
    np.testing.assert_allclose(p, np.block([[block, np.zeros((2, 2))], [np.zeros((2, 2)), block]]),
                               rtol=1e-10, atol=0)
    far = heat_kernel_finite(g, [0.01], [g.ids[U[0]]], [g.ids[U[1]]], support=U)
    assert far.values[0, 0, 0] > 0
