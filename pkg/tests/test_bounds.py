import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatlab.bounds import (BoundSpec, DomainError, ErrorParams, davies_rhs, dimension_prime, fk_rhs,
                            g_rhs, g_rhs_parts, line_log_volume, pang_envelope, phi,
                            regular_function_check, tau_rho, tau_rho_and_psi, theta,
                            universal_rhs, vd_rhs, zeta)


def zeta_direct(x):
    return x * math.asinh(x) + 1 - math.sqrt(x * x + 1)


@given(st.floats(1e-3, 1e6))
def test_zeta_matches_definition(x):
    assert zeta(x) == pytest.approx(zeta_direct(x), rel=1e-9)


@given(st.floats(0, 1e-4))
def test_zeta_small_argument_series(x):
    # x^2/2 - x^4/24 + x^6/80 is the Taylor expansion of the definition
    assert zeta(x) == pytest.approx(x * x / 2 - x ** 4 / 24, rel=1e-12, abs=1e-300)


def test_zeta_continuous_at_cutoff():
    a, b = zeta(np.nextafter(1e-4, 0)), zeta(1e-4)
    assert b == pytest.approx(a, rel=1e-12)


def test_zeta_vectorised_and_domain():
    np.testing.assert_allclose(zeta(np.array([0.0, 1.0])), [0.0, zeta_direct(1.0)])
    with pytest.raises(DomainError):
        zeta(-1.0)


def test_quadratic_regime():
    d, t = 3.0, 1000.0
    assert abs(2 * t * zeta(d / (2 * t)) / (d * d / (4 * t)) - 1) < 0.01


def test_universal_rhs_hand_values():
    # rho = 0: pure measure factor; t = 0: infinite
    assert universal_rhs(4.0, 1.0, 0.0, 2.0, 1.0) == pytest.approx(-math.log(2.0))
    assert universal_rhs(1.0, 1.0, 3.0, 0.0, 1.0) == math.inf
    expected = -(2.0 / 0.25) * zeta_direct(3.0 * 0.5 / 2.0)
    assert universal_rhs(1.0, 1.0, 3.0, 2.0, 0.5) == pytest.approx(expected, rel=1e-12)
    assert davies_rhs(1.0, 1.0, 3.0, 2.0, 0.5) == pytest.approx(
        -(4.0 / 0.25) * zeta_direct(3.0 * 0.5 / 4.0), rel=1e-12)


def test_universal_rhs_no_overflow():
    v = universal_rhs(1.0, 1.0, 1e6, 1e-6, 1.0)
    assert math.isfinite(v) and v < -1e6
    with pytest.raises(DomainError):
        universal_rhs(0.0, 1.0, 1.0, 1.0, 1.0)


def test_pang_envelope():
    lo, hi = pang_envelope(4.0, 1.0, math.e)
    core = -math.log(4.0) - 2 * zeta_direct(2.0)
    assert lo == pytest.approx(core - 1) and hi == pytest.approx(core + 1)
    with pytest.raises(DomainError):
        pang_envelope(1.0, 1.0, 0.5)


def test_error_function_reference_values():
    # hand derivations: 3 * 288^(1/3); 1 / (2 asinh(4)^2); log(20001) / (ln r - 4 ln ln r)
    assert ErrorParams(1, 10, 1).C_theta == pytest.approx(19.8116, rel=1e-5)
    assert ErrorParams(1, 10, 1).C_theta == pytest.approx(3 * 288 ** (1 / 3), rel=1e-12)
    assert tau_rho(1.0, 4.0, 1.0) == pytest.approx(0.11396, rel=1e-4)
    assert tau_rho(1.0, 4.0, 1.0) == pytest.approx(1 / (2 * math.asinh(4) ** 2), rel=1e-12)
    lr = math.log(1e4)
    n_prime = dimension_prime(1, 1e4, line_log_volume, lambda s: 0.0, ln_A_override=0.0)
    assert n_prime == pytest.approx(math.log(20001) / (lr - 4 * math.log(lr)), rel=1e-6)
    assert n_prime == pytest.approx(30.1, abs=0.05)


def test_theta_and_phi():
    p = ErrorParams(2.0, 10.0, 1.0)
    assert theta(p, 16.0) == pytest.approx(p.C_theta / 2, rel=1e-12)
    # Deg <= 1 and s >= r: Phi = 1; below r the r^n factor remains
    assert phi(p, 0.5, 30.0) == 0.0
    assert phi(p, 0.5, 3.0) == pytest.approx(2 * math.log(10.0))
    q = ErrorParams(1.0, 2.0, 1.0)
    assert phi(q, 2.0, 1.0) == pytest.approx(math.log(2) + (0.5 + theta(q, 2.0)) * math.log(2))
    Deg = math.e
    assert phi(p, Deg, 20.0) == pytest.approx(theta(p, 20.0))
    assert phi(p, Deg, 5.0) == pytest.approx(2 * math.log(10.0) + 1 + theta(p, 10.0))
    with pytest.raises(DomainError):
        theta(p, 0.0)


def test_psi_tends_to_one():
    p = ErrorParams(1.0, 750.0, 2 ** -0.5)
    t = np.logspace(4, 24, 21)
    _, lp = tau_rho_and_psi(t, 10.0, p.S, 2.0, 2.0, p)
    assert np.all(np.diff(lp) <= 0)
    assert lp[-1] < 1e-2


def test_g_rhs_parts_sum():
    parts = g_rhs_parts(3.0, 5.0, 2.0, 4.0, 1.0, 0.1, 2.0)
    total = sum(float(v) for v in parts.values())
    assert g_rhs(3.0, 5.0, 2.0, 4.0, 1.0, 0.1, 2.0) == pytest.approx(total)
    assert parts["volume"] == pytest.approx(-0.5 * math.log(15.0))
    assert parts["polynomial"] == pytest.approx(max(0.0, math.log(4 * math.asinh(0.5) ** 2)))
    with pytest.raises(DomainError):
        g_rhs(0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0)


def test_vd_and_fk_rhs():
    assert vd_rhs(0.0, 2.0, 1.0, 4.0) == pytest.approx(2 * math.log(4))
    with pytest.raises(DomainError):
        vd_rhs(0.0, 2.0, 4.0, 1.0)
    assert fk_rhs(2.0, 1.0, 3.0, 8.0, 2.0) == pytest.approx(math.log(2 / 9 * 16))
    with pytest.raises(DomainError):
        fk_rhs(1.0, 1.0, 1.0, 1.0, 2.0)


def test_dimension_prime_domain():
    with pytest.raises(DomainError, match="does not exceed"):
        dimension_prime(1, 100.0, line_log_volume, lambda s: 0.0, ln_A_override=0.0)


def test_line_log_volume_large():
    assert line_log_volume(1000.0) == pytest.approx(1000 + math.log(2))
    assert line_log_volume(0.0) == pytest.approx(math.log(3))


def test_regular_function_check():
    grid = np.logspace(-2, 2, 41)
    ok = regular_function_check(lambda s: np.minimum(1, np.sqrt(s)), grid, math.sqrt(2), 2.0)
    assert ok.holds
    bad = regular_function_check(lambda s: np.exp(-s), grid, 1.0, 2.0)
    assert not bad.holds and bad.worst_ratio > 1
    sampled = regular_function_check(np.sqrt(np.logspace(0, 2, 21)), np.logspace(0, 2, 21), 1.0, 10.0)
    assert sampled.holds


@given(st.floats(0.01, 10), st.floats(0, 50), st.floats(0.01, 100), st.floats(0.1, 2))
def test_bound_spec_dispatch(m, rho, t, S):
    spec = BoundSpec("universal", {"S": S})
    assert spec.log_rhs(m_x=m, m_y=m, rho=rho, t=t) == universal_rhs(m, m, rho, t, S)
    # log-domain evaluation agrees with direct evaluation when the latter is representable
    direct = math.exp(-(t / S ** 2) * zeta_direct(rho * S / t)) / m
    if direct > 1e-300:
        assert math.exp(spec.log_rhs(m_x=m, m_y=m, rho=rho, t=t)) == pytest.approx(direct, rel=1e-9)


def test_bound_spec_unknown_kind():
    with pytest.raises(DomainError):
        BoundSpec("nope")
