"""Right-hand sides of heat-kernel upper bounds, evaluated in log-domain.

Every public evaluator returns a natural logarithm.  Inputs may be scalars or
numpy arrays (broadcast together).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ZETA_SERIES_CUTOFF = 1e-4


class DomainError(ValueError):
    """Raised when a formula is evaluated outside its stated domain."""


def zeta(x):
    """x·arsinh(x) + 1 - sqrt(1 + x^2), stable for small and large x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("zeta is defined for x >= 0")
    small = x < ZETA_SERIES_CUTOFF
    x2 = x * x
    series = x2 / 2 - x2 * x2 / 24 + x2 ** 3 / 80
    # 1 - sqrt(1 + x^2) rewritten to avoid cancellation
    direct = x * np.arcsinh(x) - x2 / (1 + np.sqrt(1 + x2))
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def pang_envelope(d, t, c: float = 1.0):
    """(log lower, log upper) of c^{-/+1} (sqrt t v d)^{-1} exp(-2t zeta(d/2t))."""
    if c < 1:
        raise DomainError("Pang constant must satisfy c >= 1")
    d = np.asarray(d, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    core = -np.log(np.maximum(np.sqrt(t), d)) - 2 * t * zeta(d / (2 * t))
    lc = math.log(c)
    return core - lc, core + lc


def _check_measures(m_x, m_y):
    if np.any(np.asarray(m_x) <= 0) or np.any(np.asarray(m_y) <= 0):
        raise DomainError("vertex measures must be positive")


def _gaussian(m_x, m_y, rho, t, scale, S):
    _check_measures(m_x, m_y)
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    tt = np.where(t > 0, t, 1.0)
    val = -0.5 * np.log(np.asarray(m_x, float) * np.asarray(m_y, float)) \
        - (scale * tt / S ** 2) * zeta(rho * S / (scale * tt))
    out = np.where(t > 0, val, np.inf)
    return float(out) if out.ndim == 0 else out


def universal_rhs(m_x, m_y, rho, t, S):
    """log of (m_x m_y)^{-1/2} exp(-(t/S^2) zeta(rho S / t)); +inf at t = 0."""
    return _gaussian(m_x, m_y, rho, t, 1.0, S)


def davies_rhs(m_x, m_y, rho_e, t, S):
    """log of (m_x m_y)^{-1/2} exp(-(2t/S^2) zeta(rho_E S / 2t)); +inf at t = 0."""
    return _gaussian(m_x, m_y, rho_e, t, 2.0, S)


@dataclass(frozen=True)
class ErrorParams:
    """Dimension n, Faber-Krahn radius r and jump size S of the error functions."""

    n: float
    r: float
    S: float

    def __post_init__(self):
        if not self.n > 0 or not self.S > 0 or self.r < 0:
            raise DomainError("need n > 0, S > 0 and r >= 0")

    @property
    def C_theta(self) -> float:
        return (288.0 * self.S) ** (1.0 / (self.n + 2)) * (self.n + 2)


def theta(params: ErrorParams, s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("theta needs s > 0")
    out = params.C_theta * s ** (-1.0 / (params.n + 2))
    return float(out) if out.ndim == 0 else out


def phi(params: ErrorParams, Deg_x, s):
    """log Phi_x(s); the s < r branch is frozen at theta(r)."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("Phi needs s > 0")
    ld = np.log(np.maximum(1.0, np.asarray(Deg_x, dtype=float)))
    n, r = params.n, params.r
    if r > 0:
        inner = n * math.log(r) + (n / 2 + theta(params, r)) * ld
    else:
        inner = np.zeros_like(ld)
    outer = theta(params, s) * ld
    out = np.where(s < r, inner, outer)
    return float(out) if out.ndim == 0 else out


def tau_rho(t, rho, S):
    """S^2 / (2 arsinh^2((sqrt t v rho) S / t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("tau_rho needs t > 0")
    arg = np.maximum(np.sqrt(t), np.asarray(rho, dtype=float)) * S / t
    out = S ** 2 / (2 * np.arcsinh(arg) ** 2)
    return float(out) if out.ndim == 0 else out


def tau_rho_and_psi(t, rho, S, Deg_x, Deg_y, params: ErrorParams):
    """(tau_rho, log Psi_xy(sqrt t)) with Psi^2 = Phi_x(sqrt tau) Phi_y(sqrt tau)."""
    tau = tau_rho(t, rho, S)
    s = np.sqrt(tau)
    return tau, 0.5 * (phi(params, Deg_x, s) + phi(params, Deg_y, s))


def g_rhs_parts(vol_x, vol_y, rho, t, S, log_psi, N) -> dict:
    """The separate log factors of the (G) right-hand side."""
    vol_x = np.asarray(vol_x, dtype=float)
    vol_y = np.asarray(vol_y, dtype=float)
    if np.any(vol_x <= 0) or np.any(vol_y <= 0):
        raise DomainError("ball volumes must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("(G) is evaluated at t > 0")
    rho = np.asarray(rho, dtype=float)
    poly = 0.5 * N * np.log(np.maximum(1.0, (t / S ** 2) * np.arcsinh(rho * S / t) ** 2))
    return {
        "psi": np.asarray(log_psi, dtype=float),
        "polynomial": poly,
        "volume": -0.5 * np.log(vol_x * vol_y),
        "gaussian": -(t / S ** 2) * zeta(rho * S / t),
    }


def g_rhs(vol_x, vol_y, rho, t, S, log_psi, N):
    parts = g_rhs_parts(vol_x, vol_y, rho, t, S, log_psi, N)
    out = parts["psi"] + parts["polynomial"] + parts["volume"] + parts["gaussian"]
    return float(out) if np.ndim(out) == 0 else out


def vd_rhs(log_phi, N, r, R):
    """log of Phi (R/r)^N."""
    r = np.asarray(r, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(r <= 0) or np.any(R < r):
        raise DomainError("(VD) needs 0 < r <= R")
    out = np.asarray(log_phi, dtype=float) + N * np.log(R / r)
    return float(out) if out.ndim == 0 else out


def fk_rhs(a, N, R, m_B, m_U):
    """log of (a / R^2) (m(B) / m(U))^{2/N}."""
    if not a > 0 or not R > 0:
        raise DomainError("(FK) needs a > 0 and R > 0")
    if m_U > m_B * (1 + 1e-12) or m_U <= 0:
        raise DomainError("(FK) needs 0 < m(U) <= m(B)")
    return math.log(a) - 2 * math.log(R) + (2.0 / N) * math.log(m_B / m_U)


def ln_A_default(n: float) -> float:
    return 2.0 ** (19 * n) * math.e


def dimension_prime(n: float, r: float, log_volume: Callable[[float], float],
                    log_inv_measure: Callable[[float], float],
                    ln_A_override: float | None = None) -> float:
    """n'(r) from log-volume and log sup(1/m) callables of the log-radius."""
    if r <= 1:
        raise DomainError("n' needs r > 1")
    lr = math.log(r)
    den = lr - (n + 3) * math.log(lr)
    if den <= 0:
        raise DomainError(f"r = {r:g} does not exceed (ln r)^(n+3) = {lr ** (n + 3):.4g}")
    ln_A = ln_A_default(n) if ln_A_override is None else ln_A_override
    lrad = ln_A + lr
    return max(n, (log_volume(lrad) + log_inv_measure(lrad)) / den)


def line_log_volume(log_radius: float) -> float:
    """log(2s + 1) for s = exp(log_radius), safe for huge s."""
    if log_radius > 700:
        return log_radius + math.log(2.0)
    return math.log(2 * math.exp(log_radius) + 1)


@dataclass(frozen=True)
class RegularityResult:
    holds: bool
    worst_ratio: float
    worst_pair: tuple[float, float] | None


def regular_function_check(f, grid, A: float, gamma: float, tol: float = 1e-12) -> RegularityResult:
    """Check f(gamma s)/f(s) <= A f(gamma t)/f(t) for all grid points s < t.

    ``f`` is a callable, or an array of samples on ``grid`` when gamma maps the
    grid onto itself (a log grid whose ratio divides log gamma).
    """
    if A < 1 or gamma < 1:
        raise DomainError("need A >= 1 and gamma >= 1")
    grid = np.asarray(grid, dtype=float)
    if callable(f):
        lo, hi = np.asarray(f(grid), float), np.asarray(f(gamma * grid), float)
        s_pts = grid
    else:
        vals = np.asarray(f, dtype=float)
        ratio = grid[1] / grid[0]
        shift = int(round(math.log(gamma) / math.log(ratio))) if gamma > 1 else 0
        if not np.allclose(grid[shift:], gamma * grid[:len(grid) - shift]):
            raise DomainError("gamma does not map the sample grid onto itself")
        lo, hi = vals[:len(vals) - shift], vals[shift:]
        s_pts = grid[:len(vals) - shift]
    if np.any(lo <= 0) or np.any(hi <= 0):
        raise DomainError("f must be sampled positively")
    lq = np.log(hi) - np.log(lo)
    if len(lq) < 2:
        return RegularityResult(True, 0.0, None)
    # worst over s < t of q(s) / (A q(t)) via a suffix minimum of log q
    suffix_min = np.minimum.accumulate(lq[::-1])[::-1]
    gaps = lq[:-1] - suffix_min[1:] - math.log(A)
    i = int(np.argmax(gaps))
    j = i + 1 + int(np.argmin(lq[i + 1:]))
    worst = float(math.exp(gaps[i]))
    return RegularityResult(worst <= 1 + tol, worst, (float(s_pts[i]), float(s_pts[j])))


BOUND_KINDS = ("universal", "davies", "pang", "g", "vd", "fk")


@dataclass(frozen=True)
class BoundSpec:
    """A named right-hand side with fixed parameters; ``log_rhs`` fills in the rest."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise DomainError(f"unknown bound kind {self.kind!r}")

    def log_rhs(self, **point):
        p = {**self.params, **point}
        if self.kind == "universal":
            return universal_rhs(p["m_x"], p["m_y"], p["rho"], p["t"], p["S"])
        if self.kind == "davies":
            return davies_rhs(p["m_x"], p["m_y"], p["rho"], p["t"], p["S"])
        if self.kind == "pang":
            return pang_envelope(p["d"], p["t"], p.get("c", 1.0))[1]
        if self.kind == "g":
            return g_rhs(p["vol_x"], p["vol_y"], p["rho"], p["t"], p["S"], p.get("log_psi", 0.0), p["N"])
        if self.kind == "vd":
            return vd_rhs(p.get("log_phi", 0.0), p["N"], p["r"], p["R"])
        return fk_rhs(p["a"], p["N"], p["R"], p["m_B"], p["m_U"])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": {k: v for k, v in self.params.items()}}
