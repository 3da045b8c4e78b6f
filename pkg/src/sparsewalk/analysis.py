"""Closed-form evaluators: regime classification, asymptotic speed, the
Kesten exponent, dual moments, the stationary-density functional, exact
series identities, and the valley-bottom limit density."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dists import ConfigurationError, Dist
from .env import (
    EnvironmentSpec,
    SparseEnvironment,
    UnsupportedRegimeError,
    sample_dual,
)

TRANSIENT_RIGHT = "TRANSIENT_RIGHT"
TRANSIENT_LEFT = "TRANSIENT_LEFT"
RECURRENT = "RECURRENT"
RECURRENT_HEAVY_GAPS = "RECURRENT_HEAVY_GAPS"


class NoFiniteKappaError(ValueError):
    """E(xi^kappa) = 1 has no positive root (xi <= 1 almost surely)."""


class WrongRegimeError(ValueError):
    """Operation requested outside its regime of validity."""


def _xi_expect(lambda_dist: Dist, f) -> float:
    """E[f(xi)] with xi = (1 - lambda) / lambda."""
    return lambda_dist.expect(lambda l: f((1.0 - l) / l))


def mean_xi(spec: EnvironmentSpec) -> float:
    return _xi_expect(spec.lambda_dist, lambda x: x)


def mean_inv_xi(spec: EnvironmentSpec) -> float:
    return _xi_expect(spec.lambda_dist, lambda x: 1.0 / x)


# symmetric bias laws give E(log xi) = 0 only up to rounding in the quadrature
_ZERO_DRIFT_TOL = 1e-12


def e_log_xi(spec: EnvironmentSpec) -> float:
    return _xi_expect(spec.lambda_dist, math.log)


@dataclass(frozen=True)
class RegimeReport:
    e_log_xi: float
    e_log_d: float
    classification: str


def classify(spec: EnvironmentSpec) -> RegimeReport:
    """Transience/recurrence from the signs of E(log xi) and E(log d)."""
    elx = e_log_xi(spec)
    eld = spec.gap_dist.log_mean()
    if not math.isfinite(eld):
        if not math.isfinite(_xi_expect(spec.lambda_dist, lambda x: abs(math.log(x)))):
            raise UnsupportedRegimeError("E|log xi| must be finite when E(log d) is infinite")
        cls = RECURRENT_HEAVY_GAPS
    elif elx < -_ZERO_DRIFT_TOL:
        cls = TRANSIENT_RIGHT
    elif elx > _ZERO_DRIFT_TOL:
        cls = TRANSIENT_LEFT
    else:
        cls = RECURRENT
    return RegimeReport(elx, eld, cls)


def mean_S_bar(spec: EnvironmentSpec) -> float:
    """E of 1 + 2 * sum of forward xi-products; (1 + E xi)/(1 - E xi) for i.i.d."""
    ex = mean_xi(spec)
    if ex >= 1.0:
        return math.inf
    return (1.0 + ex) / (1.0 - ex)


def mean_F_bar(spec: EnvironmentSpec) -> float:
    ex = mean_inv_xi(spec)
    if ex >= 1.0:
        return math.inf
    return (1.0 + ex) / (1.0 - ex)


@dataclass(frozen=True)
class SpeedBreakdown:
    var_term: float     # VAR(d) / E(d)
    s_bar_term: float   # E(Sbar or Fbar) * E(d)
    v: float


def speed_formula(spec: EnvironmentSpec) -> SpeedBreakdown:
    """Asymptotic speed: 1/|v| = VAR(d)/E(d) + E(Sbar) * E(d), signed by regime."""
    regime = classify(spec).classification
    if regime in (RECURRENT, RECURRENT_HEAVY_GAPS):
        return SpeedBreakdown(math.nan, math.nan, 0.0)
    ed = spec.gap_dist.mean()
    if not math.isfinite(ed):
        # zero-speed transient: sub-ballistic by infinite mean gaps
        return SpeedBreakdown(math.inf, math.inf, 0.0)
    var_term = spec.gap_dist.var() / ed
    series = mean_S_bar(spec) if regime == TRANSIENT_RIGHT else mean_F_bar(spec)
    if not math.isfinite(series):
        return SpeedBreakdown(var_term, math.inf, 0.0)
    s_term = series * ed
    inv = var_term + s_term
    v = 1.0 / inv if regime == TRANSIENT_RIGHT else -1.0 / inv
    return SpeedBreakdown(var_term, s_term, v)


def max_speed_fixed_Sbar(mu: float, nu: float) -> float:
    """Largest speed over laws with E(d) = mu and 1/E(Sbar) = nu (at VAR(d) = 0)."""
    if mu <= 0.0 or nu < 0.0:
        raise ConfigurationError("need mu > 0 and nu >= 0")
    return nu / mu


def max_speed_fixed_b(mu: float, b: float) -> float:
    """Largest speed over laws with E(d) = mu and E(log xi) = b < 0."""
    if mu <= 0.0 or b >= 0.0:
        raise ConfigurationError("need mu > 0 and b < 0")
    return (1.0 - math.exp(b)) / (mu * (1.0 + math.exp(b)))


def kappa_root(spec: EnvironmentSpec, tol: float = 1e-12) -> float:
    """Positive root of E(xi^kappa) = 1 (bracketing + Brent on a convex map)."""
    if e_log_xi(spec) >= 0.0:
        raise WrongRegimeError("kappa root requires E(log xi) < 0")
    _, hi = spec.lambda_dist.support_bounds()
    xi_max = (1.0 - hi) / hi  # xi decreasing in lambda
    lo_l, _ = spec.lambda_dist.support_bounds()
    xi_sup = (1.0 - lo_l) / lo_l
    if xi_sup <= 1.0:
        raise NoFiniteKappaError("xi <= 1 a.s.: E(xi^kappa) < 1 for all kappa > 0")

    def g(k):
        return _xi_expect(spec.lambda_dist, lambda x: x ** k) - 1.0

    hi_k = 1.0
    while g(hi_k) < 0.0:
        hi_k *= 2.0
        if hi_k > 1e6:
            raise NoFiniteKappaError("no root of E(xi^kappa) = 1 below kappa = 1e6")
    lo_k = hi_k / 2.0
    while g(lo_k) > 0.0:
        lo_k /= 2.0
    root = brentq(g, lo_k, hi_k, xtol=1e-14, rtol=8.9e-16)
    # Newton polish on the defining equation itself
    for _ in range(8):
        val = g(root)
        if abs(val) < tol:
            break
        dval = _xi_expect(spec.lambda_dist, lambda x: x ** root * math.log(x))
        root -= val / dval
    return float(root)


def dual_gap_moments(spec: EnvironmentSpec) -> tuple[float, float]:
    """(E_Q d_0, E_Q a_0) of the dual: size-biased gap mean and mean origin offset."""
    ed = spec.gap_dist.mean()
    ed2 = spec.gap_dist.second_moment()
    if not math.isfinite(ed2):
        raise UnsupportedRegimeError("dual moments need a finite second gap moment")
    eq_d = ed2 / ed
    return eq_d, (eq_d - 1.0) / 2.0


# ------------------------------------------------------------------ series sums

def _forward_xi_products(env: SparseEnvironment, n_terms: int, start: int = 1) -> np.ndarray:
    """[prod_{j=start}^{start+i} xi_j for i in 0..n_terms-1]."""
    _, lam, _ = env.marked_window(start, start + n_terms - 1)
    return np.cumprod((1.0 - lam) / lam)


@dataclass(frozen=True)
class LambdaValue:
    site_form: float
    stretch_form: float
    tail_bound: float

    @property
    def value(self) -> float:
        return self.stretch_form


def lambda_functional(env: SparseEnvironment, trunc_terms: int = 0,
                      tol: float = 1e-10) -> LambdaValue:
    """Density functional of the environment seen from the particle:
    (1/omega_0) * [1 + sum of forward rho-products], also evaluated in its
    stretch form (1/omega_0) * [L0 + sum_i L_i * prod_{j<=i} xi_j].

    The series is truncated once the certified geometric tail bound drops
    below ``tol``; requires sup(xi) < 1 on the bias support unless
    ``trunc_terms`` forces a fixed truncation.
    """
    spec = env.spec
    if mean_xi(spec) >= 1.0:
        raise WrongRegimeError("series diverges: E(xi) >= 1")
    lo_l, _ = spec.lambda_dist.support_bounds()
    xi_sup = (1.0 - lo_l) / lo_l
    gap_mean = spec.gap_dist.mean()
    if trunc_terms <= 0:
        if xi_sup >= 1.0 or not math.isfinite(gap_mean):
            raise WrongRegimeError(
                "cannot certify truncation: need sup(xi) < 1 and a finite mean gap, "
                "or pass trunc_terms explicitly")
        # xi_sup**N * gap_mean / (1 - xi_sup) < tol
        n = max(8, math.ceil(math.log(tol * (1.0 - xi_sup) / (gap_mean + 1.0))
                             / math.log(xi_sup)))
    else:
        n = trunc_terms
    tail_bound = (xi_sup ** n * gap_mean / (1.0 - xi_sup)) if xi_sup < 1.0 else math.nan

    # marks at positions >= 1: index 0 if the shift pushed a_0 past the origin
    k_first = 0 if env.shift >= 1 else 1
    positions, lams, _ = env.marked_window(k_first, k_first + n)
    xis = (1.0 - lams) / lams
    prods = np.cumprod(xis[:n])                 # products over the first i marks
    lengths = np.diff(positions).astype(float)  # stretch lengths between them
    w0 = env.omega(0)
    stretch = (float(positions[0]) + float(np.sum(lengths * prods))) / w0

    # site form, truncated at the same marked depth
    site_sum = 1.0
    prod = 1.0
    idx = 0
    for s in range(1, int(positions[n])):
        if idx < n and s == positions[idx]:
            prod *= xis[idx]
            idx += 1
        site_sum += prod
    site = site_sum / w0
    return LambdaValue(site, stretch, tail_bound)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int


def speed_via_dual(spec: EnvironmentSpec, n_dual_samples: int, trunc: int = 0,
                   seed: int = 0) -> MCEstimate:
    """1 / E_Q(Lambda) by Monte Carlo over direct dual samples."""
    vals = np.empty(n_dual_samples)
    for i in range(n_dual_samples):
        env, _ = sample_dual(spec, seed + i, half_window=4, mode="direct")
        vals[i] = lambda_functional(env, trunc_terms=trunc).value
    m = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_dual_samples))
    # delta method for the reciprocal
    return MCEstimate(1.0 / m, se / (m * m), n_dual_samples)


def series_S(env: SparseEnvironment, trunc: int) -> tuple[float, float]:
    """Both sides of the forward series identity, truncated at marked depth
    ``trunc``: site sum over k = 1 .. a_{N+1}-1 vs
    (a_1 - 1) + sum_{n=1..N} xi_1..xi_n * d_{n+1}."""
    n = trunc
    positions, lams, gaps = env.marked_window(0, n + 1)
    xis = (1.0 - lams[1:]) / lams[1:]          # xi_1 .. xi_{n+1}
    prods = np.cumprod(xis[:n])                # xi_1..xi_m, m = 1..n
    rhs = (positions[1] - 1.0) + float(np.sum(prods * gaps[2:n + 2]))
    # site sum up to a_{N+1} - 1
    lhs = 0.0
    prod = 1.0
    idx = 1
    for s in range(1, int(positions[n + 1])):
        if idx <= n and s == positions[idx]:
            prod *= xis[idx - 1]
            idx += 1
        lhs += prod
    return lhs, rhs


def series_F(env: SparseEnvironment, trunc: int) -> tuple[float, float]:
    """Both sides of the backward series identity, truncated at marked depth
    ``trunc``: site sum over k = 0 .. |a_{-(N+1)}|-1 vs
    sum_{n=0..N} (xi_0 xi_{-1} .. xi_{-n})^{-1} * d_{-n}."""
    n = trunc
    positions, lams, gaps = env.marked_window(-(n + 1), 0)
    positions = positions[::-1]                # a_0, a_{-1}, ..., a_{-(n+1)}
    lams = lams[::-1]
    gaps = gaps[::-1]                          # d_0, d_{-1}, ..., d_{-(n+1)}
    inv_xis = lams / (1.0 - lams)              # 1/xi_0, 1/xi_{-1}, ...
    prods = np.cumprod(inv_xis[:n + 1])        # (xi_0..xi_{-m})^{-1}, m = 0..n
    rhs = float(np.sum(prods * gaps[:n + 1].astype(float)))
    lhs = 0.0
    prod = 1.0
    idx = 0
    for s in range(0, int(-positions[n + 1])):
        if idx <= n + 1 and -s == positions[idx]:
            prod *= inv_xis[idx]
            idx += 1
        lhs += prod
    return lhs, rhs


def identity_check_S(env: SparseEnvironment, trunc: int) -> float:
    """Relative residual of the forward series identity (the two sides can
    grow geometrically, so absolute differences are meaningless)."""
    lhs, rhs = series_S(env, trunc)
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def identity_check_F(env: SparseEnvironment, trunc: int) -> float:
    """Relative residual of the backward series identity."""
    lhs, rhs = series_F(env, trunc)
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def dual_S_tilde(env_dual: SparseEnvironment, trunc: int = 0, tol: float = 1e-12) -> float:
    """1 + 2 * sum of forward rho-products of a dual environment (the
    right-stretch evaluation whose Q-mean is the reciprocal speed)."""
    spec = env_dual.spec
    if mean_xi(spec) >= 1.0:
        raise WrongRegimeError("series diverges: E(xi) >= 1")
    # sum_{n>=0} rho_0 rho_1 ... rho_n = a_0 + sum_n xi_0..xi_n d_{n+1}
    lo_l, _ = spec.lambda_dist.support_bounds()
    xi_sup = (1.0 - lo_l) / lo_l
    gap_mean = spec.gap_dist.mean()
    if trunc <= 0:
        if xi_sup >= 1.0:
            raise WrongRegimeError("cannot certify truncation: sup(xi) >= 1")
        trunc = max(8, math.ceil(math.log(tol * (1.0 - xi_sup) / (gap_mean + 1.0))
                                 / math.log(xi_sup)))
    positions, lams, gaps = env_dual.marked_window(0, trunc + 1)
    xis = (1.0 - lams) / lams
    prods = np.cumprod(xis[:trunc + 1])        # xi_0..xi_n, n = 0..trunc
    s = float(env_dual.shift) + float(np.sum(prods * gaps[1:trunc + 2].astype(float)))
    return 1.0 + 2.0 * s


def identity_check_acurious(env_dual: SparseEnvironment, trunc: int) -> float:
    """Residual of the shifted series identity on a dual environment:
    direct site products vs shift + stretch form."""
    positions, lams, gaps = env_dual.marked_window(0, trunc + 1)
    xis = (1.0 - lams) / lams
    prods = np.cumprod(xis[:trunc + 1])
    rhs = float(env_dual.shift) + float(np.sum(prods * gaps[1:trunc + 2].astype(float)))
    # site products over n = 0 .. (a_{trunc+1} + shift) - 1
    lhs = 0.0
    prod = 1.0
    idx = 0
    top = int(positions[trunc + 1])
    for s in range(0, top):
        if idx <= trunc and s == positions[idx]:
            prod *= xis[idx]
            idx += 1
        lhs += prod
    return abs(lhs - rhs)


def identity_E_S_tilde(spec: EnvironmentSpec, samples: int, seed: int = 0,
                       trunc: int = 0) -> MCEstimate:
    """Monte Carlo mean of the dual series over Q-samples; targets
    VAR(d)/E(d) + E(d) * E(Sbar)."""
    vals = np.empty(samples)
    for i in range(samples):
        env, _ = sample_dual(spec, seed + i, half_window=4, mode="direct")
        vals[i] = dual_S_tilde(env, trunc=trunc)
    m = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(samples))
    return MCEstimate(m, se, samples)


def sinai_density(x: float, tol: float = 1e-14) -> float:
    """Density of the valley-bottom limit law: an alternating exponential
    series in the odd integers.

    Near the origin the exponentials decay too slowly for direct summation,
    so the alternating series is resummed with the Euler transformation
    (sum of halved forward differences), which converges geometrically for
    any decreasing alternating tail and recovers the exact value 1/2 at 0.
    """
    ax = abs(x)
    c = math.pi ** 2 * ax / 8.0
    if c >= 0.5:
        # fast plain summation: terms already decay like exp(-9c), ...
        total = 0.0
        k = 0
        while True:
            term = ((-1.0) ** k / (2 * k + 1)) * math.exp(-((2 * k + 1) ** 2) * c)
            total += term
            if abs(term) < tol and k >= 1:
                break
            k += 1
        return 2.0 / math.pi * total
    m = 64
    a = [math.exp(-((2 * k + 1) ** 2) * c) / (2 * k + 1) for k in range(m)]
    total = 0.0
    for _ in range(m):
        total += a[0] / 2.0
        a = [(a[j] - a[j + 1]) / 2.0 for j in range(len(a) - 1)]
        if abs(a[0]) < tol:
            break
    return max(0.0, 2.0 / math.pi * total)
