"""Sparse random environments on the integer lattice.

A sparse environment is 1/2 everywhere except at marked sites ``a_k``
(``a_0 = 0``, ``a_k - a_{k-1} = d_k`` for every integer ``k``), where it
equals the bias ``lambda_k``.  Realization is lazy and windowed: gaps and
biases are drawn in fixed-size blocks from counter-based streams keyed by
``(seed, kind, block)``, so re-querying any index always returns the same
value and environments of unbounded extent need no unbounded state.

The dual (stationary) environment is the same object with the origin gap
replaced by a size-biased draw and all marked positions shifted right by
``floor(U * d_0)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .dists import (
    ConfigurationError,
    Dist,
    DiscreteTable,
    ParetoGap,
    validate_gap_dist,
    validate_lambda_dist,
)

_BLOCK = 4096
_HALF_BLOCK = _BLOCK // 2
_TAG_GAP = 11
_TAG_LAM = 12
_TAG_DUAL = 13
_KOFFSET = 2**32  # block indices are signed; streams need nonnegative keys


class UnsupportedRegimeError(ValueError):
    """Requested operation is undefined for this law (e.g. infinite mean)."""


@dataclass(frozen=True)
class EnvironmentSpec:
    """Distributional description of the i.i.d. pair law (lambda, d)."""

    lambda_dist: Dist
    gap_dist: Dist
    ellipticity_eps: float = 0.0
    iid_flag: bool = True

    def __post_init__(self):
        if not self.iid_flag:
            raise ConfigurationError("only i.i.d. pair laws are supported")
        if not 0.0 <= self.ellipticity_eps < 0.5:
            raise ConfigurationError(f"ellipticity_eps={self.ellipticity_eps} outside [0, 1/2)")
        validate_lambda_dist(self.lambda_dist, self.ellipticity_eps)
        validate_gap_dist(self.gap_dist)


class SparseEnvironment:
    """A realized (lazily extendable) window of a sparse environment."""

    def __init__(self, spec: EnvironmentSpec, seed: int, half_window: int = 16,
                 shift: int = 0, d0_override: int | None = None):
        if half_window < 1:
            raise ConfigurationError("half_window must be >= 1")
        self.spec = spec
        self.seed = int(seed)
        self.shift = int(shift)
        self.d0_override = d0_override
        # gaps/biases for k in [kmin, kmax], stored as plain arrays
        hw = int(half_window)
        self._set_window(-hw, hw, *self._materialize(-hw, hw))

    @property
    def origin_marked(self) -> bool:
        return self.shift == 0

    # ------------------------------------------------------------------ blocks
    def _raw_gap_block(self, b: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _TAG_GAP, b + _KOFFSET])
        return self.spec.gap_dist.sample(rng, _BLOCK)

    def _raw_lam_block(self, b: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, _TAG_LAM, b + _KOFFSET])
        return self.spec.lambda_dist.sample(rng, _BLOCK)

    def _materialize(self, kmin: int, kmax: int) -> tuple[np.ndarray, np.ndarray]:
        """Gaps and biases for k in [kmin, kmax], from the deterministic streams.

        Block b covers k in [b*BLOCK - BLOCK/2, (b+1)*BLOCK - BLOCK/2), so
        windows around the origin touch a single block per stream."""
        n = kmax - kmin + 1
        d = np.empty(n)
        lam = np.empty(n)
        b0 = (kmin + _HALF_BLOCK) // _BLOCK
        b1 = (kmax + _HALF_BLOCK) // _BLOCK
        for b in range(b0, b1 + 1):
            gb = self._raw_gap_block(b)
            lb = self._raw_lam_block(b)
            start = b * _BLOCK - _HALF_BLOCK
            lo = max(kmin, start)
            hi = min(kmax, start + _BLOCK - 1)
            d[lo - kmin:hi - kmin + 1] = gb[lo - start:hi - start + 1]
            lam[lo - kmin:hi - kmin + 1] = lb[lo - start:hi - start + 1]
        if self.d0_override is not None and kmin <= 0 <= kmax:
            d[-kmin] = float(self.d0_override)
        return d, lam

    def ensure_k_range(self, kmin: int, kmax: int) -> None:
        """Extend the realized window to cover marked indices [kmin, kmax]."""
        kmin = min(kmin, self._kmin)
        kmax = max(kmax, self._kmax)
        if kmin == self._kmin and kmax == self._kmax:
            return
        d, lam = self._materialize(kmin, kmax)
        self._set_window(kmin, kmax, d, lam)

    def _set_window(self, kmin: int, kmax: int,
                    d: np.ndarray, lam: np.ndarray) -> None:
        # a_k - a_{k-1} = d_k for all k, anchored at a_0 = 0
        i0 = -kmin
        a = np.empty(kmax - kmin + 1)
        a[i0] = 0.0
        if kmax > 0:
            a[i0 + 1:] = np.cumsum(d[i0 + 1:])
        if kmin < 0:
            a[:i0] = -np.cumsum(d[1:i0 + 1][::-1])[::-1]
        self._kmin, self._kmax = kmin, kmax
        self._d, self._lam, self._a = d, lam, a

    def ensure_site_range(self, lo: int, hi: int) -> None:
        """Extend so that marked positions straddle the site interval [lo, hi]."""
        while self.a(self._kmax) < hi:
            self.ensure_k_range(self._kmin, max(self._kmax * 2, self._kmax + 64))
        while self.a(self._kmin) > lo:
            self.ensure_k_range(min(self._kmin * 2, self._kmin - 64), self._kmax)

    # ---------------------------------------------------------------- accessors
    def gap(self, k: int) -> int:
        self.ensure_k_range(k, k)
        return int(self._d[k - self._kmin])

    def lam(self, k: int) -> float:
        self.ensure_k_range(k, k)
        return float(self._lam[k - self._kmin])

    def a(self, k: int) -> int:
        """Marked position of index k (shift included)."""
        self.ensure_k_range(k, k)
        return int(self._a[k - self._kmin]) + self.shift

    def xi(self, k: int) -> float:
        lam = self.lam(k)
        return (1.0 - lam) / lam

    def marked_window(self, kmin: int, kmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(positions, lambdas, gaps) for marked indices kmin..kmax inclusive."""
        self.ensure_k_range(kmin, kmax)
        sl = slice(kmin - self._kmin, kmax - self._kmin + 1)
        return (self._a[sl].astype(np.int64) + self.shift,
                self._lam[sl].copy(), self._d[sl].astype(np.int64))

    def marked_in_sites(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """Marked positions within sites [lo, hi] and their biases."""
        self.ensure_site_range(lo, hi)
        pos = self._a.astype(np.int64) + self.shift
        i = np.searchsorted(pos, lo, side="left")
        j = np.searchsorted(pos, hi, side="right")
        return pos[i:j], self._lam[i:j].copy()

    def _index_of_site(self, n: int) -> int | None:
        """Marked index k with a_k == n, or None."""
        self.ensure_site_range(n, n)
        pos = self._a.astype(np.int64) + self.shift
        i = int(np.searchsorted(pos, n))
        if i < len(pos) and pos[i] == n:
            return i + self._kmin
        return None

    # -------------------------------------------------------------- environment
    def omega(self, n: int) -> float:
        k = self._index_of_site(n)
        return 0.5 if k is None else self.lam(k)

    def rho(self, n: int) -> float:
        w = self.omega(n)
        return (1.0 - w) / w

    def eta(self, n: int) -> int:
        """Number of marked sites in sign(n) * [1, |n|]; eta(0) = 0."""
        if n == 0:
            return 0
        lo, hi = (1, n) if n > 0 else (n, -1)
        pos, _ = self.marked_in_sites(lo, hi)
        return len(pos)

    def potential(self, n: int) -> float:
        """Random potential R_n: cumulative log rho over sites 1..n (n > 0)
        or minus the sum over sites n+1..0 (n < 0).  R_0 = 0."""
        if n == 0:
            return 0.0
        if n > 0:
            pos, lam = self.marked_in_sites(1, n)
            sign = 1.0
        else:
            pos, lam = self.marked_in_sites(n + 1, 0)
            sign = -1.0
        xi = (1.0 - lam) / lam
        return sign * float(np.sum(np.log(xi)))

    def dense_omega(self, lo: int, hi: int) -> np.ndarray:
        """Transition probabilities for sites lo..hi as a dense array."""
        pos, lam = self.marked_in_sites(lo, hi)
        w = np.full(hi - lo + 1, 0.5)
        w[pos - lo] = lam
        return w


@dataclass(frozen=True)
class DualSampleWeight:
    weight: float

    def __post_init__(self):
        if self.weight <= 0.0:
            raise ConfigurationError("weight must be positive")


def sample_environment(spec: EnvironmentSpec, seed: int, half_window: int) -> SparseEnvironment:
    """Realize a P-law environment (origin marked, no shift)."""
    return SparseEnvironment(spec, seed, half_window=half_window)


def dualize(env: SparseEnvironment, u: float) -> SparseEnvironment:
    """Shift all marked positions right by floor(u * d_0)."""
    if not 0.0 <= u < 1.0:
        raise ConfigurationError(f"u={u} outside [0, 1)")
    shift = int(math.floor(u * env.gap(0)))
    return SparseEnvironment(env.spec, env.seed, half_window=max(16, env._kmax),
                             shift=shift, d0_override=env.d0_override)


@functools.lru_cache(maxsize=64)
def size_biased_gap_table(gap_dist: Dist) -> DiscreteTable:
    """The law P(d = k) * k / E(d), for finite-support gap laws."""
    if isinstance(gap_dist, ParetoGap):
        if gap_dist.alpha <= 1.0:
            raise UnsupportedRegimeError(
                "size-biased sampling undefined: gap mean is infinite (alpha <= 1)")
        raise UnsupportedRegimeError(
            "direct size-biased sampling is only supported for finite-support gap "
            "laws; use importance mode for pareto gaps")
    values, probs = gap_dist.support_points()
    w = probs * values
    return DiscreteTable(tuple(float(v) for v in values), tuple(w / w.sum()))


def sample_dual(spec: EnvironmentSpec, seed: int, half_window: int,
                mode: str = "direct") -> tuple[SparseEnvironment, DualSampleWeight]:
    """Draw one environment from the stationary dual law Q.

    direct mode: d_0 from the size-biased gap law, uniform shift, weight 1.
    importance mode: plain P-law draw with weight d_0 / E(d_0).
    """
    mean_gap = spec.gap_dist.mean()
    if not math.isfinite(mean_gap):
        raise UnsupportedRegimeError("dual sampling requires a finite mean gap")
    rng = np.random.default_rng([seed, _TAG_DUAL])
    if mode == "direct":
        sb = size_biased_gap_table(spec.gap_dist)
        d0 = int(sb.sample(rng, 1)[0])
        shift = int(math.floor(rng.random() * d0))
        env = SparseEnvironment(spec, seed, half_window=half_window,
                                shift=shift, d0_override=d0)
        return env, DualSampleWeight(1.0)
    if mode == "importance":
        env = SparseEnvironment(spec, seed, half_window=half_window)
        u = rng.random()
        d0 = env.gap(0)
        shifted = dualize(env, u)
        return shifted, DualSampleWeight(d0 / mean_gap)
    raise ConfigurationError(f"unknown dual sampling mode {mode!r}")


def gap_tail_gt(gap_dist: Dist, x: int) -> float:
    """P(d_0 > x)."""
    if x < 0:
        return 1.0
    if isinstance(gap_dist, ParetoGap):
        return gap_dist.tail(x + 1)
    values, probs = gap_dist.support_points()
    return float(np.sum(probs[values > x]))


def dual_gap_kernel(spec: EnvironmentSpec, x: int, y: int) -> float:
    """Transition probability of the gap chain Y_n (distance to the last
    marked site): from x it moves to x+1 or resets to 0."""
    if x < 0:
        raise ConfigurationError("x must be a nonnegative integer")
    px = gap_tail_gt(spec.gap_dist, x)
    if px <= 0.0:
        raise ConfigurationError(f"state x={x} outside the gap support")
    if y == x + 1:
        return gap_tail_gt(spec.gap_dist, x + 1) / px
    if y == 0:
        p_eq = px - gap_tail_gt(spec.gap_dist, x + 1)
        return p_eq / px
    return 0.0


def dual_gap_invariant(spec: EnvironmentSpec, x: int) -> float:
    """Invariant mass Q(Y_0 = x) = P(d_0 > x) / E(d_0)."""
    mean_gap = spec.gap_dist.mean()
    if not math.isfinite(mean_gap):
        raise UnsupportedRegimeError("invariant law requires a finite mean gap")
    return gap_tail_gt(spec.gap_dist, x) / mean_gap


def dump_environment_csv(env: SparseEnvironment, kmin: int, kmax: int) -> str:
    """CSV rows (k, a_k, lambda_k, d_k) for the marked-index window."""
    pos, lam, gaps = env.marked_window(kmin, kmax)
    lines = ["k,a_k,lambda_k,d_k"]
    for k, (p, l, d) in enumerate(zip(pos, lam, gaps), start=kmin):
        lines.append(f"{k},{p},{l:.17g},{d}")
    return "\n".join(lines) + "\n"
