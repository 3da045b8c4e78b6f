"""Distribution primitives for bias laws (values in (0,1)) and gap laws (positive integers).

A ``Dist`` is a small immutable object exposing sampling plus the exact
expectations the closed-form evaluators need.  Discrete laws compute
expectations by direct summation; ``UniformInterval`` integrates with
``scipy.integrate.quad``; ``ParetoGap`` uses its exact tail
``P(d >= k) = (k-1)**-alpha`` for ``k >= 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad


class ConfigurationError(ValueError):
    """Invalid distribution or environment specification."""


class Dist:
    """Base class.  Subclasses are value objects; all methods are pure."""

    #: True when the law is concentrated on finitely many points.
    finite_support = False

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def expect(self, f: Callable[[float], float]) -> float:
        """E[f(X)], exact for discrete laws, quadrature/series otherwise."""
        raise NotImplementedError

    def mean(self) -> float:
        return self.expect(lambda x: x)

    def second_moment(self) -> float:
        return self.expect(lambda x: x * x)

    def var(self) -> float:
        m = self.mean()
        if not math.isfinite(m):
            return math.inf
        return self.second_moment() - m * m

    def log_mean(self) -> float:
        """E[log X]."""
        return self.expect(math.log)

    def abs_log_mean(self) -> float:
        return self.expect(lambda x: abs(math.log(x)))

    # Discrete laws override these two with their exact tables.
    def support_points(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, probs) for finite-support laws."""
        raise ConfigurationError(f"{type(self).__name__} has no finite support table")

    def support_bounds(self) -> tuple[float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Dist):
    v: float

    finite_support = True

    def sample(self, rng, size):
        return np.full(size, self.v)

    def expect(self, f):
        return f(self.v)

    def support_points(self):
        return np.array([self.v]), np.array([1.0])

    def support_bounds(self):
        return self.v, self.v


@dataclass(frozen=True)
class TwoPoint(Dist):
    v1: float
    p1: float
    v2: float

    finite_support = True

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ConfigurationError(f"p1={self.p1} outside [0, 1]")

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.p1, self.v1, self.v2)

    def expect(self, f):
        return self.p1 * f(self.v1) + (1.0 - self.p1) * f(self.v2)

    def support_points(self):
        return np.array([self.v1, self.v2]), np.array([self.p1, 1.0 - self.p1])

    def support_bounds(self):
        lo, hi = sorted((self.v1, self.v2))
        return lo, hi


@dataclass(frozen=True)
class UniformInterval(Dist):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"empty interval [{self.lo}, {self.hi}]")

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def expect(self, f):
        val, _ = quad(f, self.lo, self.hi, limit=200)
        return val / (self.hi - self.lo)

    def support_bounds(self):
        return self.lo, self.hi


@dataclass(frozen=True)
class DiscreteTable(Dist):
    values: tuple[float, ...]
    probs: tuple[float, ...]

    finite_support = True

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if len(self.values) != len(p):
            raise ConfigurationError("values and probs length mismatch")
        if np.any(p < 0.0):
            raise ConfigurationError("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"probabilities sum to {p.sum()}, not 1")

    def sample(self, rng, size):
        try:
            cuts, vals = self._sample_table
        except AttributeError:
            # inner cut points only, so searchsorted indexes vals directly
            cuts = np.cumsum(self.probs)[:-1]
            vals = np.asarray(self.values, dtype=float)
            object.__setattr__(self, "_sample_table", (cuts, vals))
        return vals[np.searchsorted(cuts, rng.random(size), side="right")]

    def expect(self, f):
        return float(sum(p * f(v) for v, p in zip(self.values, self.probs)))

    def support_points(self):
        return np.asarray(self.values, dtype=float), np.asarray(self.probs, dtype=float)

    def support_bounds(self):
        return min(self.values), max(self.values)


@dataclass(frozen=True)
class ParetoGap(Dist):
    """Heavy-tailed integer gap law: d = ceil(U**(-1/alpha)), U uniform on (0,1).

    Exact tail: P(d >= k) = (k-1)**-alpha for k >= 2 (and P(d >= 2) = 1,
    so the mass at 1 is zero).  The tail is regularly varying of index
    -alpha; the mean is infinite for alpha <= 1.
    """

    alpha: float

    #: truncation for series expectations (tail corrected by an integral bound)
    _series_cutoff: int = field(default=10**6, compare=False, repr=False)

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ConfigurationError(f"alpha={self.alpha} must be positive")

    def sample(self, rng, size):
        u = rng.random(size)
        return np.ceil(u ** (-1.0 / self.alpha))

    def pmf(self, k: int) -> float:
        if k < 2:
            return 0.0
        return (k - 1.0) ** -self.alpha - k ** -self.alpha

    def tail(self, k: int) -> float:
        """P(d >= k)."""
        if k <= 2:
            return 1.0
        return (k - 1.0) ** -self.alpha

    def mean(self):
        return math.inf if self.alpha <= 1.0 else self.expect(lambda x: x)

    def second_moment(self):
        return math.inf if self.alpha <= 2.0 else self.expect(lambda x: x * x)

    def expect(self, f):
        # Series over the pmf; remaining mass is pushed through f at the
        # cutoff as a lower-bound correction (adequate for the slowly
        # growing integrands used here: log, bounded indicators).
        a = self.alpha
        ks = np.arange(2, self._series_cutoff)
        pk = (ks - 1.0) ** -a - ks ** -a
        total = float(np.sum(pk * np.vectorize(f)(ks.astype(float))))
        tail_mass = (self._series_cutoff - 1.0) ** -a
        return total + tail_mass * f(float(self._series_cutoff))

    def log_mean(self):
        return self.expect(math.log)

    def support_bounds(self):
        return 2.0, math.inf


def validate_lambda_dist(dist: Dist, ellipticity_eps: float = 0.0) -> None:
    """Check a bias law has support in (0,1), or [eps, 1-eps] when required."""
    lo, hi = dist.support_bounds()
    if not (0.0 < lo and hi < 1.0):
        raise ConfigurationError(f"bias law support [{lo}, {hi}] not inside (0, 1)")
    if ellipticity_eps > 0.0:
        if lo < ellipticity_eps or hi > 1.0 - ellipticity_eps:
            raise ConfigurationError(
                f"bias law support [{lo}, {hi}] violates ellipticity eps={ellipticity_eps}")


def validate_gap_dist(dist: Dist) -> None:
    """Check a gap law is supported on the positive integers."""
    if not getattr(dist, "finite_support", False):
        lo, _ = dist.support_bounds()
        if lo < 1:
            raise ConfigurationError(f"gap law support starts below 1 (at {lo})")
        return
    values, _ = dist.support_points()
    if np.any(values < 1) or np.any(values != np.round(values)):
        raise ConfigurationError(f"gap law support {values} not in {{1, 2, ...}}")
