"""Estimators and hypothesis tests used by the verification suites.

Thin, deterministic wrappers around scipy's asymptotic tests plus the
heavy-tail estimators the experiments need.  All p-values are asymptotic;
minimum sample sizes are enforced rather than corrected for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as spstats

from .dists import ConfigurationError


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: tuple[int, ...]
    significance: float = 0.001

    @property
    def passed(self) -> bool:
        return self.p_value > self.significance

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value,
                "n": list(self.n), "significance": self.significance,
                "verdict": "pass" if self.passed else "fail"}


def _check_sample(values: np.ndarray, min_n: int = 20) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) < min_n:
        raise ConfigurationError(f"need a 1-d sample of size >= {min_n}")
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("sample contains non-finite values")
    return values


def ks_one_sample(values: np.ndarray, cdf, significance: float = 0.001) -> TestResult:
    """Sup-distance against a supplied CDF with the asymptotic Kolmogorov
    p-value.  The callable is checked for monotonicity on the sample grid."""
    values = _check_sample(values)
    grid = np.sort(values)
    cdf_vals = np.array([cdf(x) for x in grid])
    if np.any(np.diff(cdf_vals) < -1e-12):
        raise ConfigurationError("supplied cdf is not monotone on the sample grid")
    res = spstats.kstest(values, cdf, method="asymp")
    return TestResult(float(res.statistic), float(res.pvalue), (len(values),), significance)


def ks_two_sample(a: np.ndarray, b: np.ndarray, significance: float = 0.001) -> TestResult:
    a = _check_sample(a)
    b = _check_sample(b)
    res = spstats.ks_2samp(a, b, method="asymp")
    return TestResult(float(res.statistic), float(res.pvalue),
                      (len(a), len(b)), significance)


def chi_square(observed: np.ndarray, expected: np.ndarray,
               significance: float = 0.001, ddof: int = 0) -> TestResult:
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if observed.shape != expected.shape:
        raise ConfigurationError("observed/expected shape mismatch")
    res = spstats.chisquare(observed, expected, ddof=ddof)
    return TestResult(float(res.statistic), float(res.pvalue),
                      (int(observed.sum()),), significance)


def hill_estimator(values: np.ndarray, k_top: int) -> float:
    """Reciprocal mean log-excess over the top k_top order statistics."""
    values = _check_sample(values)
    n = len(values)
    if not 0 < k_top < n / 2:
        raise ConfigurationError(f"k_top={k_top} must be in (0, n/2)")
    if np.any(values <= 0.0):
        raise ConfigurationError("hill estimator needs positive values")
    srt = np.sort(values)[::-1]
    threshold = srt[k_top]
    logs = np.log(srt[:k_top] / threshold)
    return float(1.0 / np.mean(logs))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    ci_lo: float
    ci_hi: float
    n_boot: int


def scaling_regression(pairs: list[tuple[float, float]], n_boot: int = 1000,
                       seed: int = 0, ci: float = 0.95) -> SlopeFit:
    """Least-squares slope of log(statistic) against log(n), with a
    seeded pair-bootstrap confidence interval."""
    xs = np.log([p[0] for p in pairs])
    ys = np.log([p[1] for p in pairs])
    if len(set(np.round(xs, 12))) < 3:
        raise ConfigurationError("need at least 3 distinct abscissae")
    slope, intercept = np.polyfit(xs, ys, 1)
    rng = np.random.default_rng(seed)
    slopes = []
    while len(slopes) < n_boot:
        idx = rng.integers(0, len(xs), len(xs))
        if len(set(xs[idx])) < 2:
            continue
        s, _ = np.polyfit(xs[idx], ys[idx], 1)
        slopes.append(s)
    lo, hi = np.quantile(slopes, [(1 - ci) / 2, (1 + ci) / 2])
    return SlopeFit(float(slope), float(intercept), float(lo), float(hi), n_boot)


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error via exact compensated summation,
    independent of accumulation order."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        raise ConfigurationError("empty sample")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def empirical_quantiles(values: np.ndarray, qs) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ConfigurationError("empty sample")
    return np.quantile(values, qs)
