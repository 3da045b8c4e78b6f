"""Recurrent-regime machinery: normalized potential paths, valley
detection, the valley-bottom predictor, and the localization experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dists import ConfigurationError, ParetoGap
from .env import EnvironmentSpec, SparseEnvironment, sample_environment
from .analysis import RECURRENT, classify
from .walk import _DenseWalker, _replica_seeds


class ValleySearchError(RuntimeError):
    """No valley of the required depth within the search budget."""


def u_scale(alpha: float, x: float) -> float:
    """Spatial scale u(x) = x**(2/alpha), the pure-power regularly varying
    representative matched to the pareto gap sampler."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha={alpha} outside (0, 1)")
    if x <= 0.0:
        raise ConfigurationError("x must be positive")
    return x ** (2.0 / alpha)


def scale_for(spec: EnvironmentSpec, n: int) -> float:
    """u(log n) for the spec's gap law; (log n)**2 in the classical case."""
    ln = math.log(n)
    if isinstance(spec.gap_dist, ParetoGap):
        return u_scale(spec.gap_dist.alpha, ln)
    return ln * ln


@dataclass(frozen=True)
class PotentialPath:
    n: int
    scale_u: float
    ts: np.ndarray
    values: np.ndarray


def normalized_potential(env: SparseEnvironment, n: int, t_max: float,
                         grid: int = 512) -> PotentialPath:
    """Potential rescaled by 1/log n on sites compressed by u(log n):
    value at t is sign(t)/log(n) times the cumulative log rho over sites
    1 .. floor(u * |t|) in the direction of t."""
    if n < 100:
        raise ConfigurationError("horizon n must be at least 100")
    u = scale_for(env.spec, n)
    log_n = math.log(n)
    ts = np.linspace(-t_max, t_max, 2 * grid + 1)
    m = np.floor(u * np.abs(ts)).astype(np.int64)
    m_max = int(m.max())

    def cum_at(ms: np.ndarray, sign: int) -> np.ndarray:
        if sign > 0:
            pos, lam = env.marked_in_sites(1, m_max)
        else:
            pos, lam = env.marked_in_sites(-m_max, -1)
            pos, lam = -pos[::-1], lam[::-1]
        logxi = np.log((1.0 - lam) / lam)
        csum = np.concatenate([[0.0], np.cumsum(logxi)])
        idx = np.searchsorted(pos, ms, side="right")
        return csum[idx]

    vals = np.zeros_like(ts)
    neg = ts < 0
    pos_mask = ts > 0
    if pos_mask.any():
        vals[pos_mask] = cum_at(m[pos_mask], +1) / log_n
    if neg.any():
        vals[neg] = -cum_at(m[neg], -1) / log_n
    return PotentialPath(n, u, ts, vals)


@dataclass(frozen=True)
class Valley:
    left: float
    bottom: float
    right: float
    depth: float


def _tie_break(ts: np.ndarray, js: list[int]) -> int:
    """Smallest |position|, then leftmost."""
    best = js[0]
    for j in js[1:]:
        if (abs(ts[j]), ts[j]) < (abs(ts[best]), ts[best]):
            best = j
    return best


def find_valleys(path: PotentialPath, min_depth: float) -> list[Valley]:
    """All minimal valleys of depth >= min_depth: triples (l, m, r) with the
    path minimized at m on [l, r] and both walls at least min_depth above,
    minimal by inclusion."""
    w = path.values
    ts = path.ts
    npts = len(w)
    by_interval: dict[tuple[int, int], list[int]] = {}
    for j in range(npts):
        left = None
        for i in range(j - 1, -1, -1):
            if w[i] < w[j]:
                break
            if w[i] - w[j] >= min_depth:
                left = i
                break
        if left is None:
            continue
        right = None
        for i in range(j + 1, npts):
            if w[i] < w[j]:
                break
            if w[i] - w[j] >= min_depth:
                right = i
                break
        if right is None:
            continue
        by_interval.setdefault((left, right), []).append(j)

    triples = [(l, _tie_break(ts, js), r) for (l, r), js in by_interval.items()]
    # drop any triple whose interval strictly contains another one
    minimal = []
    for (l, j, r) in triples:
        contains_other = any((l <= l2 and r2 <= r and (l2 - l) + (r - r2) > 0)
                             for (l2, _, r2) in triples)
        if not contains_other:
            minimal.append((l, j, r))
    minimal.sort(key=lambda t: t[1])
    return [Valley(float(ts[l]), float(ts[j]), float(ts[r]),
                   float(min(w[l], w[r]) - w[j]))
            for (l, j, r) in minimal]


def predictor_b_n(env: SparseEnvironment, n: int, depth: float = 1.0,
                  t_start: float = 2.0, grid: int = 512,
                  max_widenings: int = 14) -> float:
    """Bottom coordinate (in u(log n) units) of the minimal valley of depth
    > ``depth`` containing the origin, widening the window geometrically.

    The valley is built outward from the origin: each wall is the first
    point, walking away from 0, that rises ``depth`` above the running
    minimum on that side; the bottom is the argmin over the enclosed
    interval (ties toward smallest |t|, then leftmost).  This interval is
    the smallest one containing the origin whose walls clear the interior
    minimum by ``depth`` on both sides.
    """
    t_max = t_start
    for _ in range(max_widenings):
        path = normalized_potential(env, n, t_max, grid=grid)
        w = path.values
        ts = path.ts
        center = len(w) // 2
        ic = _first_wall(w, center, +1, depth)
        ia = _first_wall(w, center, -1, depth)
        if ic is not None and ia is not None:
            lo, hi = ia, ic
            inner = w[lo:hi + 1]
            js = [lo + j for j in np.flatnonzero(inner == inner.min())]
            return float(ts[_tie_break(ts, js)])
        t_max *= 2.0
    raise ValleySearchError(
        f"no valley of depth > {depth} containing the origin within "
        f"t_max={t_max / 2} after {max_widenings} widenings (n={n})")


def _first_wall(w: np.ndarray, center: int, direction: int, depth: float) -> int | None:
    """First index, walking from ``center`` in ``direction``, whose value
    rises ``depth`` above the running minimum seen so far on that side."""
    run_min = w[center]
    i = center
    while 0 <= i < len(w):
        run_min = min(run_min, w[i])
        if w[i] - run_min >= depth:
            return i
        i += direction
    return None


@dataclass(frozen=True)
class SinaiReplica:
    env_seed: int
    n: int
    X_n: int
    b_n: float
    scale_u: float
    inside: bool


@dataclass(frozen=True)
class SinaiReport:
    eps: float
    replicas: list[SinaiReplica]
    localization_rate: dict[int, float] = field(default_factory=dict)
    scaled_quantiles: dict[int, tuple[float, float, float]] = field(default_factory=dict)


def sinai_experiment(spec: EnvironmentSpec, n_list: list[int], reps: int,
                     master_seed: int = 0, eps: float = 0.5) -> SinaiReport:
    """Direct simulation at each horizon in n_list; records the scaled
    position against the valley-bottom predictor."""
    if classify(spec).classification != RECURRENT:
        raise ConfigurationError("sinai experiment requires a recurrent spec")
    n_list = sorted(n_list)
    records: list[SinaiReplica] = []
    for env_seed, walk_seed in _replica_seeds(master_seed, reps):
        env = sample_environment(spec, env_seed, half_window=8)
        walker = _DenseWalker(env, walk_seed)
        checkpoints = np.array(n_list, dtype=np.int64)
        xs = walker.run_steps(n_list[-1], checkpoints)
        for n, x in zip(n_list, xs):
            u = scale_for(spec, n)
            try:
                b = predictor_b_n(env, n)
            except ValleySearchError:
                b = math.nan
            scaled = x / u
            inside = bool(abs(scaled - b) <= eps) if math.isfinite(b) else False
            records.append(SinaiReplica(env_seed, n, int(x), b, u, inside))
    rate = {}
    quants = {}
    for n in n_list:
        rs = [r for r in records if r.n == n]
        rate[n] = sum(r.inside for r in rs) / len(rs)
        scaled = np.array([r.X_n / r.scale_u for r in rs])
        q = np.quantile(scaled, [0.25, 0.5, 0.75])
        quants[n] = (float(q[0]), float(q[1]), float(q[2]))
    return SinaiReport(eps, records, rate, quants)
