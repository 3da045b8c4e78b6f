"""Exact quenched simulation of the walk: nearest-neighbor stepper,
embedded marked-site chain, first-passage times, and Monte Carlo speed and
recurrence estimators.

The hot loops run under numba over a dense window of transition
probabilities; when a walk reaches the window boundary the kernel returns
and the caller extends the window and resumes.  Everything is a pure
function of (spec, env seed, walk seed), so re-runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dists import ConfigurationError
from .env import EnvironmentSpec, SparseEnvironment, sample_environment

DEFAULT_BUDGET = 10**9


# ----------------------------------------------------------------- numba cores

@njit(cache=True)
def _steps_core(omega, base, pos, t, max_t, checkpoints, out_pos, ck_idx,
                xmin, xmax, sign_changes, returns0, last_sign, seed):
    """Advance the walk until max_t steps or the window boundary.

    Returns (pos, t, ck_idx, xmin, xmax, sign_changes, returns0, last_sign,
    boundary) where boundary is -1/+1 when the window edge was reached, else 0.
    """
    np.random.seed(seed)
    lo = base
    hi = base + omega.shape[0] - 1
    n_ck = checkpoints.shape[0]
    while t < max_t:
        if pos <= lo:
            return pos, t, ck_idx, xmin, xmax, sign_changes, returns0, last_sign, -1
        if pos >= hi:
            return pos, t, ck_idx, xmin, xmax, sign_changes, returns0, last_sign, 1
        if np.random.random() < omega[pos - base]:
            pos += 1
        else:
            pos -= 1
        t += 1
        if pos < xmin:
            xmin = pos
        if pos > xmax:
            xmax = pos
        if pos == 0:
            returns0 += 1
        else:
            s = 1 if pos > 0 else -1
            if last_sign != 0 and s != last_sign:
                sign_changes += 1
            last_sign = s
        while ck_idx < n_ck and t == checkpoints[ck_idx]:
            out_pos[ck_idx] = pos
            ck_idx += 1
    return pos, t, ck_idx, xmin, xmax, sign_changes, returns0, last_sign, 0


@njit(cache=True)
def _hit_core(omega, base, pos, t, target, budget, seed):
    """Run until the walk hits target, the budget, or the window boundary.

    Returns (pos, t, status): status 0 = hit, 1 = budget exhausted,
    -2/+2 = boundary reached.
    """
    np.random.seed(seed)
    lo = base
    hi = base + omega.shape[0] - 1
    while True:
        if pos == target:
            return pos, t, 0
        if t >= budget:
            return pos, t, 1
        if pos <= lo and pos != target:
            return pos, t, -2
        if pos >= hi and pos != target:
            return pos, t, 2
        if np.random.random() < omega[pos - base]:
            pos += 1
        else:
            pos -= 1
        t += 1


@njit(cache=True)
def _embedded_mean_time_core(lam, a, kbase, k, time, horizon, seed):
    """Embedded chain with conditional mean crossing durations.

    Returns (k, time, boundary): runs until the accumulated mean time
    exceeds horizon or k leaves the realized marked window.
    """
    np.random.seed(seed)
    klo = kbase
    khi = kbase + lam.shape[0] - 1
    while time < horizon:
        if k <= klo:
            return k, time, -1
        if k >= khi:
            return k, time, 1
        i = k - kbase
        l = lam[i]
        l_up = a[i + 1] - a[i]
        l_dn = a[i] - a[i - 1]
        if np.random.random() < l:
            # entered the right stretch; crosses with probability 1/L+
            if l_up == 1 or np.random.random() < 1.0 / l_up:
                time += 1.0 + (l_up * l_up - 1.0) / 3.0
                k += 1
            else:
                time += 1.0 + (2.0 * l_up - 1.0) / 3.0
        else:
            if l_dn == 1 or np.random.random() < 1.0 / l_dn:
                time += 1.0 + (l_dn * l_dn - 1.0) / 3.0
                k -= 1
            else:
                time += 1.0 + (2.0 * l_dn - 1.0) / 3.0
    return k, time, 0


# ------------------------------------------------------------- window manager

class _DenseWalker:
    """Maintains a dense omega window around the walk and resumes the numba
    core across window extensions.  Each resume reseeds from a derived
    counter, which keeps runs deterministic."""

    def __init__(self, env: SparseEnvironment, walk_seed: int, halfwidth: int = 2048):
        self.env = env
        self._seed_seq = np.random.SeedSequence(walk_seed)
        self._seed_counter = 0
        self.pos = 0
        self.t = 0
        self.xmin = 0
        self.xmax = 0
        self.sign_changes = 0
        self.returns0 = 0
        self.last_sign = 0
        self._lo = -halfwidth
        self._hi = halfwidth
        self._omega = env.dense_omega(self._lo, self._hi)

    def _next_seed(self) -> int:
        s = np.random.SeedSequence(
            entropy=self._seed_seq.entropy, spawn_key=(self._seed_counter,))
        self._seed_counter += 1
        return int(s.generate_state(1)[0] % (2**31 - 1))

    def _extend(self, side: int) -> None:
        width = self._hi - self._lo + 1
        if side < 0:
            self._lo -= width
        else:
            self._hi += width
        self._omega = self.env.dense_omega(self._lo, self._hi)

    def run_steps(self, max_t: int, checkpoints: np.ndarray | None = None) -> np.ndarray:
        """Advance to time max_t; returns positions at the checkpoint times."""
        if checkpoints is None:
            checkpoints = np.empty(0, dtype=np.int64)
        out = np.zeros(len(checkpoints), dtype=np.int64)
        ck_idx = 0
        while True:
            (self.pos, self.t, ck_idx, self.xmin, self.xmax, self.sign_changes,
             self.returns0, self.last_sign, boundary) = _steps_core(
                self._omega, self._lo, self.pos, self.t, max_t, checkpoints,
                out, ck_idx, self.xmin, self.xmax, self.sign_changes,
                self.returns0, self.last_sign, self._next_seed())
            if boundary == 0:
                return out
            self._extend(boundary)

    def run_to_hit(self, target: int, budget: int) -> int | None:
        """First-passage time to target, or None when the budget runs out."""
        if target < self._lo or target > self._hi:
            side = -1 if target < self._lo else 1
            while not (self._lo < target < self._hi):
                self._extend(side)
        while True:
            self.pos, self.t, status = _hit_core(
                self._omega, self._lo, self.pos, self.t, target, budget,
                self._next_seed())
            if status == 0:
                return self.t
            if status == 1:
                return None
            self._extend(-1 if status == -2 else 1)


# ------------------------------------------------------------------ public API

@dataclass
class WalkState:
    position: int
    time: int


def step(env: SparseEnvironment, state: WalkState, rng: np.random.Generator) -> WalkState:
    """One nearest-neighbor step of the quenched walk."""
    w = env.omega(state.position)
    move = 1 if rng.random() < w else -1
    return WalkState(state.position + move, state.time + 1)


def embedded_kernel(env: SparseEnvironment, k: int) -> tuple[float, float, float]:
    """One-step law of the marked-site chain at index k, from the gambler's
    ruin solution on the two adjacent stretches."""
    lam = env.lam(k)
    l_up = env.a(k + 1) - env.a(k)
    l_dn = env.a(k) - env.a(k - 1)
    p_up = lam / l_up
    p_down = (1.0 - lam) / l_dn
    return p_up, p_down, 1.0 - p_up - p_down


@dataclass
class EmbeddedState:
    marked_index: int
    sigma_time: int


def embedded_step(env: SparseEnvironment, estate: EmbeddedState,
                  rng: np.random.Generator) -> EmbeddedState:
    p_up, p_down, _ = embedded_kernel(env, estate.marked_index)
    u = rng.random()
    if u < p_up:
        k = estate.marked_index + 1
    elif u < p_up + p_down:
        k = estate.marked_index - 1
    else:
        k = estate.marked_index
    return EmbeddedState(k, estate.sigma_time + 1)


@dataclass(frozen=True)
class HittingRecord:
    target: int
    T: int | None          # None encodes TIMEOUT
    steps_used: int

    @property
    def timed_out(self) -> bool:
        return self.T is None


def run_to_hit(env: SparseEnvironment, target: int, budget: int = DEFAULT_BUDGET,
               walk_seed: int = 0) -> HittingRecord:
    """Exact first-passage time to ``target`` by direct stepping."""
    if budget <= 0:
        raise ConfigurationError("budget must be positive")
    if target == 0:
        return HittingRecord(0, 0, 0)
    walker = _DenseWalker(env, walk_seed,
                          halfwidth=max(2048, 2 * abs(target)))
    t = walker.run_to_hit(target, budget)
    return HittingRecord(target, t, walker.t)


def conditional_exit_time(L: int, start: int, side: str) -> float:
    """Mean exit time of the simple symmetric walk from {0, ..., L} started
    at ``start``, conditioned on exiting at the given side.

    Closed forms: E[T | exit right] = (L**2 - start**2) / 3 and, by
    reflection, E[T | exit left] = (L**2 - (L - start)**2) / 3.  They
    combine to the unconditional mean start * (L - start) under the exit
    probabilities start/L and (L - start)/L.
    """
    if L < 1 or not 0 <= start <= L:
        raise ConfigurationError(f"invalid geometry L={L}, start={start}")
    if side == "right":
        return (L * L - start * start) / 3.0
    if side == "left":
        back = L - start
        return (L * L - back * back) / 3.0
    raise ConfigurationError(f"side must be 'left' or 'right', got {side!r}")


def mean_crossing_time(L: int, start_offset: int, side: str) -> float:
    """Conditional mean duration of a stretch crossing, counting the
    entering step: 1 + conditional SSRW exit time from ``start_offset``."""
    if L == 1:
        # adjacent marks: the entering step lands on the neighbor
        if start_offset not in (0, 1):
            raise ConfigurationError(f"invalid geometry L=1, start={start_offset}")
        return 1.0
    if not 1 <= start_offset <= L - 1:
        raise ConfigurationError(f"invalid geometry L={L}, start={start_offset}")
    return 1.0 + conditional_exit_time(L, start_offset, side)


@dataclass(frozen=True)
class SpeedEstimate:
    mean: float
    stderr: float
    n_replicas: int
    horizon: int
    fluctuations_valid: bool = True


def _replica_seeds(master_seed: int, n: int) -> list[tuple[int, int]]:
    """(env_seed, walk_seed) per replica, pure function of the master seed."""
    ss = np.random.SeedSequence(master_seed)
    state = ss.generate_state(2 * n, dtype=np.uint64)
    return [(int(state[2 * i] % 2**63), int(state[2 * i + 1] % 2**63))
            for i in range(n)]


def estimate_speed(spec: EnvironmentSpec, n_envs: int, horizon: int,
                   mode: str = "direct", master_seed: int = 0) -> SpeedEstimate:
    """Mean and standard error of X_horizon / horizon across environments.

    ``embedded_mean_time`` replaces stretch crossings by exit-side sampling
    with conditional mean durations; valid for the speed only, so the
    resulting estimate is flagged as carrying no fluctuation information.
    """
    if horizon < 10**4:
        raise ConfigurationError("horizon must be at least 1e4")
    vals = np.empty(n_envs)
    seeds = _replica_seeds(master_seed, n_envs)
    for i, (env_seed, walk_seed) in enumerate(seeds):
        env = sample_environment(spec, env_seed, half_window=4)
        if mode == "direct":
            walker = _DenseWalker(env, walk_seed)
            walker.run_steps(horizon)
            vals[i] = walker.pos / horizon
        elif mode == "embedded_mean_time":
            vals[i] = _embedded_mean_time_speed(env, walk_seed, horizon)
        else:
            raise ConfigurationError(f"unknown speed mode {mode!r}")
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_envs)) if n_envs > 1 else 0.0
    return SpeedEstimate(mean, se, n_envs, horizon,
                         fluctuations_valid=(mode == "direct"))


def _embedded_mean_time_speed(env: SparseEnvironment, walk_seed: int,
                              horizon: int) -> float:
    seed_seq = np.random.SeedSequence(walk_seed)
    counter = 0
    khw = 512
    k, time = 0, 0.0
    while True:
        pos_arr, lam, _ = env.marked_window(-khw, khw)
        a = pos_arr.astype(np.float64)
        s = np.random.SeedSequence(entropy=seed_seq.entropy, spawn_key=(counter,))
        counter += 1
        seed = int(s.generate_state(1)[0] % (2**31 - 1))
        k, time, boundary = _embedded_mean_time_core(
            lam, a, -khw, k, time, float(horizon), seed)
        if boundary == 0:
            return env.a(k) / time
        khw *= 2


def _hit_replica(spec: EnvironmentSpec, env_seed: int, walk_seed: int,
                 target: int, budget: int) -> float:
    env = sample_environment(spec, env_seed, half_window=4)
    rec = run_to_hit(env, target, budget=budget, walk_seed=walk_seed)
    return math.nan if rec.T is None else float(rec.T)


def collect_hitting_times(spec: EnvironmentSpec, target: int, reps: int,
                          budget: int = DEFAULT_BUDGET, master_seed: int = 0,
                          workers: int = 1) -> np.ndarray:
    """First-passage times to ``target`` over annealed (env, walk) replicas.

    Timeouts appear as NaN so callers can count them rather than drop them
    silently.  Results are ordered by replica index, so the worker count
    cannot change the output.
    """
    seeds = _replica_seeds(master_seed, reps)
    if workers > 1:
        from joblib import Parallel, delayed
        vals = Parallel(n_jobs=workers)(
            delayed(_hit_replica)(spec, es, ws, target, budget) for es, ws in seeds)
        return np.array(vals)
    return np.array([_hit_replica(spec, es, ws, target, budget) for es, ws in seeds])


@dataclass(frozen=True)
class RecurrenceReport:
    horizon: int
    sign_changes: list[int]
    maxima: list[int]
    minima: list[int]
    returns_to_origin: list[int]
    median_sign_changes: float
    median_max: float
    median_min: float
    median_returns: float


def recurrence_diagnostic(spec: EnvironmentSpec, horizon: int, reps: int,
                          master_seed: int = 0) -> RecurrenceReport:
    """Per-replica path statistics over the given horizon."""
    sc, mx, mn, r0 = [], [], [], []
    for env_seed, walk_seed in _replica_seeds(master_seed, reps):
        env = sample_environment(spec, env_seed, half_window=4)
        walker = _DenseWalker(env, walk_seed)
        walker.run_steps(horizon)
        sc.append(walker.sign_changes)
        mx.append(walker.xmax)
        mn.append(walker.xmin)
        r0.append(walker.returns0)
    return RecurrenceReport(
        horizon, sc, mx, mn, r0,
        float(np.median(sc)), float(np.median(mx)),
        float(np.median(mn)), float(np.median(r0)))
