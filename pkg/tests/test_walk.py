"""Quenched walk simulation: stepping, embedded chain, hitting times, speed."""

import math

import numpy as np
import pytest

from sparsewalk.dists import ConfigurationError, Constant, DiscreteTable, ParetoGap
from sparsewalk.env import EnvironmentSpec, sample_environment
from sparsewalk.sinai import u_scale
from sparsewalk.stats import chi_square
from sparsewalk.walk import (
    EmbeddedState,
    WalkState,
    collect_hitting_times,
    conditional_exit_time,
    embedded_kernel,
    embedded_step,
    estimate_speed,
    mean_crossing_time,
    recurrence_diagnostic,
    run_to_hit,
    step,
)

TWO_THIRDS = 2.0 / 3.0


# --------------------------------------------------------------------- stepping

def test_step_bernoulli_frequency(spec_classical):
    env = sample_environment(spec_classical, 1, half_window=4)
    rng = np.random.default_rng(0)
    ups = 0
    n = 50_000
    for _ in range(n):
        ups += step(env, WalkState(0, 0), rng).position == 1
    se = math.sqrt(0.7 * 0.3 / n)
    assert abs(ups / n - 0.7) < 4 * se


def test_step_updates_time(spec_two_gap):
    env = sample_environment(spec_two_gap, 1, half_window=4)
    rng = np.random.default_rng(0)
    s = WalkState(0, 0)
    for t in range(1, 20):
        s = step(env, s, rng)
        assert s.time == t
        assert abs(s.position) <= t


# --------------------------------------------------------------- embedded chain

def _find_stretch_pair(env, l_down, l_up):
    """Marked index k with d_k = l_down (left stretch) and d_{k+1} = l_up."""
    env.ensure_k_range(-200, 200)
    for k in range(-190, 190):
        if env.gap(k) == l_down and env.gap(k + 1) == l_up:
            return k
    raise AssertionError("stretch pattern not found in window")


def test_embedded_kernel_oracle(spec_two_gap):
    env = sample_environment(spec_two_gap, 3, half_window=256)
    k = _find_stretch_pair(env, 1, 3)
    p_up, p_down, p_stay = embedded_kernel(env, k)
    # lambda = 2/3 with stretches (down=1, up=3): (2/3)/3, (1/3)/1, rest
    assert p_up == pytest.approx(2.0 / 9.0, abs=1e-15)
    assert p_down == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert p_stay == pytest.approx(4.0 / 9.0, abs=1e-15)
    assert p_up + p_down + p_stay == pytest.approx(1.0, abs=1e-15)


def test_embedded_kernel_classical(spec_classical):
    env = sample_environment(spec_classical, 1, half_window=4)
    p_up, p_down, p_stay = embedded_kernel(env, 0)
    assert (p_up, p_down) == (pytest.approx(0.7), pytest.approx(0.3))
    assert p_stay == pytest.approx(0.0, abs=1e-15)


def test_embedded_kernel_rows_sum_to_one(spec_uniform123):
    env = sample_environment(spec_uniform123, 9, half_window=64)
    for k in range(-50, 51):
        p_up, p_down, p_stay = embedded_kernel(env, k)
        assert abs(p_up + p_down + p_stay - 1.0) < 1e-15
        assert min(p_up, p_down) > 0.0 and p_stay >= 0.0


def _direct_sigma_step(env, k, rng):
    """Run the walk from a_k until its next visit to a marked site; return
    the marked index reached.  Independent oracle for the embedded kernel."""
    targets = {env.a(k - 1): k - 1, env.a(k): k, env.a(k + 1): k + 1}
    s = step(env, WalkState(env.a(k), 0), rng)
    while s.position not in targets:
        s = step(env, s, rng)
    return targets[s.position]


def test_embedded_vs_direct_chi_square(spec_two_gap):
    """The marked-site subsequence of the direct walk has the gambler's-ruin
    one-step law: goodness of fit at a fixed marked site."""
    env = sample_environment(spec_two_gap, 3, half_window=256)
    k = _find_stretch_pair(env, 3, 3)
    rng = np.random.default_rng(12)
    n = 10_000
    counts = {k - 1: 0, k: 0, k + 1: 0}
    for _ in range(n):
        counts[_direct_sigma_step(env, k, rng)] += 1
    p_up, p_down, p_stay = embedded_kernel(env, k)
    res = chi_square(
        np.array([counts[k - 1], counts[k], counts[k + 1]], dtype=float),
        np.array([p_down, p_stay, p_up]) * n)
    assert res.p_value > 0.001, res


def test_embedded_step_matches_kernel(spec_two_gap):
    env = sample_environment(spec_two_gap, 3, half_window=256)
    k = _find_stretch_pair(env, 1, 3)
    rng = np.random.default_rng(5)
    n = 20_000
    moves = {k - 1: 0, k: 0, k + 1: 0}
    for _ in range(n):
        nxt = embedded_step(env, EmbeddedState(k, 0), rng)
        assert nxt.sigma_time == 1
        moves[nxt.marked_index] += 1
    p_up, p_down, p_stay = embedded_kernel(env, k)
    res = chi_square(
        np.array([moves[k - 1], moves[k], moves[k + 1]], dtype=float),
        np.array([p_down, p_stay, p_up]) * n)
    assert res.p_value > 0.001, res


# ----------------------------------------------------------------- hitting times

def test_run_to_hit_deterministic(spec_two_gap):
    env = sample_environment(spec_two_gap, 8, half_window=8)
    a = run_to_hit(env, 40, budget=10**6, walk_seed=123)
    b = run_to_hit(env, 40, budget=10**6, walk_seed=123)
    assert a == b and not a.timed_out
    c = run_to_hit(env, 40, budget=10**6, walk_seed=124)
    assert c.T is not None   # (almost surely different draw, still hits)


def test_run_to_hit_trivial_and_errors(spec_two_gap):
    env = sample_environment(spec_two_gap, 8, half_window=8)
    rec = run_to_hit(env, 0)
    assert rec.T == 0 and rec.steps_used == 0
    with pytest.raises(ConfigurationError):
        run_to_hit(env, 5, budget=0)


def test_run_to_hit_timeout():
    # strong left drift: hitting +50 within a tiny budget fails
    spec = EnvironmentSpec(Constant(0.2), Constant(1))
    env = sample_environment(spec, 0, half_window=4)
    rec = run_to_hit(env, 50, budget=200, walk_seed=1)
    assert rec.timed_out and rec.T is None
    assert rec.steps_used == 200


def test_first_marked_site_mean_time(spec_two_gap):
    """Annealed mean first-passage time to the first marked site right of the
    origin is 13 for lambda = 2/3, gaps uniform on {1, 3}."""
    times = []
    for seed in range(2000):
        env = sample_environment(spec_two_gap, seed, half_window=4)
        rec = run_to_hit(env, env.a(1), budget=10**6, walk_seed=seed + 10**6)
        assert not rec.timed_out
        times.append(rec.T)
    times = np.array(times, dtype=float)
    se = times.std(ddof=1) / math.sqrt(len(times))
    assert abs(times.mean() - 13.0) < 4 * se


def test_collect_hitting_times_deterministic(spec_two_gap):
    a = collect_hitting_times(spec_two_gap, 60, reps=24, budget=10**6, master_seed=3)
    b = collect_hitting_times(spec_two_gap, 60, reps=24, budget=10**6, master_seed=3)
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a)) and np.all(a >= 60)


def test_collect_hitting_times_nan_on_timeout():
    spec = EnvironmentSpec(Constant(0.2), Constant(1))
    vals = collect_hitting_times(spec, 100, reps=8, budget=500, master_seed=0)
    assert np.all(np.isnan(vals))


# ------------------------------------------------------------- exit-time algebra

def _exit_oracle(L):
    """Linear-system oracle: P(exit right from z) and E_z[T 1_{exit right}]
    for the simple symmetric walk on {0..L}."""
    u = np.array([z / L for z in range(L + 1)])
    A = np.zeros((L + 1, L + 1))
    rhs = np.zeros(L + 1)
    A[0, 0] = A[L, L] = 1.0
    for z in range(1, L):
        A[z, z] = 1.0
        A[z, z - 1] = A[z, z + 1] = -0.5
        rhs[z] = u[z]
    w = np.linalg.solve(A, rhs)
    return u, w


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_conditional_exit_time_closed_form(L):
    u, w = _exit_oracle(L)
    for z in range(1, L):
        right = conditional_exit_time(L, z, "right")
        left = conditional_exit_time(L, z, "left")
        assert right == pytest.approx(w[z] / u[z], abs=1e-10)
        assert right == pytest.approx((L * L - z * z) / 3.0, abs=1e-12)
        assert left == pytest.approx((L * L - (L - z) ** 2) / 3.0, abs=1e-12)
        # law of total expectation: recombines to the unconditional mean
        total = u[z] * right + (1 - u[z]) * left
        assert total == pytest.approx(z * (L - z), abs=1e-10)


def test_mean_crossing_time_examples():
    assert mean_crossing_time(1, 1, "right") == 1.0
    assert mean_crossing_time(1, 0, "left") == 1.0
    assert mean_crossing_time(2, 1, "right") == 2.0
    assert mean_crossing_time(2, 1, "left") == 2.0
    assert mean_crossing_time(3, 1, "right") == pytest.approx(1 + 8 / 3)
    with pytest.raises(ConfigurationError):
        mean_crossing_time(3, 0, "right")
    with pytest.raises(ConfigurationError):
        mean_crossing_time(2, 1, "sideways")


# ------------------------------------------------------------------------ speed

def test_estimate_speed_requires_horizon():
    spec = EnvironmentSpec(Constant(TWO_THIRDS), Constant(1))
    with pytest.raises(ConfigurationError):
        estimate_speed(spec, 4, horizon=100)


def test_speed_modes_agree(spec_two_gap):
    direct = estimate_speed(spec_two_gap, 48, horizon=50_000, mode="direct",
                            master_seed=0)
    emb = estimate_speed(spec_two_gap, 48, horizon=50_000,
                         mode="embedded_mean_time", master_seed=1)
    assert direct.fluctuations_valid
    assert not emb.fluctuations_valid
    comb = math.hypot(direct.stderr, emb.stderr)
    assert abs(direct.mean - emb.mean) < 3 * comb
    assert abs(direct.mean - 2.0 / 13.0) < 4 * direct.stderr


def test_speed_classical(spec_classical):
    est = estimate_speed(spec_classical, 32, horizon=50_000, master_seed=2)
    assert abs(est.mean - 0.4) < 4 * max(est.stderr, 1e-4)


def test_speed_determinism(spec_two_gap):
    a = estimate_speed(spec_two_gap, 8, horizon=10_000, master_seed=9)
    b = estimate_speed(spec_two_gap, 8, horizon=10_000, master_seed=9)
    assert a == b


# ------------------------------------------------------------------- recurrence

def test_recurrence_diagnostic_recurrent(spec_recurrent):
    rep = recurrence_diagnostic(spec_recurrent, horizon=100_000, reps=40,
                                master_seed=0)
    frac_returning = np.mean(np.array(rep.returns_to_origin) > 0)
    assert frac_returning >= 0.95
    short = recurrence_diagnostic(spec_recurrent, horizon=10_000, reps=40,
                                  master_seed=0)
    assert rep.median_sign_changes >= short.median_sign_changes


def test_recurrence_diagnostic_transient_right():
    spec = EnvironmentSpec(Constant(TWO_THIRDS), Constant(1))  # xi = 1/2
    rep = recurrence_diagnostic(spec, horizon=100_000, reps=40, master_seed=1)
    frac_deep_left = np.mean(np.array(rep.minima) < -20)
    assert frac_deep_left < 0.05
    assert rep.median_max > 1000


@pytest.mark.xfail(strict=False, reason=(
    "walk displacement at horizon 1e6 is diffusion-capped near sqrt(horizon) "
    "= 1e3 while the heavy-gap localization scale u(log n) = (log n)^4 is "
    "~3.6e4; the scales only cross around n ~ 7e10, far beyond desk budgets"))
def test_recurrence_heavy_gap_oscillation():
    third = 1.0 / 3.0
    spec = EnvironmentSpec(DiscreteTable((third, TWO_THIRDS), (0.5, 0.5)),
                           ParetoGap(0.5))
    horizon = 1_000_000
    rep = recurrence_diagnostic(spec, horizon=horizon, reps=30, master_seed=0)
    u_half = u_scale(0.5, math.log(horizon)) / 2.0
    assert max(rep.maxima) > u_half
    assert min(rep.minima) < -u_half
