"""Experiment orchestration CLI.

Subcommands: classify | speed | kappa | stable | sinai | dual-check |
identities | sweep | env-dump.  Reports are JSON (aggregates and verdicts);
per-replica data goes to CSV files under --out when given.

Exit codes: 0 = all verdicts pass, 1 = a hard gate failed,
2 = configuration error.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import analysis, env as env_mod, sinai as sinai_mod, stats, walk
from .config import RunConfig, load_config
from .dists import ConfigurationError
from .env import UnsupportedRegimeError

HARD_SIGNIFICANCE = 0.001


def _load(config_path: str, seed, workers, replicas, horizon) -> RunConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    if workers is not None:
        cfg.workers = workers
    if replicas is not None:
        cfg.replicas = replicas
    if horizon is not None:
        cfg.horizon = horizon
    return cfg


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{report['command']}.json").write_text(text + "\n")
    click.echo(text)


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"unserializable {type(obj)}")


def _finish(report: dict, out: str | None, t0: float) -> None:
    report["wall_clock_s"] = round(time.time() - t0, 3)
    _emit(report, out)
    if not all(report.get("verdicts", {}).values()):
        sys.exit(1)


def _agree(a: float, se_a: float, b: float, se_b: float, n_se: float = 3.0) -> bool:
    se = math.hypot(se_a, se_b)
    if se == 0.0:
        return abs(a - b) < 1e-12
    return abs(a - b) <= n_se * se


_common = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=True)),
    click.option("--seed", type=int, default=None),
    click.option("--workers", type=int, default=None),
    click.option("--out", type=click.Path(), default=None),
    click.option("--replicas", type=int, default=None),
    click.option("--horizon", type=int, default=None),
]


def common_options(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


@click.group()
def main():
    """Sparse-environment random walk experiments."""


def _run(fn, *args):
    try:
        fn(*args)
    except (ConfigurationError, UnsupportedRegimeError, FileNotFoundError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)


@main.command()
@common_options
def classify(config_path, seed, workers, out, replicas, horizon):
    """Regime classification plus a simulation corroboration."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        rep = analysis.classify(cfg.spec)
        diag = walk.recurrence_diagnostic(
            cfg.spec, horizon=cfg.horizon, reps=min(cfg.replicas, 32),
            master_seed=cfg.seed)
        drift = diag.median_max + diag.median_min  # positive if drifting right
        corroborated = True
        if rep.classification == "TRANSIENT_RIGHT":
            corroborated = drift > 0
        elif rep.classification == "TRANSIENT_LEFT":
            corroborated = drift < 0
        report = {
            "command": "classify",
            "config": cfg.echo(),
            "results": {
                "e_log_xi": rep.e_log_xi,
                "e_log_d": rep.e_log_d,
                "classification": rep.classification,
                "median_max": diag.median_max,
                "median_min": diag.median_min,
                "median_returns": diag.median_returns,
            },
            "verdicts": {"simulation_corroborates": bool(corroborated)},
        }
        _finish(report, out, t0)
    _run(impl)


@main.command()
@common_options
def speed(config_path, seed, workers, out, replicas, horizon):
    """Four speed estimates with pairwise 3-SE agreement."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        n_dual = int(cfg.params.get("dual_samples", 4000))
        bd = analysis.speed_formula(cfg.spec)
        via_dual = analysis.speed_via_dual(cfg.spec, n_dual, seed=cfg.seed)
        s_tilde = analysis.identity_E_S_tilde(cfg.spec, n_dual, seed=cfg.seed + 1)
        v_stilde = 1.0 / s_tilde.mean
        se_stilde = s_tilde.stderr / s_tilde.mean**2
        mc = walk.estimate_speed(cfg.spec, n_envs=min(cfg.replicas, 64),
                                 horizon=cfg.horizon, mode="direct",
                                 master_seed=cfg.seed)
        ests = {
            "formula": (bd.v, 0.0),
            "dual_lambda": (via_dual.mean, via_dual.stderr),
            "dual_s_tilde": (v_stilde, se_stilde),
            "monte_carlo": (mc.mean, mc.stderr),
        }
        verdicts = {}
        names = list(ests)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                verdicts[f"{a}_vs_{b}"] = _agree(*ests[a], *ests[b])
        report = {
            "command": "speed",
            "config": cfg.echo(),
            "results": {k: {"value": v, "stderr": s} for k, (v, s) in ests.items()},
            "breakdown": {"var_term": bd.var_term, "s_bar_term": bd.s_bar_term},
            "verdicts": verdicts,
        }
        _finish(report, out, t0)
    _run(impl)


@main.command()
@common_options
def kappa(config_path, seed, workers, out, replicas, horizon):
    """Root of the moment equation defining the tail exponent."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        try:
            k = analysis.kappa_root(cfg.spec)
            residual = abs(analysis._xi_expect(
                cfg.spec.lambda_dist, lambda x: x ** k) - 1.0)
            results = {"kappa": k, "residual": residual}
            verdicts = {"residual_below_1e-12": residual < 1e-12}
        except analysis.NoFiniteKappaError:
            results = {"kappa": None, "residual": None}
            verdicts = {"residual_below_1e-12": True}  # no root is a valid answer
        report = {"command": "kappa", "config": cfg.echo(),
                  "results": results, "verdicts": verdicts}
        _finish(report, out, t0)
    _run(impl)


@main.command()
@common_options
def stable(config_path, seed, workers, out, replicas, horizon):
    """Hitting-time scaling: slope, self-similarity, tail index."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        n_grid = [int(x) for x in cfg.params.get("n_grid", [200, 400, 800, 1600])]
        budget = int(cfg.params.get("budget", walk.DEFAULT_BUDGET))
        k = analysis.kappa_root(cfg.spec)
        samples = {}
        timeouts = {}
        for i, n in enumerate(n_grid):
            ts = walk.collect_hitting_times(
                cfg.spec, n, cfg.replicas, budget=budget,
                master_seed=cfg.seed + i, workers=cfg.workers)
            timeouts[n] = int(np.sum(~np.isfinite(ts)))
            samples[n] = ts[np.isfinite(ts)]
        pairs = [(n, float(np.median(s))) for n, s in samples.items()]
        fit = stats.scaling_regression(pairs, seed=cfg.seed)
        a, b = n_grid[-2], n_grid[-1]
        ks = stats.ks_two_sample(samples[a] / a ** (1.0 / k),
                                 samples[b] / b ** (1.0 / k),
                                 significance=0.01)
        k_top = max(10, len(samples[b]) // 10)
        hill = stats.hill_estimator(samples[b], k_top)
        slope_ok = abs(fit.slope - 1.0 / k) <= 0.4 / k
        report = {
            "command": "stable",
            "config": cfg.echo(),
            "results": {
                "kappa": k,
                "slope": fit.slope,
                "slope_ci": [fit.ci_lo, fit.ci_hi],
                "self_similarity_ks": ks.to_dict(),
                "hill_index": hill,
                "timeouts": timeouts,
                "medians": dict(pairs),
            },
            "verdicts": {
                "slope_matches_1_over_kappa": bool(slope_ok),
                "self_similarity": ks.passed,
            },
        }
        if out:
            out_dir = Path(out)
            out_dir.mkdir(parents=True, exist_ok=True)
            with open(out_dir / "hitting_times.csv", "w") as fh:
                fh.write("target,T\n")
                for n, s in samples.items():
                    for v in s:
                        fh.write(f"{n},{int(v)}\n")
        _finish(report, out, t0)
    _run(impl)


@main.command()
@common_options
def sinai(config_path, seed, workers, out, replicas, horizon):
    """Valley-bottom localization experiment in the recurrent regime."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        n_list = [int(x) for x in cfg.params.get("n_list", [10**4, 10**5, 10**6])]
        eps = float(cfg.params.get("eps", 0.5))
        rep = sinai_mod.sinai_experiment(
            cfg.spec, n_list, reps=cfg.replicas, master_seed=cfg.seed, eps=eps)
        rates = {str(n): rep.localization_rate[n] for n in sorted(rep.localization_rate)}
        nondecreasing = all(
            rep.localization_rate[a] <= rep.localization_rate[b] + 0.05
            for a, b in zip(sorted(n_list), sorted(n_list)[1:]))
        report = {
            "command": "sinai",
            "config": cfg.echo(),
            "results": {
                "localization_rate": rates,
                "scaled_quantiles": {str(n): rep.scaled_quantiles[n]
                                     for n in sorted(rep.scaled_quantiles)},
                "eps": eps,
            },
            "verdicts": {"rate_roughly_nondecreasing": bool(nondecreasing)},
        }
        if out:
            out_dir = Path(out)
            out_dir.mkdir(parents=True, exist_ok=True)
            with open(out_dir / "sinai_replicas.csv", "w") as fh:
                fh.write("env_seed,n,X_n,b_n,scaled_X,inside\n")
                for r in rep.replicas:
                    fh.write(f"{r.env_seed},{r.n},{r.X_n},{r.b_n:.6g},"
                             f"{r.X_n / r.scale_u:.6g},{int(r.inside)}\n")
        _finish(report, out, t0)
    _run(impl)


@main.command("dual-check")
@common_options
def dual_check(config_path, seed, workers, out, replicas, horizon):
    """Palm duality: origin frequency, moment identities, gap-chain law."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        n = max(cfg.replicas, 10**4)
        spec = cfg.spec
        eq_d_th, eq_a_th = analysis.dual_gap_moments(spec)
        mean_gap = spec.gap_dist.mean()
        marked = 0
        d0s = np.empty(n)
        a0s = np.empty(n)
        for i in range(n):
            e, _ = env_mod.sample_dual(spec, cfg.seed + i, half_window=2)
            marked += e.origin_marked
            d0s[i] = e.gap(0)
            a0s[i] = e.shift
        freq = marked / n
        se_freq = math.sqrt(freq * (1 - freq) / n)
        m_d, se_d = stats.mean_stderr(d0s)
        m_a, se_a = stats.mean_stderr(a0s)
        # gap-chain invariant law: Y_0 = shift
        xs = sorted(set(int(x) for x in a0s))
        obs = np.array([np.sum(a0s == x) for x in xs], dtype=float)
        exp = np.array([env_mod.dual_gap_invariant(spec, x) for x in xs]) * n
        chi = stats.chi_square(obs, exp * (obs.sum() / exp.sum()),
                               significance=HARD_SIGNIFICANCE, ddof=0)
        verdicts = {
            "origin_frequency": abs(freq - 1.0 / mean_gap) <= 4 * se_freq + 1e-12,
            "dual_gap_mean": abs(m_d - eq_d_th) <= 4 * se_d + 1e-12,
            "dual_origin_offset": abs(m_a - eq_a_th) <= 4 * se_a + 1e-12,
            "gap_chain_invariant": chi.passed,
        }
        report = {
            "command": "dual-check",
            "config": cfg.echo(),
            "results": {
                "origin_marked_freq": freq, "origin_marked_expected": 1.0 / mean_gap,
                "E_Q_d0": m_d, "E_Q_d0_expected": eq_d_th,
                "E_Q_a0": m_a, "E_Q_a0_expected": eq_a_th,
                "gap_chain_chi_square": chi.to_dict(),
            },
            "verdicts": verdicts,
        }
        _finish(report, out, t0)
    _run(impl)


@main.command()
@common_options
def identities(config_path, seed, workers, out, replicas, horizon):
    """Exact series identities and the two-form agreement of the density
    functional, across random environments."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        n_envs = min(cfg.replicas, 100)
        trunc = int(cfg.params.get("trunc", 40))
        max_s = max_f = max_lam = 0.0
        for i in range(n_envs):
            e = env_mod.sample_environment(cfg.spec, cfg.seed + i, half_window=trunc + 4)
            max_s = max(max_s, analysis.identity_check_S(e, trunc))
            max_f = max(max_f, analysis.identity_check_F(e, trunc))
            lv = analysis.lambda_functional(e)
            max_lam = max(max_lam, abs(lv.site_form - lv.stretch_form))
        report = {
            "command": "identities",
            "config": cfg.echo(),
            "results": {
                "max_forward_residual": max_s,
                "max_backward_residual": max_f,
                "max_lambda_two_form_gap": max_lam,
                "environments": n_envs,
            },
            "verdicts": {
                "forward_identity": max_s < 1e-12,
                "backward_identity": max_f < 1e-12,
                "lambda_two_form": max_lam < 1e-9,
            },
        }
        _finish(report, out, t0)
    _run(impl)


@main.command()
@common_options
def sweep(config_path, seed, workers, out, replicas, horizon):
    """Formula-speed grid showing the zero-variance maximality."""
    def impl():
        t0 = time.time()
        cfg = _load(config_path, seed, workers, replicas, horizon)
        mu = int(cfg.params.get("mu", 2))
        b = float(cfg.params.get("b", math.log(0.5)))
        tops = [int(t) for t in cfg.params.get("tops", [mu, mu + 1, mu + 2, mu + 4])]
        lam = 1.0 / (1.0 + math.exp(b))
        from .dists import Constant, DiscreteTable
        points = []
        for top in tops:
            # two-point integer gap on {1, top} with mean mu (top = mu: constant)
            if top == mu:
                gap = Constant(float(mu))
            elif top > mu:
                p1 = (top - mu) / (top - 1)
                gap = DiscreteTable((1.0, float(top)), (p1, 1.0 - p1))
            else:
                raise ConfigurationError(f"top={top} below the mean {mu}")
            spec = env_mod.EnvironmentSpec(Constant(lam), gap)
            points.append({"var": gap.var(), "v": analysis.speed_formula(spec).v})
        bound = analysis.max_speed_fixed_b(mu, b)
        speeds = [p["v"] for p in points]
        verdicts = {
            "maximum_at_zero_variance": speeds[0] == max(speeds),
            "maximum_equals_bound": abs(speeds[0] - bound) < 1e-12,
            "strictly_decreasing_in_var": all(
                a > bnd for a, bnd in zip(speeds, speeds[1:])),
        }
        report = {
            "command": "sweep",
            "config": cfg.echo(),
            "results": {"points": points, "bound": bound, "mu": mu, "b": b},
            "verdicts": verdicts,
        }
        _finish(report, out, t0)
    _run(impl)


@main.command("env-dump")
@common_options
@click.option("--kmin", type=int, default=-8)
@click.option("--kmax", type=int, default=8)
def env_dump(config_path, seed, workers, out, replicas, horizon, kmin, kmax):
    """Dump a realized environment window as CSV."""
    def impl():
        cfg = _load(config_path, seed, workers, replicas, horizon)
        e = env_mod.sample_environment(cfg.spec, cfg.seed,
                                      half_window=max(abs(kmin), abs(kmax), 1))
        text = env_mod.dump_environment_csv(e, kmin, kmax)
        if out:
            out_dir = Path(out)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "environment.csv").write_text(text)
        click.echo(text, nl=False)
    _run(impl)


if __name__ == "__main__":
    main()
