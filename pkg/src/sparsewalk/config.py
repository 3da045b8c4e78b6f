"""TOML run configuration: environment spec plus experiment parameters.

Canonical fields::

    [lambda]            # bias law, support in (0, 1)
    kind = "two_point"
    params = { v1 = 0.8, p1 = 0.5, v2 = 0.2 }

    [gap]               # gap law, support in {1, 2, ...}
    kind = "discrete_table"
    params = { values = [1, 3], probs = [0.5, 0.5] }

    ellipticity_eps = 0.0
    seed = 42
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

from .dists import (
    ConfigurationError,
    Constant,
    DiscreteTable,
    Dist,
    ParetoGap,
    TwoPoint,
    UniformInterval,
)
from .env import EnvironmentSpec

_KINDS = {
    "constant": (Constant, ("v",)),
    "two_point": (TwoPoint, ("v1", "p1", "v2")),
    "uniform_interval": (UniformInterval, ("lo", "hi")),
    "discrete_table": (DiscreteTable, ("values", "probs")),
    "pareto_gap": (ParetoGap, ("alpha",)),
}


def dist_from_config(section: dict) -> Dist:
    kind = section.get("kind")
    if kind not in _KINDS:
        raise ConfigurationError(
            f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls, names = _KINDS[kind]
    params = dict(section.get("params", {}))
    missing = [n for n in names if n not in params]
    if missing:
        raise ConfigurationError(f"{kind} missing params {missing}")
    extra = [n for n in params if n not in names]
    if extra:
        raise ConfigurationError(f"{kind} got unexpected params {extra}")
    if kind == "discrete_table":
        return DiscreteTable(tuple(float(v) for v in params["values"]),
                             tuple(float(p) for p in params["probs"]))
    return cls(**{n: params[n] for n in names})


def dist_to_config(dist: Dist) -> dict:
    for kind, (cls, names) in _KINDS.items():
        if type(dist) is cls:
            return {"kind": kind, "params": {n: getattr(dist, n) for n in names}}
    return {"kind": type(dist).__name__, "params": {}}


@dataclass
class RunConfig:
    spec: EnvironmentSpec
    seed: int = 0
    workers: int = 1
    replicas: int = 100
    horizon: int = 10**5
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "lambda": dist_to_config(self.spec.lambda_dist),
            "gap": dist_to_config(self.spec.gap_dist),
            "ellipticity_eps": self.spec.ellipticity_eps,
            "seed": self.seed,
            "workers": self.workers,
            "replicas": self.replicas,
            "horizon": self.horizon,
            "params": self.params,
        }


def load_config(path: str | Path) -> RunConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    if "lambda" not in raw or "gap" not in raw:
        raise ConfigurationError("config must contain [lambda] and [gap] sections")
    spec = EnvironmentSpec(
        lambda_dist=dist_from_config(raw["lambda"]),
        gap_dist=dist_from_config(raw["gap"]),
        ellipticity_eps=float(raw.get("ellipticity_eps", 0.0)),
    )
    known = {"lambda", "gap", "ellipticity_eps", "seed", "workers",
             "replicas", "horizon"}
    params = {k: v for k, v in raw.items() if k not in known}
    return RunConfig(
        spec=spec,
        seed=int(raw.get("seed", 0)),
        workers=int(raw.get("workers", 1)),
        replicas=int(raw.get("replicas", 100)),
        horizon=int(raw.get("horizon", 10**5)),
        params=params,
    )
