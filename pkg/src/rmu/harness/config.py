"""Experiment configuration: an INI file with ``[env]``, ``[labelling]``,
``[train]``, ``[experiment]`` and optional ``[diagnostic]`` sections.

Example::

    [env]
    name = mining
    horizon = 100

    [labelling]
    kind = mining_false_positive
    epsilons = 0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5

    [train]
    frames = 1000000

    [experiment]
    trackers = perfect_rm, thresholding, independent, persistent
    seeds = 0-7
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from rmu.belief import TRACKERS
from rmu.envs import ENVIRONMENTS
from rmu.labelling import LABELLING_KINDS
from rmu.rl.qlearn import TrainConfig

DEFAULT_EPSILONS = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5)

ENV_KEYS = {
    "mining": {"horizon": int, "rows": int, "cols": int, "gamma": float},
    "traffic": {"horizon": int, "green_mean": float, "red_mean": float, "length": int, "gamma": float},
    "kitchen": {"horizon": int, "p_done": float, "gamma": float},
}
TRAIN_KEYS = {"lr": float, "gamma": float, "explore_eps": float, "frames": int,
              "eval_episodes": int, "seed": int}
SECTIONS = {"env", "labelling", "train", "experiment", "diagnostic"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    env_params: dict[str, Any]
    labelling: str
    epsilons: tuple[float, ...]
    trackers: tuple[str, ...]
    train: TrainConfig
    seeds: tuple[int, ...]
    output: str | None = None
    workers: int = 1
    format: str = "csv"
    diag_episodes: int = 5
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.env!r}")
        if not self.trackers:
            raise ConfigError("at least one tracker is required")
        for t in self.trackers:
            if t not in TRACKERS:
                raise ConfigError(f"unknown tracker {t!r}; choose from {', '.join(TRACKERS)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.epsilons:
            raise ConfigError("at least one epsilon is required")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be non-negative")
        if self.labelling not in LABELLING_KINDS:
            raise ConfigError(f"unknown labelling kind {self.labelling!r}")
        if self.labelling.startswith("mining_") and self.env != "mining":
            raise ConfigError(f"labelling {self.labelling!r} only applies to mining")
        if self.labelling.startswith("bayes_") and self.labelling != "bayes_" + self.env:
            raise ConfigError(f"labelling {self.labelling!r} does not match env {self.env!r}")
        if self.env != "mining" and self.labelling == "ground_truth":
            raise ConfigError("partially observed environments need a bayes_* labelling")
        if self.env != "mining" and "persistent" in self.trackers:
            raise ConfigError("the persistent tracker is only defined for mining")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.diag_episodes < 1:
            raise ConfigError("diagnostic episodes must be at least 1")

    @property
    def master_seed(self) -> int:
        return self.train.seed

    def with_overrides(self, seed=None, out=None, fmt=None, workers=None) -> "ExperimentConfig":
        kw = {}
        if seed is not None:
            kw["train"] = replace(self.train, seed=seed)
        if out is not None:
            kw["output"] = out
        if fmt is not None:
            kw["format"] = fmt
        if workers is not None:
            kw["workers"] = workers
        return replace(self, **kw) if kw else self


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _seeds(text: str) -> tuple[int, ...]:
    """``"0-7"``, ``"1, 3, 5"`` or a mix of both."""
    out: list[int] = []
    for part in text.replace(",", " ").split():
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _typed(section, keys: dict[str, type], where: str) -> dict[str, Any]:
    out = {}
    for k, v in section.items():
        if k not in keys:
            raise ConfigError(f"unknown key {k!r} in [{where}]")
        try:
            out[k] = keys[k](v)
        except ValueError:
            raise ConfigError(f"[{where}] {k} = {v!r} is not a valid {keys[k].__name__}") from None
    return out


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(str(err)) from None
    unknown = set(cp.sections()) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    if not cp.has_section("env") or "name" not in cp["env"]:
        raise ConfigError("[env] name is required")
    env_sec = dict(cp["env"])
    env = env_sec.pop("name")
    if env not in ENV_KEYS:
        raise ConfigError(f"unknown environment {env!r}")
    env_params = _typed(env_sec, ENV_KEYS[env], "env")

    lab = dict(cp["labelling"]) if cp.has_section("labelling") else {}
    kind = lab.pop("kind", "ground_truth" if env == "mining" else "bayes_" + env)
    try:
        if "epsilon" in lab and "epsilons" in lab:
            raise ConfigError("give either epsilon or epsilons, not both")
        if "epsilon" in lab:
            epsilons = (float(lab.pop("epsilon")),)
        elif "epsilons" in lab:
            epsilons = _floats(lab.pop("epsilons"))
        else:
            epsilons = DEFAULT_EPSILONS if kind.startswith("mining_") else (0.0,)
    except ValueError:
        raise ConfigError("epsilon values must be numbers") from None
    if lab:
        raise ConfigError(f"unknown key(s) in [labelling]: {', '.join(sorted(lab))}")

    train_kw = _typed(cp["train"], TRAIN_KEYS, "train") if cp.has_section("train") else {}
    try:
        train = TrainConfig(**train_kw)
    except ValueError as err:
        raise ConfigError(str(err)) from None

    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    trackers = tuple(t for t in exp.pop("trackers", "perfect_rm").replace(",", " ").split())
    try:
        seeds = _seeds(exp.pop("seeds", "0"))
        workers = int(exp.pop("workers", "1"))
    except ValueError:
        raise ConfigError("seeds and workers must be integers") from None
    output = exp.pop("output", None)
    fmt = exp.pop("format", "csv")
    if exp:
        raise ConfigError(f"unknown key(s) in [experiment]: {', '.join(sorted(exp))}")

    diag = dict(cp["diagnostic"]) if cp.has_section("diagnostic") else {}
    try:
        diag_episodes = int(diag.pop("episodes", "5"))
    except ValueError:
        raise ConfigError("[diagnostic] episodes must be an integer") from None
    if diag:
        raise ConfigError(f"unknown key(s) in [diagnostic]: {', '.join(sorted(diag))}")

    return ExperimentConfig(env, env_params, kind, epsilons, trackers, train, seeds,
                            output, workers, fmt, diag_episodes)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config(text)
