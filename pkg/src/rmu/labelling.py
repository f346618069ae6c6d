"""Approximate labelling functions: per-proposition probabilities seen by agents.

Two shapes exist. Over fully observed transitions a labelling is a callable
``(s, a, s_next) -> probs``. Over observation histories it is a small stateful
object fed ``reset(o0)`` and then ``step(a, o)``, each step returning probs.
"""
from __future__ import annotations

from typing import Hashable, Sequence

import numpy as np

from rmu.envs.models import LabelledModel
from rmu.envs.traffic import PHASES, UNKNOWN, phase_matrix

UNIFORM_GRID = np.array([
    [0.21, 0.15, 0.12, 0.87],
    [0.14, 0.21, 0.20, 0.90],
    [0.26, 0.23, 0.15, 0.84],
    [0.00, 0.17, 0.10, 0.84],
])
FALSE_POSITIVE_GRID = np.array([
    [0.0, 0.0, 0.0, 1.0],
    [0.6, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
])
TRUTH_GRID = np.array([[0.0, 0.0, 0.0, 1.0]] * 4)

NOISE_GRIDS = {"uniform": UNIFORM_GRID, "false_positive": FALSE_POSITIVE_GRID}

LABELLING_KINDS = ("ground_truth", "mining_uniform", "mining_false_positive",
                   "bayes_traffic", "bayes_kitchen")


class WrongEnvironmentError(ValueError):
    pass


class GroundTruthLabelling:
    """The model's own labelling as 0/1 probabilities; only sensible when the
    transition itself is observed."""

    def __init__(self, model: LabelledModel):
        if model.partially_observable:
            raise WrongEnvironmentError("ground-truth labels need fully observed transitions")
        self.model = model
        self.props = tuple(p.name for p in model.rm.alphabet)

    def __call__(self, s: int, a: int, s_next: int) -> np.ndarray:
        sigma = self.model.label(s, a, s_next)
        return np.array([float(sigma >> i & 1) for i in range(len(self.props))])


class MiningNoisyGold:
    """Gold probabilities interpolated between the truth (epsilon=0) and a noisy
    grid (epsilon=1), clamped to [0, 1]. ``home`` stays exact."""

    props = ("gold", "home")

    def __init__(self, kind: str, epsilon: float, depot: int = 12, cols: int = 4):
        if kind not in NOISE_GRIDS:
            raise ValueError(f"unknown noise kind {kind!r}")
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        self.kind = kind
        self.epsilon = float(epsilon)
        self.depot = depot
        self.cols = cols
        self.grid = self.gold_grid(kind, epsilon)

    @staticmethod
    def gold_grid(kind: str, epsilon: float) -> np.ndarray:
        noisy = NOISE_GRIDS[kind]
        return np.clip(TRUTH_GRID + epsilon * (noisy - TRUTH_GRID), 0.0, 1.0)

    def p_gold(self, s: int) -> float:
        return float(self.grid[s // self.cols, s % self.cols])

    def __call__(self, s: int, a: int, s_next: int) -> np.ndarray:
        from rmu.envs.mining import DIG
        gold = self.p_gold(s) if a == DIG else 0.0
        return np.array([gold, 1.0 if s_next == self.depot else 0.0])


def mining_noisy_gold(kind: str, epsilon: float) -> MiningNoisyGold:
    return MiningNoisyGold(kind, epsilon)


def _check_env(model: LabelledModel, name: str):
    if model.name != name:
        raise WrongEnvironmentError(f"labelling built for {name!r}, got {model.name!r}")


# -- history-based labellers -------------------------------------------------

def bayes_optimal_traffic(observations: Sequence[Hashable], model: LabelledModel) -> np.ndarray:
    """Probabilities of ``(pkg, home, red_cross)`` for the last step of ``observations``.

    Inside the intersection the light is hidden. If the last sighting pins the
    current phase down (green one step ago cannot be red, yellow one step ago
    must be red) the answer is 0 or 1; otherwise the stationary red share.
    """
    _check_env(model, "traffic")
    p = model.params
    length, (lo, hi) = p["length"], p["intersection"]
    o = observations[-1]
    probs = np.array([float(o.pos == length - 1), float(o.pos == 0), 0.0])
    if not lo <= o.pos <= hi:
        return probs
    red = p["red_mean"] / (p["green_mean"] + p["red_mean"] + 1.0)
    for age, past in enumerate(reversed(observations)):
        if past.light != UNKNOWN:
            dist = np.zeros(3)
            dist[PHASES.index(past.light)] = 1.0
            dist = dist @ np.linalg.matrix_power(phase_matrix(p["green_mean"], p["red_mean"]), age)
            if dist[2] == 0.0 or dist[2] == 1.0:
                red = dist[2]
            break
    probs[2] = red
    return probs


def bayes_optimal_kitchen(observations: Sequence[Hashable], actions: Sequence[int],
                          model: LabelledModel) -> np.ndarray:
    """Probabilities of ``(chore_1, ..., chore_n, port)`` for the last step.

    ``actions[i]`` leads from ``observations[i]`` to ``observations[i + 1]``.
    A chore never seen keeps its prior; a seen chore keeps its last seen value;
    a chore the agent has done stays done.
    """
    from rmu.envs.kitchen import CHORE
    _check_env(model, "kitchen")
    layout = model.params["layout"]
    n = len(layout.chores)
    known: list[float | None] = [None] * n
    for i, o in enumerate(observations):
        if i > 0 and actions[i - 1] == CHORE and observations[i - 1].pos in layout.chores:
            known[layout.chores.index(observations[i - 1].pos)] = 1.0
        for k, flag in enumerate(o.chores):
            if flag is not None:
                known[k] = float(flag)
    prior = model.params["p_done"]
    probs = [prior if v is None else v for v in known]
    probs.append(float(observations[-1].pos == layout.port))
    return np.array(probs)


class HistoryLabeller:
    """Keeps the observation/action history and evaluates a history labelling."""

    def __init__(self, model: LabelledModel, kind: str):
        if kind == "bayes_traffic":
            _check_env(model, "traffic")
        elif kind == "bayes_kitchen":
            _check_env(model, "kitchen")
        else:
            raise ValueError(f"{kind!r} is not a history labelling")
        self.model = model
        self.kind = kind
        self.props = tuple(p.name for p in model.rm.alphabet)
        self.observations: list = []
        self.actions: list[int] = []

    def reset(self, obs) -> None:
        self.observations = [obs]
        self.actions = []

    def step(self, a: int, obs) -> np.ndarray:
        self.actions.append(a)
        self.observations.append(obs)
        if self.kind == "bayes_traffic":
            return bayes_optimal_traffic(self.observations, self.model)
        return bayes_optimal_kitchen(self.observations, self.actions, self.model)


def make_labelling(kind: str, model: LabelledModel, epsilon: float = 0.0):
    """Build the labelling named by a config ``labelling.kind``."""
    if kind == "ground_truth":
        return GroundTruthLabelling(model)
    if kind in ("mining_uniform", "mining_false_positive"):
        _check_env(model, "mining")
        if (model.params["rows"], model.params["cols"]) != (4, 4):
            raise WrongEnvironmentError("the noisy gold grids are 4x4")
        return MiningNoisyGold(kind.removeprefix("mining_"), epsilon,
                               depot=model.params["depot"], cols=model.params["cols"])
    if kind in ("bayes_traffic", "bayes_kitchen"):
        return HistoryLabeller(model, kind)
    raise ValueError(f"unknown labelling kind {kind!r}; choose from {LABELLING_KINDS}")
