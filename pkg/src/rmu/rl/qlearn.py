"""Q-learning over (observation, belief) with tabular or linear value functions.

Fully observed models run in the compiled kernel (``rl.kernel``). Partially
observed ones use a plain Python loop over ``UrmSession`` with history-based
labellings; it follows the same protocol but is not bit-compatible with the
kernel's random stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from rmu._rng import EVAL_SALT, SplitMix64, derive_seed
from rmu.belief import TRACKERS, Tracker, make_tracker
from rmu.envs.models import LabelledModel
from rmu.envs.session import UrmSession
from rmu.labelling import GroundTruthLabelling, HistoryLabeller, make_labelling
from rmu.rl import kernel

N_CHECKPOINTS = 20
DISCRETE_TRACKERS = ("perfect_rm", "thresholding")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    gamma: Optional[float] = None  # None: the environment's discount
    explore_eps: float = 0.2
    frames: int = 1_000_000
    eval_episodes: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.explore_eps <= 1.0:
            raise ValueError("explore_eps must lie in [0, 1]")
        if self.frames < 0:
            raise ValueError("frames must be non-negative")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be at least 1")
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


@dataclass
class QTable:
    """``values[s, u, a]`` read at the tracker's single predicted state."""

    values: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.values

    def q(self, s: int, b: np.ndarray) -> np.ndarray:
        return _linear_q(self.values, s, b)


@dataclass
class LinearQ:
    """``Q(s, b, a) = sum_u b(u) * weights[s, u, a]``; terminal nodes add nothing."""

    weights: np.ndarray

    def q(self, s: int, b: np.ndarray) -> np.ndarray:
        return _linear_q(self.weights, s, b)


def _linear_q(w: np.ndarray, s: int, b: np.ndarray) -> np.ndarray:
    n_u, n_a = w.shape[1], w.shape[2]
    out = np.zeros(n_a)
    for a in range(n_a):
        q = 0.0
        for u in range(n_u):
            q += b[u] * w[s, u, a]
        out[a] = q
    return out


@dataclass
class LearningCurve:
    checkpoints: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def final(self) -> tuple[int, float, float]:
        return self.checkpoints[-1]


def greedy_action(q, s: int, b: np.ndarray) -> int:
    """Lowest action id among the maximisers."""
    vals = q.q(s, b)
    best, bv = 0, vals[0]
    for a in range(1, len(vals)):
        if vals[a] > bv:
            best, bv = a, vals[a]
    return best


def mean_se(returns: np.ndarray) -> tuple[float, float]:
    returns = np.asarray(returns, dtype=float)
    if len(returns) < 2 or np.all(returns == returns[0]):
        # identical returns: avoid round-off in std around a rounded mean
        return float(returns.mean()), 0.0
    return float(returns.mean()), float(returns.std(ddof=1) / np.sqrt(len(returns)))


def checkpoint_frames(frames: int, n: int = N_CHECKPOINTS) -> list[int]:
    return sorted({round(frames * i / n) for i in range(1, n + 1)} - {0})


def _wrap(tracker: str, w: np.ndarray):
    return QTable(w) if tracker in DISCRETE_TRACKERS else LinearQ(w)


def _check(model: LabelledModel, tracker: str, labelling):
    if tracker not in TRACKERS:
        raise ValueError(f"unknown tracker {tracker!r}; choose from {TRACKERS}")
    if model.partially_observable:
        if tracker == "persistent" and model.name != "mining":
            raise ValueError("the persistent tracker needs propositions that are fixed per (state, action)")
        if tracker in ("thresholding", "independent", "persistent") and not isinstance(labelling, HistoryLabeller):
            raise ValueError(f"tracker {tracker!r} on a partially observed model needs a history labelling")


def default_labelling(model: LabelledModel):
    if not model.partially_observable:
        return GroundTruthLabelling(model)
    return make_labelling("bayes_" + model.name, model)


def _gamma(model: LabelledModel, cfg: TrainConfig) -> float:
    return float(model.dynamics.gamma if cfg.gamma is None else cfg.gamma)


def q_learning(model: LabelledModel, tracker: str, cfg: TrainConfig, labelling=None,
               backend: str | None = None):
    """Epsilon-greedy TD(0); returns ``(QTable or LinearQ, LearningCurve)``.

    Greedy evaluation runs at every 5% of ``cfg.frames`` on a separate random
    stream. The TD target does not bootstrap when the episode ended, including
    on horizon truncation.
    """
    labelling = default_labelling(model) if labelling is None else labelling
    _check(model, tracker, labelling)
    cps = checkpoint_frames(cfg.frames)
    eval_seed = cfg.seed ^ EVAL_SALT
    if not model.partially_observable:
        from rmu.belief import persistent_props_for
        arrays = kernel.pack_model(model, labelling, persistent_props_for(model), _gamma(model, cfg))
        w, raw = kernel.train(arrays, tracker, cfg.lr, cfg.explore_eps, cfg.frames,
                              cfg.eval_episodes, cfg.seed, eval_seed, cps, backend)
    else:
        w, raw = _train_generic(model, tracker, cfg, labelling, cps, eval_seed)
    curve = LearningCurve([(int(f), *mean_se(r)) for f, r in raw])
    return _wrap(tracker, w), curve


def evaluate_policy(model: LabelledModel, tracker: str, q, episodes: int, seed: int,
                    labelling=None, gamma: float | None = None,
                    backend: str | None = None) -> tuple[float, float]:
    """Mean discounted return (all rewards, shaping included) and its standard error."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    labelling = default_labelling(model) if labelling is None else labelling
    _check(model, tracker, labelling)
    g = float(model.dynamics.gamma if gamma is None else gamma)
    if not model.partially_observable:
        from rmu.belief import persistent_props_for
        arrays = kernel.pack_model(model, labelling, persistent_props_for(model), g)
        return mean_se(kernel.evaluate(arrays, q.weights, tracker, episodes, seed, backend))
    return mean_se(_evaluate_generic(model, tracker, q.weights, episodes, seed, labelling, g))


# -- partially observed models --------------------------------------------------

def _obs_id(model: LabelledModel, obs) -> int:
    return model.dynamics.observation_id[obs]


class _Agent:
    """Tracker plus labeller for one episode of a partially observed model."""

    def __init__(self, model: LabelledModel, tracker: str, labelling):
        self.model = model
        self.tracker: Tracker = make_tracker(tracker, model)
        self.labelling = labelling

    def reset(self, obs) -> np.ndarray:
        if isinstance(self.labelling, HistoryLabeller):
            self.labelling.reset(obs)
        return self.tracker.reset(obs)

    def update(self, o_id: int, a: int, obs, info) -> np.ndarray:
        if isinstance(self.labelling, HistoryLabeller):
            probs = self.labelling.step(a, obs)
        else:
            probs = None
        return self.tracker.update(o_id, a, obs, probs, info)


def _evaluate_generic(model, tracker, w, episodes, seed, labelling, gamma):
    session = UrmSession(model, seed)
    agent = _Agent(model, tracker, labelling)
    n_u = model.rm.n_states
    returns = np.zeros(episodes)
    q = LinearQ(w)
    for ep in range(episodes):
        obs = session.restart()
        b = agent.reset(obs)
        s = _obs_id(model, obs)
        G, disc = 0.0, 1.0
        while True:
            a = greedy_action(q, s, b)
            obs, r, done, info = session.step(a)
            G += disc * r
            disc *= gamma
            if done:
                break
            b = agent.update(s, a, obs, info)
            s = _obs_id(model, obs)
        returns[ep] = G
    return returns


def _train_generic(model, tracker, cfg, labelling, cps, eval_seed):
    dyn, rm = model.dynamics, model.rm
    n_u, n_a = rm.n_states, dyn.n_actions
    gamma = _gamma(model, cfg)
    w = np.zeros((len(dyn.observations), n_u, n_a))
    q = LinearQ(w)
    session = UrmSession(model, cfg.seed)
    rng = SplitMix64(derive_seed("agent", cfg.seed))
    agent = _Agent(model, tracker, labelling)
    frame, next_cp, curve = 0, 0, []
    while frame < cfg.frames:
        obs = session.restart()
        b = agent.reset(obs)
        s = _obs_id(model, obs)
        while True:
            if rng.random() < cfg.explore_eps:
                a = int(rng.random() * n_a)
            else:
                a = greedy_action(q, s, b)
            obs, r, done, info = session.step(a)
            b2 = agent.update(s, a, obs, info)
            s2 = _obs_id(model, obs)
            target = r if done else r + gamma * max(q.q(s2, b2))
            qsa = 0.0
            for u in range(n_u):
                qsa += b[u] * w[s, u, a]
            step = cfg.lr * (target - qsa)
            for u in range(n_u):
                if b[u] != 0.0:
                    w[s, u, a] += step * b[u]
            frame += 1
            while next_cp < len(cps) and cps[next_cp] == frame:
                curve.append((frame, _evaluate_generic(model, tracker, w, cfg.eval_episodes,
                                                       eval_seed, labelling, gamma)))
                next_cp += 1
            if frame >= cfg.frames or done:
                break
            s, b = s2, b2
    return w, curve
