"""Finite MDPs with rewards attached, and synchronous value iteration."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RewardedMdp:
    """Padded sparse transitions: ``succ[n, a, k]`` is a successor index or -1.

    A successor of -1 is an absorbing terminal worth 0 (the episode ended on
    that transition). ``reward[n, a, k]`` is paid on the transition itself.
    Padding slots carry probability 0.
    """

    states: tuple[Hashable, ...]
    succ: np.ndarray
    prob: np.ndarray
    reward: np.ndarray
    terminal: np.ndarray
    gamma: float
    mu: np.ndarray
    actions: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.succ.shape == self.prob.shape == self.reward.shape):
            raise ValueError("succ/prob/reward must share a shape")
        if not np.all(np.isfinite(self.reward)):
            raise ValueError("rewards must be finite")

    @property
    def n_states(self) -> int:
        return self.succ.shape[0]

    @property
    def n_actions(self) -> int:
        return self.succ.shape[1]

    def row_sums(self) -> np.ndarray:
        return self.prob.sum(axis=2)


@dataclass
class ValueSolution:
    V: np.ndarray
    Q: np.ndarray
    residual: float
    residuals: list[float] = field(default_factory=list)

    def policy(self) -> np.ndarray:
        """Greedy action per state; ties go to the lowest action id."""
        return np.argmax(self.Q, axis=1)


def bellman_q(mdp: RewardedMdp, V: np.ndarray) -> np.ndarray:
    ext = np.append(V, 0.0)
    Q = (mdp.prob * (mdp.reward + mdp.gamma * ext[mdp.succ])).sum(axis=2)
    Q[mdp.terminal] = 0.0
    return Q


def value_iteration(mdp: RewardedMdp, tolerance: float = DEFAULT_TOL,
                    max_iter: int = 1_000_000) -> ValueSolution:
    """Synchronous sweeps until the sup-norm change is at most ``tolerance``."""
    if not 0.0 < mdp.gamma < 1.0:
        raise ValueError("value iteration needs gamma < 1")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    V = np.zeros(mdp.n_states)
    residuals = []
    for _ in range(max_iter):
        Q = bellman_q(mdp, V)
        V2 = Q.max(axis=1)
        res = float(np.abs(V2 - V).max(initial=0.0))
        residuals.append(res)
        V = V2
        if res <= tolerance:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    return ValueSolution(V, bellman_q(mdp, V), residuals[-1], residuals)


def initial_value(mdp: RewardedMdp, sol: ValueSolution) -> float:
    return float(mdp.mu @ sol.V)
