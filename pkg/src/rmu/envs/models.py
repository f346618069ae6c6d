"""Tabular dynamics plus ground-truth labelling, the input to every oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Hashable, Iterator, NamedTuple, Sequence

import numpy as np

from rmu.machine import PropSet, RewardMachine

ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """``P[s, a, s']`` dense transition tensor; ``terminal[s]`` marks absorbing states."""

    states: tuple[Hashable, ...]
    actions: tuple[str, ...]
    P: np.ndarray
    terminal: np.ndarray
    gamma: float
    mu: np.ndarray

    def __post_init__(self):
        n, m = len(self.states), len(self.actions)
        if self.P.shape != (n, m, n):
            raise ValueError(f"P has shape {self.P.shape}, expected {(n, m, n)}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if abs(self.mu.sum() - 1.0) > ROW_TOL:
            raise ValueError("initial distribution must sum to 1")
        live = ~self.terminal
        sums = self.P[live].sum(axis=2)
        if np.abs(sums - 1.0).max(initial=0.0) > ROW_TOL:
            raise ValueError("transition rows must sum to 1")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @cached_property
    def state_index(self) -> dict[Hashable, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def successors(self) -> list[list[tuple[int, float]]]:
        """Sparse rows ``successors[s * |A| + a] = [(s', p), ...]`` in state order."""
        rows = []
        for s in range(self.n_states):
            for a in range(self.n_actions):
                nz = np.flatnonzero(self.P[s, a])
                rows.append([(int(j), float(self.P[s, a, j])) for j in nz])
        return rows

    # fully observable: the observation of state s is s itself
    @property
    def observations(self) -> tuple[Hashable, ...]:
        return self.states

    @property
    def obs_index(self) -> np.ndarray:
        return np.arange(self.n_states)

    @property
    def fully_observable(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class TabularPomdp(TabularMdp):
    """Adds ``O[s', a, o]``, the probability of seeing ``o`` after ``a`` lands in ``s'``,
    and ``O0[s, o]`` for the observation emitted at reset."""

    obs_values: tuple[Hashable, ...] = ()
    O: np.ndarray = field(default=None)
    O0: np.ndarray = field(default=None)

    def __post_init__(self):
        super().__post_init__()
        n, m, k = self.n_states, self.n_actions, len(self.obs_values)
        if self.O.shape != (n, m, k) or self.O0.shape != (n, k):
            raise ValueError("observation tensors have the wrong shape")
        if np.abs(self.O.sum(axis=2) - 1.0).max() > ROW_TOL:
            raise ValueError("observation rows must sum to 1")
        if np.abs(self.O0.sum(axis=1) - 1.0).max() > ROW_TOL:
            raise ValueError("initial observation rows must sum to 1")

    @property
    def observations(self) -> tuple[Hashable, ...]:
        return self.obs_values

    @cached_property
    def observation_id(self) -> dict[Hashable, int]:
        return {o: i for i, o in enumerate(self.obs_values)}

    @cached_property
    def obs_index(self) -> np.ndarray:
        """Observation id per state when observations are deterministic, else -1."""
        out = np.full(self.n_states, -1, dtype=np.int64)
        for s in range(self.n_states):
            row = self.O0[s]
            j = int(row.argmax())
            if row[j] == 1.0 and np.all(self.O[s, :, j] == 1.0):
                out[s] = j
        return out

    @property
    def fully_observable(self) -> bool:
        return False


class Transition(NamedTuple):
    s: int
    a: int
    s_next: int
    prob: float
    label: PropSet


@dataclass(frozen=True, eq=False)
class LabelledModel:
    """Dynamics, the hidden ground-truth labelling and the task's reward machine.

    ``labels[s, a, s']`` and ``shaping[s, a, s']`` are only meaningful where
    ``P[s, a, s'] > 0``.
    """

    name: str
    dynamics: TabularMdp
    rm: RewardMachine
    labels: np.ndarray
    shaping: np.ndarray
    horizon: int
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        shape = self.dynamics.P.shape
        if self.labels.shape != shape or self.shaping.shape != shape:
            raise ValueError("labels/shaping must match the transition tensor")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if int(self.labels.max(initial=0)) >> self.rm.n_props:
            raise ValueError("labels use bits outside the machine's alphabet")

    @property
    def alphabet(self):
        return self.rm.alphabet

    @property
    def partially_observable(self) -> bool:
        return isinstance(self.dynamics, TabularPomdp)

    def label(self, s: int, a: int, s_next: int) -> PropSet:
        return int(self.labels[s, a, s_next])

    def reward(self, u: int, s: int, a: int, s_next: int) -> tuple[int, float]:
        """RM step on the ground-truth label plus shaping: ``(u', r)``."""
        u2, r = self.rm.step_index(u, self.label(s, a, s_next))
        return u2, r + float(self.shaping[s, a, s_next])


def enumerate_transitions(model: LabelledModel) -> Iterator[Transition]:
    """Every positive-probability transition of non-terminal states, with its label."""
    dyn = model.dynamics
    n_a = dyn.n_actions
    for s in range(dyn.n_states):
        if dyn.terminal[s]:
            continue
        for a in range(n_a):
            for s2, p in dyn.successors[s * n_a + a]:
                yield Transition(s, a, s2, p, model.label(s, a, s2))


def check_alphabets(model: LabelledModel, rm: RewardMachine) -> None:
    mine = [p.name for p in model.rm.alphabet]
    theirs = [p.name for p in rm.alphabet]
    if mine != theirs:
        raise ValueError(f"alphabet mismatch: model labels {mine}, machine expects {theirs}")


def dense_from_rows(n_states: int, n_actions: int,
                    rows: dict[tuple[int, int], Sequence[tuple[int, float, PropSet, float]]]):
    """Build ``(P, labels, shaping)`` from ``{(s, a): [(s', p, label, shaping), ...]}``."""
    P = np.zeros((n_states, n_actions, n_states))
    L = np.zeros((n_states, n_actions, n_states), dtype=np.int32)
    R = np.zeros((n_states, n_actions, n_states))
    for (s, a), outs in rows.items():
        for s2, p, lab, sh in outs:
            P[s, a, s2] += p
            L[s, a, s2] = lab
            R[s, a, s2] = sh
    return P, L, R
