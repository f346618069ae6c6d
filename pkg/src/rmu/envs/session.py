"""Simulation of a model with the reward machine state hidden from the agent."""
from __future__ import annotations

from typing import Hashable, NamedTuple

import numpy as np

from rmu._rng import SplitMix64
from rmu.envs.models import LabelledModel
from rmu.machine import PropSet


class OracleInfo(NamedTuple):
    """Hidden quantities for diagnostics and oracles. Agents must not read these."""

    s: int
    u: int
    sigma: PropSet


class SessionFinished(RuntimeError):
    pass


class UrmSession:
    """One owner, one RNG. ``restart`` begins a new episode on the same stream."""

    def __init__(self, model: LabelledModel, seed: int):
        self.model = model
        self.rng = SplitMix64(seed)
        dyn = model.dynamics
        support = np.flatnonzero(dyn.mu)
        self._mu_states = support.tolist()
        self._mu_cum = np.cumsum(dyn.mu[support]).tolist()
        self._cum = [None] * (dyn.n_states * dyn.n_actions)
        self.s = -1
        self.u = -1
        self.t = 0
        self.done = True

    def _observe(self, s: int, a: int | None) -> Hashable:
        dyn = self.model.dynamics
        if dyn.fully_observable:
            return dyn.states[s]
        j = int(dyn.obs_index[s])
        if j < 0:
            row = dyn.O0[s] if a is None else dyn.O[s, a]
            j = self.rng.choice_cum(np.cumsum(row).tolist())
        return dyn.observations[j]

    def restart(self) -> Hashable:
        i = 0 if len(self._mu_states) == 1 else self.rng.choice_cum(self._mu_cum)
        self.s = self._mu_states[i]
        self.u = self.model.rm.u0
        self.t = 0
        self.done = False
        return self._observe(self.s, None)

    def step(self, a: int):
        if self.done:
            raise SessionFinished("episode is over; call restart()")
        model, dyn = self.model, self.model.dynamics
        row = self.s * dyn.n_actions + a
        succ = dyn.successors[row]
        if len(succ) == 1:
            s2 = succ[0][0]
        else:
            if self._cum[row] is None:
                acc, cum = 0.0, []
                for _, p in succ:
                    acc += p
                    cum.append(acc)
                self._cum[row] = cum
            s2 = succ[self.rng.choice_cum(self._cum[row])][0]
        sigma = model.label(self.s, a, s2)
        u2, r = model.rm.step_index(self.u, sigma)
        r += float(model.shaping[self.s, a, s2])
        self.s, self.u = s2, u2
        self.t += 1
        self.done = bool(dyn.terminal[s2]) or model.rm.is_terminal(u2) or self.t >= model.horizon
        obs = self._observe(s2, a)
        return obs, r, self.done, OracleInfo(s2, u2, sigma)


def session_reset(model: LabelledModel, seed: int):
    session = UrmSession(model, seed)
    return session, session.restart()


def session_step(session: UrmSession, a: int):
    return session.step(a)
