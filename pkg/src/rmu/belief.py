"""Beliefs over reward machine states and the trackers that maintain them.

A belief is a float vector over all machine nodes (non-terminal states, then
terminals). Terminal entries are absorbing: trackers pass them through.

Floating point order matters here: the compiled training kernel repeats the
arithmetic of ``independent_update`` and ``persistent_update`` step for step,
so any change to the loops below must be mirrored in ``rl/_kernel.pyx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterator, Sequence

import numpy as np

from rmu.envs.models import LabelledModel
from rmu.machine import PropSet, RewardMachine, TerminalStepError

BELIEF_TOL = 1e-9
MAX_LATENTS = 20
TRACKERS = ("perfect_rm", "thresholding", "independent", "persistent", "exact_filter")


class FilterError(RuntimeError):
    """The observed history has probability zero under the filter's model."""


class LatentBudgetError(RuntimeError):
    pass


class EnumerationBudgetError(RuntimeError):
    pass


def point_mass(rm: RewardMachine, u: int) -> np.ndarray:
    b = np.zeros(rm.n_nodes)
    b[u] = 1.0
    return b


def initial_belief(rm: RewardMachine) -> np.ndarray:
    return point_mass(rm, rm.u0)


def tv_distance(b1: np.ndarray, b2: np.ndarray) -> float:
    b1, b2 = np.asarray(b1, dtype=float), np.asarray(b2, dtype=float)
    if b1.shape != b2.shape:
        raise ValueError(f"belief length mismatch: {b1.shape} vs {b2.shape}")
    return 0.5 * float(np.abs(b1 - b2).sum())


# -- thresholding -------------------------------------------------------------

def threshold_assignment(probs: Sequence[float]) -> PropSet:
    """Round every proposition; exactly 0.5 counts as true."""
    bits = 0
    for i, p in enumerate(probs):
        if p >= 0.5:
            bits |= 1 << i
    return bits


def thresholding_update(u: int, probs: Sequence[float], rm: RewardMachine) -> tuple[int, np.ndarray]:
    if rm.is_terminal(u):
        raise TerminalStepError("thresholding tracker already predicted a terminal")
    u2, _ = rm.step_index(u, threshold_assignment(probs))
    return u2, point_mass(rm, u2)


# -- independent belief updating ---------------------------------------------

def _split_props(probs: Sequence[float]) -> tuple[PropSet, list[int]]:
    """Bits fixed at 1, and indices of propositions strictly between 0 and 1."""
    fixed, free = 0, []
    for i, p in enumerate(probs):
        if p >= 1.0:
            fixed |= 1 << i
        elif p > 0.0:
            free.append(i)
    return fixed, free


def independent_update(b: np.ndarray, probs: Sequence[float], rm: RewardMachine) -> np.ndarray:
    """Propagate ``b`` through the machine, treating propositions as independent."""
    nxt = rm.tables[0]
    n = rm.n_states
    fixed, free = _split_props(probs)
    out = np.zeros(rm.n_nodes)
    out[n:] = b[n:]
    for k in range(1 << len(free)):
        sigma, w = fixed, 1.0
        for j, i in enumerate(free):
            if k >> j & 1:
                sigma |= 1 << i
                w *= probs[i]
            else:
                w *= 1.0 - probs[i]
        for u in range(n):
            if b[u] != 0.0:
                out[nxt[u, sigma]] += b[u] * w
    return out


# -- belief updating with persistent latents ----------------------------------

@dataclass
class PersistentState:
    """Joint distribution over ``(machine node, latent values)``.

    A latent is one persistent proposition at one query key. Its probability is
    fixed by the first query of that key (``memo``); later queries reuse it, so
    the same latent can never be counted as fresh evidence twice. Each config
    is ``[node, known_mask, value_bits, weight]`` over latent ids.
    """

    rm: RewardMachine
    persistent_mask: PropSet
    max_latents: int = MAX_LATENTS
    memo: dict[Hashable, list[float]] = field(default_factory=dict)
    latent_id: dict[tuple[Hashable, int], int] = field(default_factory=dict)
    latent_prop: list[int] = field(default_factory=list)
    configs: list[list] = field(default_factory=list)

    def __post_init__(self):
        if not self.configs:
            self.configs = [[self.rm.u0, 0, 0, 1.0]]

    def belief(self) -> np.ndarray:
        out = np.zeros(self.rm.n_nodes)
        for u, _, _, w in self.configs:
            out[u] += w
        return out


def persistent_init(rm: RewardMachine, persistent_props: Sequence[str] = ("gold",),
                    max_latents: int = MAX_LATENTS) -> PersistentState:
    mask = 0
    for name in persistent_props:
        mask |= 1 << rm.prop_index(name)
    return PersistentState(rm, mask, max_latents)


def persistent_update(state: PersistentState, key: Hashable, probs: Sequence[float],
                      rm: RewardMachine | None = None) -> tuple[PersistentState, np.ndarray]:
    """Condition on one step queried at ``key``; mutates and returns ``state``.

    Non-persistent propositions are branched independently each step (exactly
    when their probabilities are 0/1). Latents that can no longer influence the
    machine from a config's node are marginalised out, which keeps the number
    of configs small.
    """
    rm = state.rm if rm is None else rm
    nxt = rm.tables[0]
    relevant = rm.relevant_props
    n, n_props = rm.n_states, rm.n_props
    pmask = state.persistent_mask

    if key not in state.memo:
        state.memo[key] = [float(probs[i]) if pmask >> i & 1 else 0.0 for i in range(n_props)]
        for i in range(n_props):
            p = state.memo[key][i]
            if pmask >> i & 1 and 0.0 < p < 1.0:
                if len(state.latent_prop) >= state.max_latents:
                    raise LatentBudgetError(f"more than {state.max_latents} uncertain latents")
                state.latent_id[key, i] = len(state.latent_prop)
                state.latent_prop.append(i)
    memo = state.memo[key]

    # per-step part: fixed bits and free non-persistent props
    fixed, free = 0, []
    lat: list[tuple[int, int]] = []  # (prop index, latent id)
    for i in range(n_props):
        if pmask >> i & 1:
            p = memo[i]
            if p >= 1.0:
                fixed |= 1 << i
            elif p > 0.0:
                lat.append((i, state.latent_id[key, i]))
        else:
            p = probs[i]
            if p >= 1.0:
                fixed |= 1 << i
            elif p > 0.0:
                free.append(i)

    out: list[list] = []
    index: dict[tuple[int, int, int], int] = {}

    def emit(u, known, bits, w):
        if u >= n:
            known = bits = 0
        else:
            for lid in range(len(state.latent_prop)):
                if known >> lid & 1 and not relevant[u] >> state.latent_prop[lid] & 1:
                    known &= ~(1 << lid)
                    bits &= ~(1 << lid)
        j = index.get((u, known, bits))
        if j is None:
            index[u, known, bits] = len(out)
            out.append([u, known, bits, w])
        else:
            out[j][3] += w

    for u, known, bits, w in state.configs:
        if u >= n:
            emit(u, known, bits, w)
            continue
        # latents this config must branch on
        branch = [(i, lid) for i, lid in lat if not known >> lid & 1 and relevant[u] >> i & 1]
        base = fixed
        for i, lid in lat:
            if known >> lid & 1 and bits >> lid & 1:
                base |= 1 << i
        for kl in range(1 << len(branch)):
            k2, b2, s1, w1 = known, bits, base, w
            for j, (i, lid) in enumerate(branch):
                k2 |= 1 << lid
                if kl >> j & 1:
                    b2 |= 1 << lid
                    s1 |= 1 << i
                    w1 *= memo[i]
                else:
                    w1 *= 1.0 - memo[i]
            for kf in range(1 << len(free)):
                sigma, w2 = s1, w1
                for j, i in enumerate(free):
                    if kf >> j & 1:
                        sigma |= 1 << i
                        w2 *= probs[i]
                    else:
                        w2 *= 1.0 - probs[i]
                emit(int(nxt[u, sigma]), k2, b2, w2)
    state.configs = out
    return state, state.belief()


# -- exact Bayes filter over the hidden product state -------------------------

@dataclass
class FilterState:
    model: LabelledModel
    joint: dict[tuple[int, int], float]

    def belief(self) -> np.ndarray:
        out = np.zeros(self.model.rm.n_nodes)
        for (_, u), p in self.joint.items():
            out[u] += p
        return out


def _obs_id(model: LabelledModel, o) -> int:
    dyn = model.dynamics
    table = dyn.state_index if dyn.fully_observable else dyn.observation_id
    try:
        return table[o]
    except KeyError:
        raise FilterError(f"observation {o!r} is not in the model") from None


def _obs_prob(model: LabelledModel, s2: int, a: int | None, oid: int) -> float:
    dyn = model.dynamics
    if dyn.fully_observable:
        return 1.0 if s2 == oid else 0.0
    return float(dyn.O0[s2, oid] if a is None else dyn.O[s2, a, oid])


def _normalise(joint: dict, what: str) -> dict:
    z = sum(joint.values())
    if z <= 0.0:
        raise FilterError(f"{what} has zero probability under the model")
    return {k: v / z for k, v in joint.items()}


def exact_filter_init(model: LabelledModel, obs=None) -> FilterState:
    """Joint ``mu(s) * 1[u = u0]``, conditioned on the first observation if given."""
    dyn, u0 = model.dynamics, model.rm.u0
    joint = {}
    oid = None if obs is None else _obs_id(model, obs)
    for s in np.flatnonzero(dyn.mu):
        w = float(dyn.mu[s])
        if oid is not None:
            w *= _obs_prob(model, int(s), None, oid)
        if w > 0.0:
            joint[int(s), u0] = w
    return FilterState(model, _normalise(joint, "initial observation"))


def exact_filter_update(state: FilterState, a: int, obs, model: LabelledModel | None = None):
    """One forward-filter step on actions and observations (rewards are ignored).

    Joint states that are already terminal stay where they are.
    """
    model = state.model if model is None else model
    dyn, rm = model.dynamics, model.rm
    oid = _obs_id(model, obs)
    n_a = dyn.n_actions
    new: dict[tuple[int, int], float] = {}
    for (s, u), p in state.joint.items():
        if rm.is_terminal(u) or dyn.terminal[s]:
            w = p * _obs_prob(model, s, a, oid)
            if w > 0.0:
                new[s, u] = new.get((s, u), 0.0) + w
            continue
        for s2, ps in dyn.successors[s * n_a + a]:
            lik = _obs_prob(model, s2, a, oid)
            if lik == 0.0:
                continue
            u2, _ = rm.step_index(u, model.label(s, a, s2))
            new[s2, u2] = new.get((s2, u2), 0.0) + p * ps * lik
    state = FilterState(model, _normalise(new, "observation"))
    return state, state.belief()


# -- brute-force oracle ---------------------------------------------------------

def _extend_paths(model: LabelledModel, paths, a: int, oid: int):
    """Extend every explicit hidden path by one step consistent with ``oid``."""
    dyn, rm = model.dynamics, model.rm
    out = []
    for w, s, u in paths:
        if u >= rm.n_states or dyn.terminal[s]:
            lik = _obs_prob(model, s, a, oid)
            if lik > 0.0:
                out.append((w * lik, s, u))
            continue
        for s2 in range(dyn.n_states):
            ps = float(dyn.P[s, a, s2])
            if ps == 0.0:
                continue
            lik = _obs_prob(model, s2, a, oid)
            if lik == 0.0:
                continue
            # step the machine through the label table directly
            u2 = int(rm.tables[0][u, int(model.labels[s, a, s2])])
            out.append((w * ps * lik, s2, u2))
    return out


def _initial_paths(model: LabelledModel, oid: int):
    dyn = model.dynamics
    return [(float(dyn.mu[s]) * _obs_prob(model, s, None, oid), s, model.rm.u0)
            for s in range(dyn.n_states) if dyn.mu[s] > 0.0 and _obs_prob(model, s, None, oid) > 0.0]


def _paths_belief(model: LabelledModel, paths) -> np.ndarray:
    out = np.zeros(model.rm.n_nodes)
    z = sum(w for w, _, _ in paths)
    if z <= 0.0:
        raise FilterError("history has zero probability under the model")
    for w, _, u in paths:
        out[u] += w / z
    return out


def brute_force_belief(model: LabelledModel, obs0, steps: Sequence[tuple[int, Hashable]] = (),
                       budget: int = 1_000_000) -> np.ndarray:
    """Belief over machine nodes by enumerating every hidden trajectory.

    ``steps`` is a sequence of ``(action, observation)`` pairs after ``obs0``.
    """
    paths = _initial_paths(model, _obs_id(model, obs0))
    for a, o in steps:
        paths = _extend_paths(model, paths, a, _obs_id(model, o))
        if len(paths) > budget:
            raise EnumerationBudgetError(f"more than {budget} hidden trajectories")
    return _paths_belief(model, paths)


def _possible_obs(model: LabelledModel, paths, a: int | None) -> list[int]:
    dyn = model.dynamics
    n_obs = len(dyn.observations)
    seen = set()
    for _, s, u in paths:
        if a is None or u >= model.rm.n_states or dyn.terminal[s]:
            targets = [s]
        else:
            targets = [s2 for s2 in range(dyn.n_states) if dyn.P[s, a, s2] > 0.0]
        for s2 in targets:
            if dyn.fully_observable:
                seen.add(s2)
            else:
                row = dyn.O0[s2] if a is None else dyn.O[s2, a]
                seen.update(int(j) for j in np.flatnonzero(row))
    return sorted(j for j in seen if j < n_obs)


def enumerate_histories(model: LabelledModel, depth: int) -> Iterator[tuple[tuple, np.ndarray]]:
    """Every observable history up to ``depth`` actions with its brute-force belief.

    Yields ``((obs0, (a1, o1), ...), belief)``. Histories stop growing once
    every consistent trajectory has terminated, as a session would.
    """
    dyn = model.dynamics
    values = dyn.observations

    def done(paths, t):
        return all(u >= model.rm.n_states or dyn.terminal[s] for _, s, u in paths) or t >= model.horizon

    def walk(history, paths, t):
        yield history, _paths_belief(model, paths)
        if t >= depth or done(paths, t):
            return
        for a in range(dyn.n_actions):
            for oid in _possible_obs(model, paths, a):
                ext = _extend_paths(model, paths, a, oid)
                if ext:
                    yield from walk(history + ((a, values[oid]),), ext, t + 1)

    for oid in _possible_obs(model, [(1.0, int(s), model.rm.u0) for s in np.flatnonzero(dyn.mu)], None):
        paths = _initial_paths(model, oid)
        if paths:
            yield from walk((values[oid],), paths, 0)


# -- tracker objects used by the training loops ---------------------------------

class Tracker:
    """Common interface: ``reset(obs)`` then ``update(key, a, obs, probs, info)``.

    ``key`` identifies what the agent queried (the state for fully observed
    models, the observation otherwise). ``info`` carries the hidden truth and
    is only read by ``PerfectRmTracker``.
    """

    name = "?"
    discrete = False

    def __init__(self, rm: RewardMachine):
        self.rm = rm

    def reset(self, obs=None) -> np.ndarray:
        raise NotImplementedError

    def update(self, key, a, obs, probs, info=None) -> np.ndarray:
        raise NotImplementedError


class PerfectRmTracker(Tracker):
    name, discrete = "perfect_rm", True

    def reset(self, obs=None):
        self.u = self.rm.u0
        return point_mass(self.rm, self.u)

    def update(self, key, a, obs, probs, info=None):
        self.u = info.u
        return point_mass(self.rm, self.u)


class ThresholdingTracker(Tracker):
    name, discrete = "thresholding", True

    def reset(self, obs=None):
        self.u = self.rm.u0
        return point_mass(self.rm, self.u)

    def update(self, key, a, obs, probs, info=None):
        # a predicted terminal is absorbing, like terminal mass elsewhere
        if self.rm.is_terminal(self.u):
            return point_mass(self.rm, self.u)
        self.u, b = thresholding_update(self.u, probs, self.rm)
        return b


class IndependentTracker(Tracker):
    name = "independent"

    def reset(self, obs=None):
        self.b = initial_belief(self.rm)
        return self.b

    def update(self, key, a, obs, probs, info=None):
        self.b = independent_update(self.b, probs, self.rm)
        return self.b


class PersistentTracker(Tracker):
    name = "persistent"

    def __init__(self, rm: RewardMachine, persistent_props: Sequence[str] = ("gold",),
                 max_latents: int = MAX_LATENTS):
        super().__init__(rm)
        self.persistent_props = tuple(persistent_props)
        self.max_latents = max_latents

    def reset(self, obs=None):
        self.state = persistent_init(self.rm, self.persistent_props, self.max_latents)
        return self.state.belief()

    def update(self, key, a, obs, probs, info=None):
        _, b = persistent_update(self.state, (key, a), probs)
        return b


class ExactFilterTracker(Tracker):
    name = "exact_filter"

    def __init__(self, model: LabelledModel):
        super().__init__(model.rm)
        self.model = model

    def reset(self, obs=None):
        self.state = exact_filter_init(self.model, obs)
        return self.state.belief()

    def update(self, key, a, obs, probs, info=None):
        self.state, b = exact_filter_update(self.state, a, obs)
        return b


def persistent_props_for(model: LabelledModel) -> tuple[str, ...]:
    """Propositions that are fixed functions of (state, action) in each environment."""
    return {"mining": ("gold",)}.get(model.name, ())


def make_tracker(name: str, model: LabelledModel) -> Tracker:
    if name == "perfect_rm":
        return PerfectRmTracker(model.rm)
    if name == "thresholding":
        return ThresholdingTracker(model.rm)
    if name == "independent":
        return IndependentTracker(model.rm)
    if name == "persistent":
        return PersistentTracker(model.rm, persistent_props_for(model))
    if name == "exact_filter":
        return ExactFilterTracker(model)
    raise ValueError(f"unknown tracker {name!r}; choose from {TRACKERS}")
