"""Belief accuracy: every tracker's belief against the exact filter on random rollouts."""
from __future__ import annotations

import numpy as np

from rmu._rng import SplitMix64, derive_seed
from rmu.belief import make_tracker, tv_distance
from rmu.envs import make_env
from rmu.envs.session import UrmSession
from rmu.harness.config import ExperimentConfig
from rmu.harness.io import BeliefDiagnosticRow
from rmu.labelling import HistoryLabeller, make_labelling


def _query_key(model, obs):
    dyn = model.dynamics
    return dyn.state_index[obs] if dyn.fully_observable else dyn.observation_id[obs]


def rollout_tvs(model, trackers, labelling, episodes: int, seed: int) -> dict[str, list[float]]:
    """Per-step TV of each tracker to the exact filter, over every history prefix
    (including the empty one) of ``episodes`` uniformly random episodes."""
    session = UrmSession(model, derive_seed("diagnostic-env", seed))
    policy = SplitMix64(derive_seed("diagnostic-policy", seed))
    reference = make_tracker("exact_filter", model)
    agents = {name: make_tracker(name, model) for name in trackers}
    tvs: dict[str, list[float]] = {name: [] for name in trackers}
    n_a = model.dynamics.n_actions
    for _ in range(episodes):
        obs = session.restart()
        if isinstance(labelling, HistoryLabeller):
            labelling.reset(obs)
        ref = reference.reset(obs)
        beliefs = {name: t.reset(obs) for name, t in agents.items()}
        for name in trackers:
            tvs[name].append(tv_distance(beliefs[name], ref))
        s_key = _query_key(model, obs)
        done = False
        while not done:
            a = policy.randbelow(n_a)
            s_prev = session.s
            obs, _, done, info = session.step(a)
            if isinstance(labelling, HistoryLabeller):
                probs = labelling.step(a, obs)
            else:
                probs = labelling(s_prev, a, info.s)
            ref = reference.update(s_key, a, obs, probs, info)
            for name, t in agents.items():
                beliefs[name] = t.update(s_key, a, obs, probs, info)
                tvs[name].append(tv_distance(beliefs[name], ref))
            s_key = _query_key(model, obs)
    return tvs


def run_belief_diagnostic(cfg: ExperimentConfig) -> list[BeliefDiagnosticRow]:
    """One row per (tracker, seed); ``histories`` counts the prefixes compared."""
    model = make_env(cfg.env, **cfg.env_params)
    rows = []
    for eps in cfg.epsilons[:1]:
        for sd in cfg.seeds:
            lab = make_labelling(cfg.labelling, model, eps)
            tvs = rollout_tvs(model, cfg.trackers, lab, cfg.diag_episodes,
                              derive_seed(cfg.master_seed, "diagnostic", sd))
            for name in cfg.trackers:
                x = np.asarray(tvs[name])
                se = float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
                rows.append(BeliefDiagnosticRow(cfg.env, name, sd, cfg.diag_episodes, len(x),
                                                float(x.mean()), se))
    return sorted(rows, key=BeliefDiagnosticRow.key)
