"""The reward machine product MDP over ``S x U``."""
from __future__ import annotations

import numpy as np

from rmu.envs.models import LabelledModel, check_alphabets
from rmu.machine import RewardMachine
from rmu.rl.vi import RewardedMdp


def cross_product(model: LabelledModel, rm: RewardMachine | None = None) -> RewardedMdp:
    """Product states are ``(s, u)`` for non-terminal ``u``, indexed ``s * |U| + u``.

    Entering an environment terminal or a machine terminal ends the episode,
    so such successors are encoded as -1. Rewards are the machine's reward on
    the true label plus the environment's shaping.
    """
    rm = model.rm if rm is None else rm
    check_alphabets(model, rm)
    dyn = model.dynamics
    n_s, n_a, n_u = dyn.n_states, dyn.n_actions, rm.n_states
    nxt, rew = rm.tables
    rows = dyn.successors
    width = max(len(r) for r in rows)
    N = n_s * n_u
    succ = np.full((N, n_a, width), -1, dtype=np.int64)
    prob = np.zeros((N, n_a, width))
    reward = np.zeros((N, n_a, width))
    terminal = np.zeros(N, dtype=bool)
    for s in range(n_s):
        for u in range(n_u):
            i = s * n_u + u
            if dyn.terminal[s]:
                terminal[i] = True
                continue
            for a in range(n_a):
                for k, (s2, p) in enumerate(rows[s * n_a + a]):
                    sigma = model.label(s, a, s2)
                    u2 = int(nxt[u, sigma])
                    prob[i, a, k] = p
                    reward[i, a, k] = rew[u, sigma] + model.shaping[s, a, s2]
                    if u2 < n_u and not dyn.terminal[s2]:
                        succ[i, a, k] = s2 * n_u + u2
    mu = np.zeros(N)
    mu[np.arange(n_s) * n_u + rm.u0] = dyn.mu
    states = tuple((s, u) for s in range(n_s) for u in range(n_u))
    return RewardedMdp(states, succ, prob, reward, terminal, dyn.gamma, mu, dyn.actions)
