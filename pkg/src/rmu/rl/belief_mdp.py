"""The finite belief MDP of Mining under a noisy gold model."""
from __future__ import annotations

import numpy as np

from rmu.belief import MAX_LATENTS
from rmu.envs.mining import DIG
from rmu.envs.models import LabelledModel
from rmu.labelling import MiningNoisyGold
from rmu.rl.vi import RewardedMdp


class TooManySquaresError(ValueError):
    pass


def belief_u1(dug: int, squares: list[int], lab: MiningNoisyGold) -> float:
    """P(gold was found) after digging the squares whose bits are set in ``dug``."""
    miss = 1.0
    for j, q in enumerate(squares):
        if dug >> j & 1:
            miss *= 1.0 - lab.p_gold(q)
    return 1.0 - miss


def build_mining_belief_mdp(model: LabelledModel, lab: MiningNoisyGold,
                            max_squares: int = MAX_LATENTS) -> RewardedMdp:
    """States ``(position, dug set)`` over the squares with nonzero gold probability.

    With persistent latents the machine belief depends only on which of those
    squares have been dug, so this MDP is exactly what a belief-consistent agent
    faces subjectively. Entering the depot pays ``P(u1)`` plus the move cost.
    """
    if model.name != "mining":
        raise ValueError("belief MDP is defined for the mining environment")
    dyn = model.dynamics
    n_s, n_a = dyn.n_states, dyn.n_actions
    depot = model.params["depot"]
    squares = [q for q in range(n_s) if q != depot and lab.p_gold(q) > 0.0]
    if len(squares) > max_squares:
        raise TooManySquaresError(f"{len(squares)} squares with nonzero gold probability")
    K = len(squares)
    bit = {q: 1 << j for j, q in enumerate(squares)}
    n_d = 1 << K
    pu1 = np.array([belief_u1(d, squares, lab) for d in range(n_d)])

    N = n_s * n_d
    succ = np.full((N, n_a, 1), -1, dtype=np.int64)
    prob = np.ones((N, n_a, 1))
    reward = np.zeros((N, n_a, 1))
    terminal = np.zeros(N, dtype=bool)
    d = np.arange(n_d)
    for s in range(n_s):
        rows = slice(s * n_d, (s + 1) * n_d)
        if dyn.terminal[s]:
            terminal[rows] = True
            continue
        for a in range(n_a):
            (s2, _), = dyn.successors[s * n_a + a]
            shaping = float(model.shaping[s, a, s2])
            d2 = d | bit.get(s, 0) if a == DIG else d
            if s2 == depot:
                reward[rows, a, 0] = pu1[d2] + shaping
            else:
                reward[rows, a, 0] = shaping
                succ[rows, a, 0] = s2 * n_d + d2
    mu = np.zeros(N)
    mu[np.flatnonzero(dyn.mu) * n_d] = dyn.mu[dyn.mu > 0]
    states = tuple((s, dd) for s in range(n_s) for dd in range(n_d))
    return RewardedMdp(states, succ, prob, reward, terminal, dyn.gamma, mu, dyn.actions)
