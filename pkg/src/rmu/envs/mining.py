"""The Mining grid: dig up gold in the right-most column, then reach the depot."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from rmu.dsl import parse_rm
from rmu.envs.models import LabelledModel, TabularMdp, dense_from_rows

MINING_RM = """\
# dig gold, then deliver it to the depot
props gold home;
state u0 init;
state u1;
terminal fail;
terminal success;
edge u0 : gold & !home -> u1 @ 0;
edge u0 : home -> fail @ 0;
edge u1 : home -> success @ 1;
"""

ACTIONS = ("up", "down", "left", "right", "dig")
MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1)}
DIG = 4
MOVE_COST = -0.05


@lru_cache(maxsize=None)
def mining_rm():
    return parse_rm(MINING_RM)


def mining_env(horizon: int = 100, rows: int = 4, cols: int = 4, gamma: float = 0.97) -> LabelledModel:
    """Robot starts top-left, the depot is bottom-left, every right-most square holds gold.

    Entering the depot ends the episode. Moves cost ``-0.05``; digging is free.
    States are numbered ``row * cols + col``.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid must be at least 2x2")
    rm = mining_rm()
    gold_bit = 1 << rm.prop_index("gold")
    home_bit = 1 << rm.prop_index("home")
    n = rows * cols
    depot = (rows - 1) * cols
    states = tuple((r, c) for r in range(rows) for c in range(cols))
    table = {}
    for s, (r, c) in enumerate(states):
        for a in range(len(ACTIONS)):
            if a == DIG:
                s2, cost = s, 0.0
                lab = gold_bit if c == cols - 1 else 0
            else:
                dr, dc = MOVES[a]
                r2 = min(max(r + dr, 0), rows - 1)
                c2 = min(max(c + dc, 0), cols - 1)
                s2, cost, lab = r2 * cols + c2, MOVE_COST, 0
            if s2 == depot:
                lab |= home_bit
            table[s, a] = [(s2, 1.0, lab, cost)]
    P, L, R = dense_from_rows(n, len(ACTIONS), table)
    terminal = np.zeros(n, dtype=bool)
    terminal[depot] = True
    mu = np.zeros(n)
    mu[0] = 1.0
    dyn = TabularMdp(states, ACTIONS, P, terminal, gamma, mu)
    return LabelledModel("mining", dyn, rm, L, R, horizon,
                         {"rows": rows, "cols": cols, "depot": depot, "gamma": gamma})
