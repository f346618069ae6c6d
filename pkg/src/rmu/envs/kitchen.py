"""Kitchen: finish every chore behind a door, then return to the charging port."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import NamedTuple, Optional

import numpy as np

from rmu.dsl import parse_rm
from rmu.envs.models import LabelledModel, TabularPomdp, dense_from_rows

ACTIONS = ("up", "down", "left", "right", "toggle-door", "do-chore")
MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1)}
TOGGLE, CHORE = 4, 5
ENERGY_COST = -0.05


@dataclass(frozen=True)
class KitchenLayout:
    """Grid cells are ``(row, col)``. Column ``wall_col`` is solid except for the door;
    columns to its right form the kitchen."""

    rows: int = 7
    cols: int = 7
    wall_col: int = 3
    door_row: int = 3
    start: tuple[int, int] = (3, 1)
    port: tuple[int, int] = (0, 0)
    chores: tuple[tuple[int, int], ...] = ((1, 5), (3, 5), (5, 5))

    @property
    def door(self) -> tuple[int, int]:
        return (self.door_row, self.wall_col)

    def in_kitchen(self, cell) -> bool:
        return cell[1] > self.wall_col

    def cells(self):
        return [(r, c) for r in range(self.rows) for c in range(self.cols)
                if c != self.wall_col or r == self.door_row]


SHRUNKEN_LAYOUT = KitchenLayout(rows=1, cols=4, wall_col=2, door_row=0,
                                start=(0, 1), port=(0, 0), chores=((0, 3),))


class KitchenState(NamedTuple):
    pos: tuple[int, int]
    door_open: bool
    done: tuple[bool, ...]


class KitchenObs(NamedTuple):
    pos: tuple[int, int]
    door_open: bool
    chores: tuple[Optional[bool], ...]  # None = not visible from here


def subset_name(done) -> str:
    return "u_" + "".join("1" if d else "0" for d in done)


@lru_cache(maxsize=None)
def kitchen_rm_text(n_chores: int) -> str:
    """One state per subset of chores seen done, plus the terminal ``charged``."""
    chores = [f"chore_{i + 1}" for i in range(n_chores)]
    lines = ["props " + " ".join(chores) + " port;"]
    subsets = list(product((False, True), repeat=n_chores))
    for c in subsets:
        lines.append(f"state {subset_name(c)}{' init' if not any(c) else ''};")
    lines.append("terminal charged;")
    for c in subsets:
        for d in subsets:
            if any(ci and not di for ci, di in zip(c, d)):
                continue
            terms = [chores[i] for i in range(n_chores) if d[i] and not c[i]]
            terms += ["!" + chores[i] for i in range(n_chores) if not d[i]]
            reward = 1 if all(d) else 0
            lines.append(f"edge {subset_name(c)} : {' & '.join(terms + ['port'])} -> charged @ {reward};")
            if d != c:
                lines.append(f"edge {subset_name(c)} : {' & '.join(terms + ['!port'])} -> {subset_name(d)} @ 0;")
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def kitchen_rm(n_chores: int = 3):
    return parse_rm(kitchen_rm_text(n_chores))


def kitchen_env(p_done: float = 1 / 3, horizon: int = 200,
                layout: KitchenLayout = KitchenLayout(), gamma: float = 0.99) -> LabelledModel:
    """Chores start done independently with probability ``p_done`` and are only
    visible from inside the kitchen. Toggling the door and doing a chore cost
    ``-0.05`` each, even when they change nothing."""
    if not 0.0 <= p_done <= 1.0:
        raise ValueError("p_done must lie in [0, 1]")
    n = len(layout.chores)
    rm = kitchen_rm(n)
    chore_bit = [1 << rm.prop_index(f"chore_{i + 1}") for i in range(n)]
    port_bit = 1 << rm.prop_index("port")
    cells = layout.cells()
    cell_set = set(cells)
    states = tuple(KitchenState(p, d, f) for p in cells for d in (False, True)
                   for f in product((False, True), repeat=n))
    index = {s: i for i, s in enumerate(states)}

    def observe(s: KitchenState) -> KitchenObs:
        seen = layout.in_kitchen(s.pos)
        return KitchenObs(s.pos, s.door_open, tuple(f if seen else None for f in s.done))

    def adjacent_to_door(pos) -> bool:
        dr, dc = pos[0] - layout.door[0], pos[1] - layout.door[1]
        return abs(dr) + abs(dc) == 1

    table = {}
    for i, s in enumerate(states):
        for a in range(len(ACTIONS)):
            pos, door, done, cost = s.pos, s.door_open, s.done, 0.0
            if a in MOVES:
                cell = (pos[0] + MOVES[a][0], pos[1] + MOVES[a][1])
                if cell in cell_set and (cell != layout.door or door):
                    pos = cell
            elif a == TOGGLE:
                cost = ENERGY_COST
                if adjacent_to_door(pos):
                    door = not door
            else:
                cost = ENERGY_COST
                if pos in layout.chores:
                    k = layout.chores.index(pos)
                    done = done[:k] + (True,) + done[k + 1:]
            lab = sum(b for b, f in zip(chore_bit, done) if f)
            if pos == layout.port:
                lab |= port_bit
            table[i, a] = [(index[KitchenState(pos, door, done)], 1.0, lab, cost)]
    P, L, R = dense_from_rows(len(states), len(ACTIONS), table)

    obs_values = tuple(sorted({observe(s) for s in states}, key=repr))
    oid = {o: k for k, o in enumerate(obs_values)}
    O0 = np.zeros((len(states), len(obs_values)))
    for i, s in enumerate(states):
        O0[i, oid[observe(s)]] = 1.0
    O = np.repeat(O0[:, None, :], len(ACTIONS), axis=1)

    mu = np.zeros(len(states))
    for flags in product((False, True), repeat=n):
        k = sum(flags)
        mu[index[KitchenState(layout.start, False, flags)]] = p_done ** k * (1 - p_done) ** (n - k)

    dyn = TabularPomdp(states, ACTIONS, P, np.zeros(len(states), dtype=bool), gamma, mu,
                       obs_values=obs_values, O=O, O0=O0)
    params = {"p_done": p_done, "layout": layout, "gamma": gamma}
    return LabelledModel("kitchen", dyn, rm, L, R, horizon, params)
