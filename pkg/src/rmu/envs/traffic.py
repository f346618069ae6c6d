"""Traffic Light: fetch a package across an intersection and drive home without running a red."""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from typing import NamedTuple

import numpy as np

from rmu.dsl import parse_rm
from rmu.envs.models import LabelledModel, TabularPomdp, dense_from_rows

TRAFFIC_RM = """\
# state names: (package carried?) x (red light crossed?)
props pkg home red_cross;
state start init;
state start_red;
state carry;
state carry_red;
terminal delivered;
terminal ticketed;
edge start : pkg & red_cross -> carry_red @ 1;
edge start : pkg -> carry @ 1;
edge start : red_cross -> start_red @ 0;
edge start_red : pkg -> carry_red @ 1;
edge carry : home -> delivered @ 1;
edge carry : red_cross -> carry_red @ 0;
edge carry_red : home -> ticketed @ -1;
"""

ACTIONS = ("forward", "backward", "wait")
PHASES = ("green", "yellow", "red")
FACINGS = ("left", "right")
UNKNOWN = "unknown"


class TrafficState(NamedTuple):
    pos: int
    facing: str
    phase: str
    pkg: bool


class TrafficObs(NamedTuple):
    pos: int
    facing: str
    pkg: bool
    light: str


@lru_cache(maxsize=None)
def traffic_rm():
    return parse_rm(TRAFFIC_RM)


def phase_matrix(green_mean: float, red_mean: float) -> np.ndarray:
    """Row-stochastic green/yellow/red chain with geometric green and red spells."""
    pg, pr = 1.0 / green_mean, 1.0 / red_mean
    return np.array([[1.0 - pg, pg, 0.0],
                     [0.0, 0.0, 1.0],
                     [pr, 0.0, 1.0 - pr]])


def stationary_phases(green_mean: float, red_mean: float) -> np.ndarray:
    z = green_mean + red_mean + 1.0
    return np.array([green_mean / z, 1.0 / z, red_mean / z])


def light_visible(pos: int, facing: str, intersection: tuple[int, int]) -> bool:
    lo, hi = intersection
    return (facing == "right" and pos < lo) or (facing == "left" and pos > hi)


def traffic_env(green_mean: float = 6.0, red_mean: float = 4.0, horizon: int = 200,
                length: int = 11, intersection: tuple[int, int] = (5, 6),
                gamma: float = 0.97) -> LabelledModel:
    """Corridor with home at cell 0 and the package at the last cell.

    ``forward`` moves right and faces right, ``backward`` moves left and faces
    left, ``wait`` keeps both. The light is seen only while approaching the
    intersection head-on, never from inside it.
    """
    if green_mean < 1 or red_mean < 1:
        raise ValueError("green_mean and red_mean must be >= 1")
    lo, hi = intersection
    if not 0 < lo <= hi < length - 1:
        raise ValueError("intersection must lie strictly between home and the package")
    rm = traffic_rm()
    bit = {p.name: 1 << p.index for p in rm.alphabet}
    M = phase_matrix(green_mean, red_mean)

    states = tuple(TrafficState(p, f, ph, k) for p, f, ph, k in
                   product(range(length), FACINGS, PHASES, (False, True)))
    index = {s: i for i, s in enumerate(states)}

    def observe(s: TrafficState) -> TrafficObs:
        light = s.phase if light_visible(s.pos, s.facing, intersection) else UNKNOWN
        return TrafficObs(s.pos, s.facing, s.pkg, light)

    table = {}
    for i, s in enumerate(states):
        for a, name in enumerate(ACTIONS):
            if name == "forward":
                pos, facing = min(s.pos + 1, length - 1), "right"
            elif name == "backward":
                pos, facing = max(s.pos - 1, 0), "left"
            else:
                pos, facing = s.pos, s.facing
            pkg = s.pkg or pos == length - 1
            outs = []
            for j, ph in enumerate(PHASES):
                p = M[PHASES.index(s.phase), j]
                if p == 0.0:
                    continue
                lab = 0
                if pos == length - 1:
                    lab |= bit["pkg"]
                if pos == 0:
                    lab |= bit["home"]
                if lo <= pos <= hi and ph == "red":
                    lab |= bit["red_cross"]
                outs.append((index[TrafficState(pos, facing, ph, pkg)], p, lab, 0.0))
            table[i, a] = outs
    P, L, R = dense_from_rows(len(states), len(ACTIONS), table)

    obs_values = tuple(sorted({observe(s) for s in states}))
    oid = {o: k for k, o in enumerate(obs_values)}
    O0 = np.zeros((len(states), len(obs_values)))
    for i, s in enumerate(states):
        O0[i, oid[observe(s)]] = 1.0
    O = np.repeat(O0[:, None, :], len(ACTIONS), axis=1)

    mu = np.zeros(len(states))
    for j, ph in enumerate(PHASES):
        mu[index[TrafficState(0, "right", ph, False)]] = stationary_phases(green_mean, red_mean)[j]

    dyn = TabularPomdp(states, ACTIONS, P, np.zeros(len(states), dtype=bool), gamma, mu,
                       obs_values=obs_values, O=O, O0=O0)
    params = {"green_mean": green_mean, "red_mean": red_mean, "length": length,
              "intersection": (lo, hi), "gamma": gamma}
    return LabelledModel("traffic", dyn, rm, L, R, horizon, params)
