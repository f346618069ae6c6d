"""Training sweeps over (tracker, epsilon, seed) cells and value-iteration oracles."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from rmu._rng import derive_seed
from rmu.envs import make_env
from rmu.harness.config import ExperimentConfig
from rmu.harness.io import CurveRow, OracleRow, ResultRow
from rmu.labelling import make_labelling
from rmu.product import cross_product
from rmu.rl.belief_mdp import build_mining_belief_mdp
from rmu.rl.qlearn import TrainConfig, q_learning
from rmu.rl.vi import initial_value, value_iteration


@dataclass(frozen=True)
class Cell:
    env: str
    env_params: tuple
    noise: str
    epsilon: float
    tracker: str
    seed: int
    train: TrainConfig


def cell_seed(master: int, tracker: str, epsilon: float, seed: int) -> int:
    """Independent of which other trackers or epsilons are in the sweep."""
    return derive_seed(master, tracker, float(epsilon), seed)


def make_cells(cfg: ExperimentConfig) -> list[Cell]:
    params = tuple(sorted(cfg.env_params.items()))
    return [Cell(cfg.env, params, cfg.labelling, eps, tr, sd,
                 replace(cfg.train, seed=cell_seed(cfg.master_seed, tr, eps, sd)))
            for tr in cfg.trackers for eps in cfg.epsilons for sd in cfg.seeds]


def _train_cell(cell: Cell):
    model = make_env(cell.env, **dict(cell.env_params))
    lab = make_labelling(cell.noise, model, cell.epsilon)
    t0 = time.perf_counter()
    _, curve = q_learning(model, cell.tracker, cell.train, lab)
    return curve, int(round((time.perf_counter() - t0) * 1000))


def run_cell(cell: Cell) -> ResultRow:
    curve, wall = _train_cell(cell)
    frame, mean, se = curve.final if curve.checkpoints else (0, float("nan"), float("nan"))
    return ResultRow(cell.env, cell.tracker, cell.noise, cell.epsilon, cell.seed,
                     cell.train.frames, mean, se, wall)


def run_curve_cell(cell: Cell) -> list[CurveRow]:
    curve, _ = _train_cell(cell)
    return [CurveRow(cell.env, cell.tracker, cell.noise, cell.epsilon, cell.seed, f, m, s)
            for f, m, s in curve.checkpoints]


def _map(fn, cells, workers: int):
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


def run_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per (tracker, epsilon, seed) cell, sorted by cell key."""
    rows = _map(run_cell, make_cells(cfg), cfg.workers)
    return sorted(rows, key=ResultRow.key)


def run_curves(cfg: ExperimentConfig) -> list[CurveRow]:
    """Full learning curves for every cell."""
    out = []
    for rows in _map(run_curve_cell, make_cells(cfg), cfg.workers):
        out.extend(rows)
    return sorted(out, key=lambda r: (r.env, r.tracker, r.noise, r.epsilon, r.seed, r.frame))


def solve_oracles(cfg: ExperimentConfig) -> list[OracleRow]:
    """Cross-product optimum, plus the belief-MDP optimum per epsilon on mining."""
    model = make_env(cfg.env, **cfg.env_params)
    prod = cross_product(model)
    sol = value_iteration(prod)
    rows = []
    for eps in cfg.epsilons:
        rows.append(OracleRow(cfg.env, cfg.labelling, eps, "cross_product", initial_value(prod, sol),
                              prod.n_states, len(sol.residuals), sol.residual))
        if cfg.env == "mining" and cfg.labelling.startswith("mining_"):
            lab = make_labelling(cfg.labelling, model, eps)
            bm = build_mining_belief_mdp(model, lab)
            bsol = value_iteration(bm)
            rows.append(OracleRow(cfg.env, cfg.labelling, eps, "belief_mdp", initial_value(bm, bsol),
                                  bm.n_states, len(bsol.residuals), bsol.residual))
    return rows
