"""Backend selection for the fully observed training loop.

The compiled extension is used when it imports; ``RMU_PURE_PYTHON=1`` forces
the pure-Python twin. ``BACKEND`` names the active one.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from types import ModuleType

import numpy as np

from rmu.belief import MAX_LATENTS, LatentBudgetError
from rmu.envs.models import LabelledModel
from rmu.machine import RewardMachine
from rmu.rl import _kernel_py

TRACKER_KIND = {"perfect_rm": 0, "thresholding": 1, "independent": 2, "persistent": 3,
                "exact_filter": 4}


def _load_compiled() -> ModuleType | None:
    if os.environ.get("RMU_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        from rmu.rl import _kernel
    except ImportError:
        return None
    return _kernel


_compiled = _load_compiled()
BACKEND = "compiled" if _compiled is not None else "python"


def backend_module(name: str | None = None) -> ModuleType:
    """``"compiled"``, ``"python"`` or ``None`` for the default."""
    if name is None:
        return _compiled or _kernel_py
    if name == "python":
        return _kernel_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@dataclass(eq=False)
class UrmArrays:
    """Flat, read-only arrays describing a fully observed labelled model plus
    the agent's per-transition proposition probabilities."""

    rm: RewardMachine
    row_ptr: np.ndarray
    succ: np.ndarray
    cum: np.ndarray
    true_label: np.ndarray
    shaping: np.ndarray
    lab: np.ndarray
    env_terminal: np.ndarray
    mu_states: np.ndarray
    mu_cum: np.ndarray
    delta_u: np.ndarray
    delta_r: np.ndarray
    relevant: np.ndarray
    persistent_mask: int
    n_s: int
    n_a: int
    horizon: int
    gamma: float
    max_latents: int = MAX_LATENTS

    @property
    def n_u(self) -> int:
        return self.rm.n_states

    @property
    def n_nodes(self) -> int:
        return self.rm.n_nodes

    @property
    def n_props(self) -> int:
        return self.rm.n_props

    @property
    def u0(self) -> int:
        return self.rm.u0

    # list views for the Python twin's cumulative draws
    @property
    def mu_cum_list(self):
        return self.mu_cum.tolist()

    def __post_init__(self):
        self.cum_lists = [self.cum[self.row_ptr[i]:self.row_ptr[i + 1]].tolist()
                          for i in range(len(self.row_ptr) - 1)]


def pack_model(model: LabelledModel, labelling, persistent_props=(),
               gamma: float | None = None, max_latents: int = MAX_LATENTS) -> UrmArrays:
    """``labelling(s, a, s2)`` gives the agent's probabilities for each transition."""
    dyn = model.dynamics
    if not dyn.fully_observable:
        raise ValueError("the kernel handles fully observed models only")
    rm = model.rm
    n_s, n_a = dyn.n_states, dyn.n_actions
    row_ptr = [0]
    succ, cum, true_label, shaping, lab = [], [], [], [], []
    for s in range(n_s):
        for a in range(n_a):
            acc = 0.0
            for s2, p in dyn.successors[s * n_a + a]:
                acc += p
                succ.append(s2)
                cum.append(acc)
                true_label.append(model.label(s, a, s2))
                shaping.append(float(model.shaping[s, a, s2]))
                lab.append(np.asarray(labelling(s, a, s2), dtype=float))
            row_ptr.append(len(succ))
    support = np.flatnonzero(dyn.mu)
    mask = 0
    for name in persistent_props:
        mask |= 1 << rm.prop_index(name)
    delta_u, delta_r = rm.tables
    return UrmArrays(
        rm=rm,
        row_ptr=np.array(row_ptr, dtype=np.int64),
        succ=np.array(succ, dtype=np.int64),
        cum=np.array(cum),
        true_label=np.array(true_label, dtype=np.int64),
        shaping=np.array(shaping),
        lab=np.array(lab, dtype=float).reshape(len(succ), rm.n_props),
        env_terminal=dyn.terminal.astype(np.uint8),
        mu_states=support.astype(np.int64),
        mu_cum=np.cumsum(dyn.mu[support]),
        delta_u=np.ascontiguousarray(delta_u, dtype=np.int64),
        delta_r=np.ascontiguousarray(delta_r),
        relevant=np.ascontiguousarray(rm.relevant_props, dtype=np.int64),
        persistent_mask=mask,
        n_s=n_s, n_a=n_a, horizon=model.horizon,
        gamma=float(dyn.gamma if gamma is None else gamma),
        max_latents=max_latents,
    )


def train(arrays: UrmArrays, tracker: str, lr: float, explore_eps: float, frames: int,
          eval_episodes: int, seed: int, eval_seed: int, checkpoints, backend: str | None = None):
    mod = backend_module(backend)
    try:
        return mod.train(arrays, TRACKER_KIND[tracker], lr, explore_eps, frames,
                         eval_episodes, seed, eval_seed, list(checkpoints))
    except OverflowError as err:
        raise LatentBudgetError(str(err)) from None


def evaluate(arrays: UrmArrays, w: np.ndarray, tracker: str, episodes: int, seed: int,
             backend: str | None = None) -> np.ndarray:
    mod = backend_module(backend)
    try:
        return mod.evaluate(arrays, np.ascontiguousarray(w, dtype=float),
                            TRACKER_KIND[tracker], episodes, seed)
    except OverflowError as err:
        raise LatentBudgetError(str(err)) from None
