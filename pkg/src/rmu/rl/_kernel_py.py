"""Pure-Python twin of ``_kernel.pyx``; same draws, same arithmetic order."""
from __future__ import annotations

import numpy as np

from rmu._rng import SplitMix64
from rmu.belief import PersistentState, independent_update


class _Tracker:
    def __init__(self, m, kind: int):
        self.m = m
        self.kind = kind

    def reset(self):
        m = self.m
        self.b = np.zeros(m.n_nodes)
        self.b[m.u0] = 1.0
        self.uhat = m.u0
        if self.kind == 3:
            self.state = PersistentState(m.rm, m.persistent_mask, m.max_latents)

    def update(self, s, a, e, u_true):
        m = self.m
        if self.kind in (0, 4):
            self.b = np.zeros(m.n_nodes)
            self.b[u_true] = 1.0
        elif self.kind == 1:
            if self.uhat < m.n_u:
                sigma = 0
                for i in range(m.n_props):
                    if m.lab[e, i] >= 0.5:
                        sigma |= 1 << i
                self.b[self.uhat] = 0.0
                self.uhat = int(m.delta_u[self.uhat, sigma])
                self.b[self.uhat] = 1.0
        elif self.kind == 2:
            self.b = independent_update(self.b, m.lab[e], m.rm)
        else:
            from rmu.belief import persistent_update
            _, self.b = persistent_update(self.state, s * m.n_a + a, m.lab[e])


def _q(w, b, s, a, n_u):
    q = 0.0
    for u in range(n_u):
        q += b[u] * w[s, u, a]
    return q


def _greedy(w, b, s, n_u, n_a):
    best, bv = 0, _q(w, b, s, 0, n_u)
    for a in range(1, n_a):
        v = _q(w, b, s, a, n_u)
        if v > bv:
            best, bv = a, v
    return best


def _sample_start(m, rng):
    if len(m.mu_states) == 1:
        return int(m.mu_states[0])
    return int(m.mu_states[rng.choice_cum(m.mu_cum_list)])


def _sample_entry(m, rng, s, a):
    row = s * m.n_a + a
    lo, hi = int(m.row_ptr[row]), int(m.row_ptr[row + 1])
    if hi - lo == 1:
        return lo
    return lo + rng.choice_cum(m.cum_lists[row])


def _evaluate(m, w, kind, episodes, rng):
    tr = _Tracker(m, kind)
    returns = np.zeros(episodes)
    for ep in range(episodes):
        s = _sample_start(m, rng)
        u = m.u0
        tr.reset()
        G, disc, t = 0.0, 1.0, 0
        while True:
            a = _greedy(w, tr.b, s, m.n_u, m.n_a)
            e = _sample_entry(m, rng, s, a)
            s2 = int(m.succ[e])
            lab = int(m.true_label[e])
            u2 = int(m.delta_u[u, lab])
            r = m.delta_r[u, lab] + m.shaping[e]
            G += disc * r
            disc *= m.gamma
            t += 1
            if m.env_terminal[s2] or u2 >= m.n_u or t >= m.horizon:
                break
            tr.update(s, a, e, u2)
            s, u = s2, u2
        returns[ep] = G
    return returns


def evaluate(arrays, w, kind, episodes, seed):
    return _evaluate(arrays, w, kind, episodes, SplitMix64(seed))


def train(arrays, kind, lr, explore_eps, frames, eval_episodes, seed, eval_seed, checkpoints):
    m = arrays
    tr = _Tracker(m, kind)
    w = np.zeros((m.n_s, m.n_u, m.n_a))
    rng = SplitMix64(seed)
    frame, next_cp = 0, 0
    cps = [int(c) for c in checkpoints]
    curve = []
    while frame < frames:
        s = _sample_start(m, rng)
        u = m.u0
        tr.reset()
        t = 0
        while True:
            b0 = tr.b.copy()
            if rng.random() < explore_eps:
                a = int(rng.random() * m.n_a)
            else:
                a = _greedy(w, b0, s, m.n_u, m.n_a)
            e = _sample_entry(m, rng, s, a)
            s2 = int(m.succ[e])
            lab = int(m.true_label[e])
            u2 = int(m.delta_u[u, lab])
            r = m.delta_r[u, lab] + m.shaping[e]
            t += 1
            done = bool(m.env_terminal[s2]) or u2 >= m.n_u or t >= m.horizon
            tr.update(s, a, e, u2)
            q = _q(w, b0, s, a, m.n_u)
            if done:
                target = r
            else:
                best = _q(w, tr.b, s2, 0, m.n_u)
                for ap in range(1, m.n_a):
                    v = _q(w, tr.b, s2, ap, m.n_u)
                    if v > best:
                        best = v
                target = r + m.gamma * best
            step = lr * (target - q)
            for i in range(m.n_u):
                if b0[i] != 0.0:
                    w[s, i, a] += step * b0[i]
            frame += 1
            while next_cp < len(cps) and cps[next_cp] == frame:
                curve.append((frame, _evaluate(m, w, kind, eval_episodes, SplitMix64(eval_seed))))
                next_cp += 1
            if frame >= frames or done:
                break
            s, u = s2, u2
    return w, curve
