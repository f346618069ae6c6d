# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Q-learning loop for fully observed models.

Mirrors ``_kernel_py`` operation for operation; results are bit-identical
when built without floating-point contraction (see setup.py).
"""
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport sqrt
import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF GOLDEN = 0x9E3779B97F4A7C15
DEF MAXC = 65536

cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t sm_next(uint64_t* st) nogil:
    st[0] = st[0] + <uint64_t>GOLDEN
    cdef uint64_t z = st[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double sm_random(uint64_t* st) nogil:
    return <double>(sm_next(st) >> 11) * INV_2_53


cdef inline int choice_cum(uint64_t* st, const double[:] cum, int lo, int n) nogil:
    cdef double x = sm_random(st)
    cdef int i
    for i in range(n - 1):
        if x < cum[lo + i]:
            return i
    return n - 1


cdef class _Model:
    cdef const int64_t[:] row_ptr
    cdef const int64_t[:] succ
    cdef const double[:] cum
    cdef const int64_t[:] true_label
    cdef const double[:] shaping
    cdef const double[:, :] lab
    cdef const cnp.uint8_t[:] env_terminal
    cdef const int64_t[:] mu_states
    cdef const double[:] mu_cum
    cdef const int64_t[:, :] delta_u
    cdef const double[:, :] delta_r
    cdef const int64_t[:] relevant
    cdef int64_t pmask
    cdef int n_s, n_a, n_u, n_nodes, n_props, u0, horizon, max_latents
    cdef double gamma

    def __init__(self, arrays):
        self.row_ptr = arrays.row_ptr
        self.succ = arrays.succ
        self.cum = arrays.cum
        self.true_label = arrays.true_label
        self.shaping = arrays.shaping
        self.lab = arrays.lab
        self.env_terminal = arrays.env_terminal
        self.mu_states = arrays.mu_states
        self.mu_cum = arrays.mu_cum
        self.delta_u = arrays.delta_u
        self.delta_r = arrays.delta_r
        self.relevant = arrays.relevant
        self.pmask = arrays.persistent_mask
        self.n_s = arrays.n_s
        self.n_a = arrays.n_a
        self.n_u = arrays.n_u
        self.n_nodes = arrays.n_nodes
        self.n_props = arrays.n_props
        self.u0 = arrays.u0
        self.horizon = arrays.horizon
        self.max_latents = arrays.max_latents
        self.gamma = arrays.gamma


cdef class _Tracker:
    """Belief state for one episode; ``kind`` selects the update rule."""
    cdef _Model m
    cdef int kind
    cdef double[:] b
    cdef double[:] tmp
    cdef int uhat
    # persistent-latent bookkeeping
    cdef cnp.uint8_t[:] memo_set
    cdef double[:, :] memo
    cdef int64_t[:, :] lat_id
    cdef int64_t[:] touched
    cdef int n_touched
    cdef int64_t[:] lat_prop
    cdef int n_lat
    cdef int64_t[:] cu
    cdef uint64_t[:] ck
    cdef uint64_t[:] cb
    cdef double[:] cw
    cdef int nc
    cdef int64_t[:] ou
    cdef uint64_t[:] ok
    cdef uint64_t[:] ob
    cdef double[:] ow
    cdef int no

    def __init__(self, _Model m, int kind):
        self.m = m
        self.kind = kind
        self.b = np.zeros(m.n_nodes)
        self.tmp = np.zeros(m.n_nodes)
        if kind == 3:
            nk = m.n_s * m.n_a
            self.memo_set = np.zeros(nk, dtype=np.uint8)
            self.memo = np.zeros((nk, m.n_props))
            self.lat_id = np.full((nk, m.n_props), -1, dtype=np.int64)
            self.touched = np.zeros(nk, dtype=np.int64)
            self.lat_prop = np.zeros(max(m.max_latents, 1), dtype=np.int64)
            self.cu = np.zeros(MAXC, dtype=np.int64)
            self.ck = np.zeros(MAXC, dtype=np.uint64)
            self.cb = np.zeros(MAXC, dtype=np.uint64)
            self.cw = np.zeros(MAXC)
            self.ou = np.zeros(MAXC, dtype=np.int64)
            self.ok = np.zeros(MAXC, dtype=np.uint64)
            self.ob = np.zeros(MAXC, dtype=np.uint64)
            self.ow = np.zeros(MAXC)

    cdef void reset(self):
        cdef int i
        for i in range(self.m.n_nodes):
            self.b[i] = 0.0
        self.b[self.m.u0] = 1.0
        self.uhat = self.m.u0
        if self.kind == 3:
            for i in range(self.n_touched):
                self.memo_set[self.touched[i]] = 0
                for j in range(self.m.n_props):
                    self.lat_id[self.touched[i], j] = -1
            self.n_touched = 0
            self.n_lat = 0
            self.nc = 1
            self.cu[0] = self.m.u0
            self.ck[0] = 0
            self.cb[0] = 0
            self.cw[0] = 1.0

    cdef int update(self, int s, int a, int e, int u_true) except -1:
        """Advance after the transition stored at sparse entry ``e``."""
        cdef _Model m = self.m
        cdef int i, u, k, j, n_free, sigma, fixed
        cdef double w
        cdef int free[64]
        if self.kind == 0 or self.kind == 4:
            for i in range(m.n_nodes):
                self.b[i] = 0.0
            self.b[u_true] = 1.0
            return 0
        if self.kind == 1:
            if self.uhat < m.n_u:
                sigma = 0
                for i in range(m.n_props):
                    if m.lab[e, i] >= 0.5:
                        sigma |= 1 << i
                self.b[self.uhat] = 0.0
                self.uhat = <int>m.delta_u[self.uhat, sigma]
                self.b[self.uhat] = 1.0
            return 0
        if self.kind == 2:
            fixed = 0
            n_free = 0
            for i in range(m.n_props):
                if m.lab[e, i] >= 1.0:
                    fixed |= 1 << i
                elif m.lab[e, i] > 0.0:
                    free[n_free] = i
                    n_free += 1
            for i in range(m.n_nodes):
                self.tmp[i] = 0.0
            for i in range(m.n_u, m.n_nodes):
                self.tmp[i] = self.b[i]
            for k in range(1 << n_free):
                sigma = fixed
                w = 1.0
                for j in range(n_free):
                    if (k >> j) & 1:
                        sigma |= 1 << free[j]
                        w *= m.lab[e, free[j]]
                    else:
                        w *= 1.0 - m.lab[e, free[j]]
                for u in range(m.n_u):
                    if self.b[u] != 0.0:
                        self.tmp[m.delta_u[u, sigma]] += self.b[u] * w
            for i in range(m.n_nodes):
                self.b[i] = self.tmp[i]
            return 0
        return self.persistent(s * m.n_a + a, e)

    cdef int emit(self, int64_t u, uint64_t known, uint64_t bits, double w) except -1:
        cdef int lid, j
        if u >= self.m.n_u:
            known = 0
            bits = 0
        else:
            for lid in range(self.n_lat):
                if (known >> lid) & 1 and not ((self.m.relevant[u] >> self.lat_prop[lid]) & 1):
                    known &= ~((<uint64_t>1) << lid)
                    bits &= ~((<uint64_t>1) << lid)
        for j in range(self.no):
            if self.ou[j] == u and self.ok[j] == known and self.ob[j] == bits:
                self.ow[j] += w
                return 0
        if self.no >= MAXC:
            raise RuntimeError("persistent tracker config table overflow")
        self.ou[self.no] = u
        self.ok[self.no] = known
        self.ob[self.no] = bits
        self.ow[self.no] = w
        self.no += 1
        return 0

    cdef int persistent(self, int key, int e) except -1:
        cdef _Model m = self.m
        cdef int i, c, j, kl, kf, n_free, n_lat_here, n_branch, sigma, fixed, base, s1
        cdef int64_t u
        cdef uint64_t known, bits, k2, b2
        cdef double p, w, w1, w2
        cdef int free[64]
        cdef int lat_i[64]
        cdef int lat_l[64]
        cdef int br_i[64]
        cdef int br_l[64]
        if not self.memo_set[key]:
            self.memo_set[key] = 1
            self.touched[self.n_touched] = key
            self.n_touched += 1
            for i in range(m.n_props):
                self.memo[key, i] = m.lab[e, i] if (m.pmask >> i) & 1 else 0.0
            for i in range(m.n_props):
                p = self.memo[key, i]
                if (m.pmask >> i) & 1 and 0.0 < p < 1.0:
                    if self.n_lat >= m.max_latents:
                        raise OverflowError("latent budget exceeded")
                    self.lat_id[key, i] = self.n_lat
                    self.lat_prop[self.n_lat] = i
                    self.n_lat += 1
        fixed = 0
        n_free = 0
        n_lat_here = 0
        for i in range(m.n_props):
            if (m.pmask >> i) & 1:
                p = self.memo[key, i]
                if p >= 1.0:
                    fixed |= 1 << i
                elif p > 0.0:
                    lat_i[n_lat_here] = i
                    lat_l[n_lat_here] = <int>self.lat_id[key, i]
                    n_lat_here += 1
            else:
                p = m.lab[e, i]
                if p >= 1.0:
                    fixed |= 1 << i
                elif p > 0.0:
                    free[n_free] = i
                    n_free += 1
        self.no = 0
        for c in range(self.nc):
            u = self.cu[c]
            known = self.ck[c]
            bits = self.cb[c]
            w = self.cw[c]
            if u >= m.n_u:
                self.emit(u, known, bits, w)
                continue
            n_branch = 0
            base = fixed
            for j in range(n_lat_here):
                if not ((known >> lat_l[j]) & 1) and ((m.relevant[u] >> lat_i[j]) & 1):
                    br_i[n_branch] = lat_i[j]
                    br_l[n_branch] = lat_l[j]
                    n_branch += 1
            for j in range(n_lat_here):
                if (known >> lat_l[j]) & 1 and (bits >> lat_l[j]) & 1:
                    base |= 1 << lat_i[j]
            for kl in range(1 << n_branch):
                k2 = known
                b2 = bits
                s1 = base
                w1 = w
                for j in range(n_branch):
                    k2 |= (<uint64_t>1) << br_l[j]
                    if (kl >> j) & 1:
                        b2 |= (<uint64_t>1) << br_l[j]
                        s1 |= 1 << br_i[j]
                        w1 *= self.memo[key, br_i[j]]
                    else:
                        w1 *= 1.0 - self.memo[key, br_i[j]]
                for kf in range(1 << n_free):
                    sigma = s1
                    w2 = w1
                    for j in range(n_free):
                        if (kf >> j) & 1:
                            sigma |= 1 << free[j]
                            w2 *= m.lab[e, free[j]]
                        else:
                            w2 *= 1.0 - m.lab[e, free[j]]
                    self.emit(m.delta_u[u, sigma], k2, b2, w2)
        # swap buffers and rebuild the belief
        self.cu, self.ou = self.ou, self.cu
        self.ck, self.ok = self.ok, self.ck
        self.cb, self.ob = self.ob, self.cb
        self.cw, self.ow = self.ow, self.cw
        self.nc = self.no
        for i in range(m.n_nodes):
            self.b[i] = 0.0
        for c in range(self.nc):
            self.b[self.cu[c]] += self.cw[c]
        return 0


cdef inline double q_value(double[:, :, :] w, double[:] b, int s, int a, int n_u) nogil:
    cdef double q = 0.0
    cdef int u
    for u in range(n_u):
        q += b[u] * w[s, u, a]
    return q


cdef inline int greedy(double[:, :, :] w, double[:] b, int s, int n_u, int n_a) nogil:
    cdef int a, best = 0
    cdef double v, bv = q_value(w, b, s, 0, n_u)
    for a in range(1, n_a):
        v = q_value(w, b, s, a, n_u)
        if v > bv:
            bv = v
            best = a
    return best


cdef inline int sample_start(_Model m, uint64_t* st):
    if m.mu_states.shape[0] == 1:
        return <int>m.mu_states[0]
    return <int>m.mu_states[choice_cum(st, m.mu_cum, 0, m.mu_states.shape[0])]


cdef inline int sample_entry(_Model m, uint64_t* st, int s, int a):
    cdef int row = s * m.n_a + a
    cdef int lo = <int>m.row_ptr[row]
    cdef int n = <int>m.row_ptr[row + 1] - lo
    if n == 1:
        return lo
    return lo + choice_cum(st, m.cum, lo, n)


cdef object _evaluate(_Model m, double[:, :, :] w, int kind, int episodes, uint64_t seed):
    cdef uint64_t st = seed
    cdef _Tracker tr = _Tracker(m, kind)
    cdef int ep, s, a, e, s2, u, u2, t
    cdef bint done
    cdef double G, disc, r, total = 0.0, total_sq = 0.0, mean, var
    returns = np.zeros(episodes)
    cdef double[:] ret = returns
    for ep in range(episodes):
        s = sample_start(m, &st)
        u = m.u0
        tr.reset()
        G = 0.0
        disc = 1.0
        t = 0
        while True:
            a = greedy(w, tr.b, s, m.n_u, m.n_a)
            e = sample_entry(m, &st, s, a)
            s2 = <int>m.succ[e]
            u2 = <int>m.delta_u[u, m.true_label[e]]
            r = m.delta_r[u, m.true_label[e]] + m.shaping[e]
            G += disc * r
            disc *= m.gamma
            t += 1
            done = m.env_terminal[s2] or u2 >= m.n_u or t >= m.horizon
            if done:
                break
            tr.update(s, a, e, u2)
            s = s2
            u = u2
        ret[ep] = G
    return returns


def evaluate(arrays, double[:, :, :] w, int kind, int episodes, uint64_t seed):
    """Greedy returns of ``episodes`` episodes with a fresh tracker each."""
    return _evaluate(_Model(arrays), w, kind, episodes, seed)


def train(arrays, int kind, double lr, double explore_eps, int64_t frames,
          int eval_episodes, uint64_t seed, uint64_t eval_seed, checkpoints):
    """Run epsilon-greedy Q-learning; returns ``(weights, [(frame, returns), ...])``."""
    cdef _Model m = _Model(arrays)
    cdef _Tracker tr = _Tracker(m, kind)
    weights = np.zeros((m.n_s, m.n_u, m.n_a))
    cdef double[:, :, :] w = weights
    cdef double[:] nb = np.zeros(m.n_nodes)
    cdef double[:] b0 = np.zeros(m.n_nodes)
    cdef uint64_t st = seed
    cdef int64_t frame = 0
    cdef int s, a, e, s2, u, u2, t, i, ap, next_cp = 0
    cdef bint done
    cdef double r, q, target, best, v, delta, step
    cdef int64_t[:] cps = np.asarray(checkpoints, dtype=np.int64)
    cdef int n_cp = cps.shape[0]
    curve = []
    while frame < frames:
        s = sample_start(m, &st)
        u = m.u0
        tr.reset()
        t = 0
        while True:
            for i in range(m.n_nodes):
                b0[i] = tr.b[i]
            if sm_random(&st) < explore_eps:
                a = <int>(sm_random(&st) * m.n_a)
            else:
                a = greedy(w, b0, s, m.n_u, m.n_a)
            e = sample_entry(m, &st, s, a)
            s2 = <int>m.succ[e]
            u2 = <int>m.delta_u[u, m.true_label[e]]
            r = m.delta_r[u, m.true_label[e]] + m.shaping[e]
            t += 1
            done = m.env_terminal[s2] or u2 >= m.n_u or t >= m.horizon
            tr.update(s, a, e, u2)
            q = q_value(w, b0, s, a, m.n_u)
            if done:
                target = r
            else:
                best = q_value(w, tr.b, s2, 0, m.n_u)
                for ap in range(1, m.n_a):
                    v = q_value(w, tr.b, s2, ap, m.n_u)
                    if v > best:
                        best = v
                target = r + m.gamma * best
            delta = target - q
            step = lr * delta
            for i in range(m.n_u):
                if b0[i] != 0.0:
                    w[s, i, a] += step * b0[i]
            frame += 1
            while next_cp < n_cp and cps[next_cp] == frame:
                curve.append((frame, _evaluate(m, w, kind, eval_episodes, eval_seed)))
                next_cp += 1
            if frame >= frames or done:
                break
            s = s2
            u = u2
    return weights, curve
