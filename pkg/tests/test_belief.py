import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rmu.belief import (
    FilterError, LatentBudgetError, brute_force_belief, enumerate_histories,
    exact_filter_init, exact_filter_update, independent_update, initial_belief,
    make_tracker, persistent_init, persistent_update, point_mass, threshold_assignment,
    thresholding_update, tv_distance,
)
from rmu.envs import SHRUNKEN_LAYOUT, UrmSession, kitchen_env, mining_env, traffic_env
from rmu.envs.mining import DIG, mining_rm
from rmu.envs.traffic import stationary_phases
from rmu.labelling import HistoryLabeller, mining_noisy_gold
from rmu.machine import propset
from strategies import machines

RM = mining_rm()
U0, U1 = RM.node_index["u0"], RM.node_index["u1"]
FAIL, SUCCESS = RM.node_index["fail"], RM.node_index["success"]
MINING, TRAFFIC, KITCHEN = mining_env(), traffic_env(), kitchen_env()
UP, DOWN = 0, 1
SHRUNKEN = {"mining": mining_env(rows=2, cols=2, horizon=6),
            "traffic": traffic_env(length=3, intersection=(1, 1), horizon=6),
            "kitchen": kitchen_env(layout=SHRUNKEN_LAYOUT, horizon=6)}


def chore_done(belief, rm, i):
    """Marginal probability that chore ``i`` is marked done in the machine."""
    return sum(belief[rm.node_index[s]] for s in rm.states if s[2 + i] == "1")


def test_tv_examples():
    a = np.array([0.5, 0.5, 0.0, 0.0])
    assert tv_distance(a, a) == 0.0
    assert tv_distance(point_mass(RM, 0), point_mass(RM, 3)) == 1.0
    assert tv_distance(a, np.array([0.25, 0.75, 0.0, 0.0])) == 0.25
    with pytest.raises(ValueError):
        tv_distance(a, np.ones(3) / 3)


def test_threshold_assignment_examples():
    gold = propset(RM.alphabet, ["gold"])
    assert threshold_assignment([0.6, 0.0]) == gold
    assert threshold_assignment([0.5, 0.0]) == gold
    assert threshold_assignment([0.21, 0.0]) == 0


def test_thresholding_update_examples():
    u, b = thresholding_update(U0, [0.6, 0.0], RM)
    assert u == U1 and b.tolist() == point_mass(RM, U1).tolist()
    u, b = thresholding_update(U0, [0.21, 1.0], RM)
    assert u == FAIL and b[FAIL] == 1.0
    u, _ = thresholding_update(U0, [0.0, 0.0], RM)
    assert u == U0
    from rmu.machine import TerminalStepError
    with pytest.raises(TerminalStepError):
        thresholding_update(FAIL, [0.0, 0.0], RM)


def test_independent_update_half():
    b = independent_update(initial_belief(RM), [0.5, 0.0], RM)
    assert b.tolist() == [0.5, 0.5, 0.0, 0.0]


def test_independent_exploit_closed_form():
    b = initial_belief(RM)
    for k in range(1, 21):
        b = independent_update(b, [0.21, 0.0], RM)
        assert abs(b[U1] - (1 - 0.79 ** k)) <= 1e-12


def test_persistent_examples():
    st_ = persistent_init(RM)
    assert st_.belief().tolist() == point_mass(RM, U0).tolist()
    _, b = persistent_update(st_, "a", [0.21, 0.0])
    assert b[U1] == pytest.approx(0.21, abs=1e-15)
    _, b = persistent_update(st_, "a", [0.21, 0.0])
    assert b[U1] == pytest.approx(0.21, abs=1e-15)
    _, b = persistent_update(st_, "b", [0.15, 0.0])
    assert abs(b[U1] - (1 - 0.79 * 0.85)) <= 1e-12
    assert abs(b[U1] - 0.3285) <= 1e-12


def test_persistent_memo_is_write_once():
    st_ = persistent_init(RM)
    persistent_update(st_, "a", [0.21, 0.0])
    _, b = persistent_update(st_, "a", [0.9, 0.0])
    assert b[U1] == pytest.approx(0.21, abs=1e-15)


def test_persistent_home_is_exact():
    st_ = persistent_init(RM)
    persistent_update(st_, "a", [0.5, 0.0])
    _, b = persistent_update(st_, "home", [0.0, 1.0])
    assert b[SUCCESS] == pytest.approx(0.5) and b[FAIL] == pytest.approx(0.5)


def test_persistent_latent_budget():
    st_ = persistent_init(RM, max_latents=3)
    for k in range(3):
        persistent_update(st_, k, [0.5, 0.0])
    with pytest.raises(LatentBudgetError):
        persistent_update(st_, 99, [0.5, 0.0])


def test_persistent_certain_keys_are_not_latents():
    st_ = persistent_init(RM, max_latents=1)
    for k in range(50):
        persistent_update(st_, k, [0.0, 0.0])
    _, b = persistent_update(st_, "x", [0.4, 0.0])
    assert b[U1] == pytest.approx(0.4)


# -- exact filter --------------------------------------------------------------

def test_filter_init_mining_point_mass():
    st_ = exact_filter_init(MINING, (0, 0))
    assert st_.joint == {(0, U0): 1.0}


def test_filter_init_kitchen_prior():
    st_ = exact_filter_init(KITCHEN, UrmSession(KITCHEN, 0).restart())
    states = KITCHEN.dynamics.states
    none_done = sum(p for (s, _), p in st_.joint.items() if not any(states[s].done))
    assert abs(none_done - 8 / 27) <= 1e-12
    assert len(st_.joint) == 8
    assert st_.belief()[KITCHEN.rm.u0] == 1.0


def test_filter_init_traffic_stationary():
    st_ = exact_filter_init(TRAFFIC, UrmSession(TRAFFIC, 0).restart())
    states = TRAFFIC.dynamics.states
    phases = np.zeros(3)
    for (s, _), p in st_.joint.items():
        phases[("green", "yellow", "red").index(states[s].phase)] += p
    # the first cell faces the light, so the first observation reveals it
    assert phases.max() == 1.0
    prior = exact_filter_init(TRAFFIC)
    phases = np.zeros(3)
    for (s, _), p in prior.joint.items():
        phases[("green", "yellow", "red").index(states[s].phase)] += p
    assert np.allclose(phases, stationary_phases(6, 4), atol=1e-15)


def test_kitchen_hallway_divergence():
    rm = KITCHEN.rm
    sess = UrmSession(KITCHEN, 4)
    obs = sess.restart()
    lab = HistoryLabeller(KITCHEN, "bayes_kitchen")
    lab.reset(obs)
    filt = exact_filter_init(KITCHEN, obs)
    b = initial_belief(rm)
    for t in range(1, 16):
        a = UP if t % 2 else DOWN
        obs, *_ = sess.step(a)
        probs = lab.step(a, obs)
        b = independent_update(b, probs, rm)
        filt, fb = exact_filter_update(filt, a, obs)
        for i in range(3):
            assert abs(chore_done(b, rm, i) - (1 - (2 / 3) ** t)) <= 1e-12
            assert abs(chore_done(fb, rm, i) - 1 / 3) <= 1e-12


def test_filter_mining_tracks_true_state():
    sess = UrmSession(MINING, 8)
    rng = np.random.default_rng(0)
    for _ in range(20):
        obs = sess.restart()
        filt = exact_filter_init(MINING, obs)
        done = False
        while not done:
            a = int(rng.integers(5))
            obs, _, done, info = sess.step(a)
            filt, b = exact_filter_update(filt, a, obs)
            assert b.tolist() == point_mass(MINING.rm, info.u).tolist()


def test_filter_rejects_impossible_observation():
    st_ = exact_filter_init(MINING, (0, 0))
    with pytest.raises(FilterError):
        exact_filter_update(st_, 3, (2, 2))


def test_brute_force_empty_history_is_filter_init():
    for m in SHRUNKEN.values():
        obs0 = UrmSession(m, 0).restart()
        bf = brute_force_belief(m, obs0)
        assert np.array_equal(bf, exact_filter_init(m, obs0).belief())


def test_brute_force_kitchen_hallway():
    rm = KITCHEN.rm
    sess = UrmSession(KITCHEN, 1)
    obs0 = sess.restart()
    steps = [(a, sess.step(a)[0]) for a in (UP, DOWN, UP)]
    b = brute_force_belief(KITCHEN, obs0, steps)
    for i in range(3):
        assert abs(chore_done(b, rm, i) - 1 / 3) <= 1e-12


def _filter_along(model, history):
    obs0, *steps = history
    st_ = exact_filter_init(model, obs0)
    b = st_.belief()
    for a, o in steps:
        st_, b = exact_filter_update(st_, a, o)
    return b


@pytest.mark.parametrize("name", sorted(SHRUNKEN))
def test_filter_matches_brute_force_short(name):
    m = SHRUNKEN[name]
    n = 0
    for history, bf in enumerate_histories(m, 3):
        tol = 1e-12 if len(history) <= 2 else 1e-10
        assert tv_distance(_filter_along(m, history), bf) <= tol
        n += 1
    assert n > 10


# -- properties ----------------------------------------------------------------

def _labelling(model, kind, eps):
    if model.name == "mining":
        return mining_noisy_gold(kind, eps)
    return HistoryLabeller(model, "bayes_" + model.name)


def _trajectory(model, seed, actions, kind="uniform", eps=1.0):
    """Beliefs of every tracker along one session trajectory."""
    lab = _labelling(model, kind, eps)
    names = ["perfect_rm", "thresholding", "independent", "exact_filter"]
    if model.name == "mining":
        names.append("persistent")
    trackers = {n: make_tracker(n, model) for n in names}
    sess = UrmSession(model, seed)
    obs = sess.restart()
    if isinstance(lab, HistoryLabeller):
        lab.reset(obs)
    out = {n: [t.reset(obs)] for n, t in trackers.items()}
    truth = [model.rm.u0]
    key = obs
    for a in actions:
        if sess.done:
            break
        s = sess.s
        obs, _, _, info = sess.step(a)
        probs = lab.step(a, obs) if isinstance(lab, HistoryLabeller) else lab(s, a, info.s)
        for n, t in trackers.items():
            out[n].append(t.update(key, a, obs, probs, info))
        truth.append(info.u)
        key = obs
    return out, truth


def _actions(model, max_size=12):
    return st.lists(st.integers(0, model.dynamics.n_actions - 1), max_size=max_size)


def _check_normalised(out):
    for beliefs in out.values():
        for b in beliefs:
            assert np.all(b >= 0.0)
            assert abs(b.sum() - 1.0) <= 1e-9


@given(st.integers(0, 2**32), _actions(MINING, 16), st.sampled_from(["uniform", "false_positive"]),
       st.floats(0, 1.5))
def test_beliefs_normalised_mining(seed, actions, kind, eps):
    _check_normalised(_trajectory(MINING, seed, actions, kind, eps)[0])


@given(st.integers(0, 2**32), _actions(TRAFFIC, 16))
def test_beliefs_normalised_traffic(seed, actions):
    _check_normalised(_trajectory(TRAFFIC, seed, actions)[0])


@given(st.integers(0, 2**32), _actions(KITCHEN, 16))
def test_beliefs_normalised_kitchen(seed, actions):
    _check_normalised(_trajectory(KITCHEN, seed, actions)[0])


@given(st.sampled_from([MINING, TRAFFIC, KITCHEN]), st.integers(0, 2**32),
       st.lists(st.integers(0, 5), max_size=16), st.floats(0, 1.5))
def test_terminal_mass_never_decreases(model, seed, actions, eps):
    actions = [a % model.dynamics.n_actions for a in actions]
    out, _ = _trajectory(model, seed, actions, "false_positive", eps)
    n_u = model.rm.n_states
    for beliefs in out.values():
        for prev, cur in zip(beliefs, beliefs[1:]):
            assert np.all(cur[n_u:] >= prev[n_u:] - 1e-15)


@given(machines(), st.lists(st.integers(0, 255), max_size=12))
def test_degenerate_probabilities_collapse(rm, sigmas):
    """With 0/1 probabilities every tracker follows the true machine run."""
    n_sigma = 1 << rm.n_props
    u_true = rm.u0
    u_thr = rm.u0
    b_ind = initial_belief(rm)
    pst = persistent_init(rm, [rm.alphabet[0].name])
    for k, raw in enumerate(sigmas):
        if rm.is_terminal(u_true):
            break
        sigma = raw % n_sigma
        probs = [float(sigma >> i & 1) for i in range(rm.n_props)]
        u_true, _ = rm.step_index(u_true, sigma)
        u_thr, b_thr = thresholding_update(u_thr, probs, rm)
        b_ind = independent_update(b_ind, probs, rm)
        _, b_per = persistent_update(pst, k, probs)
        expected = point_mass(rm, u_true)
        assert np.array_equal(b_thr, expected)
        assert np.array_equal(b_ind, expected)
        assert np.array_equal(b_per, expected)


def test_degenerate_collapse_on_mining_trajectories():
    rng = np.random.default_rng(3)
    for seed in range(30):
        actions = rng.integers(0, 5, 60).tolist()
        out, truth = _trajectory(MINING, seed, actions, "uniform", 0.0)
        for n in ("thresholding", "independent", "persistent", "exact_filter"):
            for b, u in zip(out[n], truth):
                assert np.array_equal(b, point_mass(MINING.rm, u))


LIVE_CELLS = [s for s in range(16) if s != 12]


@given(st.sampled_from(["uniform", "false_positive"]), st.floats(0, 1.5),
       st.lists(st.sampled_from(LIVE_CELLS), min_size=1, max_size=14))
def test_persistent_requery_is_idempotent(kind, eps, cells):
    lab = mining_noisy_gold(kind, eps)
    st_ = persistent_init(RM)
    seen = set()
    prev = st_.belief()
    for s in cells:
        _, b = persistent_update(st_, (s, DIG), lab(s, DIG, s))
        if s in seen:
            assert np.array_equal(b, prev)
        seen.add(s)
        prev = b.copy()


@given(st.floats(0, 1, exclude_min=True, exclude_max=True), st.integers(1, 40))
def test_independent_closed_form(p, k):
    b = initial_belief(RM)
    for _ in range(k):
        b = independent_update(b, [p, 0.0], RM)
    assert abs(b[U1] - (1 - (1 - p) ** k)) <= 1e-12
