import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rmu.dsl import parse_rm
from rmu.envs import kitchen_env, mining_env, traffic_env
from rmu.labelling import mining_noisy_gold
from rmu.product import cross_product
from rmu.rl.belief_mdp import TooManySquaresError, belief_u1, build_mining_belief_mdp
from rmu.rl.qlearn import QTable, evaluate_policy
from rmu.rl.vi import RewardedMdp, initial_value, value_iteration

MINING = mining_env()
GAMMA = 0.97


def mining_optimum_closed_form(g=GAMMA):
    """Shortest plan: 3 moves to the top-right gold square, dig (free) at t=3,
    then 6 moves to the depot; the last one pays 1."""
    costs = sum(g ** t for t in range(10)) - g ** 3
    return g ** 9 - 0.05 * costs


def test_mining_product_size_and_rows():
    prod = cross_product(MINING)
    assert prod.n_states == 32
    live = ~prod.terminal
    assert np.abs(prod.row_sums()[live] - 1.0).max() <= 1e-12
    assert prod.mu.sum() == 1.0


@pytest.mark.parametrize("model", [mining_env(), traffic_env(), kitchen_env()], ids=lambda m: m.name)
def test_product_rows_sum_to_one(model):
    prod = cross_product(model)
    assert np.abs(prod.row_sums()[~prod.terminal] - 1.0).max() <= 1e-12
    assert prod.succ.shape[2] <= model.dynamics.n_states


def test_identity_machine_gives_shaping_only():
    rm = parse_rm("props gold home;\nstate only init;\n")
    prod = cross_product(MINING, rm)
    dyn = MINING.dynamics
    for s in range(dyn.n_states):
        if dyn.terminal[s]:
            continue
        for a in range(dyn.n_actions):
            (s2, _), = dyn.successors[s * dyn.n_actions + a]
            assert prod.reward[s, a, 0] == MINING.shaping[s, a, s2]


def test_alphabet_mismatch():
    rm = parse_rm("props coal;\nstate u0 init;\n")
    with pytest.raises(ValueError):
        cross_product(MINING, rm)


def _single_state(reward):
    return RewardedMdp(("x",), np.zeros((1, 1, 1), dtype=np.int64), np.ones((1, 1, 1)),
                       np.full((1, 1, 1), reward), np.zeros(1, dtype=bool), GAMMA, np.ones(1))


def test_single_state_geometric_series():
    sol = value_iteration(_single_state(1.0))
    assert sol.V[0] == pytest.approx(1 / (1 - GAMMA), abs=1e-8)
    assert sol.residual <= 1e-10


def test_zero_rewards():
    sol = value_iteration(_single_state(0.0))
    assert sol.V.tolist() == [0.0]


def test_value_iteration_rejects_bad_inputs():
    with pytest.raises(ValueError):
        _single_state(float("inf"))
    mdp = _single_state(1.0)
    with pytest.raises(ValueError):
        value_iteration(RewardedMdp(mdp.states, mdp.succ, mdp.prob, mdp.reward,
                                    mdp.terminal, 1.0, mdp.mu))


def test_mining_optimum_and_residuals():
    prod = cross_product(MINING)
    sol = value_iteration(prod)
    assert abs(initial_value(prod, sol) - mining_optimum_closed_form()) <= 1e-9
    r = sol.residuals
    assert all(b <= a for a, b in zip(r, r[1:]))
    assert sol.residual <= 1e-10


def test_greedy_vi_policy_simulates_to_its_value():
    prod = cross_product(MINING)
    sol = value_iteration(prod)
    n_u = MINING.rm.n_states
    q = np.zeros((16, n_u, 5))
    for s in range(16):
        for u in range(n_u):
            q[s, u] = sol.Q[s * n_u + u]
    mean, se = evaluate_policy(MINING, "perfect_rm", QTable(q), episodes=10_000, seed=5)
    v0 = initial_value(prod, sol)
    assert abs(mean - v0) <= max(2 * se, 1e-9)


def test_belief_mdp_sizes():
    fp1 = build_mining_belief_mdp(MINING, mining_noisy_gold("false_positive", 1.0))
    assert fp1.n_states == 16 * 2 ** 5
    fp0 = build_mining_belief_mdp(MINING, mining_noisy_gold("false_positive", 0.0))
    assert fp0.n_states == 16 * 2 ** 4


@pytest.mark.parametrize("kind", ["uniform", "false_positive"])
def test_belief_mdp_at_zero_matches_cross_product(kind):
    bm = build_mining_belief_mdp(MINING, mining_noisy_gold(kind, 0.0))
    prod = cross_product(MINING)
    v_b = initial_value(bm, value_iteration(bm))
    v_p = initial_value(prod, value_iteration(prod))
    assert abs(v_b - v_p) <= 1e-9


def test_belief_mdp_rows_and_budget():
    lab = mining_noisy_gold("uniform", 1.0)
    bm = build_mining_belief_mdp(MINING, lab)
    assert bm.n_states == 16 * 2 ** 15
    assert np.abs(bm.row_sums()[~bm.terminal] - 1.0).max() <= 1e-12
    with pytest.raises(TooManySquaresError):
        build_mining_belief_mdp(MINING, lab, max_squares=5)


@given(st.sampled_from(["uniform", "false_positive"]), st.floats(0, 1.5), st.integers(0, 15))
def test_empty_dug_set_is_point_mass(kind, eps, s):
    lab = mining_noisy_gold(kind, eps)
    squares = [q for q in range(16) if q != 12 and lab.p_gold(q) > 0]
    assert belief_u1(0, squares, lab) == 0.0


def test_false_positive_subjective_optimum_rises_with_epsilon():
    vals = []
    for eps in (0.0, 0.5, 1.0, 1.5):
        bm = build_mining_belief_mdp(MINING, mining_noisy_gold("false_positive", eps))
        vals.append(initial_value(bm, value_iteration(bm)))
    assert vals[0] == pytest.approx(mining_optimum_closed_form(), abs=1e-9)
    # the false positive sits on the way home, so extra belief only helps
    assert vals == sorted(vals)
