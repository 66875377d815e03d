import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cisg.game import Mdp, induce_mdp, random_ergodic_cisg
from cisg.planning import (
    FiniteHorizonPolicy,
    MixingCapExceeded,
    ReducibleChainError,
    StationaryPolicy,
    epsilon_mixing_time,
    expected_t_step_average,
    finite_horizon_plan,
    optimal_value_oracle,
    policy_chain,
    stationary_average_reward,
    stationary_distribution,
)
from oracles import (
    expectimax,
    gain_by_eigenvector,
    open_loop_best,
    simulate_chain_average,
)


def random_mdp(n, k, seed, deterministic=False):
    rng = np.random.default_rng(seed)
    reward = rng.uniform(0, 1, size=(n, k))
    if deterministic:
        transition = np.zeros((n, k, n))
        dest = rng.integers(0, n, size=(n, k))
        for s, a in itertools.product(range(n), range(k)):
            transition[s, a, dest[s, a]] = 1.0
    else:
        transition = rng.dirichlet(np.ones(n), size=(n, k))
    return Mdp(reward, transition, r_max=1.0)


def one_state(*rewards):
    k = len(rewards)
    return Mdp(np.array([rewards], dtype=float), np.ones((1, k, 1)), r_max=1.0)


def test_myopic_dominance():
    policy, values = finite_horizon_plan(one_state(0.3, 0.9), 5)
    assert np.all(policy.actions == 1)
    assert values[5, 0] == pytest.approx(4.5, abs=1e-12)


def test_identical_actions_break_to_lowest_index():
    base = random_mdp(3, 2, seed=4)
    reward = np.repeat(base.reward[:, :1], 3, axis=1)
    transition = np.repeat(base.transition[:, :1], 3, axis=1)
    policy, _ = finite_horizon_plan(Mdp(reward, transition), 6)
    assert np.all(policy.actions == 0)


def test_plan_matches_tree_enumeration():
    mdp = random_mdp(3, 3, seed=12)
    _, values = finite_horizon_plan(mdp, 4)
    for s in range(3):
        oracle = expectimax(mdp.reward.tolist(), mdp.transition.tolist(), s, 4)
        assert values[4, s] == pytest.approx(oracle, abs=1e-9)


def test_deterministic_mdp_matches_open_loop_sequences():
    mdp = random_mdp(3, 3, seed=13, deterministic=True)
    _, values = finite_horizon_plan(mdp, 4)
    for s in range(3):
        oracle = open_loop_best(mdp.reward.tolist(), mdp.transition.tolist(), s, 4)
        assert values[4, s] == pytest.approx(oracle, abs=1e-9)


def test_stochastic_plan_dominates_open_loop():
    mdp = random_mdp(3, 3, seed=14)
    _, values = finite_horizon_plan(mdp, 3)
    for s in range(3):
        assert values[3, s] >= open_loop_best(mdp.reward.tolist(), mdp.transition.tolist(), s, 3) - 1e-12


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 3), k=st.integers(1, 4), horizon=st.integers(1, 4), seed=st.integers(0, 10**6))
def test_brute_force_equivalence(n, k, horizon, seed):
    mdp = random_mdp(n, k, seed)
    _, values = finite_horizon_plan(mdp, horizon)
    for s in range(n):
        oracle = expectimax(mdp.reward.tolist(), mdp.transition.tolist(), s, horizon)
        assert values[horizon, s] == pytest.approx(oracle, abs=1e-9)


def test_plan_is_a_pure_function():
    mdp = random_mdp(3, 4, seed=2)
    a, va = finite_horizon_plan(mdp, 7)
    b, vb = finite_horizon_plan(mdp, 7)
    assert a == b
    assert va.tobytes() == vb.tobytes()


def test_plan_value_equals_policy_evaluation():
    mdp = random_mdp(3, 3, seed=21)
    policy, values = finite_horizon_plan(mdp, 5)
    for s in range(3):
        avg = expected_t_step_average(mdp, policy, s, 5)
        assert avg * 5 == pytest.approx(values[5, s], abs=1e-12)


def test_t_step_average_single_state():
    mdp = one_state(0.5)
    for t in (1, 2, 10):
        assert expected_t_step_average(mdp, StationaryPolicy((0,)), 0, t) == 0.5


def test_t_step_average_cycle(cycle2):
    mdp = induce_mdp(cycle2)
    pi = StationaryPolicy((0, 0))
    assert expected_t_step_average(mdp, pi, 0, 2) == 0.5
    # path from the reward-0 state: 0, 1, 0
    assert expected_t_step_average(mdp, pi, 1, 3) == pytest.approx(1 / 3, abs=1e-15)


def test_t_step_average_rejects_long_horizon():
    policy, _ = finite_horizon_plan(one_state(0.5), 2)
    with pytest.raises(ValueError):
        expected_t_step_average(one_state(0.5), policy, 0, 3)


def test_stationary_cycle(cycle2):
    mdp = induce_mdp(cycle2)
    for policy in itertools.product(range(4), repeat=2):
        p, _ = policy_chain(mdp, policy)
        assert np.allclose(stationary_distribution(p), [0.5, 0.5], atol=1e-12)
        assert stationary_average_reward(mdp, policy) == pytest.approx(0.5, abs=1e-12)


def test_stationary_single_state():
    assert stationary_average_reward(one_state(0.37), (0,)) == pytest.approx(0.37)


def test_stationary_gain_agrees_with_simulation():
    mdp = induce_mdp(random_ergodic_cisg(3, (2, 2), seed=9))
    policy = (1, 3, 0)
    p, r = policy_chain(mdp, policy)
    sim = simulate_chain_average(p, r, 10**6, seed=1)
    assert stationary_average_reward(mdp, policy) == pytest.approx(sim, abs=0.01)


def test_reducible_chain_raises():
    transition = np.zeros((2, 1, 2))
    transition[0, 0, 0] = transition[1, 0, 1] = 1.0
    with pytest.raises(ReducibleChainError):
        stationary_average_reward(Mdp(np.zeros((2, 1)), transition), (0, 0))


def test_oracle_single_state():
    report = optimal_value_oracle(one_state(0.3, 0.9))
    assert report.optimal_value == pytest.approx(0.9)
    assert report.argmax_policy == StationaryPolicy((1,))


def test_oracle_cycle(cycle2):
    report = optimal_value_oracle(induce_mdp(cycle2))
    assert report.optimal_value == pytest.approx(0.5, abs=1e-12)
    assert report.argmax_policy.actions == (0, 0)


ASYM3_VALUE = 0.7973753280839896  # eigenvector oracle over all 64 policies
ASYM3_POLICY = (1, 3, 0)


def test_oracle_asym3(asym3):
    mdp = induce_mdp(asym3)
    report = optimal_value_oracle(mdp, keep_table=True)
    assert report.optimal_value == pytest.approx(ASYM3_VALUE, abs=1e-9)
    assert report.argmax_policy.actions == ASYM3_POLICY
    assert len(report.per_policy_gain) == 64
    states = np.arange(3)
    for policy, gain in report.per_policy_gain.items():
        p = mdp.transition[states, list(policy)]
        r = mdp.reward[states, list(policy)]
        assert gain == pytest.approx(gain_by_eigenvector(p, r), abs=1e-9)
    assert report.optimal_value == stationary_average_reward(mdp, report.argmax_policy)


def test_mixing_single_state():
    for eps in (0.01, 0.3, 2.0):
        assert epsilon_mixing_time(one_state(0.4), (0,), eps) == 1


def test_mixing_cycle(cycle2):
    mdp = induce_mdp(cycle2)
    assert epsilon_mixing_time(mdp, (0, 0), 0.25, t_cap=100) == 2
    assert epsilon_mixing_time(mdp, (0, 0), 0.6, t_cap=100) == 1


def test_mixing_cap_exceeded(cycle2):
    # from the bad state the odd-t averages (t-1)/(2t) stay below 0.499 up to t = 51
    with pytest.raises(MixingCapExceeded):
        epsilon_mixing_time(induce_mdp(cycle2), (0, 0), 0.001, t_cap=51)


def test_mixing_definition_by_enumeration():
    mdp = induce_mdp(random_ergodic_cisg(3, (2, 2), seed=17))
    pi = StationaryPolicy((2, 0, 1))
    eps, cap = 0.02, 200
    t = epsilon_mixing_time(mdp, pi, eps, t_cap=cap)
    gain = stationary_average_reward(mdp, pi)
    ok = lambda tp: all(expected_t_step_average(mdp, pi, s, tp) > gain - eps for s in range(3))  # noqa: E731
    assert all(ok(tp) for tp in range(t, cap + 1))
    if t > 1:
        assert not ok(t - 1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**5), e1=st.floats(0.005, 0.5), e2=st.floats(0.005, 0.5))
def test_mixing_antitone(seed, e1, e2):
    e1, e2 = min(e1, e2), max(e1, e2)
    mdp = induce_mdp(random_ergodic_cisg(3, (2, 2), seed=seed))
    pi = (0, 1, 2)
    assert epsilon_mixing_time(mdp, pi, e1, t_cap=2000) >= epsilon_mixing_time(mdp, pi, e2, t_cap=2000)


@pytest.mark.parametrize("seed", range(5))
def test_cesaro_consistency_and_start_independence(seed):
    mdp = induce_mdp(random_ergodic_cisg(4, (2, 2), seed=seed))
    report = optimal_value_oracle(mdp)
    pi = report.argmax_policy
    averages = [expected_t_step_average(mdp, pi, s, 10_000) for s in range(4)]
    assert max(abs(a - report.optimal_value) for a in averages) < 0.05
    assert max(averages) - min(averages) < 0.05


def test_finite_horizon_policy_equality():
    a = FiniteHorizonPolicy(np.zeros((2, 3), dtype=int))
    assert a == FiniteHorizonPolicy(np.zeros((2, 3), dtype=int))
    assert a.horizon == 2
