import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cisg.game import Mdp, induce_mdp, random_ergodic_cisg
from cisg.planning import backward_induction
from cisg.rmax import (
    RewardRangeError,
    RmaxAgent,
    RmaxConfig,
    init_model,
    k1_formula,
    k1_threshold,
    run_rmax,
)


def cfg(**kw):
    base = dict(epsilon=0.1, delta=0.1, t_mix=3, r_max=1.0, k1_override=None)
    base.update(kw)
    return RmaxConfig(**base)


def test_k1_spot_value():
    # ceil(4*2*3*1/0.1) = 240, cubed 13,824,000; -6 ln^3(0.1/48) = 1411.9 -> 1412
    assert k1_threshold(2, 2, 3, 1.0, 0.1, 0.1) == 13_824_001


def test_k1_second_arm_hand_value():
    x = math.log(0.1 / 48)
    assert x == pytest.approx(-6.1737, abs=1e-4)
    assert math.ceil(-6 * x**3) == 1412


def test_k1_halving_epsilon_scales_first_arm_by_eight():
    assert k1_formula(2, 2, 3, 1.0, 0.05, 0.1) == 110_592_000 + 1


def test_k1_second_arm_can_dominate():
    # tiny first arm: ceil(4*1*1*1/10)^3 = 1; second arm ceil(-6 ln^3(1e-3/6))
    expected = math.ceil(-6 * math.log(1e-3 / 6) ** 3) + 1
    assert k1_formula(1, 1, 1, 1.0, 10.0, 1e-3) == expected


def test_k1_override_is_logged(caplog):
    with caplog.at_level(logging.INFO, logger="cisg.rmax"):
        assert k1_threshold(2, 2, 3, 1.0, 0.1, 0.1, k1_override=10) == 10
    assert "13824001" in caplog.text


def test_init_model():
    m = init_model(2, 3, cfg())
    assert m.reward_est.shape == (3, 3)
    assert np.all(m.reward_est == 1.0)
    assert np.all(m.trans_est[:, :, 2] == 1.0)
    assert np.all(m.trans_est.sum(axis=-1) == 1.0)
    assert not m.known.any()
    assert all(m.visit_record(s, a) == [] for s in range(3) for a in range(3))
    assert np.isnan(m.reward_seen).all()


@pytest.mark.parametrize("horizon", [1, 4, 9])
def test_fresh_model_plans_full_optimism(horizon):
    m = init_model(3, 2, cfg(r_max=2.0))
    _, values = backward_induction(m.reward_est, m.trans_est, horizon)
    assert np.all(values[horizon] == horizon * 2.0)


def test_fresh_agent_picks_action_zero():
    agent = RmaxAgent(3, 4, cfg(k1_override=5))
    assert agent.act(1) == 0


def test_replan_schedule():
    agent = RmaxAgent(2, 2, cfg(t_mix=3, k1_override=100))
    flags = []
    for _ in range(7):
        agent.act(0)
        flags.append(agent.replanned)
        agent.observe(0, 0, 0.5, 1)
    assert flags == [True, False, False, True, False, False, True]


def test_prefers_unknown_action_over_known_zero_reward():
    agent = RmaxAgent(2, 2, cfg(t_mix=3, k1_override=1))
    flipped = agent.observe(0, 0, 0.0, 1)
    assert flipped and agent.model.known[0, 0]
    # a0: 0 + V2(s1) = 2; a1: 1 + V2(fictitious) = 3
    assert agent.act(0) == 1


def test_first_observation_records_reward():
    agent = RmaxAgent(3, 2, cfg(k1_override=3))
    assert not agent.observe(0, 1, 0.7, 2)
    assert agent.model.reward_seen[0, 1] == 0.7
    assert not agent.model.known[0, 1]


def test_known_flip_uses_frequencies_then_freezes():
    agent = RmaxAgent(3, 2, cfg(k1_override=3))
    results = [agent.observe(0, 0, 0.4, s) for s in (1, 1, 2)]
    assert results == [False, False, True]
    row = agent.model.trans_est[0, 0]
    assert np.allclose(row, [0, 2 / 3, 1 / 3, 0], atol=1e-15)
    assert agent.model.reward_est[0, 0] == 0.4
    before = agent.model.trans_est.copy(), agent.model.visit_counts.copy()
    assert not agent.observe(0, 0, 0.9, 0)
    assert np.array_equal(agent.model.trans_est, before[0])
    assert np.array_equal(agent.model.visit_counts, before[1])


def test_reward_out_of_range():
    agent = RmaxAgent(2, 2, cfg())
    with pytest.raises(RewardRangeError):
        agent.observe(0, 0, 1.5, 1)


def test_single_state_single_action_run():
    mdp = Mdp(np.array([[0.5]]), np.ones((1, 1, 1)), r_max=1.0)
    log = run_rmax(mdp, cfg(k1_override=2, t_mix=1), seed=3, num_steps=10)
    assert [r.event for r in log.records[:2]] == ["replan", "replan;known"]
    total = 0.0
    for t, rec in enumerate(log.records, start=1):
        total += rec.payoff
        assert total / t == 0.5


def test_run_is_deterministic():
    mdp = induce_mdp(random_ergodic_cisg(3, (2, 2), seed=1))
    config = cfg(k1_override=5, t_mix=4)
    a = run_rmax(mdp, config, seed=11, num_steps=2000).to_csv()
    b = run_rmax(mdp, config, seed=11, num_steps=2000).to_csv()
    assert a == b
    assert a != run_rmax(mdp, config, seed=12, num_steps=2000).to_csv()


def test_deterministic_environment_identical_logs(cycle2):
    mdp = induce_mdp(cycle2)
    logs = {run_rmax(mdp, cfg(k1_override=3, t_mix=2), seed=s, num_steps=300).to_csv() for s in (1, 2)}
    assert len(logs) == 1  # no randomness anywhere


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**5), k1=st.integers(1, 8), t_mix=st.integers(1, 6))
def test_run_invariants(seed, k1, t_mix):
    mdp = induce_mdp(random_ergodic_cisg(3, (2, 2), seed=seed))
    config = cfg(k1_override=k1, t_mix=t_mix)
    known_history = []
    optimism_ok = []

    def check(step, agent):
        m = agent.model
        known_history.append(m.known.copy())
        rows = m.known[: m.num_real_states]
        flipped = m.visit_counts[: m.num_real_states][rows]
        assert np.allclose(m.trans_est[: m.num_real_states][rows], flipped / k1, atol=0)
        # unknown pairs keep the optimistic placeholder
        unknown = ~m.known
        assert np.all(m.reward_est[unknown] == 1.0)
        assert np.all(m.trans_est[unknown][:, -1] == 1.0)
        _, values = backward_induction(m.reward_est, m.trans_est, 3)
        q = m.reward_est + m.trans_est @ values[2]
        optimism_ok.append(np.all(q[unknown] == 3.0))

    log = run_rmax(mdp, config, seed=seed, num_steps=400, on_step=check)
    for before, after in zip(known_history, known_history[1:]):
        assert np.all(after >= before)
    assert all(optimism_ok)

    # replans happen exactly at step 0, after a known flip, or after t_mix steps
    since = None
    for t, rec in enumerate(log.records):
        tags = rec.event.split(";")
        expected = t == 0 or "known" in log.records[t - 1].event.split(";") or since == t_mix
        assert ("replan" in tags) == expected
        since = 1 if "replan" in tags else since + 1
