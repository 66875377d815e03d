"""Deterministic single-agent R-MAX over a finite MDP.

The learner keeps an optimistic model with one extra absorbing state
(index ``N``) paying ``r_max``; unknown state-action pairs lead there. A pair
becomes known after ``K1`` visits, at which point its empirical successor
frequencies and first observed reward replace the placeholder for good.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .game import Mdp
from .planning import backward_induction
from .sim import ENV_STREAM, MdpEnvironment, RunLog, StepRecord, merge_tags, stream

logger = logging.getLogger(__name__)


def _exact(x) -> Fraction:
    # decimal literal as written, so 0.1 is 1/10
    return Fraction(str(x))


def k1_formula(N: int, k: int, t_mix: int, r_max: float, epsilon: float, delta: float) -> int:
    if min(N, k, t_mix) < 1 or r_max <= 0 or epsilon <= 0 or not 0 < delta < 1:
        raise ValueError("k1 arguments out of range")
    first = math.ceil(4 * N * t_mix * _exact(r_max) / _exact(epsilon)) ** 3
    second = math.ceil(-6 * math.log(delta / (6 * N * k * k)) ** 3)
    return max(first, second) + 1


def k1_threshold(
    N: int,
    k: int,
    t_mix: int,
    r_max: float,
    epsilon: float,
    delta: float,
    k1_override: int | None = None,
) -> int:
    formula = k1_formula(N, k, t_mix, r_max, epsilon, delta)
    if k1_override is None:
        logger.info("K1 = %d (N=%d k=%d T=%d)", formula, N, k, t_mix)
        return formula
    if k1_override < 1:
        raise ValueError("k1_override must be a positive integer")
    logger.info("K1 override %d in place of formula value %d", k1_override, formula)
    return int(k1_override)


@dataclass(frozen=True)
class RmaxConfig:
    epsilon: float
    delta: float
    t_mix: int
    r_max: float
    k1_override: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0 or not 0 < self.delta < 1 or self.t_mix < 1 or self.r_max <= 0:
            raise ValueError(f"invalid R-MAX configuration {self}")

    @property
    def replan_horizon(self) -> int:
        return self.t_mix


class RmaxModel:
    """Optimistic internal model over ``N + 1`` states and ``k`` actions."""

    def __init__(self, num_real_states: int, num_actions: int, r_max: float):
        if num_real_states < 1 or num_actions < 1:
            raise ValueError("model sizes must be positive")
        n, k = num_real_states, num_actions
        self.num_real_states = n
        self.num_actions = k
        self.fictitious_state = n
        self.r_max = r_max
        self.reward_est = np.full((n + 1, k), float(r_max))
        self.trans_est = np.zeros((n + 1, k, n + 1))
        self.trans_est[:, :, n] = 1.0
        self.known = np.zeros((n + 1, k), dtype=bool)
        self.visit_counts = np.zeros((n + 1, k, n + 1), dtype=np.int64)
        self.visits = np.zeros((n + 1, k), dtype=np.int64)
        self.reward_seen = np.full((n + 1, k), np.nan)

    def as_mdp(self) -> Mdp:
        return Mdp(self.reward_est, self.trans_est, r_max=self.r_max, validate=False)

    def visit_record(self, state: int, action: int) -> list[int]:
        """Successor multiset, expanded in state order."""
        counts = self.visit_counts[state, action]
        return [s for s in range(counts.shape[0]) for _ in range(counts[s])]

    def __eq__(self, other):
        if not isinstance(other, RmaxModel):
            return NotImplemented
        return (
            self.num_real_states == other.num_real_states
            and self.num_actions == other.num_actions
            and self.r_max == other.r_max
            and np.array_equal(self.reward_est, other.reward_est)
            and np.array_equal(self.trans_est, other.trans_est)
            and np.array_equal(self.known, other.known)
            and np.array_equal(self.visit_counts, other.visit_counts)
            and np.array_equal(self.reward_seen, other.reward_seen, equal_nan=True)
        )

    __hash__ = None


def init_model(N: int, k: int, config: RmaxConfig) -> RmaxModel:
    return RmaxModel(N, k, config.r_max)


class RewardRangeError(ValueError):
    pass


class RmaxAgent:
    """R-MAX run state: model, current T-step plan and replan bookkeeping."""

    def __init__(self, num_states: int, num_actions: int, config: RmaxConfig, k1: int | None = None):
        self.config = config
        self.k1 = (
            k1
            if k1 is not None
            else k1_threshold(
                num_states,
                num_actions,
                config.t_mix,
                config.r_max,
                config.epsilon,
                config.delta,
                config.k1_override,
            )
        )
        self.model = init_model(num_states, num_actions, config)
        self.plan: np.ndarray | None = None
        self.cursor = 0
        self.replan_pending = True
        self.replanned = False
        self.frozen = False
        self.step_count = 0
        self.known_count = 0

    @property
    def horizon(self) -> int:
        return self.config.replan_horizon

    def request_replan(self) -> None:
        self.replan_pending = True

    def freeze(self) -> None:
        """Stop learning; later observations leave the model untouched."""
        self.frozen = True

    def act(self, state: int) -> int:
        if not 0 <= state < self.model.num_real_states:
            raise ValueError(f"state {state} is not a real state")
        self.replanned = self.replan_pending or self.cursor >= self.horizon
        if self.replanned:
            self.plan, _ = backward_induction(
                self.model.reward_est, self.model.trans_est, self.horizon
            )
            self.cursor = 0
            self.replan_pending = False
        action = int(self.plan[self.cursor, state])
        self.cursor += 1
        self.step_count += 1
        return action

    def observe(self, state: int, action: int, reward: float, next_state: int) -> bool:
        """Record one transition; return True iff the pair just became known."""
        m = self.model
        if not 0 <= reward <= self.config.r_max:
            raise RewardRangeError(f"reward {reward} outside [0, {self.config.r_max}]")
        if self.frozen or m.known[state, action]:
            return False
        if np.isnan(m.reward_seen[state, action]):
            m.reward_seen[state, action] = reward
        m.visit_counts[state, action, next_state] += 1
        m.visits[state, action] += 1
        if m.visits[state, action] < self.k1:
            return False
        m.known[state, action] = True
        m.trans_est[state, action] = m.visit_counts[state, action] / m.visits[state, action]
        m.reward_est[state, action] = m.reward_seen[state, action]
        self.known_count += 1
        self.replan_pending = True
        return True


def run_rmax(
    mdp: Mdp,
    config: RmaxConfig,
    seed: int,
    num_steps: int,
    start_state: int = 0,
    decode: Callable[[int], Sequence[int]] | None = None,
    on_step: Callable[[int, RmaxAgent], None] | None = None,
    agent: RmaxAgent | None = None,
) -> RunLog:
    """Centralized R-MAX against a hidden MDP sampled with the environment
    stream of ``seed``. ``decode`` maps actions to per-agent joint actions
    for the log's actions column."""
    env = MdpEnvironment(mdp, stream(seed, ENV_STREAM), start_state)
    agent = RmaxAgent(mdp.num_states, mdp.num_actions, config) if agent is None else agent
    log = RunLog(config={"protocol": "rmax-single", "k1": agent.k1}, seeds={"master": seed})
    for _ in range(num_steps):
        state = env.state
        action = agent.act(state)
        replanned = agent.replanned
        reward, next_state = env.step(action)
        flipped = agent.observe(state, action, reward, next_state)
        events = merge_tags(["replan" if replanned else "", "known" if flipped else ""], ";")
        actions = tuple(decode(action)) if decode is not None else (action,)
        log.append(StepRecord(len(log), state, actions, reward, "rmax", events))
        if on_step is not None:
            on_step(len(log) - 1, agent)
    return log
