"""Finite-horizon planning and brute-force average-reward oracles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .game import DEFAULT_POLICY_CAP, Mdp, SizeCapError

# Two Q-values closer than this count as a tie, resolved by the lower action.
TIE_ATOL = 1e-12
RESIDUAL_TOL = 1e-9


class ReducibleChainError(ValueError):
    """The stationary-distribution solve failed: the chain is not irreducible."""


class MixingCapExceeded(ValueError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"no mixing time T <= {cap}")


@dataclass(frozen=True, eq=False)
class FiniteHorizonPolicy:
    """Pure nonstationary policy; ``actions[t, s]`` is the action at step ``t``."""

    actions: np.ndarray

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def action(self, t: int, state: int) -> int:
        return int(self.actions[t, state])

    def __eq__(self, other):
        if not isinstance(other, FiniteHorizonPolicy):
            return NotImplemented
        return np.array_equal(self.actions, other.actions)

    __hash__ = None


@dataclass(frozen=True)
class StationaryPolicy:
    actions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    def action(self, t: int, state: int) -> int:
        return self.actions[state]


@dataclass(frozen=True)
class ValueReport:
    optimal_value: float
    argmax_policy: StationaryPolicy
    per_policy_gain: dict[tuple[int, ...], float] | None = None


def backward_induction(reward: np.ndarray, transition: np.ndarray, horizon: int):
    """Return ``(actions, values)`` for ``horizon`` steps from arrays.

    ``values[h]`` is the optimal expected total reward with ``h`` steps to go
    (``values[0] == 0``); ``actions[t]`` is the greedy action at step ``t``,
    i.e. with ``horizon - t`` steps to go.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = reward.shape[0]
    values = np.zeros((horizon + 1, n))
    actions = np.empty((horizon, n), dtype=np.int64)
    for h in range(1, horizon + 1):
        q = reward + transition @ values[h - 1]
        best = q.max(axis=1)
        # first index within TIE_ATOL of the max
        actions[horizon - h] = np.argmax(q >= (best - TIE_ATOL)[:, None], axis=1)
        values[h] = best
    return actions, values


def finite_horizon_plan(mdp: Mdp, horizon: int) -> tuple[FiniteHorizonPolicy, np.ndarray]:
    actions, values = backward_induction(mdp.reward, mdp.transition, horizon)
    return FiniteHorizonPolicy(actions), values


def _policy_action(policy, t: int, state: int) -> int:
    if isinstance(policy, FiniteHorizonPolicy):
        return policy.action(t, state)
    if isinstance(policy, StationaryPolicy):
        return policy.action(t, state)
    return int(policy[state])


def expected_t_step_average(mdp: Mdp, policy, start_state: int, t: int) -> float:
    """Exact expected average of the first ``t`` rewards, by propagating the
    state distribution forward."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if isinstance(policy, FiniteHorizonPolicy) and t > policy.horizon:
        raise ValueError(f"t={t} exceeds the policy horizon {policy.horizon}")
    n = mdp.num_states
    dist = np.zeros(n)
    dist[start_state] = 1.0
    total = 0.0
    states = np.arange(n)
    for step in range(t):
        acts = [_policy_action(policy, step, s) for s in range(n)]
        total += float(dist @ mdp.reward[states, acts])
        dist = dist @ mdp.transition[states, acts]
    return total / t


def policy_chain(mdp: Mdp, policy) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and reward vector of a stationary policy."""
    acts = list(policy.actions if isinstance(policy, StationaryPolicy) else policy)
    states = np.arange(mdp.num_states)
    return mdp.transition[states, acts], mdp.reward[states, acts]


def stationary_distribution(p: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ReducibleChainError(str(exc)) from exc
    if np.linalg.cond(a) > 1e12:
        raise ReducibleChainError("ill-conditioned balance equations")
    residual = np.abs(pi @ p - pi).max()
    if residual >= RESIDUAL_TOL or np.any(pi < -RESIDUAL_TOL):
        raise ReducibleChainError(f"stationary solve residual {residual:.3g}")
    return pi


def stationary_average_reward(mdp: Mdp, policy) -> float:
    p, r = policy_chain(mdp, policy)
    return float(stationary_distribution(p) @ r)


def optimal_value_oracle(
    mdp: Mdp, cap: int = DEFAULT_POLICY_CAP, keep_table: bool = False
) -> ValueReport:
    """Best gain over all pure stationary policies.

    Policies are enumerated lexicographically; a later policy replaces the
    incumbent only if it is better by more than ``TIE_ATOL``.
    """
    n, k = mdp.num_states, mdp.num_actions
    if k**n > cap:
        raise SizeCapError(f"{k}^{n} = {k**n} policies exceeds cap {cap}")
    best_gain, best = -math.inf, None
    table = {} if keep_table else None
    for acts in itertools.product(range(k), repeat=n):
        gain = stationary_average_reward(mdp, acts)
        if table is not None:
            table[acts] = gain
        if gain > best_gain + TIE_ATOL:
            best_gain, best = gain, acts
    return ValueReport(best_gain, StationaryPolicy(best), table)


def default_mixing_cap(mdp: Mdp, epsilon: float, max_actions: int | None = None) -> int:
    max_actions = mdp.num_actions if max_actions is None else max_actions
    return 10 * mdp.num_states * max_actions * math.ceil(mdp.r_max / epsilon)


def epsilon_mixing_time(
    mdp: Mdp, policy, epsilon: float, t_cap: int | None = None
) -> int:
    """Least T <= t_cap with U(s, pi, t') > U(pi) - epsilon for all s and all
    t' in [T, t_cap]. Raises :class:`MixingCapExceeded` if none exists."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if t_cap is None:
        t_cap = default_mixing_cap(mdp, epsilon)
    p, r = policy_chain(mdp, policy)
    gain = float(stationary_distribution(p) @ r)
    threshold = gain - epsilon
    dist = np.eye(mdp.num_states)
    cumulative = np.zeros(mdp.num_states)
    last_bad = 0
    for t in range(1, t_cap + 1):
        cumulative += dist @ r
        dist = dist @ p
        if np.any(cumulative / t <= threshold):
            last_bad = t
    if last_bad == t_cap:
        raise MixingCapExceeded(t_cap)
    return last_bad + 1
