"""Common-interest stochastic games: data model, text format, induced MDPs.

A game stores its common payoff as an array of shape ``(N, f_1, ..., f_n)``
and its transition kernel as ``(N, f_1, ..., f_n, N)``. Joint actions are
tuples indexed by agent id.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .indexing import JointActionIndexing

ROW_TOL = 1e-9
DEFAULT_POLICY_CAP = 10**6


class GameSpecError(ValueError):
    """Raised for malformed or inconsistent game-spec documents."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SizeCapError(ValueError):
    """Raised when an exhaustive enumeration would exceed its cap."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_kernel(reward: np.ndarray, transition: np.ndarray, r_max: float) -> None:
    if np.any(reward < 0) or np.any(reward > r_max):
        raise GameSpecError(f"reward outside [0, {r_max}]")
    if np.any(transition < 0):
        raise GameSpecError("negative transition probability")
    sums = transition.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_TOL):
        raise GameSpecError("transition row does not sum to 1")


@dataclass(frozen=True, eq=False)
class Cisg:
    """An n-agent common-interest stochastic game."""

    action_counts: tuple[int, ...]
    r_max: float
    reward: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        counts = tuple(int(c) for c in self.action_counts)
        object.__setattr__(self, "action_counts", counts)
        object.__setattr__(self, "r_max", float(self.r_max))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "transition", _frozen(self.transition))
        if len(counts) < 2:
            raise GameSpecError("a game needs at least 2 agents")
        if any(c < 1 for c in counts):
            raise GameSpecError("action counts must be positive")
        if self.r_max < 0:
            raise GameSpecError("rmax must be nonnegative")
        n_states = self.reward.shape[0]
        if n_states < 1 or self.reward.shape != (n_states, *counts):
            raise GameSpecError(f"reward table has shape {self.reward.shape}")
        if self.transition.shape != (n_states, *counts, n_states):
            raise GameSpecError(f"transition table has shape {self.transition.shape}")
        _check_kernel(self.reward, self.transition, self.r_max)

    @property
    def num_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_agents(self) -> int:
        return len(self.action_counts)

    @property
    def num_joint_actions(self) -> int:
        return math.prod(self.action_counts)

    def joint_actions(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(c) for c in self.action_counts))

    def payoff(self, state: int, joint: Sequence[int]) -> float:
        return float(self.reward[(state, *joint)])

    def next_distribution(self, state: int, joint: Sequence[int]) -> np.ndarray:
        return self.transition[(state, *joint)]

    def __eq__(self, other):
        if not isinstance(other, Cisg):
            return NotImplemented
        return (
            self.action_counts == other.action_counts
            and self.r_max == other.r_max
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.transition, other.transition)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP with rewards ``(N, k)`` and transitions ``(N, k, N)``.

    Built from a game by :func:`induce_mdp`; also used directly by the planner.
    """

    reward: np.ndarray
    transition: np.ndarray
    r_max: float | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "transition", _frozen(self.transition))
        if self.r_max is None:
            object.__setattr__(self, "r_max", float(self.reward.max()))
        n, k = self.reward.shape
        if self.transition.shape != (n, k, n):
            raise GameSpecError(f"transition table has shape {self.transition.shape}")
        if self.validate:
            _check_kernel(self.reward, self.transition, self.r_max)

    @property
    def num_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return np.array_equal(self.reward, other.reward) and np.array_equal(
            self.transition, other.transition
        )

    __hash__ = None


InducedMdp = Mdp


def induce_mdp(game: Cisg, indexing: JointActionIndexing | None = None) -> Mdp:
    """Single-controller MDP whose action ``j`` is ``indexing.decode(j)``."""
    if indexing is None:
        indexing = JointActionIndexing.natural(game.action_counts)
    if tuple(indexing.counts) != game.action_counts:
        raise ValueError("indexing counts differ from the game's action counts")
    k = indexing.size
    reward = np.empty((game.num_states, k))
    transition = np.empty((game.num_states, k, game.num_states))
    for j in range(k):
        joint = indexing.decode(j)
        reward[:, j] = game.reward[(slice(None), *joint)]
        transition[:, j, :] = game.transition[(slice(None), *joint)]
    return Mdp(reward, transition, r_max=game.r_max)


# --------------------------------------------------------------------------
# text format


def parse_game_spec(text: str) -> Cisg:
    header: dict[str, list[str]] = {}
    rewards: dict[tuple[int, ...], tuple[float, int]] = {}
    trans: dict[tuple[int, ...], dict[int, float]] = {}
    trans_lines: dict[tuple[int, ...], int] = {}
    seen_magic = False
    n_states = n_agents = None
    counts: tuple[int, ...] = ()

    def ints(tokens, lineno):
        try:
            return [int(t) for t in tokens]
        except ValueError:
            raise GameSpecError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None

    def real(token, lineno):
        try:
            return float(token)
        except ValueError:
            raise GameSpecError(f"expected a number, got {token!r}", lineno) from None

    def check_cell(cell, lineno):
        s, *joint = cell
        if not 0 <= s < n_states:
            raise GameSpecError(f"state {s} out of range", lineno)
        for i, (a, c) in enumerate(zip(joint, counts)):
            if not 0 <= a < c:
                raise GameSpecError(f"action {a} out of range for agent {i}", lineno)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw, *rest = line.split()
        if not seen_magic:
            if kw != "cisg" or rest != ["v1"]:
                raise GameSpecError("document must start with 'cisg v1'", lineno)
            seen_magic = True
            continue
        if kw in ("states", "agents", "actions", "rmax"):
            if kw in header:
                raise GameSpecError(f"duplicate '{kw}' line", lineno)
            header[kw] = rest
            if kw == "states":
                (n_states,) = ints(rest, lineno) if len(rest) == 1 else (None,)
                if n_states is None or n_states < 1:
                    raise GameSpecError("'states' takes one positive integer", lineno)
            elif kw == "agents":
                (n_agents,) = ints(rest, lineno) if len(rest) == 1 else (None,)
                if n_agents is None or n_agents < 2:
                    raise GameSpecError("'agents' takes one integer >= 2", lineno)
            elif kw == "actions":
                if n_agents is None:
                    raise GameSpecError("'actions' must follow 'agents'", lineno)
                counts = tuple(ints(rest, lineno))
                if len(counts) != n_agents or any(c < 1 for c in counts):
                    raise GameSpecError(f"'actions' needs {n_agents} positive integers", lineno)
            elif len(rest) != 1:
                raise GameSpecError("'rmax' takes one number", lineno)
            continue
        if kw not in ("reward", "trans"):
            raise GameSpecError(f"unknown keyword {kw!r}", lineno)
        if n_states is None or not counts or "rmax" not in header:
            raise GameSpecError(f"'{kw}' before states/agents/actions/rmax header", lineno)
        n = len(counts)
        if kw == "reward":
            if len(rest) != n + 2:
                raise GameSpecError(f"'reward' takes {n + 2} fields", lineno)
            cell = tuple(ints(rest[:-1], lineno))
            check_cell(cell, lineno)
            if cell in rewards:
                raise GameSpecError(
                    f"duplicate reward for state {cell[0]}, joint action {cell[1:]} "
                    f"(first on line {rewards[cell][1]})",
                    lineno,
                )
            rewards[cell] = (real(rest[-1], lineno), lineno)
        else:
            if len(rest) != n + 3:
                raise GameSpecError(f"'trans' takes {n + 3} fields", lineno)
            *cell_tok, nxt_tok, p_tok = rest
            cell = tuple(ints(cell_tok, lineno))
            check_cell(cell, lineno)
            (nxt,) = ints([nxt_tok], lineno)
            if not 0 <= nxt < n_states:
                raise GameSpecError(f"successor state {nxt} out of range", lineno)
            row = trans.setdefault(cell, {})
            if nxt in row:
                raise GameSpecError(
                    f"duplicate transition {cell[0]} {cell[1:]} -> {nxt}", lineno
                )
            p = real(p_tok, lineno)
            if p < 0:
                raise GameSpecError("negative transition probability", lineno)
            row[nxt] = p
            trans_lines.setdefault(cell, lineno)

    if not seen_magic:
        raise GameSpecError("empty document")
    for kw in ("states", "agents", "actions", "rmax"):
        if kw not in header:
            raise GameSpecError(f"missing '{kw}' line")
    r_max = real(header["rmax"][0], None)
    if r_max < 0:
        raise GameSpecError("rmax must be nonnegative")

    reward = np.zeros((n_states, *counts))
    transition = np.zeros((n_states, *counts, n_states))
    for s in range(n_states):
        for joint in itertools.product(*(range(c) for c in counts)):
            cell = (s, *joint)
            if cell not in rewards:
                raise GameSpecError(f"missing reward for state {s}, joint action {joint}")
            r, lineno = rewards[cell]
            if not 0 <= r <= r_max:
                raise GameSpecError(f"reward {r} outside [0, {r_max}]", lineno)
            reward[cell] = r
            if cell not in trans:
                raise GameSpecError(f"missing transition for state {s}, joint action {joint}")
            for nxt, p in trans[cell].items():
                transition[(*cell, nxt)] = p
            total = math.fsum(trans[cell].values())
            if abs(total - 1.0) > ROW_TOL:
                raise GameSpecError(
                    f"transition mass for state {s}, joint action {joint} sums to {total}",
                    trans_lines[cell],
                )
    return Cisg(counts, r_max, reward, transition)


def serialize_game(game: Cisg) -> str:
    lines = [
        "cisg v1",
        f"states {game.num_states}",
        f"agents {game.num_agents}",
        "actions " + " ".join(map(str, game.action_counts)),
        f"rmax {game.r_max!r}",
    ]
    for s in range(game.num_states):
        for joint in game.joint_actions():
            acts = " ".join(map(str, joint))
            lines.append(f"reward {s} {acts} {float(game.reward[(s, *joint)])!r}")
    for s in range(game.num_states):
        for joint in game.joint_actions():
            acts = " ".join(map(str, joint))
            row = game.transition[(s, *joint)]
            for nxt in np.flatnonzero(row):
                lines.append(f"trans {s} {acts} {nxt} {float(row[nxt])!r}")
    return "\n".join(lines) + "\n"


def load_game(path) -> Cisg:
    with open(path) as fh:
        return parse_game_spec(fh.read())


# --------------------------------------------------------------------------
# ergodicity


@dataclass(frozen=True)
class ErgodicityReport:
    ergodic: bool
    policies_checked: int
    witness_policy: tuple[int, ...] | None = None
    unreachable: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.ergodic


def _reachability(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(max(1, math.ceil(math.log2(max(n, 2))))):
        reach = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
    return reach


def policy_count(num_actions: int, num_states: int) -> int:
    return num_actions**num_states


def check_ergodic(game: Cisg | Mdp, cap: int = DEFAULT_POLICY_CAP) -> ErgodicityReport:
    """Exhaustively check every pure stationary policy's chain is irreducible.

    Policies are visited in lexicographic order; the first failing one is
    returned as the witness together with a pair ``(i, j)`` such that ``j`` is
    unreachable from ``i``.
    """
    mdp = induce_mdp(game) if isinstance(game, Cisg) else game
    n, k = mdp.num_states, mdp.num_actions
    total = policy_count(k, n)
    if total > cap:
        raise SizeCapError(f"{k}^{n} = {total} policies exceeds cap {cap}")
    support = mdp.transition > 0
    rows = np.arange(n)
    for checked, policy in enumerate(itertools.product(range(k), repeat=n), start=1):
        adj = support[rows, list(policy)]
        reach = _reachability(adj)
        if not reach.all():
            i, j = map(int, np.argwhere(~reach)[0])
            return ErgodicityReport(False, checked, tuple(policy), (i, j))
    return ErgodicityReport(True, total)


# --------------------------------------------------------------------------
# generators and fixtures


def random_ergodic_cisg(
    num_states: int,
    action_counts: Sequence[int],
    r_max: float = 1.0,
    seed: int = 0,
    floor: float = 0.01,
) -> Cisg:
    """Random game whose every transition entry is at least ``floor``."""
    if num_states < 1 or any(c < 1 for c in action_counts):
        raise ValueError("sizes must be positive")
    if not 0 < floor * num_states <= 1:
        raise ValueError(f"floor {floor} infeasible for {num_states} states")
    rng = np.random.default_rng(seed)
    counts = tuple(action_counts)
    reward = rng.uniform(0.0, r_max, size=(num_states, *counts))
    mass = rng.dirichlet(np.ones(num_states), size=(num_states, *counts))
    transition = floor + (1.0 - floor * num_states) * mass
    transition /= transition.sum(axis=-1, keepdims=True)
    return Cisg(counts, r_max, reward, transition)


def repeated_game(payoffs, r_max: float | None = None) -> Cisg:
    """Single-state game wrapping a payoff tensor indexed by joint action."""
    payoffs = np.asarray(payoffs, dtype=float)
    r_max = float(payoffs.max()) if r_max is None else r_max
    transition = np.ones((1, *payoffs.shape, 1))
    return Cisg(payoffs.shape, r_max, payoffs[None, ...], transition)
