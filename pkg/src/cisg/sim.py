"""Seeded environments, monitoring-filtered observations, run logs.

Every random draw in a simulation comes from a named stream derived from a
master seed; the environment and each agent own separate streams.
"""
from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .game import Cisg, Mdp

ENV_STREAM = "environment"
PERFECT = "perfect"
IMPERFECT = "imperfect"
CSV_HEADER = ("step", "state", "actions", "payoff", "phase", "event")


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``name``, keyed by a CRC of the name."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(zlib.crc32(name.encode()),))
    return np.random.default_rng(seq)


def agent_stream_name(agent_id: int) -> str:
    return f"agent-{agent_id}"


def _sample(rng: np.random.Generator, cdf: np.ndarray) -> int:
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(idx, cdf.shape[0] - 1)


class MdpEnvironment:
    """Sampling interface over a hidden MDP (used for centralized R-MAX)."""

    def __init__(self, mdp: Mdp, rng: np.random.Generator, start_state: int = 0):
        self._reward = mdp.reward
        self._cdf = np.cumsum(mdp.transition, axis=-1)
        self._rng = rng
        self.state = start_state

    def step(self, action: int) -> tuple[float, int]:
        s = self.state
        reward = float(self._reward[s, action])
        self.state = _sample(self._rng, self._cdf[s, action])
        return reward, self.state


class GameEnvironment:
    """Sampling interface over a hidden CISG, stepped with joint actions."""

    def __init__(self, game: Cisg, rng: np.random.Generator, start_state: int = 0):
        self.game = game
        self._cdf = np.cumsum(game.transition, axis=-1)
        self._rng = rng
        self.state = start_state

    def step(self, joint: Sequence[int]) -> tuple[float, int]:
        cell = (self.state, *joint)
        reward = float(self.game.reward[cell])
        self.state = _sample(self._rng, self._cdf[cell])
        return reward, self.state


@dataclass(frozen=True, slots=True)
class Observation:
    """What an agent sees under imperfect monitoring."""

    state: int
    own_action: int
    payoff: float
    next_state: int


@dataclass(frozen=True, slots=True)
class PerfectObservation:
    """Perfect monitoring adds the other agents' actions, keyed by agent id."""

    state: int
    own_action: int
    payoff: float
    next_state: int
    others_actions: dict[int, int]


def make_observation(agent_id, state, joint, payoff, next_state, monitoring):
    if monitoring == PERFECT:
        others = {i: a for i, a in enumerate(joint) if i != agent_id}
        return PerfectObservation(state, joint[agent_id], payoff, next_state, others)
    if monitoring == IMPERFECT:
        return Observation(state, joint[agent_id], payoff, next_state)
    raise ValueError(f"unknown monitoring mode {monitoring!r}")


class Controller(Protocol):
    agent_id: int
    phase: str

    def act(self, state: int) -> int: ...

    def observe(self, obs: Observation | PerfectObservation) -> None: ...

    def drain_events(self) -> list[str]: ...


def merge_tags(tags: Iterable[str], sep: str) -> str:
    seen: list[str] = []
    for tag in tags:
        if tag and tag not in seen:
            seen.append(tag)
    return sep.join(seen)


@dataclass(frozen=True)
class StepRecord:
    step: int
    state: int
    actions: tuple[int, ...]
    payoff: float
    phase: str
    event: str

    def row(self) -> list[str]:
        return [
            str(self.step),
            str(self.state),
            "/".join(map(str, self.actions)),
            repr(self.payoff),
            self.phase,
            self.event,
        ]


@dataclass
class RunLog:
    records: list[StepRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def append(self, record: StepRecord) -> None:
        if record.step != len(self.records):
            raise ValueError("run log is append-only and contiguous")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def payoffs(self) -> list[float]:
        return [r.payoff for r in self.records]

    def count_events(self, tag: str) -> int:
        return sum(tag in r.event.split(";") for r in self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in self.records:
            writer.writerow(rec.row())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunLog":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected run-log header {header}")
        log = cls()
        for step, state, actions, payoff, phase, event in reader:
            log.append(
                StepRecord(
                    int(step),
                    int(state),
                    tuple(int(a) for a in actions.split("/")),
                    float(payoff),
                    phase,
                    event,
                )
            )
        return log


def running_average(payoffs: Sequence[float]) -> float:
    """Correctly rounded mean, so n copies of r average to exactly r."""
    return math.fsum(payoffs) / len(payoffs) if len(payoffs) else 0.0


class ProtocolFault(RuntimeError):
    """A controller misbehaved (e.g. returned an out-of-range action)."""


def lockstep(
    controllers: Sequence[Controller],
    env: GameEnvironment,
    num_steps: int,
    monitoring: str,
    log: RunLog | None = None,
    on_step: Callable[[int, Sequence[Controller]], None] | None = None,
    until: Callable[[Sequence[Controller]], bool] | None = None,
) -> RunLog:
    """Advance all controllers simultaneously for ``num_steps`` stages."""
    log = RunLog() if log is None else log
    counts = env.game.action_counts
    if len(controllers) != len(counts):
        raise ValueError(f"{len(controllers)} controllers for {len(counts)} agents")
    for _ in range(num_steps):
        if until is not None and until(controllers):
            break
        state = env.state
        joint = tuple(c.act(state) for c in controllers)
        for i, (a, c) in enumerate(zip(joint, counts)):
            if not (isinstance(a, (int, np.integer)) and 0 <= a < c):
                raise ProtocolFault(
                    f"step {len(log)}: agent {i} chose action {a!r} outside [0, {c}) "
                    f"in state {state} (phase {controllers[i].phase})"
                )
        joint = tuple(int(a) for a in joint)
        phase = merge_tags((c.phase for c in controllers), "/")
        payoff, next_state = env.step(joint)
        for i, c in enumerate(controllers):
            c.observe(make_observation(i, state, joint, payoff, next_state, monitoring))
        events = merge_tags((e for c in controllers for e in c.drain_events()), ";")
        log.append(StepRecord(len(log), state, joint, payoff, phase, events))
        if on_step is not None:
            on_step(len(log) - 1, controllers)
    return log
