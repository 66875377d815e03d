"""Per-agent controllers for coordinated learning in common-interest games.

Each controller sees only its own observations. Protocols:

* ``case1``/``case2``: shared joint-action indexing, every agent runs the same
  deterministic R-MAX and plays its own component of the chosen joint action.
* ``case3``: perfect monitoring; a handshake reveals action counts and fixes
  an agent order, then ``case2``.
* ``case4``: counts known, no shared order; trials under privately drawn
  orders, then exploit the best trial with a reward monitor.
* ``case5``: like ``case4`` but also searching over candidate count tuples.
* ``case6``: ``case5`` restarted under a doubling assumed mixing time.
* ``repeated``: single-state games; random play for ``k**3`` steps, then
  lock on the earliest best-payoff step.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Sequence

from .indexing import JointActionIndexing, lex_decode, lex_index  # noqa: F401
from .rmax import RmaxAgent, RmaxConfig, k1_threshold
from .sim import (
    IMPERFECT,
    PERFECT,
    GameEnvironment,
    PerfectObservation,
    ProtocolFault,
    RunLog,
    agent_stream_name,
    lockstep,
    stream,
)


def _exact(x) -> Fraction:
    return Fraction(str(x))


def _smallest_int_above(x) -> int:
    return math.floor(x) + 1


# --------------------------------------------------------------------------
# schedules


def size_candidates(bound: int, num_agents: int) -> tuple[tuple[int, ...], ...]:
    """Every count tuple in ``[1, bound]^n``, lexicographic; fixed across agents."""
    return tuple(itertools.product(range(1, bound + 1), repeat=num_agents))


def doubling_mixing_schedule(start: int = 1) -> Iterator[int]:
    t = start
    while True:
        yield t
        t *= 2


def trials_needed(delta: float, num_agents: int) -> int:
    """Least m with m > log(delta/2) / log(1 - p_same (1 - delta/2)), p_same = 1/n!."""
    p_same = 1.0 / math.factorial(num_agents)
    ratio = math.log(delta / 2) / math.log(1 - p_same * (1 - delta / 2))
    return _smallest_int_above(ratio)


def rmax_step_bound(
    num_states: int, num_actions: int, t_mix: int, k1: int, r_max: float, epsilon: float, delta: float
) -> int:
    """Steps after which R-MAX is treated as epsilon-close with confidence 1 - delta.

    Each of the ``N k`` pairs needs ``K1`` visits and each T-step excursion
    reaches an unknown pair with probability at least ``epsilon / (2 r_max)``;
    the ``ln(1/delta)`` factor buys the confidence.
    """
    excursions = num_states * num_actions * k1 * 2 * r_max / epsilon
    return math.ceil(t_mix * excursions * math.log(1 / delta))


@dataclass(frozen=True)
class ProtocolSchedule:
    m: int
    t_prime: int
    q: int
    b: int
    sizes_order: tuple[tuple[int, ...], ...]
    gamma: float
    epsilon: float
    delta: float
    t_mix: int
    t_prime_rules: dict = field(default_factory=dict, compare=False)

    @property
    def num_trials(self) -> int:
        return self.m * len(self.sizes_order)

    @property
    def budget(self) -> int:
        """Exploration plus the exploitation length ``q``."""
        return self.num_trials * self.t_prime + self.q


def compute_schedule(
    epsilon: float,
    delta: float,
    gamma: float,
    r_max: float,
    n: int,
    t_mix: int,
    b: int = 1,
    *,
    sizes_order: Sequence[Sequence[int]] | None = None,
    num_states: int | None = None,
    k1: int | None = None,
    t_prime_floor: int = 0,
    t_prime_override: int | None = None,
) -> ProtocolSchedule:
    """Smallest ``m``, ``t_prime`` and ``q`` meeting the protocol bounds.

    ``t_prime`` is the max of ``m r_max / epsilon`` (strictly exceeded), the
    R-MAX step bound at confidence ``delta/2`` (only when ``num_states`` and
    ``k1`` are given) and ``t_prime_floor``. ``t_prime_override`` replaces all
    of them. ``q`` strictly exceeds ``2 m |sizes| t_prime / gamma``.
    """
    if sizes_order is None:
        sizes_order = size_candidates(b, n) if b > 1 else ((1,) * n,)
    sizes_order = tuple(tuple(s) for s in sizes_order)
    m = trials_needed(delta, n)
    rules = {"order_loss": _smallest_int_above(m * _exact(r_max) / _exact(epsilon))}
    if num_states is not None and k1 is not None:
        joint = max(math.prod(s) for s in sizes_order)
        rules["rmax_bound"] = rmax_step_bound(num_states, joint, t_mix, k1, r_max, epsilon, delta / 2)
    rules["floor"] = t_prime_floor
    t_prime = max(rules.values())
    if t_prime_override is not None:
        rules["override"] = t_prime_override
        t_prime = t_prime_override
    q = _smallest_int_above(2 * m * len(sizes_order) * t_prime / _exact(gamma))
    return ProtocolSchedule(
        m=m,
        t_prime=int(t_prime),
        q=q,
        b=b,
        sizes_order=sizes_order,
        gamma=gamma,
        epsilon=epsilon,
        delta=delta,
        t_mix=t_mix,
        t_prime_rules=rules,
    )


# --------------------------------------------------------------------------
# controllers


@dataclass(frozen=True)
class LearningParams:
    """Accuracy parameters shared by all agents."""

    epsilon: float
    delta: float
    gamma: float
    r_max: float
    t_mix: int | None = None
    k1_override: int | None = None
    t_prime_override: int | None = None

    def rmax_config(self, t_mix: int | None = None, delta: float | None = None) -> RmaxConfig:
        t_mix = self.t_mix if t_mix is None else t_mix
        if t_mix is None:
            raise ValueError("a mixing time is required")
        return RmaxConfig(
            epsilon=self.epsilon,
            delta=self.delta if delta is None else delta,
            t_mix=t_mix,
            r_max=self.r_max,
            k1_override=self.k1_override,
        )


class BaseController:
    def __init__(self, agent_id: int, num_agents: int, num_states: int, own_count: int, rng):
        self.agent_id = agent_id
        self.num_agents = num_agents
        self.num_states = num_states
        self.own_count = own_count
        self.rng = rng
        self.phase = ""
        self._events: list[str] = []

    def emit(self, tag: str) -> None:
        self._events.append(tag)

    def drain_events(self) -> list[str]:
        events, self._events = self._events, []
        return events


class Emulation:
    """One agent's share of a joint R-MAX run under a joint-action indexing.

    Out-of-range own components (possible when the assumed count exceeds the
    real one) are clamped to the agent's last action.
    """

    def __init__(self, agent_id, own_count, num_states, indexing, config: RmaxConfig, sink):
        self.agent_id = agent_id
        self.own_count = own_count
        self.indexing = indexing
        self.agent = RmaxAgent(num_states, indexing.size, config)
        self.sink = sink
        self.last_index: int | None = None

    @property
    def mismatch(self) -> bool:
        return self.indexing.counts[self.agent_id] != self.own_count

    def act(self, state: int) -> int:
        self.last_index = self.agent.act(state)
        if self.agent.replanned:
            self.sink.emit("replan")
        own = self.indexing.decode(self.last_index)[self.agent_id]
        return min(own, self.own_count - 1)

    def observe(self, obs) -> None:
        if self.agent.observe(obs.state, self.last_index, obs.payoff, obs.next_state):
            self.sink.emit("known")


class EmulationController(BaseController):
    """Cases 1 and 2: all agents share ``indexing`` and the R-MAX config."""

    def __init__(self, agent_id, num_states, own_count, indexing, config, rng=None, tag="rmax"):
        super().__init__(agent_id, len(indexing.counts), num_states, own_count, rng)
        self.emulation = Emulation(agent_id, own_count, num_states, indexing, config, self)
        self.phase = tag

    @property
    def model(self):
        return self.emulation.agent.model

    def act(self, state: int) -> int:
        return self.emulation.act(state)

    def observe(self, obs) -> None:
        self.emulation.observe(obs)


class HandshakeController(BaseController):
    """Case 3: reveal counts by cycling, agree on an order by random draws.

    Draws accumulate into per-agent sequences; agents are ordered by their
    sequences lexicographically (lower first). Another round is played while
    two agents share a sequence, unless both have a single action: such
    agents cannot signal, add a factor 1 to the joint-action space and are
    ordered by agent id.
    """

    def __init__(self, agent_id, num_agents, num_states, own_count, config, rng):
        super().__init__(agent_id, num_agents, num_states, own_count, rng)
        self.config = config
        self.phase = "handshake"
        self.stage = "cycle"
        self.t = 0
        self.counts: dict[int, int] = {agent_id: own_count}
        self.draws: dict[int, list[int]] = {i: [] for i in range(num_agents)}
        self.phase_a_length: int | None = None
        self.rounds = 0
        self.agent_order: tuple[int, ...] | None = None
        self.emulation: Emulation | None = None
        self._draw = None

    @property
    def done(self) -> bool:
        return self.emulation is not None

    @property
    def agreed(self):
        return self.agent_order, tuple(self.counts[i] for i in range(self.num_agents))

    @property
    def model(self):
        return None if self.emulation is None else self.emulation.agent.model

    def act(self, state: int) -> int:
        if self.stage == "cycle":
            return self.t % self.own_count
        if self.stage == "draw":
            self._draw = int(self.rng.integers(self.own_count))
            return self._draw
        return self.emulation.act(state)

    def observe(self, obs) -> None:
        if self.stage == "emulate":
            self.emulation.observe(obs)
            return
        if not isinstance(obs, PerfectObservation):
            raise ProtocolFault("the case3 handshake requires perfect monitoring")
        if self.stage == "cycle":
            for j, a in obs.others_actions.items():
                if j not in self.counts and self.t > 0 and a == 0:
                    self.counts[j] = self.t
            if len(self.counts) == self.num_agents and self.t >= self.own_count:
                self.phase_a_length = self.t + 1
                self.stage = "draw"
                self.emit("counts-known")
            self.t += 1
            return
        self.rounds += 1
        self.draws[self.agent_id].append(self._draw)
        for j, a in obs.others_actions.items():
            self.draws[j].append(a)
        if self._distinguished():
            self.agent_order = tuple(sorted(range(self.num_agents), key=lambda i: (self.draws[i], i)))
            indexing = JointActionIndexing(self.agent_order, self.agreed[1])
            self.emulation = Emulation(
                self.agent_id, self.own_count, self.num_states, indexing, self.config, self
            )
            self.stage = "emulate"
            self.phase = "rmax"
            self.emit("order-agreed")

    def _distinguished(self) -> bool:
        for i, j in itertools.combinations(range(self.num_agents), 2):
            if self.draws[i] == self.draws[j] and not (self.counts[i] == self.counts[j] == 1):
                return False
        return True


@dataclass
class Trial:
    index: int
    sizes: tuple[int, ...]
    ordering: tuple[int, ...]
    emulation: Emulation
    total: float = 0.0
    steps: int = 0

    @property
    def average(self) -> float:
        return self.total / self.steps if self.steps else 0.0


class OrderExplorationController(BaseController):
    """Cases 4 and 5.

    Exploration: for each count tuple in ``schedule.sizes_order``, ``m``
    trials of ``t_prime`` steps, each under a privately drawn agent order
    with a fresh R-MAX. Exploitation: replay the best trial's frozen learner;
    after ``t_mix`` warm-up steps, fall back to the next-best trial whenever
    the running average since adoption drops below the trial's average minus
    ``2 epsilon``.
    """

    def __init__(self, agent_id, num_agents, num_states, own_count, params: LearningParams,
                 schedule: ProtocolSchedule, rng):
        super().__init__(agent_id, num_agents, num_states, own_count, rng)
        self.params = params
        self.schedule = schedule
        self.rmax_config = params.rmax_config(t_mix=schedule.t_mix, delta=params.delta / 2)
        self.trials: list[Trial] = []
        self.current: Trial | None = None
        self.phase = "explore"
        self.ranking: list[int] = []
        self.position = 0
        self.switches = 0
        self.exploit_steps = 0
        self.exploit_total = 0.0
        self.exploit_elapsed = 0

    @property
    def max_switches(self) -> int:
        return self.schedule.num_trials - 1

    @property
    def adopted(self) -> Trial | None:
        return self.trials[self.ranking[self.position]] if self.ranking else None

    def _start_trial(self) -> None:
        i = len(self.trials)
        sizes = self.schedule.sizes_order[i // self.schedule.m]
        ordering = tuple(int(a) for a in self.rng.permutation(self.num_agents))
        indexing = JointActionIndexing(ordering, sizes)
        emulation = Emulation(
            self.agent_id, self.own_count, self.num_states, indexing, self.rmax_config, self
        )
        self.current = Trial(i, sizes, ordering, emulation)
        self.trials.append(self.current)
        self.emit("trial")
        if emulation.mismatch:
            self.emit("mismatch")

    def _adopt(self, position: int) -> None:
        self.position = position
        self.exploit_steps = 0
        self.exploit_total = 0.0
        learner = self.adopted.emulation.agent
        learner.freeze()
        learner.request_replan()

    def act(self, state: int) -> int:
        if self.phase == "explore":
            if self.current is None:
                self._start_trial()
            return self.current.emulation.act(state)
        return self.adopted.emulation.act(state)

    def observe(self, obs) -> None:
        if self.phase == "explore":
            trial = self.current
            trial.emulation.observe(obs)
            trial.total += obs.payoff
            trial.steps += 1
            if trial.steps == self.schedule.t_prime:
                self.current = None
                if len(self.trials) == self.schedule.num_trials:
                    self.ranking = sorted(range(len(self.trials)), key=lambda i: (-self.trials[i].average, i))
                    self.phase = "exploit"
                    self._adopt(0)
                    self.emit("exploit")
            return
        self.adopted.emulation.observe(obs)
        self.exploit_elapsed += 1
        self.exploit_steps += 1
        self.exploit_total += obs.payoff
        if (
            self.exploit_steps >= self.schedule.t_mix
            and self.position + 1 < len(self.ranking)
            and self.exploit_total / self.exploit_steps
            < self.adopted.average - 2 * self.params.epsilon
        ):
            self.switches += 1
            assert self.switches <= self.max_switches
            self._adopt(self.position + 1)
            self.emit("switch")


class MixingSearchController(BaseController):
    """Case 6: restart Case 5 for t = 1, 2, 4, ... with slack gamma/2.

    Phase ``p`` lasts the schedule budget for its assumed mixing time; the
    loop never terminates on its own.
    """

    def __init__(self, agent_id, num_agents, num_states, own_count, params: LearningParams,
                 bound: int, rng):
        super().__init__(agent_id, num_agents, num_states, own_count, rng)
        self.params = params
        self.bound = bound
        self.mixing_times = doubling_mixing_schedule()
        self.phase_index = -1
        self.switches = 0
        self.budgets: list[int] = []
        self._next_phase()

    def schedule_for(self, t_mix: int) -> ProtocolSchedule:
        return case5_schedule(self.num_states, self.num_agents, self.bound, self.params,
                              t_mix=t_mix, gamma=self.params.gamma / 2)

    def _next_phase(self) -> None:
        if self.phase_index >= 0:
            self.switches += self.inner.switches
            self._events.extend(self.inner.drain_events())
        self.phase_index += 1
        self.t_mix = next(self.mixing_times)
        schedule = self.schedule_for(self.t_mix)
        self.budgets.append(schedule.budget)
        self.inner = OrderExplorationController(
            self.agent_id, self.num_agents, self.num_states, self.own_count,
            self.params, schedule, self.rng,
        )
        self.phase = self.inner.phase
        self.steps_in_phase = 0
        self.emit(f"mixing={self.t_mix}")

    @property
    def total_switches(self) -> int:
        return self.switches + self.inner.switches

    def drain_events(self) -> list[str]:
        return super().drain_events() + self.inner.drain_events()

    def act(self, state: int) -> int:
        action = self.inner.act(state)
        self.phase = self.inner.phase
        return action

    def observe(self, obs) -> None:
        self.inner.observe(obs)
        self.steps_in_phase += 1
        if self.steps_in_phase == self.budgets[-1]:
            self._next_phase()


class RepeatedGameController(BaseController):
    """Uniform random play for ``k**3`` steps, then the own action from the
    earliest step with the best payoff, forever."""

    def __init__(self, agent_id, num_agents, own_count, k: int, rng):
        super().__init__(agent_id, num_agents, 1, own_count, rng)
        self.random_steps = k**3
        self.history: list[tuple[int, float]] = []
        self.locked_step: int | None = None
        self.locked_action: int | None = None
        self.phase = "random"

    def act(self, state: int) -> int:
        if self.locked_action is not None:
            return self.locked_action
        return int(self.rng.integers(self.own_count))

    def observe(self, obs) -> None:
        if self.locked_action is not None:
            return
        self.history.append((obs.own_action, obs.payoff))
        if len(self.history) == self.random_steps:
            best = max(p for _, p in self.history)
            self.locked_step = next(i for i, (_, p) in enumerate(self.history) if p == best)
            self.locked_action = self.history[self.locked_step][0]
            self.phase = "locked"
            self.emit("lock")


# --------------------------------------------------------------------------
# builders; each controller receives only what its protocol lets it know


def _rngs(master_seed: int, n: int):
    return [stream(master_seed, agent_stream_name(i)) for i in range(n)]


def make_case1_controllers(num_states, action_counts, params: LearningParams, master_seed: int = 0,
                           indexing: JointActionIndexing | None = None):
    indexing = JointActionIndexing.natural(action_counts) if indexing is None else indexing
    config = params.rmax_config()
    return [
        EmulationController(i, num_states, c, indexing, config, rng)
        for i, (c, rng) in enumerate(zip(action_counts, _rngs(master_seed, len(action_counts))))
    ]


def make_case2_controllers(num_states, action_counts, params: LearningParams, master_seed: int = 0,
                           agent_order: Sequence[int] | None = None):
    order = tuple(range(len(action_counts))) if agent_order is None else tuple(agent_order)
    return make_case1_controllers(num_states, action_counts, params, master_seed,
                                  JointActionIndexing(order, action_counts))


def make_case3_controllers(num_states, action_counts, params: LearningParams, master_seed: int = 0):
    config = params.rmax_config()
    n = len(action_counts)
    return [
        HandshakeController(i, n, num_states, c, config, rng)
        for i, (c, rng) in enumerate(zip(action_counts, _rngs(master_seed, n)))
    ]


def case4_schedule(num_states, action_counts, params: LearningParams) -> ProtocolSchedule:
    counts = tuple(action_counts)
    config = params.rmax_config(delta=params.delta / 2)
    k1 = k1_threshold(num_states, math.prod(counts), config.t_mix, config.r_max,
                      config.epsilon, config.delta, config.k1_override)
    return compute_schedule(
        params.epsilon, params.delta, params.gamma, params.r_max, len(counts), config.t_mix,
        b=1, sizes_order=(counts,), num_states=num_states, k1=k1,
        t_prime_override=params.t_prime_override,
    )


def case5_schedule(num_states, num_agents, bound, params: LearningParams, t_mix=None,
                   gamma=None) -> ProtocolSchedule:
    t_mix = params.t_mix if t_mix is None else t_mix
    gamma = params.gamma if gamma is None else gamma
    config = params.rmax_config(t_mix=t_mix, delta=params.delta / 2)
    k1 = k1_threshold(num_states, bound**num_agents, t_mix, config.r_max,
                      config.epsilon, config.delta, config.k1_override)
    return compute_schedule(
        params.epsilon, params.delta, gamma, params.r_max, num_agents, t_mix,
        b=bound, num_states=num_states, k1=k1, t_prime_override=params.t_prime_override,
    )


def make_case4_controllers(num_states, action_counts, params: LearningParams, master_seed: int = 0,
                           schedule: ProtocolSchedule | None = None):
    schedule = case4_schedule(num_states, action_counts, params) if schedule is None else schedule
    n = len(action_counts)
    return [
        OrderExplorationController(i, n, num_states, c, params, schedule, rng)
        for i, (c, rng) in enumerate(zip(action_counts, _rngs(master_seed, n)))
    ]


def make_case5_controllers(num_states, action_counts, params: LearningParams, bound: int,
                           master_seed: int = 0, schedule: ProtocolSchedule | None = None):
    n = len(action_counts)
    if max(action_counts) > bound:
        raise ValueError(f"action counts {tuple(action_counts)} exceed the bound {bound}")
    schedule = case5_schedule(num_states, n, bound, params) if schedule is None else schedule
    # own_count is the only private fact; the schedule depends on shared data
    return [
        OrderExplorationController(i, n, num_states, c, params, schedule, rng)
        for i, (c, rng) in enumerate(zip(action_counts, _rngs(master_seed, n)))
    ]


def make_case6_controllers(num_states, action_counts, params: LearningParams, bound: int,
                           master_seed: int = 0):
    n = len(action_counts)
    if max(action_counts) > bound:
        raise ValueError(f"action counts {tuple(action_counts)} exceed the bound {bound}")
    params = replace(params, t_mix=None)
    return [
        MixingSearchController(i, n, num_states, c, params, bound, rng)
        for i, (c, rng) in enumerate(zip(action_counts, _rngs(master_seed, n)))
    ]


def make_repeated_controllers(action_counts, k: int, master_seed: int = 0):
    n = len(action_counts)
    return [
        RepeatedGameController(i, n, c, k, rng)
        for i, (c, rng) in enumerate(zip(action_counts, _rngs(master_seed, n)))
    ]


# --------------------------------------------------------------------------
# drivers


def run_protocol(controllers, environment: GameEnvironment, num_steps: int,
                 monitoring: str = IMPERFECT, **kwargs) -> RunLog:
    return lockstep(controllers, environment, num_steps, monitoring, **kwargs)


run_case4 = run_case5 = run_case6 = run_protocol


def run_repeated_game(controllers, environment: GameEnvironment, num_steps: int,
                      monitoring: str = IMPERFECT) -> RunLog:
    if environment.game.num_states != 1:
        raise ValueError("the repeated-game protocol needs a single-state game")
    return lockstep(controllers, environment, num_steps, monitoring)


@dataclass(frozen=True)
class HandshakeResult:
    agent_order: tuple[int, ...]
    action_counts: tuple[int, ...]
    phase_a_length: int
    rounds: int


def run_case3_handshake(controllers, environment: GameEnvironment, max_steps: int = 10_000):
    """Step until every controller has agreed on (order, counts)."""
    log = lockstep(controllers, environment, max_steps, PERFECT,
                   until=lambda cs: all(c.done for c in cs))
    if not all(c.done for c in controllers):
        raise ProtocolFault(f"handshake unfinished after {max_steps} steps")
    results = [
        HandshakeResult(*c.agreed, c.phase_a_length, c.rounds) for c in controllers
    ]
    return results, log


def success_probability_repeated(k: int) -> float:
    """Chance that k**3 uniform joint draws of two k-action agents hit one
    given joint action."""
    return 1 - (1 - 1 / k**2) ** (k**3)

