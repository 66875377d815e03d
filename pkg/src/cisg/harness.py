"""Experiment driver: protocol configs, seeded runs, oracle metrics, artifacts."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from . import coordination as coord
from .game import Cisg, induce_mdp, parse_game_spec, serialize_game
from .indexing import JointActionIndexing
from .planning import optimal_value_oracle
from .rmax import RmaxAgent, run_rmax
from .sim import (
    ENV_STREAM,
    IMPERFECT,
    PERFECT,
    GameEnvironment,
    RunLog,
    agent_stream_name,
    lockstep,
    running_average,
    stream,
)

PROTOCOLS = ("case1", "case2", "case3", "case4", "case5", "case6", "repeated", "rmax-single")
NEEDS_T_MIX = ("case1", "case2", "case3", "case4", "case5", "rmax-single")
NEEDS_BOUND = ("case5", "case6")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str
    monitoring: str = IMPERFECT
    epsilon: float = 0.1
    delta: float = 0.1
    gamma: float = 0.1
    t_mix: int | None = None
    k1_override: int | None = None
    bound: int | None = None
    t_prime: int | None = None
    start_state: int = 0

    def params(self, r_max: float) -> coord.LearningParams:
        return coord.LearningParams(
            epsilon=self.epsilon,
            delta=self.delta,
            gamma=self.gamma,
            r_max=r_max,
            t_mix=self.t_mix,
            k1_override=self.k1_override,
            t_prime_override=self.t_prime,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def validate_config(config: ProtocolConfig, game: Cisg | None = None) -> None:
    p = config.protocol
    if p not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {p!r}; choose from {', '.join(PROTOCOLS)}")
    if config.monitoring not in (PERFECT, IMPERFECT):
        raise ConfigError(f"monitoring must be '{PERFECT}' or '{IMPERFECT}'")
    if p == "case3" and config.monitoring != PERFECT:
        raise ConfigError("case3 requires perfect monitoring (the handshake observes others' actions)")
    if p in NEEDS_T_MIX and config.t_mix is None:
        raise ConfigError(f"{p} requires --t-mix (the mixing time is assumed known)")
    if p == "case6" and config.t_mix is not None:
        raise ConfigError("case6 searches over mixing times; --t-mix is not allowed")
    if p in NEEDS_BOUND and config.bound is None:
        raise ConfigError(f"{p} requires --bound (shared bound on action counts)")
    if config.t_mix is not None and config.t_mix < 1:
        raise ConfigError("--t-mix must be >= 1")
    if not config.epsilon > 0:
        raise ConfigError("--epsilon must be positive")
    if not 0 < config.delta < 1:
        raise ConfigError("--delta must lie in (0, 1)")
    if not 0 < config.gamma < 1:
        raise ConfigError("--gamma must lie in (0, 1)")
    if config.k1_override is not None and config.k1_override < 1:
        raise ConfigError("--k1-override must be a positive integer")
    if config.t_prime is not None and config.t_prime < 1:
        raise ConfigError("--t-prime must be a positive integer")
    if game is None:
        return
    if not 0 <= config.start_state < game.num_states:
        raise ConfigError(f"start state {config.start_state} out of range")
    if p == "repeated" and game.num_states != 1:
        raise ConfigError("the repeated protocol needs a single-state game")
    if config.bound is not None and config.bound < max(game.action_counts):
        raise ConfigError(f"--bound {config.bound} is below an agent's action count")
    if game.r_max <= 0 and p != "repeated":
        raise ConfigError("R-MAX based protocols need rmax > 0")


def build_controllers(game: Cisg, config: ProtocolConfig, seed: int):
    """Controllers for a multi-agent protocol; the game itself stays hidden,
    only its sizes (and rmax) are handed over as each protocol allows."""
    n_states, counts = game.num_states, game.action_counts
    params = config.params(game.r_max)
    p = config.protocol
    if p == "case1":
        return coord.make_case1_controllers(n_states, counts, params, seed)
    if p == "case2":
        return coord.make_case2_controllers(n_states, counts, params, seed)
    if p == "case3":
        return coord.make_case3_controllers(n_states, counts, params, seed)
    if p == "case4":
        return coord.make_case4_controllers(n_states, counts, params, seed)
    if p == "case5":
        return coord.make_case5_controllers(n_states, counts, params, config.bound, seed)
    if p == "case6":
        return coord.make_case6_controllers(n_states, counts, params, config.bound, seed)
    if p == "repeated":
        k = config.bound if config.bound is not None else max(counts)
        return coord.make_repeated_controllers(counts, k, seed)
    raise ConfigError(f"{p} is not a multi-agent protocol")


@dataclass
class Metrics:
    steps: int
    running_average: float
    v_opt: float | None = None
    target: float | None = None
    time_to_target: int | None = None
    switches: int = 0


@dataclass
class SimulationResult:
    log: RunLog
    metrics: Metrics
    controllers: list = field(default_factory=list)


def seeds_snapshot(seed: int, num_agents: int) -> dict:
    return {
        "master": seed,
        "streams": [ENV_STREAM] + [agent_stream_name(i) for i in range(num_agents)],
    }


def run_simulation(
    game: Cisg,
    config: ProtocolConfig,
    seed: int,
    num_steps: int,
    on_step: Callable | None = None,
) -> SimulationResult:
    validate_config(config, game)
    if config.protocol == "rmax-single":
        indexing = JointActionIndexing.natural(game.action_counts)
        mdp = induce_mdp(game, indexing)
        agent = RmaxAgent(mdp.num_states, mdp.num_actions, config.params(game.r_max).rmax_config())
        log = run_rmax(mdp, agent.config, seed, num_steps, config.start_state,
                       decode=indexing.decode, on_step=on_step, agent=agent)
        controllers = [agent]
        streamed = log.payoffs
    else:
        controllers = build_controllers(game, config, seed)
        env = GameEnvironment(game, stream(seed, ENV_STREAM), config.start_state)
        streamed: list[float] = []

        def tally(step, cs):
            streamed.append(log.records[step].payoff)
            if on_step is not None:
                on_step(step, cs)

        log = RunLog()
        lockstep(controllers, env, num_steps, config.monitoring, log=log, on_step=tally)
    log.config = config.to_dict()
    log.seeds = seeds_snapshot(seed, game.num_agents)
    metrics = Metrics(
        steps=len(log),
        running_average=running_average(streamed),
        switches=log.count_events("switch"),
    )
    return SimulationResult(log, metrics, list(controllers))


def sum_payoffs(log: RunLog) -> float:
    return math.fsum(rec.payoff for rec in log.records)


def near_optimal_target(v_opt: float, epsilon: float, gamma: float) -> float:
    return (1 - gamma) * (v_opt - 2 * epsilon)


def evaluate_against_oracle(
    log: RunLog, game: Cisg, epsilon: float, gamma: float, v_opt: float | None = None
) -> Metrics:
    if v_opt is None:
        v_opt = optimal_value_oracle(induce_mdp(game)).optimal_value
    target = near_optimal_target(v_opt, epsilon, gamma)
    total, hit = 0.0, None
    for t, rec in enumerate(log.records, start=1):
        total += rec.payoff
        if hit is None and total / t >= target:
            hit = t
    return Metrics(
        steps=len(log),
        running_average=running_average(log.payoffs),
        v_opt=v_opt,
        target=target,
        time_to_target=hit,
        switches=log.count_events("switch"),
    )


# --------------------------------------------------------------------------
# artifacts

RUNLOG_FILE = "runlog.csv"
SNAPSHOT_FILE = "config.json"


def write_run(directory: Path, result: SimulationResult, game: Cisg, num_steps: int) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / RUNLOG_FILE).write_text(result.log.to_csv())
    snapshot = {
        "config": result.log.config,
        "seeds": result.log.seeds,
        "steps": num_steps,
        "game": serialize_game(game),
    }
    (directory / SNAPSHOT_FILE).write_text(json.dumps(snapshot, indent=2) + "\n")


def replay(snapshot_path: Path) -> SimulationResult:
    """Re-run the experiment described by a ``config.json`` snapshot."""
    snapshot = json.loads(Path(snapshot_path).read_text())
    game = parse_game_spec(snapshot["game"])
    config = ProtocolConfig(**snapshot["config"])
    return run_simulation(game, config, snapshot["seeds"]["master"], snapshot["steps"])
