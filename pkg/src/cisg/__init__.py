"""Coordinated model-based learning in common-interest stochastic games."""
from .game import (
    Cisg,
    GameSpecError,
    InducedMdp,
    Mdp,
    check_ergodic,
    induce_mdp,
    load_game,
    parse_game_spec,
    random_ergodic_cisg,
    repeated_game,
    serialize_game,
)
from .indexing import JointActionIndexing, lex_decode, lex_index
from .planning import (
    epsilon_mixing_time,
    expected_t_step_average,
    finite_horizon_plan,
    optimal_value_oracle,
    stationary_average_reward,
)
from .rmax import RmaxAgent, RmaxConfig, k1_threshold, run_rmax

__all__ = [
    "Cisg",
    "GameSpecError",
    "InducedMdp",
    "JointActionIndexing",
    "Mdp",
    "RmaxAgent",
    "RmaxConfig",
    "check_ergodic",
    "epsilon_mixing_time",
    "expected_t_step_average",
    "finite_horizon_plan",
    "induce_mdp",
    "k1_threshold",
    "lex_decode",
    "lex_index",
    "load_game",
    "optimal_value_oracle",
    "parse_game_spec",
    "random_ergodic_cisg",
    "repeated_game",
    "run_rmax",
    "serialize_game",
    "stationary_average_reward",
]
