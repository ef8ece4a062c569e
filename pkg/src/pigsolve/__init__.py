"""Minimax solver for transient zero-sum stochastic games, with the dice race Pig as the worked instance."""

from .baselines import TurnCountValue, hold_at_policy, min_expected_turns
from .game_model import GameDefinition, TransienceReport, certify_transient, validate_structure
from .matchup import MatchResult, exact_matchup, simulate_matchup
from .matrix_game import MatrixGameSolution, NoCertifiedSolution, saddle_point, solve_matrix_game
from .pig_rules import (
    FINAL,
    INITIAL,
    Action,
    GameConfig,
    State,
    Variant,
    action_sets,
    build_game,
    enumerate_states,
    payoff,
    transitions,
)
from .solve import (
    NonTransientGame,
    Policy,
    SolveReport,
    ValueFunction,
    apply_U,
    extract_policy,
    layered_solve,
    value_iteration,
)

__version__ = "0.1.0"

__all__ = [
    "Action", "FINAL", "GameConfig", "GameDefinition", "INITIAL", "MatchResult", "MatrixGameSolution",
    "NoCertifiedSolution", "NonTransientGame", "Policy", "SolveReport", "State", "TransienceReport",
    "TurnCountValue", "ValueFunction", "Variant", "action_sets", "apply_U", "build_game",
    "certify_transient", "enumerate_states", "exact_matchup", "extract_policy", "hold_at_policy",
    "layered_solve", "min_expected_turns", "payoff", "saddle_point", "simulate_matchup",
    "solve_matrix_game", "transitions", "validate_structure", "value_iteration",
]
