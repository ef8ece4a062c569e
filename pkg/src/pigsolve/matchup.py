"""Head-to-head evaluation of two pure stationary policies.

Policy A always sits in the player-one seat of the state space and B in the
player-two seat; the Initial state's coin decides who moves first.  All
probabilities are from A's point of view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .game_model import GameDefinition
from .solve import LAYER_RESIDUAL, Policy, _check_layered, _layer_args

SEATS = ("coin", "alternate")


@dataclass(frozen=True)
class MatchResult:
    p_win_first_seat: float
    p_win_second_seat: float
    p_win_fair_start: float
    method: str
    games: int = 0
    seed: int | None = None
    std_error: float | None = None
    rng: str | None = None
    seats: str | None = None

    def summary(self) -> str:
        s = (
            f"{self.method}: fair start {self.p_win_fair_start:.6f}, "
            f"first seat {self.p_win_first_seat:.6f}, second seat {self.p_win_second_seat:.6f}"
        )
        if self.method == "simulated":
            s += f" ({self.games} games, seed {self.seed}, s.e. {self.std_error:.2g})"
        return s


def combined_choice(game: GameDefinition, a: Policy, b: Policy) -> np.ndarray:
    """Entry offsets with A's moves on player-one states and B's on player-two states.

    Raises ``ValueError`` naming the first decision state either policy
    leaves open.
    """
    config, space = _check_layered(game)
    for name, p in (("A", a), ("B", b)):
        if p.config is not None and p.config != config:
            raise ValueError(f"policy {name} was built for {p.config}, game is {config}")
        if len(p.actions) != game.n_states:
            raise ValueError(f"policy {name} covers {len(p.actions)} states, game has {game.n_states}")
    dec = np.diff(game.entry_ptr) > 1
    seat_one = np.zeros(game.n_states, dtype=bool)
    seat_one[space.base[0] : space.base[0] + space.block] = True
    choice = np.where(seat_one, a.actions, b.actions).astype(np.int8)
    open_ = np.flatnonzero(dec & (choice < 0))
    if len(open_):
        s = int(open_[0])
        who = "A" if seat_one[s] else "B"
        raise ValueError(f"policy {who} has no action at decision state {game.label(s)}")
    sizes = np.diff(game.entry_ptr)
    if (choice >= sizes).any():
        s = int(np.flatnonzero(choice >= sizes)[0])
        raise ValueError(f"policy action out of range at state {game.label(s)}")
    return np.where(dec, choice, 0).astype(np.int8)


def _starts(game):
    space = game.space
    return int(space.index(1, 0, 0, 0)), int(space.index(2, 0, 0, 0))


def exact_matchup(game: GameDefinition, a: Policy, b: Policy, backend: str | None = None) -> MatchResult:
    """Win probabilities of A against B from the induced Markov chain.

    Uses the same backward pass over banked-score layers as the layered
    solver with the actions fixed, so each layer's two bust-coupled
    unknowns close in one affine step.
    """
    config, space = _check_layered(game)
    choice = combined_choice(game, a, b)
    lay, faces, ntau, off = _layer_args(config, space)
    v = np.zeros(game.n_states)
    wc, ws = np.array([1.0, 0.0]), np.array([0.0, 0.0])
    worst, _ = _kernels.layered_pass(v, lay, faces, ntau, off, wc, ws, 1, choice, LAYER_RESIDUAL, backend=backend)
    if not worst <= LAYER_RESIDUAL:
        raise RuntimeError(f"layer equations did not close (residual {worst:.3g})")
    s1, s2 = _starts(game)
    first, second = float(v[s1]), float(v[s2])
    return MatchResult(first, second, 0.5 * (first + second), "exact")


def _win_reward(game: GameDefinition) -> np.ndarray:
    """Payoff 1 on the single entry of every player-one win state."""
    reward = np.zeros(game.n_entries)
    wins = np.flatnonzero(game.space.win_mask(1))
    reward[game.entry_ptr[wins]] = 1.0
    return reward


def simulate_matchup(
    game: GameDefinition,
    a: Policy,
    b: Policy,
    n_games: int,
    seed: int,
    seats: str = "coin",
    max_steps: int = 1_000_000,
    backend: str | None = None,
) -> MatchResult:
    """Play ``n_games`` seeded games of A against B.

    ``seats="coin"`` starts every game at Initial; ``"alternate"`` gives A the
    first move in even-numbered games.  Each game draws from its own
    SplitMix64 stream derived from ``(seed, game number)``, so the counts
    do not depend on how games are batched.
    """
    if n_games < 1:
        raise ValueError("n_games must be at least 1")
    if seats not in SEATS:
        raise ValueError(f"seats must be one of {SEATS}, got {seats!r}")
    _check_layered(game)
    choice = combined_choice(game, a, b).astype(np.int64)
    s1, s2 = _starts(game)
    wins, first = _kernels.simulate(
        seed, 0, n_games, game, choice, _win_reward(game), s1, s2, seats == "alternate",
        max_steps=max_steps, backend=backend,
    )
    a_first = first < game.space.base[1]
    p = float(wins.mean())
    p1 = float(wins[a_first].mean()) if a_first.any() else float("nan")
    p2 = float(wins[~a_first].mean()) if (~a_first).any() else float("nan")
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n_games)
    return MatchResult(p1, p2, p, "simulated", games=int(n_games), seed=int(seed), std_error=se,
                       rng=_kernels.RNG_ID, seats=seats)
