"""Opponent-blind reference strategies.

* hold-at-``k``: keep rolling while the turn total is below ``k``.  With a
  d6 and ace bust, ``k = 20`` maximises the expected points of a single turn.
* minimum expected turns: the stationary rule that minimises the expected
  number of turns needed to reach the target, ignoring the opponent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pig_rules import Action, GameConfig, State, Variant, enumerate_states
from .solve import Policy

TURNS_RESIDUAL = 1e-13


@dataclass
class TurnCountValue:
    """``T[a]``: expected turns from a fresh turn with ``a`` banked.

    ``W[a, tau]``: expected further turn starts from mid-turn at ``tau``
    (NaN outside the state space).  A turn is counted when it starts.
    """

    T: np.ndarray
    W: np.ndarray
    target: int

    def turns(self, banked: int) -> float:
        return 0.0 if banked >= self.target else float(self.T[banked])


def _policy_from_table(config: GameConfig, roll: np.ndarray, source: str) -> Policy:
    """Map an ``(own, tau) -> roll?`` table onto both players' decision states."""
    space = enumerate_states(config)
    own, _, tau = space.block_coords()
    dec = space.decision_mask()[2 : 2 + space.block]
    block = np.full(space.block, -1, dtype=np.int8)
    block[dec] = np.where(roll[own[dec], tau[dec]], Action.ROLL, Action.STOP)
    actions = np.concatenate((np.full(2, -1, dtype=np.int8), block, block))
    return Policy(actions, config=config, source=source)


def hold_at_policy(config: GameConfig, k: int) -> Policy:
    """Roll while ``tau < k``; forced moves follow the table of legal actions."""
    if not 1 <= k < config.target:
        raise ValueError(f"threshold must satisfy 1 <= k < target, got {k}")
    t = config.target
    width = int(config.tau_max(0)) + 1
    tau = np.arange(width)
    roll = np.broadcast_to(tau < k, (t, width))
    return _policy_from_table(config, roll, f"holdat:{k}")


def min_expected_turns(config: GameConfig) -> tuple[TurnCountValue, Policy]:
    """Turn-count minimising policy of a player who ignores the opponent.

    Solves, for each banked score ``a`` from the top down,

        W(a, tau) = min( Roll: (n_bust * T(a) + sum_k W(a, tau + k)) / d,
                         Stop: T(a + tau) ),       T(a) = 1 + W(a, 0),

    with ``T = 0`` at or beyond the target.  The unknown ``T(a)`` enters
    through busts only; each layer is closed by Newton steps on its affine
    dependence.  Ties go to Stop.
    """
    if config.variant is not Variant.CLASSIC:
        raise ValueError(f"min_expected_turns is defined for the classic rules only, got {config.variant.value}")
    t = config.target
    d = config.die_faces
    faces = config.scoring_faces
    width = int(config.tau_max(0)) + 1
    T = np.zeros(t + width)
    W = np.full((t, width), np.nan)
    roll_tab = np.zeros((t, width), dtype=bool)

    for a in range(t - 1, -1, -1):
        nt = int(config.tau_max(a)) + 1
        val = np.zeros(nt)
        slope = np.zeros(nt)
        choose_roll = np.zeros(nt, dtype=bool)
        guess = 1.0
        for _ in range(200):
            for tau in range(nt - 1, -1, -1):
                if tau >= t - a:
                    val[tau], slope[tau] = 0.0, 0.0
                    choose_roll[tau] = False
                    continue
                acc = sum(val[tau + k] for k in faces)
                sacc = sum(slope[tau + k] for k in faces)
                nbust = d - len(faces)
                roll = (nbust * guess + acc) / d
                rslope = (nbust + sacc) / d
                stop = T[a + tau]
                if tau > 0 and stop <= roll:
                    val[tau], slope[tau] = stop, 0.0
                    choose_roll[tau] = False
                else:
                    val[tau], slope[tau] = roll, rslope
                    choose_roll[tau] = True
            resid = abs(1.0 + val[0] - guess)
            if resid <= TURNS_RESIDUAL * max(1.0, guess):
                break
            intercept = val[0] - slope[0] * guess
            guess = (1.0 + intercept) / (1.0 - slope[0])
        else:
            raise RuntimeError(f"turn-count layer a={a} did not converge (residual {resid:.3g})")
        T[a] = guess
        W[a, :nt] = val
        roll_tab[a, :nt] = choose_roll

    value = TurnCountValue(T=T[:t].copy(), W=W, target=t)
    return value, _policy_from_table(config, roll_tab, "minturns")


def expected_turn_gain(config: GameConfig, policy: Policy, alpha: int, beta: int = 0) -> float:
    """Expected points banked by player one in a single turn started at ``(alpha, beta)``.

    Busting banks nothing; a forced stop at a winning total banks ``tau``.
    """
    faces = config.scoring_faces
    d = config.die_faces
    nt = int(config.tau_max(alpha)) + 1
    gain = np.zeros(nt)
    for tau in range(nt - 1, -1, -1):
        act = policy.action_at(State.play(1, alpha, beta, tau))
        if act is Action.STOP:
            gain[tau] = tau
            continue
        gain[tau] = sum(
            gain[tau + k]
            for k in faces
            if config.variant is not Variant.EXACT or alpha + tau + k <= config.target
        ) / d
    return float(gain[0])
