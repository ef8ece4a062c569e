"""The dice race as a transient stochastic game.

Two players alternate turns.  The mover rolls a die repeatedly, adding each
non-bust face to a turn total ``tau``; rolling the bust face forfeits ``tau``
and passes the die, stopping banks ``tau``.  First to ``target`` wins.

Three variants:

``classic``   win on reaching at least ``target``; payoff 1 to player one.
``exact``     the banked total must hit ``target`` exactly; a roll that
              overshoots counts as a bust.
``maxdiff``   same moves as ``classic``; the winner collects
              ``target - loser_score``.

State layout (dense indices)::

    0                 Initial
    1                 Final
    2 + block_off[o] + q * ntau[o] + tau             player 1, own=alpha=o, opp=beta=q
    2 + B + block_off[o] + q * ntau[o] + tau         player 2, own=beta=o,  opp=alpha=q

``tau`` varies fastest, then the opponent's banked score, then the mover's
own banked score.  ``B`` is the size of one player block; the two blocks
share a layout, so ``(1, a, b, t)`` and ``(2, b, a, t)`` sit at the same
offset in their blocks.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .game_model import GameDefinition


class Variant(str, enum.Enum):
    CLASSIC = "classic"
    EXACT = "exact"
    MAXDIFF = "maxdiff"


class Action(enum.IntEnum):
    # Codes double as the position inside a two-action set: Stop first.
    STOP = 0
    ROLL = 1
    WAIT = 2

    def __str__(self):
        return self.name.capitalize()


class Tag(enum.Enum):
    INITIAL = "initial"
    FINAL = "final"
    PLAY = "play"


@dataclass(frozen=True)
class State:
    tag: Tag
    player: int = 0
    alpha: int = 0
    beta: int = 0
    tau: int = 0

    @classmethod
    def play(cls, player, alpha, beta, tau) -> "State":
        return cls(Tag.PLAY, int(player), int(alpha), int(beta), int(tau))

    @property
    def own(self) -> int:
        return self.alpha if self.player == 1 else self.beta

    @property
    def opp(self) -> int:
        return self.beta if self.player == 1 else self.alpha

    def mirror(self) -> "State":
        if self.tag is not Tag.PLAY:
            return self
        return State.play(3 - self.player, self.beta, self.alpha, self.tau)

    def __str__(self):
        if self.tag is Tag.INITIAL:
            return "s0"
        if self.tag is Tag.FINAL:
            return "sf"
        return f"({self.player},{self.alpha},{self.beta},{self.tau})"


INITIAL = State(Tag.INITIAL)
FINAL = State(Tag.FINAL)


@dataclass(frozen=True)
class GameConfig:
    variant: Variant = Variant.CLASSIC
    target: int = 200
    die_faces: int = 6
    bust_face: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("target", "die_faces", "bust_face"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val:
                raise ValueError(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.die_faces < 2:
            raise ValueError(f"die_faces must be >= 2, got {self.die_faces}")
        if not 1 <= self.bust_face <= self.die_faces:
            raise ValueError(f"bust_face must lie in 1..{self.die_faces}, got {self.bust_face}")
        if self.target < 2 * self.die_faces:
            raise ValueError(f"target must be >= 2*die_faces = {2 * self.die_faces}, got {self.target}")

    @property
    def scoring_faces(self) -> tuple[int, ...]:
        return tuple(k for k in range(1, self.die_faces + 1) if k != self.bust_face)

    @property
    def max_face(self) -> int:
        return max(self.scoring_faces)

    def tau_max(self, own):
        """Largest turn score representable when the mover has banked ``own``."""
        if self.variant is Variant.EXACT:
            return self.target - own
        return self.target - 1 - own + self.max_face

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "target": self.target,
            "die_faces": self.die_faces,
            "bust_face": self.bust_face,
        }

    @classmethod
    def from_dict(cls, d) -> "GameConfig":
        return cls(d["variant"], d["target"], d["die_faces"], d["bust_face"])

    def fingerprint(self, **settings) -> str:
        """Short content hash of the config plus any solver settings."""
        payload = dict(self.to_dict())
        for k, v in settings.items():
            payload[k] = repr(float(v)) if isinstance(v, float) else v
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class StateSpace:
    """Bijective index <-> :class:`State` map for one configuration."""

    def __init__(self, config: GameConfig):
        self.config = config
        t = config.target
        own = np.arange(t, dtype=np.int64)
        self.ntau = (config.tau_max(own) + 1).astype(np.int64)
        sizes = self.ntau * t
        self.block_off = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
        self.block = int(sizes.sum())
        self.base = (2, 2 + self.block)
        self.n_states = 2 + 2 * self.block

    def __len__(self):
        return self.n_states

    # -- counts -------------------------------------------------------------
    @property
    def n_decision_per_player(self) -> int:
        # 0 < tau < target - own, for every opponent score
        t = self.config.target
        return int(sum((t - 1 - o) for o in range(t)) * t)

    # -- index maps ---------------------------------------------------------
    def index(self, player, alpha, beta, tau):
        """Vectorised index of play states; no range checking."""
        player = np.asarray(player)
        own = np.where(player == 1, alpha, beta)
        opp = np.where(player == 1, beta, alpha)
        base = np.where(player == 1, self.base[0], self.base[1])
        out = base + self.block_off[own] + opp * self.ntau[own] + np.asarray(tau)
        return out if out.ndim else int(out)

    def contains(self, s: State) -> bool:
        return _in_space(self.config, s)

    def index_of(self, s: State) -> int:
        if not self.contains(s):
            raise ValueError(f"state {s} is not in the state space of {self.config}")
        if s.tag is Tag.INITIAL:
            return 0
        if s.tag is Tag.FINAL:
            return 1
        return self.index(s.player, s.alpha, s.beta, s.tau)

    def state(self, i: int) -> State:
        i = int(i)
        if i == 0:
            return INITIAL
        if i == 1:
            return FINAL
        if not 2 <= i < self.n_states:
            raise IndexError(i)
        player = 1 if i < self.base[1] else 2
        r = i - self.base[player - 1]
        own = int(np.searchsorted(self.block_off, r, side="right") - 1)
        r -= int(self.block_off[own])
        opp, tau = divmod(r, int(self.ntau[own]))
        if player == 1:
            return State.play(1, own, opp, tau)
        return State.play(2, opp, own, tau)

    def mirror_index(self, i):
        """Index of the mirrored state (player tags and banked scores swapped)."""
        i = np.asarray(i)
        b1, b2 = self.base
        out = np.where(i < 2, i, np.where(i < b2, i + self.block, i - self.block))
        return out if out.ndim else int(out)

    @cached_property
    def _block_coords(self):
        t = self.config.target
        own = np.repeat(np.arange(t, dtype=np.int32), (self.ntau * t))
        opp = np.concatenate([np.repeat(np.arange(t, dtype=np.int32), n) for n in self.ntau])
        tau = np.concatenate([np.tile(np.arange(n, dtype=np.int32), t) for n in self.ntau])
        return own, opp, tau

    def block_coords(self):
        """(own, opp, tau) arrays for one player block, in index order."""
        return self._block_coords

    def coords(self):
        """(player, alpha, beta, tau) for every state; Initial/Final get player 0."""
        own, opp, tau = self.block_coords()
        player = np.concatenate(([0, 0], np.full(self.block, 1, np.int8), np.full(self.block, 2, np.int8)))
        alpha = np.concatenate(([0, 0], own, opp))
        beta = np.concatenate(([0, 0], opp, own))
        return player, alpha, beta, np.concatenate(([0, 0], tau, tau))

    def decision_mask(self):
        """Boolean mask of states where the mover may both roll and stop."""
        own, _, tau = self.block_coords()
        m = (tau > 0) & (tau < self.config.target - own)
        return np.concatenate(([False, False], m, m))

    def win_mask(self, player=None):
        own, _, tau = self.block_coords()
        w = tau >= self.config.target - own
        z = np.zeros(self.block, dtype=bool)
        if player == 1:
            return np.concatenate(([False, False], w, z))
        if player == 2:
            return np.concatenate(([False, False], z, w))
        return np.concatenate(([False, False], w, w))

    def entry_actions(self, s, k):
        """Labels of the ``k``-th action pair at state index ``s``."""
        a1, a2 = action_sets(self.config, self.state(s))
        if len(a2) == 1:
            return a1[k], a2[0]
        return a1[0], a2[k]


# ---------------------------------------------------------------------------
# per-state rules


def _in_space(config: GameConfig, s: State) -> bool:
    if not isinstance(s, State):
        return False
    if s.tag is not Tag.PLAY:
        return s in (INITIAL, FINAL)
    t = config.target
    return (
        s.player in (1, 2)
        and 0 <= s.alpha < t
        and 0 <= s.beta < t
        and 0 <= s.tau <= config.tau_max(s.own)
    )


def _check(config: GameConfig, s: State):
    if not _in_space(config, s):
        raise ValueError(f"state {s} is not a state of {config}")


def is_win(config: GameConfig, s: State) -> bool:
    return s.tag is Tag.PLAY and s.tau >= config.target - s.own


def action_sets(config: GameConfig, s: State) -> tuple[list[Action], list[Action]]:
    """Available actions ``(player one's, player two's)`` at ``s``."""
    _check(config, s)
    if s.tag is not Tag.PLAY:
        return [Action.WAIT], [Action.WAIT]
    if s.tau == 0:
        mover = [Action.ROLL]
    elif s.tau < config.target - s.own:
        mover = [Action.STOP, Action.ROLL]
    else:
        mover = [Action.STOP]
    return (mover, [Action.WAIT]) if s.player == 1 else ([Action.WAIT], mover)


def _roll_outcomes(config: GameConfig, s: State) -> list[tuple[State, int]]:
    """Roll outcomes with weights in units of ``1/die_faces``; bust first."""
    bust = State.play(3 - s.player, s.alpha, s.beta, 0)
    out = []
    busted = 1
    for k in config.scoring_faces:
        if config.variant is Variant.EXACT and s.own + s.tau + k > config.target:
            busted += 1
        else:
            out.append((State.play(s.player, s.alpha, s.beta, s.tau + k), 1))
    return [(bust, busted)] + out


def transition_weights(config: GameConfig, s: State, a1: Action, a2: Action) -> list[tuple[State, int]]:
    """Like :func:`transitions` with integer weights over ``2 * die_faces``.

    Weights are exact, so the unit-mass property can be checked without
    floating point.
    """
    rows, cols = action_sets(config, s)
    if a1 not in rows or a2 not in cols:
        raise ValueError(f"actions ({a1}, {a2}) not available at {s}")
    d2 = 2 * config.die_faces
    if s.tag is Tag.INITIAL:
        return [(State.play(1, 0, 0, 0), config.die_faces), (State.play(2, 0, 0, 0), config.die_faces)]
    if s.tag is Tag.FINAL or is_win(config, s):
        return [(FINAL, d2)]
    act = a1 if s.player == 1 else a2
    if act is Action.STOP:
        if s.player == 1:
            return [(State.play(2, s.alpha + s.tau, s.beta, 0), d2)]
        return [(State.play(1, s.alpha, s.beta + s.tau, 0), d2)]
    return [(t, 2 * w) for t, w in _roll_outcomes(config, s)]


def transitions(config: GameConfig, s: State, a1: Action, a2: Action) -> list[tuple[State, float]]:
    """Successor distribution after the action pair ``(a1, a2)`` at ``s``."""
    d2 = 2 * config.die_faces
    return [(t, w / d2) for t, w in transition_weights(config, s, a1, a2)]


def payoff(config: GameConfig, s: State) -> float:
    """Immediate payoff from player two to player one at ``s``."""
    _check(config, s)
    if not is_win(config, s):
        return 0.0
    if config.variant is Variant.MAXDIFF:
        if s.player == 1:
            return float(config.target - s.beta)
        return float(s.alpha - config.target)
    return 1.0 if s.player == 1 else 0.0


def win_payoff_coefficients(config: GameConfig):
    """Win payoff of player j as ``c[j] + m[j] * opponent_score``."""
    if config.variant is Variant.MAXDIFF:
        t = float(config.target)
        return np.array([t, -t]), np.array([-1.0, 1.0])
    return np.array([1.0, 0.0]), np.array([0.0, 0.0])


# ---------------------------------------------------------------------------
# compiled game


@lru_cache(maxsize=8)
def enumerate_states(config: GameConfig) -> StateSpace:
    """Shared (cached) state space for ``config``."""
    return StateSpace(config)


def build_game(config: GameConfig, _stop_at_zero: bool = False) -> GameDefinition:
    """Compile the full game into a :class:`GameDefinition`.

    ``_stop_at_zero`` adds Stop at ``tau == 0``, a deliberately broken rule
    set used to exercise the transience certificate.
    """
    space = enumerate_states(config)
    t = config.target
    d = config.die_faces
    faces = np.asarray(config.scoring_faces, dtype=np.int64)
    own, opp, tau = (x.astype(np.int64) for x in space.block_coords())
    nb = space.block

    win = tau >= t - own
    zero = tau == 0
    dec = ~win & ~zero
    if _stop_at_zero:
        dec = dec | zero
    roll = ~win
    n_ent_block = np.where(dec, 2, 1)
    if config.variant is Variant.EXACT:
        nvalid = np.searchsorted(faces, t - own - tau, side="right")
    else:
        nvalid = np.full(nb, len(faces))
    nvalid = np.where(roll, nvalid, 0)

    n_ent = np.concatenate(([1, 1], n_ent_block, n_ent_block))
    entry_ptr = np.zeros(space.n_states + 1, dtype=np.int64)
    np.cumsum(n_ent, out=entry_ptr[1:])
    n_entries = int(entry_ptr[-1])

    n_rows = np.ones(space.n_states, dtype=np.int32)
    n_cols = np.ones(space.n_states, dtype=np.int32)
    n_rows[2 : 2 + nb] = n_ent_block
    n_cols[2 + nb :] = n_ent_block

    reward = np.zeros(n_entries)
    cnt = np.zeros(n_entries, dtype=np.int64)
    cnt[0] = 2  # Initial
    cnt[1] = 1  # Final
    wc, ws = win_payoff_coefficients(config)

    blocks = []
    for j in (1, 2):
        first = entry_ptr[space.base[j - 1] : space.base[j - 1] + nb]
        stop_e = first[dec | win]
        roll_e = first[roll] + dec[roll]
        win_e = first[win]
        cnt[stop_e] = 1
        cnt[roll_e] = 1 + nvalid[roll]
        reward[win_e] = wc[j - 1] + ws[j - 1] * opp[win]
        blocks.append((j, stop_e, roll_e, win_e))

    trans_ptr = np.zeros(n_entries + 1, dtype=np.int64)
    np.cumsum(cnt, out=trans_ptr[1:])
    n_trans = int(trans_ptr[-1])
    succ = np.empty(n_trans, dtype=np.int32)
    prob = np.empty(n_trans, dtype=np.float64)

    succ[0:2] = (space.base[0], space.base[1])
    prob[0:2] = 0.5
    succ[2] = 1
    prob[2] = 1.0

    def other_index(j, o, q, tt):
        # index in the opponent's block for own=o, opp=q, tau=tt
        return space.base[2 - j] + space.block_off[o] + q * space.ntau[o] + tt

    for j, stop_e, roll_e, win_e in blocks:
        base = space.base[j - 1]
        p = trans_ptr[stop_e]
        # stop (including forced stop at a win state, overwritten below)
        tgt = np.where(win, 1, other_index(j, opp, np.minimum(own + tau, t - 1), 0))
        succ[p] = tgt[dec | win]
        prob[p] = 1.0
        # roll: bust first, then each surviving face in ascending order
        p = trans_ptr[roll_e]
        r_own, r_opp, r_tau, r_valid = own[roll], opp[roll], tau[roll], nvalid[roll]
        succ[p] = other_index(j, r_opp, r_own, 0)
        prob[p] = (d - r_valid) / d
        for i, k in enumerate(faces):
            ok = i < r_valid
            q = p[ok] + 1 + i
            succ[q] = base + space.block_off[r_own[ok]] + r_opp[ok] * space.ntau[r_own[ok]] + r_tau[ok] + k
            prob[q] = 1.0 / d

    return GameDefinition(
        n_rows=n_rows,
        n_cols=n_cols,
        entry_ptr=entry_ptr,
        reward=reward,
        trans_ptr=trans_ptr,
        succ=succ,
        prob=prob,
        initial=0,
        final=1,
        space=space,
        meta={"config": config, "layered": not _stop_at_zero},
    )
