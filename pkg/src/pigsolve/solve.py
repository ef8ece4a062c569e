"""Game values by fixed-point iteration, a layered oracle, and pure policies."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._accel import resolve_backend
from .game_model import GameDefinition, TransienceReport, certify_transient
from .matrix_game import solve_matrix_game
from .pig_rules import Action, GameConfig, State, StateSpace, action_sets, enumerate_states, win_payoff_coefficients

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
LAYER_RESIDUAL = 1e-14


class NonTransientGame(ValueError):
    def __init__(self, report: TransienceReport):
        n = len(report.offending_index)
        first = report.labeler(int(report.offending_index[0])) if n else None
        super().__init__(f"game is not certified transient: {n} uncertified states, first {first}")
        self.report = report


@dataclass
class ValueFunction:
    values: np.ndarray
    config: GameConfig | None = None
    tol: float | None = None
    certified: bool = False
    method: str = ""
    iterations: int = 0

    def __len__(self):
        return len(self.values)

    def __getitem__(self, key):
        if isinstance(key, State):
            return float(self.values[enumerate_states(self.config).index_of(key)])
        return self.values[key]

    def fingerprint(self) -> str | None:
        if self.config is None:
            return None
        return self.config.fingerprint(tol=self.tol)


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    wall_time: float
    certified: bool
    tol: float
    mode: str = "jacobi"
    residuals: list = field(default_factory=list, repr=False)


@dataclass
class Policy:
    """Pure stationary policy on decision states.

    ``actions[s]`` holds the index of the mover's chosen action at states
    where the mover has two or more actions, and -1 elsewhere.  For the dice
    game the index is the :class:`Action` code (``STOP=0``, ``ROLL=1``).
    """

    actions: np.ndarray
    config: GameConfig | None = None
    tol: float | None = None
    iterations: int = 0
    source: str = ""

    def fingerprint(self) -> str | None:
        if self.config is None:
            return None
        return self.config.fingerprint(tol=self.tol)

    def action_at(self, s: State) -> Action:
        """The mover's action at ``s``; forced moves are filled in from the rules."""
        a1, a2 = action_sets(self.config, s)
        mover = a1 if len(a2) == 1 and a1 != [Action.WAIT] else a2
        if len(mover) == 1:
            return mover[0]
        code = int(self.actions[enumerate_states(self.config).index_of(s)])
        if code < 0:
            raise ValueError(f"policy has no action for decision state {s}")
        return Action(code)

    def choice_index(self) -> np.ndarray:
        """Entry offset to play at every state (0 where the move is forced)."""
        return np.maximum(self.actions, 0).astype(np.int64)


def _scale(game: GameDefinition) -> float:
    return max(1.0, float(np.abs(game.reward).max())) if game.n_entries else 1.0


def _as_array(game, v) -> np.ndarray:
    v = v.values if isinstance(v, ValueFunction) else np.asarray(v, dtype=np.float64)
    if v.shape != (game.n_states,):
        raise ValueError(f"value vector has shape {v.shape}, game has {game.n_states} states")
    return v


def apply_U(game: GameDefinition, v, out=None, backend=None) -> np.ndarray:
    """One application of the Bellman operator: matrix-game value at every state."""
    v = _as_array(game, v)
    out = _kernels.bellman_sweep(v, game, out=out, backend=backend)
    general = np.flatnonzero(np.isnan(out))
    for s in general:
        if game.n_rows[s] > 1 and game.n_cols[s] > 1:
            out[s] = solve_matrix_game(game.matrix(int(s), v)).value
    return out


def _sup_diff(a, b) -> float:
    return float(np.max(np.abs(a - b))) if len(a) else 0.0


def _gs_order(game: GameDefinition) -> np.ndarray:
    space = game.space
    if isinstance(space, StateSpace):
        player, alpha, beta, tau = space.coords()
        banked = alpha.astype(np.int64) + beta
        # decreasing alpha+beta, then decreasing tau; Initial last, Final first
        key_bank = np.where(player == 0, -1, banked)
        key_bank[game.final] = 10**9
        order = np.lexsort((-tau.astype(np.int64), -key_bank))
        return order.astype(np.int64)
    return np.arange(game.n_states - 1, -1, -1, dtype=np.int64)


def value_iteration(
    game: GameDefinition,
    tol: float | None = None,
    max_iters: int = 1_000_000,
    mode: str = "jacobi",
    require_transient: bool = True,
    backend: str | None = None,
) -> tuple[ValueFunction, SolveReport]:
    """Iterate ``v <- U v`` from ``v = 0`` until the sup-norm change drops below ``tol``.

    ``mode="jacobi"`` (default) uses synchronous sweeps, so the result does
    not depend on how a sweep is split across threads.  ``mode="gauss-seidel"``
    updates in place in the order decreasing banked total, then decreasing
    turn score; it reaches the same fixed point in far fewer sweeps.

    The returned vector is the iterate whose residual ``|U v - v|`` is
    reported.  If ``max_iters`` runs out, the best iterate comes back with
    ``certified=False``.
    """
    if tol is None:
        tol = DEFAULT_TOL * _scale(game)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if require_transient:
        rep = certify_transient(game, backend=backend)
        if not rep.certified:
            raise NonTransientGame(rep)
    backend = resolve_backend(backend)
    has_general = bool(((game.n_rows > 1) & (game.n_cols > 1)).any())
    t0 = time.perf_counter()
    v = np.zeros(game.n_states)
    residuals = []
    it = 0
    resid = np.inf

    if mode == "jacobi":
        w = np.empty_like(v)
        while it < max_iters:
            apply_U(game, v, out=w, backend=backend)
            it += 1
            resid = _sup_diff(w, v)
            residuals.append(resid)
            if resid < tol:
                break
            v, w = w, v
        # v is the iterate whose residual was measured last
    elif mode in ("gauss-seidel", "gs"):
        if has_general:
            raise ValueError("gauss-seidel mode supports vector games only")
        order = _gs_order(game)
        while it < max_iters:
            delta = _kernels.gauss_seidel_sweep(v, order, game, backend=backend)
            it += 1
            residuals.append(delta)
            if delta < tol:
                break
        resid = _sup_diff(apply_U(game, v, backend=backend), v)
        residuals.append(resid)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    certified = bool(resid < tol)
    wall = time.perf_counter() - t0
    log.info("value iteration: %d sweeps, residual %.3g, %.1fs", it, resid, wall)
    config = game.meta.get("config")
    vf = ValueFunction(v, config=config, tol=tol, certified=certified, method=f"value-iteration/{mode}", iterations=it)
    return vf, SolveReport(it, float(resid), wall, certified, tol, mode, residuals)


def _layer_args(config: GameConfig, space: StateSpace):
    lay = np.array(
        [config.target, config.die_faces, int(config.variant.value == "exact"), space.base[0], space.base[1], space.block],
        dtype=np.int64,
    )
    faces = np.asarray(config.scoring_faces, dtype=np.int64)
    return lay, faces, space.ntau, space.block_off


def _check_layered(game: GameDefinition) -> tuple[GameConfig, StateSpace]:
    config = game.meta.get("config")
    if config is None or not game.meta.get("layered") or not isinstance(game.space, StateSpace):
        raise ValueError(
            "layered solving needs a dice-race game from pig_rules.build_game: it relies on banked "
            "scores never decreasing, which a generic game does not guarantee"
        )
    return config, game.space


def _close_special(game: GameDefinition, v: np.ndarray):
    v[game.final] = 0.0
    v[game.initial] = float(game.matrix(game.initial, v)[0, 0])


def layered_solve(game: GameDefinition, check: bool = True, backend: str | None = None) -> ValueFunction:
    """Exact backward induction over banked-score layers.

    Layers ``(alpha, beta)`` are solved from high banked totals down.  Inside
    a layer both turn chains are evaluated as affine functions of their bust
    value, and the two bust values are closed by Newton steps on the
    composed piecewise-affine map (plain iteration as a fallback) to
    residual ``1e-14`` relative to the payoff scale.

    Independent of :func:`value_iteration`: it never forms the operator over
    the full state vector.
    """
    config, space = _check_layered(game)
    scale = _scale(game)
    lay, faces, ntau, off = _layer_args(config, space)
    wc, ws = win_payoff_coefficients(config)
    v = np.zeros(game.n_states)
    dummy = np.zeros(1, dtype=np.int8)
    worst, steps = _kernels.layered_pass(v, lay, faces, ntau, off, wc, ws, 0, dummy, LAYER_RESIDUAL * scale, backend=backend)
    _close_special(game, v)
    certified = worst <= LAYER_RESIDUAL * scale
    if check:
        resid = _sup_diff(apply_U(game, v, backend=backend), v)
        certified = certified and resid <= 1e-12 * scale
        log.info("layered solve: inner residual %.3g, operator residual %.3g", worst, resid)
    return ValueFunction(v, config=config, tol=LAYER_RESIDUAL * scale, certified=certified, method="layered", iterations=steps)


def extract_policy(game: GameDefinition, v: ValueFunction, tie_eps: float | None = None) -> Policy:
    """Greedy pure policy from a certified fixed point.

    At each state where the mover has a choice, take the lowest-index action
    whose continuation value is within ``tie_eps`` (default ``10 * v.tol``)
    of the best one.  In the dice game that breaks ties towards Stop.
    """
    if not isinstance(v, ValueFunction) or not v.certified:
        raise ValueError("extract_policy needs a certified ValueFunction")
    vals = _as_array(game, v)
    if tie_eps is None:
        tie_eps = 10.0 * (v.tol if v.tol is not None else DEFAULT_TOL)
    rows, cols = game.n_rows.astype(np.int64), game.n_cols.astype(np.int64)
    if ((rows > 1) & (cols > 1)).any():
        raise ValueError("game has simultaneous-choice states; no pure stationary policy to extract")

    q = _kernels.entry_values(vals, game.reward, game.trans_ptr, game.succ, game.prob)
    starts = game.entry_ptr[:-1]
    sizes = np.diff(game.entry_ptr)
    owner = np.repeat(np.arange(game.n_states), sizes)
    local = np.arange(game.n_entries) - game.entry_ptr[owner]
    maximiser = cols == 1
    best = np.where(maximiser, np.maximum.reduceat(q, starts), np.minimum.reduceat(q, starts))
    ok = np.where(maximiser[owner], q >= best[owner] - tie_eps, q <= best[owner] + tie_eps)
    cand = np.where(ok, local, np.iinfo(np.int64).max)
    pick = np.minimum.reduceat(cand, starts)
    actions = np.where(sizes > 1, pick, -1).astype(np.int8)
    return Policy(actions, config=game.meta.get("config"), tol=v.tol, iterations=v.iterations, source="optimal")


def solve(config: GameConfig, tol: float | None = None, method: str = "value-iteration", **kw):
    """Convenience: build, solve and extract the optimal policy for ``config``."""
    from .pig_rules import build_game

    game = build_game(config)
    if method == "layered":
        v = layered_solve(game)
        report = None
    else:
        v, report = value_iteration(game, tol=tol, **kw)
    return game, v, extract_policy(game, v), report
