"""Finite two-player zero-sum transient stochastic games.

A game is stored in compressed-sparse form so that multi-million-state
instances fit in memory and can be swept by compiled kernels:

* state ``s`` owns ``n_rows[s] * n_cols[s]`` consecutive *entries*
  ``entry_ptr[s] .. entry_ptr[s+1]``, one per action pair ``(a, b)`` laid out
  row-major (``e = entry_ptr[s] + a * n_cols[s] + b``);
* entry ``e`` carries the immediate payoff ``reward[e]`` paid by player two to
  player one, and the successor distribution
  ``succ[trans_ptr[e]:trans_ptr[e+1]]`` / ``prob[...]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Mapping, Sequence

import numpy as np

from . import _kernels

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GameDefinition:
    n_rows: np.ndarray
    n_cols: np.ndarray
    entry_ptr: np.ndarray
    reward: np.ndarray
    trans_ptr: np.ndarray
    succ: np.ndarray
    prob: np.ndarray
    initial: int
    final: int
    labels: Sequence[Hashable] | None = None
    action_labels: Sequence[tuple[Sequence[Any], Sequence[Any]]] | None = None
    space: Any = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("n_rows", "n_cols", "entry_ptr", "reward", "trans_ptr", "succ", "prob"):
            getattr(self, name).setflags(write=False)

    @property
    def n_states(self) -> int:
        return len(self.n_rows)

    @property
    def n_entries(self) -> int:
        return len(self.reward)

    def label(self, s: int):
        if self.space is not None:
            return self.space.state(s)
        if self.labels is not None:
            return self.labels[s]
        return s

    def entry(self, s: int, a: int, b: int) -> int:
        return int(self.entry_ptr[s] + a * self.n_cols[s] + b)

    def outcomes(self, e: int) -> list[tuple[int, float]]:
        lo, hi = self.trans_ptr[e], self.trans_ptr[e + 1]
        return [(int(t), float(p)) for t, p in zip(self.succ[lo:hi], self.prob[lo:hi])]

    def matrix(self, s: int, v: np.ndarray) -> np.ndarray:
        """The one-shot matrix ``r^s(a,b) + sum_s' P_{s,a,b}(s') v(s')`` at ``s``."""
        m, n = int(self.n_rows[s]), int(self.n_cols[s])
        out = np.empty(m * n)
        for k in range(m * n):
            e = int(self.entry_ptr[s]) + k
            lo, hi = self.trans_ptr[e], self.trans_ptr[e + 1]
            out[k] = self.reward[e] + np.dot(self.prob[lo:hi], v[self.succ[lo:hi]])
        return out.reshape(m, n)

    @classmethod
    def from_mapping(
        cls,
        states: Sequence[Hashable],
        actions: Mapping[Hashable, tuple[Sequence[Any], Sequence[Any]]],
        transitions: Mapping[tuple, Sequence[tuple[Hashable, float]]],
        initial: Hashable,
        final: Hashable,
        payoff: Mapping[tuple, float] | None = None,
    ) -> "GameDefinition":
        """Build a small game from plain Python containers.

        ``actions[s] = (A_s, B_s)``; ``transitions[(s, a, b)]`` and
        ``payoff[(s, a, b)]`` are keyed by state label and action labels.
        Missing payoffs default to 0.  No validation happens here; call
        :func:`validate_structure`.
        """
        payoff = payoff or {}
        index = {s: i for i, s in enumerate(states)}
        n_rows, n_cols, entry_ptr = [], [], [0]
        reward, trans_ptr, succ, prob = [], [0], [], []
        acts = []
        for s in states:
            rows, cols = actions[s]
            acts.append((tuple(rows), tuple(cols)))
            n_rows.append(len(rows))
            n_cols.append(len(cols))
            for a in rows:
                for b in cols:
                    reward.append(float(payoff.get((s, a, b), 0.0)))
                    for t, p in transitions.get((s, a, b), ()):
                        succ.append(index[t])
                        prob.append(float(p))
                    trans_ptr.append(len(succ))
            entry_ptr.append(len(reward))
        return cls(
            n_rows=np.asarray(n_rows, dtype=np.int32),
            n_cols=np.asarray(n_cols, dtype=np.int32),
            entry_ptr=np.asarray(entry_ptr, dtype=np.int64),
            reward=np.asarray(reward, dtype=np.float64),
            trans_ptr=np.asarray(trans_ptr, dtype=np.int64),
            succ=np.asarray(succ, dtype=np.int32),
            prob=np.asarray(prob, dtype=np.float64),
            initial=index[initial],
            final=index[final],
            labels=list(states),
            action_labels=acts,
        )


@dataclass
class TransienceReport:
    certified: bool
    rank: np.ndarray
    offending_index: np.ndarray
    labeler: Callable[[int], Any] = field(default=lambda s: s, repr=False)

    @property
    def offending_states(self) -> list:
        return [self.labeler(int(s)) for s in self.offending_index]

    @property
    def rounds(self) -> int:
        return int(self.rank.max()) if len(self.rank) else 0


def validate_structure(game: GameDefinition, limit: int | None = None) -> list[str]:
    """Check the structural invariants; return one message per violation."""
    out: list[str] = []

    def add(msg):
        if limit is None or len(out) < limit:
            out.append(msg)

    n = game.n_states
    if not (0 <= game.initial < n) or not (0 <= game.final < n):
        add(f"initial/final state index out of range (initial={game.initial}, final={game.final}, n={n})")
        return out
    empty = np.flatnonzero((game.n_rows < 1) | (game.n_cols < 1))
    for s in empty:
        add(f"state {game.label(int(s))}: empty action set")
    sizes = np.diff(game.entry_ptr)
    bad = np.flatnonzero(sizes != game.n_rows.astype(np.int64) * game.n_cols)
    for s in bad:
        add(f"state {game.label(int(s))}: {sizes[s]} entries for a {game.n_rows[s]}x{game.n_cols[s]} action grid")
    if len(empty) or len(bad):
        return out

    counts = np.diff(game.trans_ptr)
    for e in np.flatnonzero(counts == 0):
        add(_entry_name(game, int(e)) + ": empty transition list")
    if len(game.succ) and (game.succ.min() < 0 or game.succ.max() >= n):
        add("successor index out of range")
        return out
    badp = np.flatnonzero(~((game.prob > 0.0) & (game.prob <= 1.0)))
    if len(badp):
        owner = np.searchsorted(game.trans_ptr, badp, side="right") - 1
        for e in np.unique(owner):
            add(_entry_name(game, int(e)) + ": probability outside (0, 1]")
    mass = _kernels.segment_sum(game.prob, game.trans_ptr)
    for e in np.flatnonzero((counts > 0) & (np.abs(mass - 1.0) > PROB_TOL)):
        add(_entry_name(game, int(e)) + f": transition mass {mass[e]!r} != 1")

    f = game.final
    for e in range(game.entry_ptr[f], game.entry_ptr[f + 1]):
        if game.reward[e] != 0.0:
            add(_entry_name(game, e) + f": final-state payoff {game.reward[e]!r} != 0 (condition (1))")
        loop = sum(p for t, p in game.outcomes(e) if t == f)
        if abs(loop - 1.0) > PROB_TOL:
            add(_entry_name(game, e) + f": final state is not absorbing, P(s_f -> s_f)={loop!r} (condition (2))")
    return out


def _entry_name(game: GameDefinition, e: int) -> str:
    s = int(np.searchsorted(game.entry_ptr, e, side="right") - 1)
    k = e - int(game.entry_ptr[s])
    a, b = divmod(k, int(game.n_cols[s]))
    if game.action_labels is not None:
        rows, cols = game.action_labels[s]
        a, b = rows[a], cols[b]
    elif game.space is not None:
        a, b = game.space.entry_actions(s, k)
    return f"state {game.label(s)}, actions ({a}, {b})"


def certify_transient(game: GameDefinition, backend: str | None = None) -> TransienceReport:
    """Least-fixpoint certificate that every play reaches the final state.

    ``Good_0 = {s_f}``; a state joins ``Good_{k+1}`` when every action pair
    has some positive-probability successor in ``Good_k``.  The rank of a
    state is the round at which it joined.  If every state gets a rank then
    from anywhere, under any strategies, the final state is hit within
    ``|S|`` steps with probability at least ``p_min ** |S|``, which gives the
    summable tail required of a transient game.
    """
    problems = validate_structure(game, limit=5)
    if problems:
        raise ValueError("structurally invalid game: " + "; ".join(problems))
    rank = _kernels.transience_rank(
        game.entry_ptr, game.trans_ptr, game.succ, game.prob, game.final, backend=backend
    )
    bad = np.flatnonzero(rank < 0)
    return TransienceReport(certified=len(bad) == 0, rank=rank, offending_index=bad, labeler=game.label)
