"""Zero-sum matrix games: value and optimal mixed strategies.

The row player maximises, the column player minimises.  Every returned
solution carries a security certificate: the row strategy guarantees at
least ``value - tolerance`` against every column and the column strategy
concedes at most ``value + tolerance`` against every row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

_REL_TOL = 1e-9


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    tolerance: float

    def check(self, M, tol=None) -> bool:
        """True when the security certificate holds for ``M`` within ``tol``."""
        M = np.asarray(M, dtype=float)
        tol = self.tolerance if tol is None else tol
        x, y = self.row_strategy, self.col_strategy
        for p in (x, y):
            if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                return False
        return (x @ M).min() >= self.value - tol and (M @ y).max() <= self.value + tol


class NoCertifiedSolution(RuntimeError):
    def __init__(self, message, best: MatrixGameSolution):
        super().__init__(message)
        self.best = best


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D payoff matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ValueError("payoff matrix has non-finite entries")
    return M


def _unit(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def saddle_point(M) -> tuple[int, int] | None:
    """First pure saddle ``(i, j)`` in row-major order, or ``None``.

    A saddle is a cell that is the minimum of its row and the maximum of its
    column, i.e. the pure maximin equals the pure minimax.
    """
    M = _as_matrix(M)
    row_min = M.min(axis=1)
    col_max = M.max(axis=0)
    hits = np.argwhere((M == row_min[:, None]) & (M == col_max[None, :]))
    if len(hits) == 0:
        return None
    i, j = hits[0]
    return int(i), int(j)


def _certify(M, x, y) -> MatrixGameSolution:
    lo = float((x @ M).min())
    hi = float((M @ y).max())
    value = 0.5 * (lo + hi)
    return MatrixGameSolution(value, x, y, max(hi - value, value - lo, 0.0))


def _normalise(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    s = p.sum()
    return p / s if s > 0 else np.full(len(p), 1.0 / len(p))


def _solve_lp(M):
    m, n = M.shape
    # variables (x_1..x_m, v): maximise v  s.t.  v - (x^T M)_j <= 0,  sum x = 1
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M.T, np.ones((n, 1))])
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(n),
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * m + [(None, None)],
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise NoCertifiedSolution(f"LP solver failed: {res.message}", _certify(M, np.full(m, 1 / m), np.full(n, 1 / n)))
    x = _normalise(res.x[:m])
    y = _normalise(-res.ineqlin.marginals)
    return x, y


def solve_matrix_game(M) -> MatrixGameSolution:
    """Minimax value and optimal strategies of the payoff matrix ``M``.

    Vector games and games with a pure saddle are answered directly (ties go
    to the lowest index); 2x2 games use the equaliser closed form; anything
    else goes through a linear program.  Raises :class:`NoCertifiedSolution`
    if the certificate cannot be met to ``1e-9 * (1 + max|M|)``.
    """
    M = _as_matrix(M)
    m, n = M.shape
    limit = _REL_TOL * (1.0 + float(np.abs(M).max()))

    if m == 1:
        j = int(np.argmin(M[0]))
        return MatrixGameSolution(float(M[0, j]), np.ones(1), _unit(n, j), 0.0)
    if n == 1:
        i = int(np.argmax(M[:, 0]))
        return MatrixGameSolution(float(M[i, 0]), _unit(m, i), np.ones(1), 0.0)
    sp = saddle_point(M)
    if sp is not None:
        i, j = sp
        return MatrixGameSolution(float(M[i, j]), _unit(m, i), _unit(n, j), 0.0)

    if m == 2 and n == 2:
        (a, b), (c, d) = M
        den = a - b - c + d
        x = np.array([(d - c) / den, (a - b) / den])
        y = np.array([(d - b) / den, (a - c) / den])
        value = (a * d - b * c) / den
        slack = max(value - float((x @ M).min()), float((M @ y).max()) - value, 0.0)
        if slack <= limit:
            return MatrixGameSolution(value, x, y, slack)

    sol = _certify(M, *_solve_lp(M))
    if sol.tolerance > limit:
        raise NoCertifiedSolution(
            f"certificate slack {sol.tolerance:.3g} exceeds {limit:.3g}", sol
        )
    return sol


def pure_maximin(M) -> float:
    M = _as_matrix(M)
    return float(M.min(axis=1).max())


def pure_minimax(M) -> float:
    M = _as_matrix(M)
    return float(M.max(axis=0).min())
