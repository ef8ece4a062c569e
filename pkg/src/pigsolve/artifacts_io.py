"""Stable on-disk formats for value tables, policies and policy maps.

Every file carries the config fingerprint (a hash of the game config plus
the solver tolerance); loaders recompute it and refuse files whose
metadata has been altered or that belong to a different config.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pig_rules import GameConfig, enumerate_states
from .solve import Policy, ValueFunction

FORMAT_VERSION = 1
LAYOUT = (
    "0=Initial, 1=Final, then player-1 block and player-2 block; inside a block "
    "index = block_off[own] + opp*ntau[own] + tau with ntau[own] = tau_max(own)+1"
)
_VALUE_MAGIC = b"PIGSOLVE-VALUES\n"
_TEXT_MAGIC = "# pigsolve value table"


class FingerprintMismatch(ValueError):
    pass


class Cell(str, enum.Enum):
    ROLL = "R"
    STOP = "S"
    FORCED_STOP = "FS"
    FORCED_ROLL = "FR"
    NOT_A_STATE = "·"


_CELLS = list(Cell)
_GRAY = {Cell.ROLL: 128, Cell.FORCED_ROLL: 128, Cell.STOP: 0, Cell.FORCED_STOP: 0, Cell.NOT_A_STATE: 255}


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _fingerprint(config: GameConfig | None, tol) -> str | None:
    return None if config is None else config.fingerprint(tol=tol)


def _check_meta(meta: dict, kind: str, expect: GameConfig | None) -> GameConfig | None:
    if meta.get("kind") != kind:
        raise ValueError(f"not a {kind} file (kind={meta.get('kind')!r})")
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {meta.get('format_version')!r}")
    config = None if meta.get("config") is None else GameConfig.from_dict(meta["config"])
    fp = _fingerprint(config, meta.get("tol"))
    if fp != meta.get("fingerprint"):
        raise FingerprintMismatch(
            f"fingerprint mismatch: file says {meta.get('fingerprint')}, metadata hashes to {fp}"
        )
    if expect is not None and config != expect:
        raise FingerprintMismatch(f"file is for {config}, expected {expect}")
    if config is not None and meta.get("n_states") != enumerate_states(config).n_states:
        raise ValueError(f"file has {meta.get('n_states')} states, config implies {enumerate_states(config).n_states}")
    return config


def _read_bytes(src) -> bytes:
    if isinstance(src, (bytes, bytearray)):
        return bytes(src)
    return Path(src).read_bytes()


# ---------------------------------------------------------------------------
# policy maps


@dataclass(frozen=True)
class PolicyMapGrid:
    """One panel: rows are ``tau`` descending, columns own banked score ascending."""

    config: GameConfig
    player: int
    opponent_score: int
    taus: np.ndarray
    owns: np.ndarray
    cells: np.ndarray  # indices into list(Cell)
    fingerprint: str | None
    tol: float | None

    def cell(self, own: int, tau: int) -> Cell:
        r = int(self.taus[0]) - tau
        return _CELLS[int(self.cells[r, own])]

    def meta(self) -> dict:
        return {
            "kind": "policy-map",
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "fingerprint": self.fingerprint,
            "tol": self.tol,
            "player": self.player,
            "opponent_score": self.opponent_score,
            "rows": "tau descending",
            "columns": "own banked score ascending",
        }


def policy_map_grid(policy: Policy, player: int, opponent_score: int) -> PolicyMapGrid:
    config = policy.config
    if config is None:
        raise ValueError("policy maps need a dice-game policy")
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    t = config.target
    if not 0 <= opponent_score < t:
        raise ValueError(f"fixed opponent score must lie in 0..{t - 1}, got {opponent_score}")
    space = enumerate_states(config)
    top = int(config.tau_max(0))
    taus = np.arange(top, -1, -1)
    owns = np.arange(t)
    tau, own = np.meshgrid(taus, owns, indexing="ij")
    exists = tau <= np.vectorize(config.tau_max)(own)
    win = tau >= t - own

    cells = np.full(tau.shape, _CELLS.index(Cell.NOT_A_STATE), dtype=np.int8)
    cells[exists & win] = _CELLS.index(Cell.FORCED_STOP)
    cells[exists & ~win & (tau == 0)] = _CELLS.index(Cell.FORCED_ROLL)
    dec = exists & ~win & (tau > 0)
    o, tt = own[dec], tau[dec]
    idx = space.index(1, o, opponent_score, tt) if player == 1 else space.index(2, opponent_score, o, tt)
    act = policy.actions[idx]
    if (act < 0).any():
        k = int(np.flatnonzero(act < 0)[0])
        raise ValueError(f"policy has no action at decision state {space.state(int(idx[k]))}")
    cells[dec] = np.where(act == 1, _CELLS.index(Cell.ROLL), _CELLS.index(Cell.STOP))
    return PolicyMapGrid(config, player, int(opponent_score), taus, owns, cells, policy.fingerprint(), policy.tol)


def _grid_csv(grid: PolicyMapGrid) -> bytes:
    buf = io.StringIO()
    head = "tau/alpha" if grid.player == 1 else "tau/beta"
    buf.write(",".join([head, *map(str, grid.owns)]) + "\n")
    labels = np.array([c.value for c in _CELLS])
    for tau, row in zip(grid.taus, grid.cells):
        buf.write(",".join([str(tau), *labels[row]]) + "\n")
    return buf.getvalue().encode("utf-8")


def _grid_pgm(grid: PolicyMapGrid) -> bytes:
    gray = np.array([_GRAY[c] for c in _CELLS], dtype=np.uint8)
    h, w = grid.cells.shape
    comment = (
        f"# pigsolve policy-map fingerprint={grid.fingerprint} player={grid.player} "
        f"opponent_score={grid.opponent_score} tol={grid.tol!r} rows=tau-desc cols=own-asc "
        f"gray128=roll black=stop white=not-a-state"
    )
    header = f"P5\n{comment}\n{w} {h}\n255\n".encode("ascii")
    return header + gray[grid.cells].tobytes()


def _grid_json(grid: PolicyMapGrid) -> bytes:
    labels = [c.value for c in _CELLS]
    doc = {
        "meta": grid.meta(),
        "taus": grid.taus.tolist(),
        "owns": grid.owns.tolist(),
        "cells": [[labels[k] for k in row] for row in grid.cells],
    }
    return (_dumps(doc) + "\n").encode("utf-8")


def export_policy_map(policy: Policy, player: int, fixed_opponent_score: int, format: str = "csv") -> bytes:
    """Render one policy-map panel as CSV, binary PGM (P5) or JSON bytes."""
    grid = policy_map_grid(policy, player, fixed_opponent_score)
    writers = {"csv": _grid_csv, "pgm": _grid_pgm, "json": _grid_json}
    try:
        return writers[format.lower()](grid)
    except KeyError:
        raise ValueError(f"unknown policy-map format {format!r}; choose csv, pgm or json") from None


# ---------------------------------------------------------------------------
# value tables


def _value_meta(v: ValueFunction) -> dict:
    return {
        "kind": "value-table",
        "format_version": FORMAT_VERSION,
        "config": None if v.config is None else v.config.to_dict(),
        "tol": v.tol,
        "fingerprint": _fingerprint(v.config, v.tol),
        "certified": bool(v.certified),
        "method": v.method,
        "iterations": int(v.iterations),
        "n_states": int(len(v.values)),
        "layout": LAYOUT,
    }


def export_value_table(v: ValueFunction, format: str = "text") -> bytes:
    """Serialise a value table.

    ``text``: ``#`` metadata lines, then one value per line with 17
    significant digits.  ``bin``: a magic line, one JSON metadata line, then
    raw little-endian float64.  Both round-trip exactly.
    """
    meta = _value_meta(v)
    if format == "text":
        body = "\n".join(f"{x:.17g}" for x in v.values.tolist())
        return f"{_TEXT_MAGIC}\n# {_dumps(meta)}\n{body}\n".encode("ascii")
    if format == "bin":
        return _VALUE_MAGIC + _dumps(meta).encode("utf-8") + b"\n" + v.values.astype("<f8").tobytes()
    raise ValueError(f"unknown value-table format {format!r}; choose text or bin")


def load_value_table(src, expected_config: GameConfig | None = None) -> ValueFunction:
    data = _read_bytes(src)
    if data.startswith(_VALUE_MAGIC):
        rest = data[len(_VALUE_MAGIC) :]
        nl = rest.index(b"\n")
        meta = json.loads(rest[:nl])
        values = np.frombuffer(rest[nl + 1 :], dtype="<f8").astype(np.float64)
    elif data.startswith(_TEXT_MAGIC.encode()):
        lines = data.decode("ascii").splitlines()
        meta = json.loads(lines[1][2:])
        values = np.array([float(x) for x in lines[2:]], dtype=np.float64)
    else:
        raise ValueError("not a value-table file")
    config = _check_meta(meta, "value-table", expected_config)
    if len(values) != meta["n_states"]:
        raise ValueError(f"value table holds {len(values)} values, metadata says {meta['n_states']}")
    return ValueFunction(values, config=config, tol=meta["tol"], certified=meta["certified"],
                         method=meta["method"], iterations=meta["iterations"])


# ---------------------------------------------------------------------------
# policies

_NO_ACTION = "."


def export_policy(policy: Policy) -> bytes:
    """JSON policy file; ``actions`` is one character per state (``.`` = none)."""
    acts = np.asarray(policy.actions)
    if acts.min(initial=0) < -1 or acts.max(initial=0) > 9:
        raise ValueError("policy file format stores action indices 0..9 only")
    table = np.frombuffer(b".0123456789", dtype=np.uint8)
    encoded = table[acts.astype(np.int64) + 1].tobytes().decode("ascii")
    meta = {
        "kind": "policy",
        "format_version": FORMAT_VERSION,
        "config": None if policy.config is None else policy.config.to_dict(),
        "tol": policy.tol,
        "fingerprint": policy.fingerprint(),
        "iterations": int(policy.iterations),
        "source": policy.source,
        "n_states": int(len(acts)),
        "layout": LAYOUT,
        "codes": "0=Stop 1=Roll .=no choice",
    }
    return (_dumps({"meta": meta, "actions": encoded}) + "\n").encode("utf-8")


def load_policy(src, expected_config: GameConfig | None = None) -> Policy:
    doc = json.loads(_read_bytes(src))
    meta = doc["meta"]
    config = _check_meta(meta, "policy", expected_config)
    raw = np.frombuffer(doc["actions"].encode("ascii"), dtype=np.uint8)
    if len(raw) != meta["n_states"]:
        raise ValueError(f"policy holds {len(raw)} states, metadata says {meta['n_states']}")
    actions = np.where(raw == ord(_NO_ACTION), -1, raw.astype(np.int64) - ord("0")).astype(np.int8)
    return Policy(actions, config=config, tol=meta["tol"], iterations=meta["iterations"], source=meta["source"])


def write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return path
