"""Command-line front end.

    pigsolve solve    --variant classic --target 200 --out v.bin
    pigsolve export   --beta 0,150,180,185 --format pgm --out maps/
    pigsolve evaluate --a optimal --b minturns
    pigsolve simulate --a optimal --b holdat:20 --games 1000000 --seed 7
    pigsolve validate --variant exact

Results go to stdout as one JSON object.  Failures print one JSON line
``{"error": ..., "exit": ..., "message": ...}`` to stderr and exit with a
code from :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import artifacts_io as aio
from ._accel import set_threads
from .baselines import hold_at_policy, min_expected_turns
from .game_model import GameDefinition, certify_transient, validate_structure
from .matchup import exact_matchup, simulate_matchup
from .pig_rules import GameConfig, Variant, build_game
from .solve import DEFAULT_TOL, LAYER_RESIDUAL, NonTransientGame, Policy, extract_policy, layered_solve, value_iteration

EXIT_CODES = {
    "ok": 0,
    "internal": 1,
    "usage": 2,
    "unreadable_input": 3,
    "uncertified": 4,
    "not_converged": 5,
    "fingerprint_mismatch": 6,
}
CACHE_ENV = "PIGSOLVE_CACHE"

log = logging.getLogger("pigsolve")


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True), flush=True)


# ---------------------------------------------------------------------------
# shared plumbing


def _config(args) -> GameConfig:
    try:
        return GameConfig(args.variant, args.target, args.die_faces, args.bust_face)
    except ValueError as exc:
        raise CliError("usage", str(exc)) from None


def _tol(args, config: GameConfig) -> float:
    if args.tol is not None:
        if args.tol <= 0:
            raise CliError("usage", "--tol must be positive")
        return args.tol
    scale = config.target if config.variant is Variant.MAXDIFF else 1.0
    return DEFAULT_TOL * scale


def cache_dir(args=None) -> Path:
    if args is not None and getattr(args, "cache_dir", None):
        return Path(args.cache_dir)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "pigsolve"


def _cache_paths(args, key: str) -> tuple[Path, Path]:
    d = cache_dir(args)
    return d / f"{key}.values.bin", d / f"{key}.policy.json"


def _solve(args, config: GameConfig):
    """Solve ``config``; returns ``(game, ValueFunction, Policy, report dict)``."""
    game = build_game(config)
    if args.method == "layered":
        v = layered_solve(game)
        if not v.certified:
            raise CliError("not_converged", "layered solve did not reach its residual target")
        report = {"method": "layered", "certified": True, "iterations": v.iterations}
    else:
        try:
            v, rep = value_iteration(
                game, tol=_tol(args, config), max_iters=args.max_iters, mode=args.mode,
                require_transient=not args.allow_nontransient,
            )
        except NonTransientGame as exc:
            raise CliError("uncertified", str(exc)) from None
        report = {
            "method": v.method, "certified": rep.certified, "iterations": rep.iterations,
            "final_residual": rep.final_residual, "wall_time": round(rep.wall_time, 3),
        }
        if not rep.certified:
            raise CliError(
                "not_converged",
                f"residual {rep.final_residual:.3g} >= tol {rep.tol:.3g} after {rep.iterations} sweeps",
            )
    policy = extract_policy(game, v)
    report.update(fingerprint=v.fingerprint(), tol=v.tol, v_initial=float(v.values[game.initial]))
    return game, v, policy, report


def _solve_key(args, config: GameConfig) -> str:
    if args.method == "layered":
        tol = LAYER_RESIDUAL * (config.target if config.variant is Variant.MAXDIFF else 1.0)
    else:
        tol = _tol(args, config)
    return config.fingerprint(tol=tol)


def _optimal_policy(args, config: GameConfig) -> Policy:
    """Cached optimal policy; solves and caches on a miss (announced on stderr)."""
    vpath, ppath = _cache_paths(args, _solve_key(args, config))
    if ppath.exists():
        try:
            return aio.load_policy(ppath, expected_config=config)
        except aio.FingerprintMismatch as exc:
            raise CliError("fingerprint_mismatch", f"{ppath}: {exc}") from None
    print(f"pigsolve: no cached solution at {ppath}; solving", file=sys.stderr, flush=True)
    _, v, policy, _ = _solve(args, config)
    aio.write_bytes(vpath, aio.export_value_table(v, "bin"))
    aio.write_bytes(ppath, aio.export_policy(policy))
    return policy


def _load_policy_file(path, config: GameConfig) -> Policy:
    try:
        return aio.load_policy(path, expected_config=config)
    except aio.FingerprintMismatch as exc:
        raise CliError("fingerprint_mismatch", f"{path}: {exc}") from None
    except (OSError, ValueError, KeyError) as exc:
        raise CliError("unreadable_input", f"{path}: {exc}") from None


def _policy_spec(args, config: GameConfig, spec: str) -> Policy:
    if spec == "optimal":
        return _optimal_policy(args, config)
    if spec == "minturns":
        if config.variant is not Variant.CLASSIC:
            raise CliError("usage", "minturns is defined for the classic variant only")
        return min_expected_turns(config)[1]
    if spec.startswith("holdat:"):
        try:
            return hold_at_policy(config, int(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise CliError("usage", f"bad policy spec {spec!r}: {exc}") from None
    if spec.startswith("file:"):
        return _load_policy_file(spec[5:], config)
    raise CliError("usage", f"unknown policy spec {spec!r}; use optimal, minturns, holdat:K or file:PATH")


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    config = _config(args)
    _, v, policy, report = _solve(args, config)
    out = Path(args.out) if args.out else None
    key = _solve_key(args, config)
    vpath, ppath = _cache_paths(args, key)
    aio.write_bytes(vpath, aio.export_value_table(v, "bin"))
    aio.write_bytes(ppath, aio.export_policy(policy))
    if out is not None:
        fmt = "bin" if out.suffix == ".bin" else "text"
        aio.write_bytes(out, aio.export_value_table(v, fmt))
        pout = Path(args.policy_out) if args.policy_out else out.with_name(out.stem + ".policy.json")
        aio.write_bytes(pout, aio.export_policy(policy))
        report.update(values=str(out), policy=str(pout))
    report.update(cache=str(ppath), config=config.to_dict())
    _emit(report)
    return 0


def cmd_export(args) -> int:
    config = _config(args)
    policy = _load_policy_file(args.policy, config) if args.policy else _optimal_policy(args, config)
    try:
        betas = [int(b) for b in args.beta.split(",") if b.strip()]
    except ValueError:
        raise CliError("usage", f"--beta expects comma-separated integers, got {args.beta!r}") from None
    outdir = Path(args.out or ".")
    written = []
    for beta in betas:
        try:
            data = aio.export_policy_map(policy, args.player, beta, args.format)
        except ValueError as exc:
            raise CliError("usage", str(exc)) from None
        name = f"policy_{config.variant.value}_{config.target}_p{args.player}_opp{beta}.{args.format}"
        written.append(str(aio.write_bytes(outdir / name, data)))
    _emit({"files": written, "fingerprint": policy.fingerprint()})
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    game = build_game(config)
    a = _policy_spec(args, config, args.a)
    b = _policy_spec(args, config, args.b)
    res = exact_matchup(game, a, b)
    _emit({"a": args.a, "b": args.b, "method": res.method, "p_win_fair_start": res.p_win_fair_start,
           "p_win_first_seat": res.p_win_first_seat, "p_win_second_seat": res.p_win_second_seat})
    return 0


def cmd_simulate(args) -> int:
    config = _config(args)
    if args.games < 1:
        raise CliError("usage", "--games must be at least 1")
    game = build_game(config)
    a = _policy_spec(args, config, args.a)
    b = _policy_spec(args, config, args.b)
    res = simulate_matchup(game, a, b, args.games, args.seed, seats=args.seats)
    _emit({"a": args.a, "b": args.b, "method": res.method, "games": res.games, "seed": res.seed,
           "rng": res.rng, "seats": res.seats, "p_win_fair_start": res.p_win_fair_start,
           "std_error": res.std_error, "p_win_first_seat": res.p_win_first_seat,
           "p_win_second_seat": res.p_win_second_seat})
    return 0


def load_game_json(path) -> GameDefinition:
    """Generic game from JSON.

    ``{"states": [...], "initial": s, "final": s,
       "actions": {s: [[a...], [b...]]},
       "transitions": [{"state": s, "a": a, "b": b, "to": [[t, p], ...]}],
       "payoff": [{"state": s, "a": a, "b": b, "value": r}]}``
    """
    try:
        doc = json.loads(Path(path).read_text())
        states = doc["states"]
        actions = {s: (tuple(r), tuple(c)) for s, (r, c) in doc["actions"].items()}
        trans = {(t["state"], t["a"], t["b"]): [(u, float(p)) for u, p in t["to"]] for t in doc["transitions"]}
        pay = {(p["state"], p["a"], p["b"]): float(p["value"]) for p in doc.get("payoff", [])}
        return GameDefinition.from_mapping(states, actions, trans, doc["initial"], doc["final"], pay)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError("unreadable_input", f"{path}: {exc}") from None


def cmd_validate(args) -> int:
    if args.game:
        game = load_game_json(args.game)
        name = str(args.game)
    else:
        config = _config(args)
        game = build_game(config)
        name = f"{config.variant.value}/{config.target}"
    problems = validate_structure(game, limit=20)
    if problems:
        _emit({"game": name, "valid": False, "violations": problems})
        raise CliError("uncertified", f"{len(problems)} structural violation(s); first: {problems[0]}")
    rep = certify_transient(game)
    first = [str(s) for s in rep.offending_states[:10]]
    _emit({"game": name, "valid": True, "certified": rep.certified, "rounds": rep.rounds,
           "n_states": game.n_states, "n_offending": len(rep.offending_index), "offending_sample": first})
    if not rep.certified:
        raise CliError("uncertified", f"{len(rep.offending_index)} states never reach the final state for sure")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pigsolve", description="Optimal play and analysis for the dice race game.")
    common = _Parser(add_help=False)
    g = common.add_argument_group("game")
    g.add_argument("--variant", default="classic", choices=[v.value for v in Variant])
    g.add_argument("--target", type=int, default=200)
    g.add_argument("--die-faces", type=int, default=6)
    g.add_argument("--bust-face", type=int, default=1)
    s = common.add_argument_group("solver")
    s.add_argument("--tol", type=float, default=None, help="stopping tolerance (default 1e-10, times target for maxdiff)")
    s.add_argument("--max-iters", type=int, default=1_000_000)
    s.add_argument("--method", choices=["vi", "layered"], default="vi")
    s.add_argument("--mode", choices=["jacobi", "gauss-seidel"], default="jacobi")
    s.add_argument("--allow-nontransient", action="store_true",
                   help="iterate even if the transience certificate fails (least fixed point from 0)")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--cache-dir", default=None, help=f"solution cache (default ${CACHE_ENV} or ~/.cache/pigsolve)")
    s.add_argument("-v", "--verbose", action="store_true")

    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", parents=[common], help="solve by value iteration and save value table and policy")
    sp.add_argument("--out", default=None, help="value table path (.bin for binary, otherwise text)")
    sp.add_argument("--policy-out", default=None)
    sp.set_defaults(func=cmd_solve)

    ep = sub.add_parser("export", parents=[common], help="write policy-map panels")
    ep.add_argument("--beta", default="0,150,180,185", help="comma-separated opponent scores")
    ep.add_argument("--player", type=int, choices=[1, 2], default=1)
    ep.add_argument("--format", choices=["csv", "pgm", "json"], default="pgm")
    ep.add_argument("--policy", default=None, help="policy file (default: cached optimal policy)")
    ep.add_argument("--out", default=None, help="output directory")
    ep.set_defaults(func=cmd_export)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "exact head-to-head win probabilities"),
        ("simulate", cmd_simulate, "seeded Monte Carlo head-to-head"),
    ):
        mp = sub.add_parser(name, parents=[common], help=helptext)
        mp.add_argument("--a", default="optimal", help="optimal | minturns | holdat:K | file:PATH")
        mp.add_argument("--b", "--baseline", dest="b", default="minturns")
        if name == "simulate":
            mp.add_argument("--games", type=int, default=1_000_000)
            mp.add_argument("--seed", type=int, default=0)
            mp.add_argument("--seats", choices=["coin", "alternate"], default="coin")
        mp.set_defaults(func=func)

    vp = sub.add_parser("validate", parents=[common], help="structural checks and transience certificate")
    vp.add_argument("--game", default=None, help="generic game JSON instead of a dice variant")
    vp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(name)s: %(message)s")
        if args.threads:
            set_threads(args.threads)
        return args.func(args)
    except CliError as exc:
        code = EXIT_CODES[exc.kind]
        print(json.dumps({"error": exc.kind, "exit": code, "message": str(exc)}), file=sys.stderr, flush=True)
        return code
    except aio.FingerprintMismatch as exc:
        print(json.dumps({"error": "fingerprint_mismatch", "exit": 6, "message": str(exc)}), file=sys.stderr)
        return 6


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
