"""Time the hot kernels under both backends.

    python benchmarks/bench_kernels.py [--target 100] [--repeat 3]

The numba timings exclude compilation (one warm-up call first).  Set
PIGSOLVE_DISABLE_NUMBA=1 to see what the default backend falls back to.
"""

import argparse
import time

import numpy as np

from pigsolve import _accel, _kernels
from pigsolve.baselines import hold_at_policy
from pigsolve.game_model import certify_transient
from pigsolve.matchup import simulate_matchup
from pigsolve.pig_rules import GameConfig, build_game
from pigsolve.solve import extract_policy, layered_solve


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--target", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--games", type=int, default=100_000)
    args = ap.parse_args()

    cfg = GameConfig("classic", args.target)
    t = time.perf_counter()
    game = build_game(cfg)
    print(f"build_game target={args.target}: {game.n_states} states, {time.perf_counter() - t:.2f}s")
    v = np.random.default_rng(0).uniform(0, 1, game.n_states)
    out = np.empty_like(v)
    opt = extract_policy(game, layered_solve(game))
    hold = hold_at_policy(cfg, 20)

    cases = {
        "bellman sweep": lambda b: _kernels.bellman_sweep(v, game, out=out, backend=b),
        "transience rank": lambda b: certify_transient(game, backend=b),
        "layered solve": lambda b: layered_solve(game, check=False, backend=b),
        f"simulate {args.games} games": lambda b: simulate_matchup(game, opt, hold, args.games, seed=1, backend=b),
    }
    backends = ["numba", "numpy"] if _accel.HAVE_NUMBA else ["numpy"]
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases.items():
        row = []
        for b in backends:
            fn(b)  # warm-up / compile
            row.append(best_of(lambda: fn(b), args.repeat))
        line = f"{name:<28}" + "".join(f"{x:>11.3f}s" for x in row)
        if len(row) == 2:
            line += f"{row[1] / row[0]:>11.1f}x"
        print(line, flush=True)


if __name__ == "__main__":
    main()
