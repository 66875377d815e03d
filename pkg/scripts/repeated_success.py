"""Empirical vs closed-form success rate of the repeated-game protocol.

Each k x k game has one best joint action placed at random; success means
the agents lock on it after the k**3 exploration steps.

    python3 scripts/repeated_success.py --k 2 3 4 5 --seeds 1000
"""
import argparse
import sys

import numpy as np

from cisg.coordination import make_repeated_controllers, run_repeated_game, success_probability_repeated
from cisg.game import repeated_game
from cisg.sim import ENV_STREAM, GameEnvironment, stream


def success_rate(k, seeds):
    hits = 0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        payoffs = rng.uniform(0.0, 0.8, size=(k, k))
        best = tuple(int(x) for x in rng.integers(k, size=2))
        payoffs[best] = 1.0
        game = repeated_game(payoffs, r_max=1.0)
        ctrls = make_repeated_controllers(game.action_counts, k, master_seed=seed)
        log = run_repeated_game(ctrls, GameEnvironment(game, stream(seed, ENV_STREAM)), k**3 + 1)
        hits += log.records[-1].actions == best
    return hits / seeds


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--seeds", type=int, default=1000)
    args = ap.parse_args(argv)
    print("k  empirical  closed-form  1-exp(-k)")
    for k in args.k:
        print(f"{k}  {success_rate(k, args.seeds):9.3f}  {success_probability_repeated(k):11.3f}  {1 - np.exp(-k):9.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
