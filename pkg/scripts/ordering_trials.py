"""How often does a Case 4 exploration phase contain an identical-ordering trial?

Compares the observed fraction with two predictions: the one the schedule
assumes, 1 - (1 - 1/n!)**m, and the exact all-agents-agree rate
1 - (1 - (1/n!)**(n-1))**m. They coincide for two agents only.

    python3 scripts/ordering_trials.py --agents 2 3 --delta 0.4 0.2 0.1 --runs 300
"""
import argparse
import math
import sys

from cisg.coordination import LearningParams, make_case4_controllers, run_protocol
from cisg.game import random_ergodic_cisg
from cisg.sim import ENV_STREAM, IMPERFECT, GameEnvironment, stream

T_PRIME = 10


def identical_fraction(n, delta, runs):
    params = LearningParams(epsilon=0.1, delta=delta, gamma=0.1, r_max=1.0, t_mix=2,
                            k1_override=3, t_prime_override=T_PRIME)
    hits, m = 0, None
    for run in range(runs):
        game = random_ergodic_cisg(2, (2,) * n, seed=run)
        ctrls = make_case4_controllers(2, game.action_counts, params, master_seed=run)
        m = ctrls[0].schedule.m
        run_protocol(ctrls, GameEnvironment(game, stream(run, ENV_STREAM)), m * T_PRIME, IMPERFECT)
        orderings = [[t.ordering for t in c.trials] for c in ctrls]
        hits += any(len(set(col)) == 1 for col in zip(*orderings))
    return m, hits / runs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--delta", type=float, nargs="+", default=[0.4, 0.2, 0.1])
    ap.add_argument("--runs", type=int, default=300)
    args = ap.parse_args(argv)
    print("n  delta  m   observed  assumed  exact")
    for n in args.agents:
        for delta in args.delta:
            m, frac = identical_fraction(n, delta, args.runs)
            p = 1 / math.factorial(n)
            assumed = 1 - (1 - p) ** m
            exact = 1 - (1 - p ** (n - 1)) ** m
            print(f"{n}  {delta:5.2f}  {m:2d}  {frac:8.3f}  {assumed:7.3f}  {exact:5.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
