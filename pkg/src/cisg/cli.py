"""Command line: ``cisg run``, ``cisg oracle``, ``cisg replay``.

Exit codes: 0 success, 2 configuration error, 3 runtime fault.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .game import GameSpecError, SizeCapError, check_ergodic, induce_mdp, load_game, policy_count
from .harness import (
    PROTOCOLS,
    RUNLOG_FILE,
    ConfigError,
    ProtocolConfig,
    evaluate_against_oracle,
    replay,
    run_simulation,
    validate_config,
    write_run,
)
from .indexing import JointActionIndexing
from .planning import MixingCapExceeded, epsilon_mixing_time, optimal_value_oracle

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 2, 3
SUMMARY_HEADER = ("seed", "steps", "final_avg", "v_opt", "target", "time_to_target", "switches")
DEFAULT_MIXING_EPSILONS = (0.25, 0.1, 0.05)

log = logging.getLogger("cisg")


def parse_seeds(text: str) -> list[int]:
    """``7``, ``1,4,9`` or an inclusive range ``1..30``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _fmt(x) -> str:
    return "" if x is None else repr(x) if isinstance(x, float) else str(x)


def cmd_run(args) -> int:
    try:
        seeds = parse_seeds(args.seed)
    except ValueError as exc:
        return _config_error(f"--seed: {exc}")
    try:
        game = load_game(args.game)
    except (OSError, GameSpecError) as exc:
        return _config_error(f"cannot load game {args.game}: {exc}")
    config = ProtocolConfig(
        protocol=args.protocol,
        monitoring=args.monitoring,
        epsilon=args.epsilon,
        delta=args.delta,
        gamma=args.gamma,
        t_mix=args.t_mix,
        k1_override=args.k1_override,
        bound=args.bound,
        t_prime=args.t_prime,
    )
    try:
        validate_config(config, game)
    except ConfigError as exc:
        return _config_error(str(exc))
    if args.steps < 1:
        return _config_error("--steps must be >= 1")
    if args.oracle and policy_count(game.num_joint_actions, game.num_states) > args.oracle_cap:
        return _config_error(
            f"--oracle: {game.num_joint_actions}^{game.num_states} policies exceed the cap {args.oracle_cap}"
        )

    out = Path(args.out)
    try:
        v_opt = None
        if args.oracle:
            v_opt = optimal_value_oracle(induce_mdp(game), cap=args.oracle_cap).optimal_value
        rows = []
        for seed in seeds:
            result = run_simulation(game, config, seed, args.steps)
            write_run(out / f"seed-{seed:03d}", result, game, args.steps)
            metrics = result.metrics
            if args.oracle:
                metrics = evaluate_against_oracle(result.log, game, config.epsilon, config.gamma, v_opt)
            rows.append([seed, metrics.steps, metrics.running_average, metrics.v_opt,
                         metrics.target, metrics.time_to_target, metrics.switches])
            log.info("seed %d: final average %.4f", seed, metrics.running_average)
        with open(out / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SUMMARY_HEADER)
            writer.writerows([[_fmt(x) for x in row] for row in rows])
    except Exception as exc:  # noqa: BLE001
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    print(f"wrote {len(rows)} runs to {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        game = load_game(args.game)
    except (OSError, GameSpecError) as exc:
        return _config_error(f"cannot load game {args.game}: {exc}")
    indexing = JointActionIndexing.natural(game.action_counts)
    mdp = induce_mdp(game, indexing)
    try:
        report = check_ergodic(mdp, cap=args.cap)
    except SizeCapError as exc:
        return _config_error(str(exc))
    if not report:
        print("ergodic: no")
        print(f"witness policy: {_joint_policy(report.witness_policy, indexing)}")
        i, j = report.unreachable
        print(f"state {j} unreachable from state {i}")
        return EXIT_OK
    print("ergodic: yes")
    value = optimal_value_oracle(mdp, cap=args.cap)
    print(f"v(M) = {value.optimal_value!r}")
    print(f"argmax policy: {_joint_policy(value.argmax_policy.actions, indexing)}")
    for eps in args.epsilon or DEFAULT_MIXING_EPSILONS:
        try:
            t = epsilon_mixing_time(mdp, value.argmax_policy, eps)
            print(f"mixing time (epsilon={eps}): {t}")
        except MixingCapExceeded as exc:
            print(f"mixing time (epsilon={eps}): exceeds cap {exc.cap}")
    return EXIT_OK


def cmd_replay(args) -> int:
    snapshot = Path(args.snapshot)
    try:
        result = replay(snapshot)
    except (OSError, ValueError, KeyError) as exc:
        return _config_error(f"cannot replay {snapshot}: {exc}")
    recorded = snapshot.with_name(RUNLOG_FILE).read_text()
    if result.log.to_csv() != recorded:
        print("replay differs from the recorded run log", file=sys.stderr)
        return EXIT_FAULT
    print("replay identical")
    return EXIT_OK


def _joint_policy(actions, indexing) -> str:
    return " ".join(
        f"s{s}:{'/'.join(map(str, indexing.decode(a)))}" for s, a in enumerate(actions)
    )


def _config_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cisg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a protocol over a seed sweep")
    run.add_argument("--game", required=True)
    run.add_argument("--protocol", required=True, choices=PROTOCOLS)
    run.add_argument("--monitoring", default="imperfect", choices=("perfect", "imperfect"))
    run.add_argument("--epsilon", type=float, default=0.1)
    run.add_argument("--delta", type=float, default=0.1)
    run.add_argument("--gamma", type=float, default=0.1)
    run.add_argument("--t-mix", type=int)
    run.add_argument("--k1-override", type=int)
    run.add_argument("--bound", type=int)
    run.add_argument("--t-prime", type=int, help="override the trial length (cases 4-6)")
    run.add_argument("--seed", default="0", help="seed, list a,b,c or inclusive range a..b")
    run.add_argument("--steps", type=int, default=10_000)
    run.add_argument("--oracle", action="store_true", help="compute v(M) and the target")
    run.add_argument("--oracle-cap", type=int, default=10**6)
    run.add_argument("--out", default="results")
    run.set_defaults(func=cmd_run)

    oracle = sub.add_parser("oracle", help="optimal value, argmax policy, mixing times")
    oracle.add_argument("--game", required=True)
    oracle.add_argument("--epsilon", type=float, action="append")
    oracle.add_argument("--cap", type=int, default=10**6)
    oracle.set_defaults(func=cmd_oracle)

    rep = sub.add_parser("replay", help="re-run a config.json snapshot and compare")
    rep.add_argument("snapshot")
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
