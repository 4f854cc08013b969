"""Umbrella command line: train / simulate / evaluate / serve.

Exit codes: 0 success, 1 validation problem (flags, config, weights),
2 runtime failure.  Every artifact lands under --out; nothing is written
elsewhere.  Log level comes from BP_LOG_LEVEL (error | info | debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import BearingPursuitError, ConfigError

logger = logging.getLogger("bearing_pursuit")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _setup_logging() -> None:
    level = os.environ.get("BP_LOG_LEVEL", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"BP_LOG_LEVEL: unknown level {level!r}")
    logging.basicConfig(
        level=levels[level],
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bearing-pursuit",
        description=(
            "Cooperative bearing-only target localization and pursuit: "
            "train policies, run logged simulations, batch-evaluate, or "
            "serve a live human-vs-team session."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser(
        "train", help="run the MADDPG training schedule from a config")
    train_p.add_argument("--config", required=True, help="scenario TOML")
    train_p.add_argument("--out", required=True,
                         help="output directory (weights/, curves.csv, "
                              "checkpoint/)")
    train_p.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
    train_p.add_argument("--resume", action="store_true",
                         help="continue from the checkpoint under --out")

    sim_p = sub.add_parser(
        "simulate", help="one richly logged closed-loop episode")
    sim_p.add_argument("--config", required=True)
    sim_p.add_argument("--weights", required=True, help="directory with "
                       "actor_<i>.json files")
    sim_p.add_argument("--seed", type=int, default=None)
    sim_p.add_argument("--out", required=True)
    sim_p.add_argument("--mode", choices=["deploy", "ground-truth"],
                       default="deploy")

    eval_p = sub.add_parser(
        "evaluate", help="batch of noise-free episodes with aggregates")
    eval_p.add_argument("--config", required=True)
    eval_p.add_argument("--weights", required=True)
    eval_p.add_argument("--episodes", type=int, default=10)
    eval_p.add_argument("--seed", type=int, default=None)
    eval_p.add_argument("--out", required=True)
    eval_p.add_argument("--mode", choices=["deploy", "ground-truth"],
                        default="deploy")

    serve_p = sub.add_parser(
        "serve", help="live session: policies pursue a human-driven evader")
    serve_p.add_argument("--config", required=True)
    serve_p.add_argument("--weights", required=True)
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--seed", type=int, default=None)
    return parser


def _load(config_path: str, seed_override: int | None):
    from .scenario import load_config

    config = load_config(config_path)
    if seed_override is not None:
        config = replace(config, seed=seed_override)
    return config


def cmd_train(args) -> int:
    from .learner import train

    config = _load(args.config, args.seed)
    result = train(config, args.out, resume=args.resume)
    logger.info("trained %d episodes; weights in %s",
                result.episodes_run, result.weights_dir)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .scenario import (RunMode, load_policies, run_episode, summarize,
                           write_summary)

    config = _load(args.config, args.seed)
    policies = load_policies(args.weights, len(config.pursuers))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectory.csv", "w", encoding="utf-8", newline="") as tf, \
            open(out / "filter_trace.csv", "w", encoding="utf-8",
                 newline="") as ff:
        metrics = run_episode(
            config, policies, mode=RunMode(args.mode), seed=args.seed,
            trajectory_stream=tf, filter_trace_stream=ff,
        )
    write_summary(out / "summary.json", summarize(metrics))
    logger.info("simulated %d ticks into %s", len(metrics), out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .scenario import (RunMode, load_policies, run_episode, summarize,
                           write_summary)

    config = _load(args.config, args.seed)
    policies = load_policies(args.weights, len(config.pursuers))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base_seed = config.seed if args.seed is None else args.seed
    records = []
    for episode in range(args.episodes):
        metrics = run_episode(config, policies, mode=RunMode(args.mode),
                              seed=base_seed + episode)
        records.append({"episode": episode, "seed": base_seed + episode,
                        **summarize(metrics)})
    aggregate = {
        "episodes": args.episodes,
        "mean_reward": sum(r["reward"]["team_mean"] for r in records)
        / max(1, len(records)),
        "mean_range_error": sum(
            r["steady_state"]["range_error"]["mean"] for r in records
        ) / max(1, len(records)),
    }
    write_summary(out / "evaluation.json", {
        "format_version": 1,
        "per_episode": records,
        "aggregate": aggregate,
    })
    logger.info("evaluated %d episodes into %s", args.episodes, out)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .livebridge import serve
    from .scenario import load_policies

    config = _load(args.config, args.seed)
    policies = load_policies(args.weights, len(config.pursuers))
    serve(config, policies, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            # argparse exits 2 on usage errors; map to the validation code
            return EXIT_OK if exc.code == 0 else EXIT_USAGE
        handler = {
            "train": cmd_train,
            "simulate": cmd_simulate,
            "evaluate": cmd_evaluate,
            "serve": cmd_serve,
        }[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BearingPursuitError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
