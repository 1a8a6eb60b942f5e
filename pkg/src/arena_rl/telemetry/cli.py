"""``arena-rl`` command-line interface.

Results go to stdout (JSON or a tab-separated table). Failures print one
line to stderr of the form ``error: {"kind": ..., "message": ...}`` and
exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from arena_rl.policy import CheckpointError
from arena_rl.sim import ConfigError
from arena_rl.telemetry import commands
from arena_rl.telemetry.replay import ReplayFormatError
from arena_rl.telemetry.usage import MetricsFormatError
from arena_rl.trainer.ppo import NonFiniteLossError

EXIT_ERROR = 1
EXIT_USAGE = 2


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse failures on a single line
        raise CliUsageError(message)


def _finite(o):
    """Replace NaN/inf with None so the output stays strict JSON."""
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def _emit(obj) -> None:
    print(json.dumps(_finite(obj), sort_keys=True, allow_nan=False))


def _fail(kind: str, message: str, code: int) -> int:
    line = json.dumps({"kind": kind, "message": str(message).replace("\n", " ")})
    print(f"error: {line}", file=sys.stderr)
    return code


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arena-rl", description="Self-play PPO for a team ball game on a stadium-shaped track.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a policy")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="play two checkpoints against each other")
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--config", help="arena config (defaults to the standard arena sized to the checkpoint)")

    u = sub.add_parser("action-usage", help="windowed action usage from a metrics CSV")
    u.add_argument("--metrics", required=True)
    u.add_argument("--windows", type=int, default=commands.DEFAULT_WINDOWS)
    u.add_argument("--threshold", type=float, default=commands.DEFAULT_THRESHOLD)

    m = sub.add_parser("multiplier-study", help="train at penalty multipliers 0, 0.5 and 1")
    m.add_argument("--config", required=True)
    m.add_argument("--seeds", type=_seeds, default=[0, 1, 2])
    m.add_argument("--steps", type=int)

    b = sub.add_parser("bench", help="decision latency benchmark")
    b.add_argument("--ckpt")
    b.add_argument("--agents", type=int, default=6)
    b.add_argument("--iters", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("replay", help="export one episode as JSON lines")
    r.add_argument("--a", required=True)
    r.add_argument("--b", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--config")

    d = sub.add_parser("describe-obs", help="print the observation layout")
    d.add_argument("--team-size", type=int, choices=(1, 2, 3), required=True)

    rc = sub.add_parser("random-ckpt", help="write a freshly initialised checkpoint")
    rc.add_argument("--team-size", type=int, choices=(1, 2, 3), required=True)
    rc.add_argument("--seed", type=int, default=0)
    rc.add_argument("--out", required=True)
    return p


def _run(args) -> None:
    if args.command == "train":
        res = commands.cmd_train(args.config, args.seed, args.out)
        _emit({"out": args.out, "updates": len(res.history), "steps": res.steps})
    elif args.command == "eval":
        if args.episodes < 0:
            raise ValueError("episodes must be non-negative")
        _emit(commands.cmd_eval(args.a, args.b, args.episodes, args.seed, args.config).as_dict())
    elif args.command == "action-usage":
        print(commands.cmd_action_usage(args.metrics, args.windows, args.threshold).table())
    elif args.command == "multiplier-study":
        study = commands.cmd_multiplier_study(args.config, args.seeds, args.steps)
        cols = ["m", "seeds", "goals", "episodes", "mean_points_per_goal", "goals_per_episode"]
        print("\t".join(cols))
        for row in study["by_multiplier"]:
            print("\t".join(str(row[c]) for c in cols))
    elif args.command == "bench":
        if args.iters < 1:
            raise ValueError("iters must be at least 1")
        _emit(commands.cmd_bench(args.ckpt, args.agents, args.iters, args.seed).as_dict())
    elif args.command == "replay":
        n = commands.cmd_replay(args.a, args.b, args.seed, args.out, args.config)
        _emit({"out": args.out, "frames": n})
    elif args.command == "describe-obs":
        _emit(commands.cmd_describe_obs(args.team_size))
    elif args.command == "random-ckpt":
        commands.random_checkpoint(args.team_size, args.seed, args.out)
        _emit({"out": args.out})


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliUsageError as exc:
        return _fail("UsageError", exc, EXIT_USAGE)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        return _fail("ConfigError", exc, EXIT_ERROR)
    except CheckpointError as exc:
        return _fail("CheckpointError", exc, EXIT_ERROR)
    except (MetricsFormatError, ReplayFormatError) as exc:
        return _fail("FormatError", exc, EXIT_ERROR)
    except NonFiniteLossError as exc:
        return _fail("NonFiniteLoss", exc, EXIT_ERROR)
    except OSError as exc:
        return _fail("IOError", f"{exc.filename or ''} {exc.strerror or exc}".strip(), EXIT_ERROR)
    except ValueError as exc:
        return _fail("ValueError", exc, EXIT_ERROR)
    return 0


if __name__ == "__main__":
    sys.exit(main())
