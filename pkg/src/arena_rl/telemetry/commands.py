"""Implementations behind the command-line subcommands.

Each ``cmd_*`` function returns plain data (and writes files where the
command produces artifacts) so it can be driven from tests without a
subprocess. The argparse layer in :mod:`arena_rl.telemetry.cli` only
formats the results.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from arena_rl.obs_action import observation_layout, observation_size
from arena_rl.policy import PolicyParams, init_params, load_checkpoint, save_checkpoint
from arena_rl.sim import ArenaConfig
from arena_rl.telemetry import config as cfgio
from arena_rl.telemetry.bench import LatencyStats, bench_inference
from arena_rl.telemetry.evaluate import EvalReport, evaluate, play_episode
from arena_rl.telemetry.io import RunManifest, atomic_write_text, code_version, metrics_csv_text
from arena_rl.telemetry.replay import dumps_frames, export_replay_frame
from arena_rl.telemetry.usage import DEFAULT_THRESHOLD, DEFAULT_WINDOWS, UsageReport, action_usage  # noqa: F401
from arena_rl.trainer.rollout import stream_seed
from arena_rl.trainer.train import METRIC_COLUMNS, TrainResult, train

MULTIPLIERS = (0.0, 0.5, 1.0)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _arena_for(params: PolicyParams, config_path=None) -> ArenaConfig:
    """Arena from a config file, or the default arena sized to the checkpoint's input."""
    if config_path is not None:
        arena = cfgio.load(config_path).arena
    else:
        sizes = {observation_size(n): n for n in (1, 2, 3)}
        if params.input_dim not in sizes:
            raise ValueError(f"checkpoint input_dim {params.input_dim} matches no team size")
        arena = ArenaConfig(team_size=sizes[params.input_dim])
    if observation_size(arena.team_size) != params.input_dim:
        raise ValueError(f"checkpoint input_dim {params.input_dim} does not fit team_size {arena.team_size}")
    return arena


def cmd_train(config_path, seed: int, out_dir) -> TrainResult:
    """Trains and writes ``metrics.csv``, checkpoints, ``config.ini`` and ``manifest.json`` into ``out_dir``."""
    run = cfgio.load(config_path)
    run.validate()
    out = Path(out_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(json.dumps(run.as_dict(), sort_keys=True).encode()).hexdigest()[:10]
    manifest = RunManifest(run_id=f"train-{digest}-s{seed}", seed=seed, config=run.as_dict(),
                           code_version=code_version(), started_at=_now())
    atomic_write_text(out / "config.ini", cfgio.dumps(run))

    def checkpoint(row, result):
        # rewrite the whole CSV after every update; atomic, so a crash leaves the previous version
        atomic_write_text(out / "metrics.csv", metrics_csv_text(result.history, METRIC_COLUMNS))

    result = train(run.ppo, run.arena, run.reward, seed, on_update=checkpoint)
    atomic_write_text(out / "metrics.csv", metrics_csv_text(result.history, METRIC_COLUMNS))
    save_checkpoint(result.initial_params, out / "checkpoints" / "initial.ckpt")
    manifest.artifacts = {"config": "config.ini", "metrics": "metrics.csv",
                          "initial_checkpoint": "checkpoints/initial.ckpt"}
    if result.steps > 0:
        save_checkpoint(result.params, out / "checkpoints" / "final.ckpt")
        manifest.artifacts["final_checkpoint"] = "checkpoints/final.ckpt"
    manifest.finished_at = _now()
    atomic_write_text(out / "manifest.json", manifest.to_json())
    return result


def cmd_eval(a_path, b_path, episodes: int, seed: int, config_path=None) -> EvalReport:
    a = load_checkpoint(a_path)
    b = load_checkpoint(b_path, expected_input_dim=a.input_dim)
    return evaluate(a, b, _arena_for(a, config_path), episodes, seed)


def cmd_action_usage(metrics_path, windows: int = DEFAULT_WINDOWS,
                     threshold: float = DEFAULT_THRESHOLD) -> UsageReport:
    return action_usage(metrics_path, windows=windows, threshold=threshold)


def summarize_history(history: Sequence[dict]) -> dict:
    """Points-per-goal and goal frequency over a whole training history."""
    hist = np.zeros(3, dtype=np.int64)
    episodes = 0
    for row in history:
        hist += np.array([int(x) for x in row["points_scored_histogram"].split(";")])
        episodes += int(row["episodes"])
    goals = int(hist.sum())
    points = int((hist * np.array([1, 2, 3])).sum())
    return {
        "goals": goals,
        "episodes": episodes,
        "points_histogram": hist.tolist(),
        "mean_points_per_goal": points / goals if goals else float("nan"),
        "goals_per_episode": goals / episodes if episodes else float("nan"),
    }


def cmd_multiplier_study(config_path, seeds: Sequence[int], steps: Optional[int] = None,
                         multipliers: Sequence[float] = MULTIPLIERS) -> dict:
    """One training run per (multiplier, seed); returns per-run rows and per-multiplier aggregates."""
    from dataclasses import replace

    run = cfgio.load(config_path)
    ppo = run.ppo if steps is None else replace(run.ppo, total_decision_steps=int(steps))
    rows, agg = [], []
    for m in multipliers:
        reward = replace(run.reward, penalty_multiplier=float(m))
        histories = []
        for s in seeds:
            res = train(ppo, run.arena, reward, int(s))
            histories.append(res.history)
            rows.append({"m": float(m), "seed": int(s), **summarize_history(res.history)})
        agg.append({"m": float(m), "seeds": len(seeds), **summarize_history([r for h in histories for r in h])})
    return {"runs": rows, "by_multiplier": agg}


def cmd_bench(ckpt_path, agents: int, iterations: int, seed: int = 0) -> LatencyStats:
    params = load_checkpoint(ckpt_path) if ckpt_path is not None else None
    return bench_inference(agents, iterations, params=params, seed=seed)


def cmd_replay(a_path, b_path, seed: int, out_path, config_path=None) -> int:
    """Plays one episode (A as team A) and writes one frame per tick. Returns the frame count."""
    a = load_checkpoint(a_path)
    b = load_checkpoint(b_path, expected_input_dim=a.input_dim)
    arena = _arena_for(a, config_path)
    frames = []
    rng = np.random.default_rng(stream_seed(seed, 17))
    play_episode((a, b), arena, stream_seed(seed, 0), rng, on_tick=lambda st: frames.append(export_replay_frame(st)))
    out = Path(out_path)
    if not out.parent.is_dir():
        raise OSError(f"unwritable path {out}: parent directory does not exist")
    atomic_write_text(out, dumps_frames(frames))
    return len(frames)


def cmd_describe_obs(team_size: int) -> dict:
    arena = ArenaConfig(team_size=team_size)
    arena.validate()
    layout = observation_layout(arena)
    return {
        "team_size": team_size,
        "size": observation_size(team_size),
        "fields": [{"name": f.name, "offset": f.offset, "scale": f.scale} for f in layout],
    }


def random_checkpoint(team_size: int, seed: int, path) -> PolicyParams:
    """Writes a freshly initialised policy, the reference opponent for evaluation."""
    p = init_params(observation_size(team_size), seed=seed)
    save_checkpoint(p, path)
    return p
