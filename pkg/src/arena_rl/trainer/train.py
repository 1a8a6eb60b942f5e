"""Self-play PPO training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from arena_rl.obs_action import ACTION_NAMES, DIRECTION_NAMES, observation_size
from arena_rl.policy import AdamState, PolicyParams, init_params
from arena_rl.reward import RewardConfig
from arena_rl.sim import ArenaConfig
from arena_rl.trainer.gae import gae
from arena_rl.trainer.ppo import PPOConfig, ppo_update
from arena_rl.trainer.rollout import COMBO_NAMES, EpisodeStats, collect_rollouts, flatten, make_envs, stream_seed
from arena_rl.trainer.selfplay import OpponentPool, maybe_snapshot_and_sample

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    ["step", "update", "mean_episode_reward", "mean_episode_length_ticks", "learner_elo",
     "policy_loss", "value_loss", "entropy", "points_scored_histogram"]
    + [f"action_{n}" for n in ACTION_NAMES]
    + [f"direction_{n}" for n in DIRECTION_NAMES]
    + ["episodes", "learner_goals", "opponent_goals", "goals_per_episode", "mean_shaping_reward",
       "masked_selections", "sampled_decisions", "opponent_index"]
    + [f"combo_{n}" for n in COMBO_NAMES.values()]
)


@dataclass
class TrainResult:
    params: PolicyParams
    initial_params: PolicyParams
    history: list[dict] = field(default_factory=list)
    pool: Optional[OpponentPool] = None
    steps: int = 0


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else float("nan")


def metrics_row(step: int, update: int, stats: EpisodeStats, loss: dict, learner_elo: float, opponent_index: int) -> dict:
    hist = [stats.learner_goal_points.count(k) for k in (1, 2, 3)]
    row = {
        "step": step,
        "update": update,
        "mean_episode_reward": _mean(stats.rewards),
        "mean_episode_length_ticks": _mean(stats.lengths),
        "learner_elo": learner_elo,
        "policy_loss": loss.get("policy_loss", float("nan")),
        "value_loss": loss.get("value_loss", float("nan")),
        "entropy": loss.get("entropy", float("nan")),
        "points_scored_histogram": ";".join(str(h) for h in hist),
    }
    for name, c in zip(ACTION_NAMES, stats.action_counts):
        row[f"action_{name}"] = int(c)
    for name, c in zip(DIRECTION_NAMES, stats.direction_counts):
        row[f"direction_{name}"] = int(c)
    episodes = len(stats.rewards)
    row.update(
        episodes=episodes,
        learner_goals=len(stats.learner_goal_points),
        opponent_goals=len(stats.opponent_goal_points),
        goals_per_episode=len(stats.learner_goal_points) / episodes if episodes else float("nan"),
        mean_shaping_reward=stats.shaping_total / max(stats.learner_decisions, 1),
        masked_selections=stats.masked_selections,
        sampled_decisions=stats.sampled_decisions,
        opponent_index=opponent_index,
    )
    for name, c in stats.combo_counts.items():
        row[f"combo_{name}"] = c
    return row


def train(config: PPOConfig, arena: ArenaConfig, reward_cfg: RewardConfig, seed: int,
          on_update: Optional[Callable[[dict, "TrainResult"], None]] = None) -> TrainResult:
    config.validate()
    arena.validate()
    reward_cfg.validate()
    params = init_params(observation_size(arena.team_size), seed=stream_seed(seed, 7))
    result = TrainResult(params=params, initial_params=params.copy())
    if config.total_decision_steps == 0:
        return result

    opt = AdamState.for_params(params, learning_rate=config.learning_rate)
    pool = OpponentPool.seeded(params, capacity=config.pool_capacity)
    result.pool = pool
    rng = np.random.default_rng(stream_seed(seed, 99))
    envs = make_envs(arena, config.num_envs, seed)
    step = 0
    update = 0
    while step < config.total_decision_steps:
        opp = maybe_snapshot_and_sample(pool, params, step, config.snapshot_every, config.opponent_latest_prob, rng)
        batch, next_vals, stats = collect_rollouts(
            params, pool.snapshots[opp].params, envs, arena, reward_cfg, config.rollout_decisions_per_env,
            on_episode_end=lambda outcome: pool.record(opp, outcome, config.elo_k),
        )
        adv, ret = gae(batch.rewards, batch.values, next_vals, batch.dones, config.gamma, config.lam)
        batch.advantages, batch.returns = adv, ret
        loss = ppo_update(params, opt, flatten(batch), config, rng)
        step += config.num_envs * config.rollout_decisions_per_env
        update += 1
        row = metrics_row(step, update, stats, loss, pool.learner_elo, opp)
        result.history.append(row)
        result.steps = step
        log.info("update %d step %d reward %.3f elo %.1f", update, step, row["mean_episode_reward"], row["learner_elo"])
        if on_update is not None:
            on_update(row, result)
    return result
