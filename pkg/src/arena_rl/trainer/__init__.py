from arena_rl.trainer.gae import gae
from arena_rl.trainer.ppo import PPOConfig, RolloutBatch, ppo_loss, ppo_update
from arena_rl.trainer.selfplay import OpponentPool, elo_update, expected_score, maybe_snapshot_and_sample
from arena_rl.trainer.train import METRIC_COLUMNS, TrainResult, train

__all__ = [
    "gae", "PPOConfig", "RolloutBatch", "ppo_loss", "ppo_update", "OpponentPool", "elo_update",
    "expected_score", "maybe_snapshot_and_sample", "METRIC_COLUMNS", "TrainResult", "train",
]
