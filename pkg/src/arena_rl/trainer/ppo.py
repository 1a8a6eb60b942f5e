"""Clipped-surrogate PPO objective and update loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from arena_rl.policy import AdamState, PolicyParams, adam_step, backward, clip_grad_norm, forward, masked_log_softmax


class NonFiniteLossError(FloatingPointError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_epsilon: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 3e-4
    epochs_per_update: int = 3
    minibatch_size: int = 4096
    rollout_decisions_per_env: int = 256
    num_envs: int = 3
    total_decision_steps: int = 50_000
    snapshot_every: int = 5_000
    opponent_latest_prob: float = 0.5
    pool_capacity: int = 10
    max_grad_norm: float = 0.5
    elo_k: float = 16.0
    allow_any_num_envs: bool = False

    def validate(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not self.clip_epsilon > 0:
            raise ValueError("clip_epsilon must be positive")
        if not self.allow_any_num_envs and not 3 <= self.num_envs <= 15:
            raise ValueError("num_envs must lie in [3, 15] (set allow_any_num_envs to override)")
        if self.num_envs < 1 or self.rollout_decisions_per_env < 1:
            raise ValueError("num_envs and rollout_decisions_per_env must be positive")
        if self.minibatch_size < 1 or self.epochs_per_update < 1:
            raise ValueError("minibatch_size and epochs_per_update must be positive")
        if self.total_decision_steps < 0:
            raise ValueError("total_decision_steps must be non-negative")
        if not 0.0 <= self.opponent_latest_prob <= 1.0:
            raise ValueError("opponent_latest_prob must lie in [0, 1]")


@dataclass
class RolloutBatch:
    obs: np.ndarray  # (N, obs_dim) float32
    action_mask: np.ndarray  # (N, 9) bool
    direction_mask: np.ndarray  # (N, 11) bool
    actions: np.ndarray  # (N,) int
    directions: np.ndarray  # (N,) int
    logprobs: np.ndarray  # (N,) joint log-prob at collection time
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.obs.shape[0]

    def take(self, idx: np.ndarray) -> "RolloutBatch":
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return RolloutBatch(*(pick(getattr(self, f)) for f in self.__dataclass_fields__))


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    adv = np.asarray(adv, dtype=np.float64)
    std = adv.std()
    return (adv - adv.mean()) / (std if std > 1e-8 else 1.0)


def ppo_loss(params: PolicyParams, batch: RolloutBatch, clip_epsilon: float, value_coef: float,
             entropy_coef: float, grads: bool = True):
    """Total loss, stats and (optionally) parameter gradients on one minibatch.

    Masks recorded at collection time are reapplied, so masked logits get
    exactly zero gradient.
    """
    dt = params.dtype
    n = len(batch)
    la, ld, v, cache = forward(params, batch.obs, cache=True)
    lpa = masked_log_softmax(la, batch.action_mask)
    lpd = masked_log_softmax(ld, batch.direction_mask)
    pa = np.where(batch.action_mask, np.exp(lpa), 0.0).astype(dt)
    pd = np.where(batch.direction_mask, np.exp(lpd), 0.0).astype(dt)
    ent_a = -(pa * np.where(batch.action_mask, lpa, 0.0)).sum(-1)
    ent_d = -(pd * np.where(batch.direction_mask, lpd, 0.0)).sum(-1)

    rows = np.arange(n)
    new_lp = lpa[rows, batch.actions] + lpd[rows, batch.directions]
    adv = batch.advantages.astype(dt)
    ret = batch.returns.astype(dt)
    ratio = np.exp(new_lp - batch.logprobs.astype(dt))
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    s1 = ratio * adv
    s2 = clipped * adv
    policy_loss = -np.mean(np.minimum(s1, s2))
    value_err = v - ret
    value_loss = np.mean(value_err * value_err)
    entropy = np.mean(ent_a + ent_d)
    total = policy_loss + value_coef * value_loss - entropy_coef * entropy

    stats = {
        "loss": float(total),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean(batch.logprobs - new_lp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_epsilon)),
    }
    if not grads:
        return float(total), stats, None

    # d(-min(s1, s2))/d new_lp: the clipped branch carries no gradient
    d_newlp = -(np.where(s1 <= s2, adv, 0.0) * ratio) / n
    onehot_a = np.zeros_like(pa)
    onehot_a[rows, batch.actions] = 1.0
    onehot_d = np.zeros_like(pd)
    onehot_d[rows, batch.directions] = 1.0
    ecoef = entropy_coef / n
    # dH/dz = -p (log p + H); masked entries have p == 0 exactly
    d_la = d_newlp[:, None] * (onehot_a - pa) + ecoef * pa * (np.where(batch.action_mask, lpa, 0.0) + ent_a[:, None])
    d_ld = d_newlp[:, None] * (onehot_d - pd) + ecoef * pd * (np.where(batch.direction_mask, lpd, 0.0) + ent_d[:, None])
    d_v = value_coef * 2.0 * value_err / n
    g = backward(params, cache, d_la, d_ld, d_v)
    return float(total), stats, g


def ppo_update(params: PolicyParams, opt: AdamState, batch: RolloutBatch, config: PPOConfig,
               rng: np.random.Generator) -> dict:
    """Runs the configured epochs of shuffled minibatch updates in place; returns mean stats."""
    n = len(batch)
    batch.advantages = normalize_advantages(batch.advantages)
    acc: dict[str, float] = {}
    count = 0
    mb = min(config.minibatch_size, n)
    for _ in range(config.epochs_per_update):
        perm = rng.permutation(n)
        for start in range(0, n, mb):
            idx = perm[start : start + mb]
            loss, stats, grads = ppo_loss(params, batch.take(idx), config.clip_epsilon, config.value_coef,
                                          config.entropy_coef)
            if not np.isfinite(loss) or not all(np.isfinite(gv).all() for gv in grads.values()):
                raise NonFiniteLossError("non-finite PPO loss", stats)
            stats["grad_norm"] = clip_grad_norm(grads, config.max_grad_norm)
            adam_step(params, grads, opt)
            for k, val in stats.items():
                acc[k] = acc.get(k, 0.0) + val
            count += 1
    return {k: val / count for k, val in acc.items()}
