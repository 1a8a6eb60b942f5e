"""Decision-latency benchmark: observation, mask, forward pass and sampling for every agent."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from arena_rl.obs_action import ActionPair, apply_action, observation_size
from arena_rl.policy import PolicyParams, forward, init_params, masked_categorical, sample_index
from arena_rl.reward import RewardConfig
from arena_rl.sim import ArenaConfig, new_match
from arena_rl.trainer.rollout import observe, run_interval


@dataclass
class LatencyStats:
    agents: int
    samples_ms: np.ndarray

    @property
    def p50(self) -> float:
        return float(np.percentile(self.samples_ms, 50))

    @property
    def p99(self) -> float:
        return float(np.percentile(self.samples_ms, 99))

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples_ms))

    def as_dict(self) -> dict:
        return {"agents": self.agents, "iterations": int(self.samples_ms.size),
                "p50_ms": self.p50, "p99_ms": self.p99, "mean_ms": self.mean}


def team_size_for_agents(agents: int) -> int:
    if agents % 2 or not 2 <= agents <= 6:
        raise ValueError("agents must be 2, 4 or 6")
    return agents // 2


def bench_inference(agents: int, iterations: int, params: Optional[PolicyParams] = None,
                    seed: int = 0, warmup: int = 5) -> LatencyStats:
    """Times ``iterations`` full decisions; the sim advances one interval between samples, untimed."""
    n = team_size_for_agents(agents)
    if params is None:
        params = init_params(observation_size(n), seed=seed)
    elif params.input_dim != observation_size(n):
        raise ValueError(f"checkpoint input_dim {params.input_dim} does not match {agents} agents")
    arena = ArenaConfig(team_size=n)
    rng = np.random.default_rng(seed)
    state = new_match(arena, seed)
    ids = [p.player_id for p in state.players]
    reward_cfg = RewardConfig()
    samples = []
    for it in range(warmup + iterations):
        if state.done:
            state = new_match(arena, seed + it)
        t0 = time.perf_counter()
        obs, am, dm = observe(state, ids)
        la, ld, _ = forward(params, obs)
        acts = sample_index(masked_categorical(la, am).probs, rng)
        dirs = sample_index(masked_categorical(ld, dm).probs, rng)
        elapsed = time.perf_counter() - t0
        if it >= warmup:
            samples.append(elapsed * 1e3)
        intents = [apply_action(state, i, ActionPair(int(a), int(d))) for i, a, d in zip(ids, acts, dirs)]
        run_interval(state, intents, reward_cfg, shaping=False)
    return LatencyStats(agents, np.asarray(samples))
