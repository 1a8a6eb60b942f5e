"""Team rewards from game events.

Every agent on a team receives the same scalar. When one team is rewarded
the other is charged ``penalty_multiplier`` times that amount, so m = 1 is
zero-sum and m = 0 removes penalties entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from arena_rl.sim import EventKind, GameEvent, SimState

PRESETS = {"zero_sum": 1.0, "half_penalty": 0.5, "no_penalty": 0.0}


@dataclass(frozen=True)
class RewardConfig:
    checkpoint_base: float = 0.05
    score_per_point: float = 2.0
    penalty_multiplier: float = 0.5
    wall_skate_shaping: bool = False
    wall_skate_max: float = 0.003

    def validate(self) -> None:
        if not self.checkpoint_base > 0:
            raise ValueError("checkpoint_base must be positive")
        if not self.score_per_point > 0:
            raise ValueError("score_per_point must be positive")
        if not 0.0 <= self.penalty_multiplier <= 1.0:
            raise ValueError("penalty_multiplier must lie in [0, 1]")

    @classmethod
    def preset(cls, name: str, **overrides) -> "RewardConfig":
        return cls(penalty_multiplier=PRESETS[name], **overrides)


def rewards_from_events(events: Iterable[GameEvent], config: RewardConfig) -> list[float]:
    """Per-team reward [team A, team B] for the events of one tick."""
    out = [0.0, 0.0]
    m = config.penalty_multiplier
    for ev in events:
        if ev.kind == EventKind.CHECKPOINT_PROGRESSED:
            gain = config.checkpoint_base * ev.checkpoint_index
        elif ev.kind == EventKind.SCORED:
            gain = config.score_per_point * ev.points
        else:
            continue
        out[ev.team] += gain
        out[1 - ev.team] -= m * gain
    return out


def wall_skate_shaping_reward(state: SimState, agent_id: int, config: RewardConfig) -> float:
    """Bonus for the ball bearer riding a wall while grounded, scaled by height."""
    p = state.players[agent_id]
    if not p.has_ball or p.air_timer > 0 or p.wall_height <= 0.0:
        return 0.0
    return config.wall_skate_max * (p.wall_height / state.config.wall_height)


def team_shaping(state: SimState, config: RewardConfig) -> list[float]:
    """Shaping summed per team; added on top of event rewards when enabled."""
    out = [0.0, 0.0]
    for p in state.players:
        if p.has_ball:
            out[p.team] += wall_skate_shaping_reward(state, p.player_id, config)
    return out
