"""Opponent snapshot pool and ELO bookkeeping for self-play."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from arena_rl.policy import PolicyParams

WIN, DRAW, LOSS = 1.0, 0.5, 0.0


def expected_score(rating: float, opponent: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((opponent - rating) / 400.0))


def elo_update(learner_elo: float, opponent_elo: float, outcome: float, k: float = 16.0) -> tuple[float, float]:
    """New (learner, opponent) ratings after one game scored from the learner's side."""
    delta = k * (outcome - expected_score(learner_elo, opponent_elo))
    return learner_elo + delta, opponent_elo - delta


@dataclass
class Snapshot:
    params: PolicyParams
    elo: float
    step_saved: int


@dataclass
class OpponentPool:
    capacity: int = 10
    snapshots: list[Snapshot] = field(default_factory=list)
    learner_elo: float = 1200.0
    last_snapshot_bucket: int = 0

    @classmethod
    def seeded(cls, params: PolicyParams, capacity: int = 10, elo: float = 1200.0) -> "OpponentPool":
        pool = cls(capacity=capacity, learner_elo=elo)
        pool.push(params, step=0)
        return pool

    def push(self, params: PolicyParams, step: int) -> None:
        """Append a snapshot; when full, evict the oldest one after the pinned initial snapshot."""
        self.snapshots.append(Snapshot(params.copy(), self.learner_elo, step))
        while len(self.snapshots) > self.capacity:
            self.snapshots.pop(1 if self.capacity > 1 else 0)

    @property
    def latest(self) -> int:
        return len(self.snapshots) - 1

    def sample(self, rng: np.random.Generator, latest_prob: float) -> int:
        if rng.random() < latest_prob:
            return self.latest
        return int(rng.integers(len(self.snapshots)))

    def record(self, index: int, outcome: float, k: float = 16.0) -> float:
        """Apply one game result against snapshot ``index``; returns the learner's rating change."""
        snap = self.snapshots[index]
        new_learner, new_opp = elo_update(self.learner_elo, snap.elo, outcome, k)
        delta = new_learner - self.learner_elo
        self.learner_elo = new_learner
        snap.elo = new_opp
        return delta


def maybe_snapshot_and_sample(pool: OpponentPool, params: PolicyParams, step: int, snapshot_every: int,
                              latest_prob: float, rng: np.random.Generator) -> int:
    """Push a snapshot when ``step`` enters a new schedule bucket, then pick the next opponent."""
    if snapshot_every > 0:
        bucket = step // snapshot_every
        if bucket > pool.last_snapshot_bucket:
            pool.push(params, step)
            pool.last_snapshot_bucket = bucket
    return pool.sample(rng, latest_prob)
