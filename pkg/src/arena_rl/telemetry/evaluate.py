"""Head-to-head evaluation of two policies over side-alternated one-goal episodes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from arena_rl.obs_action import ActionPair, N_ACTIONS, apply_action
from arena_rl.policy import PolicyParams
from arena_rl.reward import RewardConfig
from arena_rl.sim import TEAM_A, TEAM_B, ArenaConfig, EventKind, SimState, new_match
from arena_rl.trainer.rollout import act, observe, run_interval, stream_seed


@dataclass
class SideRecord:
    """Outcomes for policy A while it controls one particular team."""

    wins: int = 0
    draws: int = 0
    losses: int = 0

    @property
    def episodes(self) -> int:
        return self.wins + self.draws + self.losses


@dataclass
class EvalReport:
    episodes: int = 0
    a_wins: int = 0
    draws: int = 0
    b_wins: int = 0
    sides: dict = field(default_factory=lambda: {TEAM_A: SideRecord(), TEAM_B: SideRecord()})
    a_goal_points: list = field(default_factory=list)
    b_goal_points: list = field(default_factory=list)
    a_action_counts: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS, dtype=np.int64))
    b_action_counts: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS, dtype=np.int64))
    total_ticks: int = 0

    @property
    def a_win_rate(self) -> float:
        return self.a_wins / self.episodes if self.episodes else float("nan")

    @property
    def a_score(self) -> float:
        """Wins plus half of draws, as a fraction of episodes."""
        return (self.a_wins + 0.5 * self.draws) / self.episodes if self.episodes else float("nan")

    def goals_per_episode(self) -> float:
        if not self.episodes:
            return float("nan")
        return (len(self.a_goal_points) + len(self.b_goal_points)) / self.episodes

    def a_goals_per_episode(self) -> float:
        return len(self.a_goal_points) / self.episodes if self.episodes else float("nan")

    @staticmethod
    def _mean(points) -> float:
        return float(np.mean(points)) if points else float("nan")

    def mean_points(self) -> tuple[float, float]:
        return self._mean(self.a_goal_points), self._mean(self.b_goal_points)

    def as_dict(self) -> dict:
        ma, mb = self.mean_points()
        return {
            "episodes": self.episodes,
            "a_wins": self.a_wins,
            "draws": self.draws,
            "b_wins": self.b_wins,
            "a_win_rate": self.a_win_rate,
            "a_as_team_a": vars(self.sides[TEAM_A]).copy(),
            "a_as_team_b": vars(self.sides[TEAM_B]).copy(),
            "a_goals": len(self.a_goal_points),
            "b_goals": len(self.b_goal_points),
            "a_mean_points_per_goal": ma,
            "b_mean_points_per_goal": mb,
            "a_action_counts": self.a_action_counts.tolist(),
            "b_action_counts": self.b_action_counts.tolist(),
        }


def play_episode(params: tuple, arena: ArenaConfig, seed: int, rng: np.random.Generator,
                 on_tick: Optional[Callable[[SimState], None]] = None,
                 action_counts: Optional[tuple] = None) -> SimState:
    """Runs one episode; ``params[t]`` controls team ``t``. Returns the final state."""
    state = new_match(arena, seed)
    reward_cfg = RewardConfig()
    n = arena.team_size
    teams = [[p.player_id for p in state.team_players(t)] for t in (TEAM_A, TEAM_B)]
    while not state.done:
        intents = [None] * len(state.players)
        for t in (TEAM_A, TEAM_B):
            obs, am, dm = observe(state, teams[t])
            dec = act(params[t], obs, am, dm, [rng], n)
            for k, pid in enumerate(teams[t]):
                intents[pid] = apply_action(state, pid, ActionPair(int(dec.actions[k]), int(dec.directions[k])))
                if action_counts is not None:
                    action_counts[t][dec.actions[k]] += 1
        run_interval(state, intents, reward_cfg, shaping=False, on_tick=on_tick)
    return state


def evaluate(a: PolicyParams, b: PolicyParams, arena: ArenaConfig, episodes: int, seed: int) -> EvalReport:
    """Plays ``episodes`` matches; policy A takes team A on even episodes and team B on odd ones."""
    if a.input_dim != b.input_dim:
        raise ValueError(f"incompatible checkpoints: input_dim {a.input_dim} vs {b.input_dim}")
    report = EvalReport()
    for ep in range(episodes):
        a_team = ep % 2
        params = (a, b) if a_team == TEAM_A else (b, a)
        rng = np.random.default_rng(stream_seed(seed, ep, 17))
        counts_by_team = [np.zeros(N_ACTIONS, dtype=np.int64), np.zeros(N_ACTIONS, dtype=np.int64)]
        events = []

        def grab(st):
            events.extend(e for e in st.events if e.kind == EventKind.SCORED)

        state = play_episode(params, arena, stream_seed(seed, ep), rng, on_tick=grab, action_counts=counts_by_team)
        report.a_action_counts += counts_by_team[a_team]
        report.b_action_counts += counts_by_team[1 - a_team]
        for e in events:
            (report.a_goal_points if e.team == a_team else report.b_goal_points).append(e.points)
        mine, theirs = state.score[a_team], state.score[1 - a_team]
        side = report.sides[a_team]
        if mine > theirs:
            report.a_wins += 1
            side.wins += 1
        elif mine < theirs:
            report.b_wins += 1
            side.losses += 1
        else:
            report.draws += 1
            side.draws += 1
        report.episodes += 1
        report.total_ticks += state.tick
    return report
