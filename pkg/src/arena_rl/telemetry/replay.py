"""Replay frames: one JSON object per line, one line per fixed update.

Schema of a frame (all keys always present)::

    tick      int
    players   list of {id, team, x, y, vx, vy, hx, hy, wall_height,
                       hurt, in_air, has_ball}
    ball      {holder (int or null), x, y, height, vx, vy, in_flight}
    score     [team A points, team B points]
    progress  list of {next_checkpoint, laps_completed, goal_active}, one per team
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from arena_rl.sim import SimState

PLAYER_KEYS = ("id", "team", "x", "y", "vx", "vy", "hx", "hy", "wall_height", "hurt", "in_air", "has_ball")
BALL_KEYS = ("holder", "x", "y", "height", "vx", "vy", "in_flight")
PROGRESS_KEYS = ("next_checkpoint", "laps_completed", "goal_active")


class ReplayFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PlayerFrame:
    id: int
    team: int
    x: float
    y: float
    vx: float
    vy: float
    hx: float
    hy: float
    wall_height: float
    hurt: bool
    in_air: bool
    has_ball: bool


@dataclass(frozen=True)
class BallFrame:
    holder: Optional[int]
    x: float
    y: float
    height: float
    vx: float
    vy: float
    in_flight: bool


@dataclass(frozen=True)
class ProgressFrame:
    next_checkpoint: int
    laps_completed: int
    goal_active: bool


@dataclass(frozen=True)
class ReplayFrame:
    tick: int
    players: tuple
    ball: BallFrame
    score: tuple
    progress: tuple

    def to_line(self) -> str:
        d = asdict(self)
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "ReplayFrame":
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReplayFormatError(f"not JSON: {exc.msg}") from None
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "ReplayFrame":
        _check_keys(d, ("tick", "players", "ball", "score", "progress"), "frame")
        players = []
        for p in d["players"]:
            _check_keys(p, PLAYER_KEYS, "player")
            players.append(PlayerFrame(**p))
        _check_keys(d["ball"], BALL_KEYS, "ball")
        progress = []
        for t in d["progress"]:
            _check_keys(t, PROGRESS_KEYS, "progress")
            progress.append(ProgressFrame(**t))
        if not isinstance(d["tick"], int) or len(d["score"]) != 2:
            raise ReplayFormatError("bad tick or score")
        return cls(d["tick"], tuple(players), BallFrame(**d["ball"]), tuple(d["score"]), tuple(progress))


def _check_keys(d, keys, what: str) -> None:
    if not isinstance(d, dict) or set(d) != set(keys):
        got = sorted(d) if isinstance(d, dict) else type(d).__name__
        raise ReplayFormatError(f"{what} keys mismatch: {got}")


def export_replay_frame(state: SimState) -> ReplayFrame:
    players = tuple(
        PlayerFrame(p.player_id, p.team, p.x, p.y, p.vx, p.vy, p.hx, p.hy, p.wall_height,
                    p.hurt, p.in_air, p.has_ball)
        for p in state.players
    )
    b = state.ball
    ball = BallFrame(b.holder, b.x, b.y, b.height, b.vx, b.vy, b.in_flight)
    progress = tuple(ProgressFrame(t.next_checkpoint, t.laps_completed, t.goal_active) for t in state.progress)
    return ReplayFrame(state.tick, players, ball, tuple(state.score), progress)


def dumps_frames(frames: Iterable[ReplayFrame]) -> str:
    return "".join(f.to_line() + "\n" for f in frames)


def parse_replay(text: str) -> list[ReplayFrame]:
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(ReplayFrame.from_line(line))
        except (ReplayFormatError, TypeError) as exc:
            raise ReplayFormatError(f"line {n}: {exc}") from None
    return out
