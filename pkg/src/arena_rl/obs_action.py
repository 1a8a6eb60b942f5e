"""Observation vectors, action masks and action-to-control translation.

Observation layout (``observation_layout`` gives exact offsets):

    self (14) | ball (7) | goal (4) | checkpoint (6) | laps (2) | other players (9 each)

Other players are ordered allies by ascending id, then enemies by ascending
id. One code path serves every team size; a 2v2 vector is the 3v3 vector
with two player blocks left out. Time and score are never observed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from arena_rl.sim import (
    PHYSICS,
    ArenaConfig,
    BallOp,
    ControlIntent,
    Impulse,
    Locomotion,
    PlayerState,
    SimState,
    checkpoint_arc,
    goal_position,
)

DECISION_INTERVAL = 15
COMBO_WINDOW = DECISION_INTERVAL
WALL_DIRECTION_RANGE = 2.0

SELF_BLOCK = 14
BALL_BLOCK = 7
GOAL_BLOCK = 4
CHECKPOINT_BLOCK = 6
LAPS_BLOCK = 2
PLAYER_BLOCK = 9
FIXED_BLOCKS = SELF_BLOCK + BALL_BLOCK + GOAL_BLOCK + CHECKPOINT_BLOCK + LAPS_BLOCK


class Action(enum.IntEnum):
    ACCELERATE = 0
    PUMP = 1
    BRAKE = 2
    THROW = 3
    PASS = 4
    CALL_FOR_PASS = 5
    DASH = 6
    DODGE = 7
    JUMP = 8


class Direction(enum.IntEnum):
    CLOCKWISE = 0
    ANTI_CLOCKWISE = 1
    UP_INNER_WALL = 2
    UP_OUTER_WALL = 3
    ALLY1 = 4
    ALLY2 = 5
    ENEMY1 = 6
    ENEMY2 = 7
    ENEMY3 = 8
    BALL = 9
    GOAL = 10


N_ACTIONS = len(Action)
N_DIRECTIONS = len(Direction)
ACTION_NAMES = ["Accelerate", "Pump", "Brake", "Throw", "Pass", "CallForPass", "Dash", "Dodge", "Jump"]
DIRECTION_NAMES = [
    "Clockwise", "AntiClockwise", "UpInnerWall", "UpOuterWall",
    "Ally1", "Ally2", "Enemy1", "Enemy2", "Enemy3", "Ball", "Goal",
]
_ALLY_DIRS = (Direction.ALLY1, Direction.ALLY2)
_ENEMY_DIRS = (Direction.ENEMY1, Direction.ENEMY2, Direction.ENEMY3)
_COOLDOWN_SCALE = float(PHYSICS.combo_cooldown)


class ActionMaskedError(RuntimeError):
    """A masked (action, direction) pair was submitted."""


@dataclass(frozen=True)
class ActionPair:
    action: int
    direction: int


@dataclass
class ActionMask:
    action_mask: np.ndarray  # bool[9]
    direction_mask: np.ndarray  # bool[11]

    def allows(self, pair: ActionPair) -> bool:
        return bool(self.action_mask[pair.action]) and bool(self.direction_mask[pair.direction])


@dataclass(frozen=True)
class ObsField:
    name: str
    offset: int
    scale: float


def observation_size(team_size: int) -> int:
    return FIXED_BLOCKS + PLAYER_BLOCK * (2 * team_size - 1)


def observation_layout(config: ArenaConfig) -> list[ObsField]:
    """Named fields in vector order. ``scale`` is the divisor applied to the raw quantity."""
    team_size = config.team_size
    ps, vs, cs = config.track.half_length, PHYSICS.max_speed, _COOLDOWN_SCALE
    names: list[tuple[str, float]] = [
        ("self.pos_x", ps), ("self.pos_y", ps), ("self.wall_height", config.wall_height),
        ("self.vel_x", vs), ("self.vel_y", vs), ("self.heading_x", 1.0), ("self.heading_y", 1.0),
        ("self.hurt", 1.0), ("self.in_air", 1.0), ("self.has_ball", 1.0),
        ("self.dash_cd", cs), ("self.dodge_cd", cs), ("self.jump_cd", cs), ("self.throw_cd", cs),
        ("ball.rel_x", ps), ("ball.rel_y", ps), ("ball.rel_vx", vs), ("ball.rel_vy", vs),
        ("ball.los", 1.0), ("ball.held_by_ally", 1.0), ("ball.held_by_enemy", 1.0),
        ("goal.rel_x", ps), ("goal.rel_y", ps), ("goal.los", 1.0), ("goal.own_active", 1.0),
        ("checkpoint.rel_x", ps), ("checkpoint.rel_y", ps), ("checkpoint.los", 1.0),
        ("checkpoint.is_1", 1.0), ("checkpoint.is_2", 1.0), ("checkpoint.is_3", 1.0),
        ("laps.own", 3.0), ("laps.enemy", 3.0),
    ]
    others = [f"ally{i + 1}" for i in range(team_size - 1)] + [f"enemy{i + 1}" for i in range(team_size)]
    for who in others:
        for part, scale in (
            ("rel_x", ps), ("rel_y", ps), ("rel_vx", vs), ("rel_vy", vs), ("los", 1.0),
            ("hurt", 1.0), ("in_air", 1.0), ("has_ball", 1.0), ("acting", 1.0),
        ):
            names.append((f"{who}.{part}", scale))
    return [ObsField(name, i, scale) for i, (name, scale) in enumerate(names)]


def ordered_others(state: SimState, agent: PlayerState) -> tuple[list[PlayerState], list[PlayerState]]:
    allies = [p for p in state.players if p.team == agent.team and p is not agent]
    enemies = [p for p in state.players if p.team != agent.team]
    return allies, enemies


def _agent(state: SimState, agent_id: int) -> PlayerState:
    if not isinstance(agent_id, (int, np.integer)) or not 0 <= agent_id < len(state.players):
        raise ValueError(f"invalid agent_id {agent_id!r}")
    return state.players[int(agent_id)]


def build_observation(state: SimState, agent_id: int) -> np.ndarray:
    me = _agent(state, agent_id)
    track = state.track
    ps = track.half_length
    vs = PHYSICS.max_speed
    hx, hy = me.hx, me.hy
    mx, my = me.x, me.y
    mvx, mvy = me.vx, me.vy
    los = track.line_of_sight

    def rel(x: float, y: float) -> tuple[float, float]:
        dx, dy = x - mx, y - my
        return ((dx * hx + dy * hy) / ps, (-dx * hy + dy * hx) / ps)

    def relv(vx: float, vy: float) -> tuple[float, float]:
        dx, dy = vx - mvx, vy - mvy
        return ((dx * hx + dy * hy) / vs, (-dx * hy + dy * hx) / vs)

    out: list[float] = [
        mx / ps, my / ps, me.wall_height / state.config.wall_height,
        mvx / vs, mvy / vs, hx, hy,
        float(me.hurt_timer > 0), float(me.air_timer > 0), float(me.has_ball),
        me.dash_cd / _COOLDOWN_SCALE, me.dodge_cd / _COOLDOWN_SCALE,
        me.jump_cd / _COOLDOWN_SCALE, me.throw_cd / _COOLDOWN_SCALE,
    ]

    ball = state.ball
    holder_team = state.players[ball.holder].team if ball.holder is not None else None
    out.extend(rel(ball.x, ball.y))
    out.extend(relv(ball.vx, ball.vy))
    out.append(float(los(me.position, ball.position)))
    out.append(float(holder_team == me.team))
    out.append(float(holder_team is not None and holder_team != me.team))

    prog = state.progress[me.team]
    gx, gy = goal_position(track)
    out.extend(rel(gx, gy))
    out.append(float(los(me.position, (gx, gy))))
    out.append(float(prog.goal_active))

    k = prog.next_checkpoint
    cx, cy = track.centerline_point(checkpoint_arc(track, k))
    out.extend(rel(cx, cy))
    out.append(float(los(me.position, (cx, cy))))
    out.extend((float(k == 1), float(k == 2), float(k == 3)))

    out.append(prog.laps_completed / 3.0)
    out.append(state.progress[1 - me.team].laps_completed / 3.0)

    allies, enemies = ordered_others(state, me)
    tick = state.tick
    for q in allies + enemies:
        out.extend(rel(q.x, q.y))
        out.extend(relv(q.vx, q.vy))
        out.append(float(los(me.position, q.position)))
        out.append(float(q.hurt_timer > 0))
        out.append(float(q.air_timer > 0))
        out.append(float(q.has_ball))
        out.append(float(tick - q.last_act_tick <= DECISION_INTERVAL))
    return np.asarray(out, dtype=np.float32)


def _entity_targets(state: SimState, me: PlayerState) -> dict[int, tuple[float, float]]:
    allies, enemies = ordered_others(state, me)
    targets: dict[int, tuple[float, float]] = {}
    for d, q in zip(_ALLY_DIRS, allies):
        targets[d] = q.position
    for d, q in zip(_ENEMY_DIRS, enemies):
        targets[d] = q.position
    targets[Direction.BALL] = state.ball.position
    targets[Direction.GOAL] = goal_position(state.track)
    return targets


def build_action_mask(state: SimState, agent_id: int) -> ActionMask:
    me = _agent(state, agent_id)
    track = state.track
    am = np.zeros(N_ACTIONS, dtype=bool)
    dm = np.zeros(N_DIRECTIONS, dtype=bool)
    hurt = me.hurt_timer > 0

    am[Action.ACCELERATE] = True
    am[Action.BRAKE] = True
    if not hurt:
        am[Action.PUMP] = True
        if me.has_ball:
            am[Action.THROW] = me.throw_cd == 0
            allies, _ = ordered_others(state, me)
            am[Action.PASS] = any(track.line_of_sight(me.position, q.position) for q in allies)
        else:
            am[Action.CALL_FOR_PASS] = state.config.team_size > 1
        am[Action.DASH] = me.dash_cd == 0
        am[Action.DODGE] = me.dodge_cd == 0
        am[Action.JUMP] = me.jump_cd == 0 and me.air_timer == 0

    dm[Direction.CLOCKWISE] = True
    dm[Direction.ANTI_CLOCKWISE] = True
    dm[Direction.UP_INNER_WALL] = track.inner_wall_distance(me.x, me.y) <= WALL_DIRECTION_RANGE
    dm[Direction.UP_OUTER_WALL] = track.outer_wall_distance(me.x, me.y) <= WALL_DIRECTION_RANGE
    for d, pos in _entity_targets(state, me).items():
        dm[d] = track.line_of_sight(me.position, pos)
    return ActionMask(am, dm)


def resolve_direction(state: SimState, me: PlayerState, direction: int) -> tuple[float, float]:
    """World-space unit heading for a direction choice."""
    track = state.track
    if direction == Direction.CLOCKWISE:
        return track.clockwise_tangent(me.x, me.y)
    if direction == Direction.ANTI_CLOCKWISE:
        tx, ty = track.clockwise_tangent(me.x, me.y)
        return (-tx, -ty)
    if direction == Direction.UP_INNER_WALL:
        nx, ny = track.outward_normal(me.x, me.y)
        return (-nx, -ny)
    if direction == Direction.UP_OUTER_WALL:
        return track.outward_normal(me.x, me.y)
    target = _entity_targets(state, me).get(direction)
    if target is None:
        raise ActionMaskedError(f"direction {DIRECTION_NAMES[direction]} has no entity")
    dx, dy = target[0] - me.x, target[1] - me.y
    n = math.hypot(dx, dy)
    if n <= 1e-9:
        return (me.hx, me.hy)
    return (dx / n, dy / n)


_LOCOMOTION = {
    Action.ACCELERATE: Locomotion.ACCEL,
    Action.PUMP: Locomotion.PUMP,
    Action.BRAKE: Locomotion.BRAKE,
}


def _combo_source(me: PlayerState, tick: int) -> int:
    act, when = me.last_action
    if act < 0 or tick - when > COMBO_WINDOW:
        return -1
    return act


def apply_action(state: SimState, agent_id: int, pair: ActionPair) -> ControlIntent:
    me = _agent(state, agent_id)
    mask = build_action_mask(state, agent_id)
    if not (0 <= pair.action < N_ACTIONS and 0 <= pair.direction < N_DIRECTIONS) or not mask.allows(pair):
        raise ActionMaskedError(f"masked action pair {pair} for agent {agent_id}")

    heading = resolve_direction(state, me, pair.direction)
    act = Action(pair.action)
    locomotion = _LOCOMOTION.get(act, Locomotion.NEUTRAL)
    impulse = Impulse.NONE
    ball_op = BallOp.NONE
    throw_dir = None
    prev = _combo_source(me, state.tick)

    if act == Action.DASH:
        if prev == Action.DASH:
            impulse = Impulse.DIVE
        elif prev == Action.DODGE:
            impulse = Impulse.DODGE_DIVE
        else:
            impulse = Impulse.DASH
    elif act == Action.JUMP:
        impulse = Impulse.UPPERCUT if prev == Action.DASH else Impulse.JUMP
    elif act == Action.DODGE:
        impulse = Impulse.DODGE
    elif act == Action.THROW:
        ball_op = BallOp.THROW
        throw_dir = heading
        heading = (me.hx, me.hy)
    elif act == Action.PASS:
        ball_op = BallOp.PASS
    elif act == Action.CALL_FOR_PASS:
        ball_op = BallOp.CALL_FOR_PASS

    return ControlIntent(
        desired_heading=heading,
        locomotion=locomotion,
        impulse=impulse,
        ball_op=ball_op,
        throw_direction=throw_dir,
        action=int(act),
    )
