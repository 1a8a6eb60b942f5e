"""Deterministic fixed-timestep arena simulation.

Players skate on a stadium-shaped track, fight over one ball and must
carry it through four ordered checkpoints to activate the goal. Every
``fixed_update`` advances the match by one tick of ``fixed_dt`` seconds.

State is mutated in place; ``fixed_update`` returns the same object for
convenience. Use ``SimState.copy`` to fork a match.
"""

from __future__ import annotations

import copy
import enum
import math
import random
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

from arena_rl.geometry import Track, segment_hits_circle

TEAM_A = 0
TEAM_B = 1
CHECKPOINT_COUNT = 4
NEVER = -(10**9)


class ConfigError(ValueError):
    """Raised when an ArenaConfig violates one of its invariants."""


class DodgeVariant(str, enum.Enum):
    SHARP_TURN = "SharpTurn"
    SIDE_STEP = "SideStep"


@dataclass(frozen=True)
class Physics:
    """Tuning constants shared by every match. Units are SI."""

    accel_rate: float = 12.0
    pump_rate: float = 16.0
    pump_flat_factor: float = 0.4
    hurt_accel_factor: float = 0.5
    drag: float = 0.5
    brake: float = 4.0
    grip: float = 6.0
    max_speed: float = 9.0
    boost_speed: float = 14.0
    overspeed_decay: float = 0.92
    turn_rate: float = 8.0  # rad/s
    wall_contact: float = 0.25
    wall_speed_threshold: float = 4.0
    wall_climb_rate: float = 2.5
    wall_descend_rate: float = 3.0
    draft_range: float = 3.0
    draft_half_angle_deg: float = 30.0
    draft_bonus: float = 1.3
    dash_boost: float = 6.0
    dive_boost: float = 9.0
    dodge_dive_boost: float = 10.0
    uppercut_boost: float = 4.0
    dash_ticks: int = 8
    combo_ticks: int = 12
    tackle_radius: float = 1.2
    dive_radius: float = 1.6
    tackle_height_gap: float = 1.0
    side_step: float = 1.5
    sharp_turn_deg: float = 120.0
    dodge_ticks: int = 8
    jump_ticks: int = 25
    uppercut_air_ticks: int = 20
    dash_cooldown: int = 15
    dodge_cooldown: int = 15
    jump_cooldown: int = 30
    combo_cooldown: int = 60
    throw_cooldown: int = 15
    call_for_pass_ticks: int = 30
    victim_hurt_ticks: int = 50
    tumble_ticks: int = 25
    throw_distance: float = 12.0
    throw_speed: float = 22.0
    throw_apex: float = 2.5
    pass_speed: float = 18.0
    pass_apex: float = 0.8
    release_height: float = 1.0
    ball_rest_height: float = 0.3
    ball_roll_friction: float = 1.5
    catch_radius: float = 1.0
    ground_reach: float = 2.0
    air_reach: float = 3.5
    goal_radius: float = 1.5
    drop_scatter_speed: float = 3.0
    spawn_offset: float = 1.5


PHYSICS = Physics()


@dataclass(frozen=True)
class ArenaConfig:
    straight_length: float = 30.0
    semicircle_radius: float = 15.0
    track_width: float = 6.0
    wall_height: float = 3.0
    fixed_dt: float = 0.02
    checkpoint_count: int = CHECKPOINT_COUNT
    max_episode_ticks: int = 3000
    team_size: int = 3
    draft_enabled: bool = False
    dodge_variant: DodgeVariant = DodgeVariant.SIDE_STEP
    wall_skate_shaping: bool = False

    def validate(self) -> None:
        for name in ("straight_length", "semicircle_radius", "track_width", "wall_height", "fixed_dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if not self.track_width < self.semicircle_radius:
            raise ConfigError("track_width must be smaller than semicircle_radius")
        if self.checkpoint_count != CHECKPOINT_COUNT:
            raise ConfigError("checkpoint_count must be 4")
        if self.team_size not in (1, 2, 3):
            raise ConfigError("team_size must be 1, 2 or 3")
        if self.max_episode_ticks <= 0:
            raise ConfigError("max_episode_ticks must be positive")
        if not isinstance(self.dodge_variant, DodgeVariant):
            raise ConfigError("dodge_variant must be SharpTurn or SideStep")

    @property
    def track(self) -> Track:
        return Track(self.straight_length, self.semicircle_radius, self.track_width)


# -- controls -----------------------------------------------------------------


class Locomotion(enum.IntEnum):
    NEUTRAL = 0
    ACCEL = 1
    PUMP = 2
    BRAKE = 3


class Impulse(enum.IntEnum):
    NONE = 0
    DASH = 1
    DODGE = 2
    JUMP = 3
    DIVE = 4
    DODGE_DIVE = 5
    UPPERCUT = 6


class BallOp(enum.IntEnum):
    NONE = 0
    THROW = 1
    PASS = 2
    CALL_FOR_PASS = 3


TACKLING_IMPULSES = (Impulse.DASH, Impulse.DIVE, Impulse.DODGE_DIVE, Impulse.UPPERCUT)
COMBO_IMPULSES = (Impulse.DIVE, Impulse.DODGE_DIVE, Impulse.UPPERCUT)


@dataclass(frozen=True)
class ControlIntent:
    """Per-tick control for one player.

    ``impulse`` and ``ball_op`` only fire on a fresh intent; ``carry``
    yields the sustained form used for the rest of a decision interval.
    """

    desired_heading: tuple[float, float]
    locomotion: Locomotion = Locomotion.NEUTRAL
    impulse: Impulse = Impulse.NONE
    ball_op: BallOp = BallOp.NONE
    throw_direction: Optional[tuple[float, float]] = None
    action: int = -1
    fresh: bool = True

    def carry(self) -> "ControlIntent":
        return ControlIntent(self.desired_heading, self.locomotion, action=self.action, fresh=False)


# -- state ------------------------------------------------------------------------


class _Rng(random.Random):
    """Random stream that compares and copies by state."""

    def __eq__(self, other: object) -> bool:
        return isinstance(other, random.Random) and self.getstate() == other.getstate()

    def __deepcopy__(self, memo):
        clone = _Rng()
        clone.setstate(self.getstate())
        return clone


@dataclass
class PlayerState:
    player_id: int
    team: int
    x: float
    y: float
    hx: float
    hy: float
    vx: float = 0.0
    vy: float = 0.0
    wall_height: float = 0.0
    hurt_timer: int = 0
    air_timer: int = 0
    has_ball: bool = False
    dash_cd: int = 0
    dodge_cd: int = 0
    jump_cd: int = 0
    throw_cd: int = 0
    call_for_pass_timer: int = 0
    last_action: tuple[int, int] = (-1, NEVER)
    last_act_tick: int = NEVER
    tackle_timer: int = 0
    tackle_kind: Impulse = Impulse.NONE
    dodge_timer: int = 0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.vx, self.vy)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def hurt(self) -> bool:
        return self.hurt_timer > 0

    @property
    def in_air(self) -> bool:
        return self.air_timer > 0

    def cooldown(self, name: str) -> int:
        return getattr(self, f"{name}_cd")


@dataclass
class BallState:
    holder: Optional[int]
    x: float
    y: float
    height: float
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    in_flight: bool = False
    flight_distance: float = 0.0
    flight_traveled: float = 0.0
    flight_apex: float = 0.0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class TeamProgress:
    next_checkpoint: int = 1
    laps_completed: int = 0
    goal_active: bool = False

    def reset(self) -> None:
        self.next_checkpoint = 1
        self.laps_completed = 0
        self.goal_active = False


class EventKind(enum.IntEnum):
    """Event kinds; the integer value is the within-tick ordering precedence."""

    TACKLED = 0
    BALL_DROPPED = 1
    POSSESSION_CHANGED = 2
    CHECKPOINT_PROGRESSED = 3
    LAP_COMPLETED = 4
    SCORED = 5
    EPISODE_END = 6


@dataclass(frozen=True)
class GameEvent:
    kind: EventKind
    tick: int
    team: Optional[int] = None
    checkpoint_index: Optional[int] = None
    points: Optional[int] = None
    from_team: Optional[int] = None
    to_team: Optional[int] = None
    attacker: Optional[int] = None
    victim: Optional[int] = None
    player: Optional[int] = None
    reason: Optional[str] = None

    def sort_key(self) -> tuple[int, int]:
        for who in (self.attacker, self.player, self.team, self.to_team):
            if who is not None:
                return (int(self.kind), who)
        return (int(self.kind), -1)


@dataclass
class SimState:
    config: ArenaConfig
    tick: int
    players: list[PlayerState]
    ball: BallState
    progress: list[TeamProgress]
    score: list[int]
    rng: random.Random
    possession_team: Optional[int] = None
    done: bool = False
    end_reason: Optional[str] = None
    events: list[GameEvent] = field(default_factory=list)

    @property
    def track(self) -> Track:
        return _track_for(self.config)

    def copy(self) -> "SimState":
        return copy.deepcopy(self)

    def team_players(self, team: int) -> list[PlayerState]:
        return [p for p in self.players if p.team == team]

    def holder(self) -> Optional[PlayerState]:
        if self.ball.holder is None:
            return None
        return self.players[self.ball.holder]


_TRACKS: dict[tuple[float, float, float], Track] = {}


def _track_for(cfg: ArenaConfig) -> Track:
    key = (cfg.straight_length, cfg.semicircle_radius, cfg.track_width)
    t = _TRACKS.get(key)
    if t is None:
        t = _TRACKS[key] = cfg.track
    return t


def checkpoint_arc(track: Track, index: int) -> float:
    """Arc position of checkpoint ``index`` (1-based); checkpoint 1 is the goal line."""
    return (index - 1) * track.perimeter / CHECKPOINT_COUNT


def goal_position(track: Track) -> tuple[float, float]:
    return track.centerline_point(checkpoint_arc(track, 1))


def ball_spawn(track: Track) -> tuple[float, float]:
    return track.centerline_point(0.5 * track.perimeter)


def goal_points(progress: TeamProgress) -> int:
    """Point value of a goal scored now: one plus each extra lap, capped at three."""
    if not progress.goal_active:
        raise RuntimeError("goal_points called while the goal is inactive")
    extra_laps = max(progress.laps_completed - 1, 0)
    return min(1 + extra_laps, 3)


def _spawn_point(track: Track, s: float, lane: float) -> tuple[float, float]:
    cx, cy = track.centerline_point(s)
    sx, _ = track.spine_point(cx, cy)
    nx, ny = track.outward_normal(cx, cy)
    d = track.inner_radius + lane * track.width
    return (sx + nx * d, ny * d)


def new_match(config: ArenaConfig, seed: int) -> SimState:
    config.validate()
    track = _track_for(config)
    n = config.team_size
    delta = PHYSICS.spawn_offset
    players = []
    for team, s in ((TEAM_A, track.perimeter - delta), (TEAM_B, delta)):
        for i in range(n):
            x, y = _spawn_point(track, s, (i + 1) / (n + 1))
            tx, ty = track.clockwise_tangent(x, y)
            if team == TEAM_A:
                tx, ty = -tx, -ty
            players.append(PlayerState(player_id=len(players), team=team, x=x, y=y, hx=tx, hy=ty))
    bx, by = ball_spawn(track)
    ball = BallState(holder=None, x=bx, y=by, height=PHYSICS.ball_rest_height)
    return SimState(
        config=config,
        tick=0,
        players=players,
        ball=ball,
        progress=[TeamProgress(), TeamProgress()],
        score=[0, 0],
        rng=_Rng(seed),
    )


def line_of_sight(state: SimState, src: tuple[float, float], dst: tuple[float, float]) -> bool:
    """Clear sight line between two track points; only the inner wall occludes."""
    return state.track.line_of_sight(src, dst)


# -- fixed update ---------------------------------------------------------------


def _rotate(x: float, y: float, ang: float) -> tuple[float, float]:
    c, s = math.cos(ang), math.sin(ang)
    return (c * x - s * y, s * x + c * y)


def _turn_towards(p: PlayerState, tx: float, ty: float, max_step: float) -> None:
    n = math.hypot(tx, ty)
    if n <= 1e-12:
        return
    tx, ty = tx / n, ty / n
    dot = p.hx * tx + p.hy * ty
    cross = p.hx * ty - p.hy * tx
    ang = math.atan2(cross, dot)
    if abs(ang) <= max_step:
        p.hx, p.hy = tx, ty
    else:
        hx, hy = _rotate(p.hx, p.hy, math.copysign(max_step, ang))
        m = math.hypot(hx, hy)
        p.hx, p.hy = hx / m, hy / m


def _in_draft(state: SimState, p: PlayerState) -> bool:
    ph = PHYSICS
    cos_lim = math.cos(math.radians(ph.draft_half_angle_deg))
    for q in state.players:
        if q is p:
            continue
        wx, wy = p.x - q.x, p.y - q.y
        d = math.hypot(wx, wy)
        if d <= 1e-9 or d > ph.draft_range:
            continue
        # p must sit behind q, inside the wake cone around -q.heading
        if -(wx * q.hx + wy * q.hy) / d >= cos_lim:
            return True
    return False


def _release_ball(state: SimState, p: PlayerState, dx: float, dy: float, distance: float, speed: float, apex: float) -> None:
    ball = state.ball
    p.has_ball = False
    p.throw_cd = PHYSICS.throw_cooldown
    ball.holder = None
    ball.x, ball.y = p.x, p.y
    ball.height = PHYSICS.release_height
    ball.vx, ball.vy = dx * speed, dy * speed
    ball.vz = 0.0
    ball.in_flight = True
    ball.flight_distance = max(distance, 1e-6)
    ball.flight_traveled = 0.0
    ball.flight_apex = apex


def _drop_ball(state: SimState, p: PlayerState, events: list[GameEvent]) -> None:
    ball = state.ball
    p.has_ball = False
    ball.holder = None
    ang = state.rng.uniform(-math.pi, math.pi)
    sp = PHYSICS.drop_scatter_speed
    ball.x, ball.y = p.x, p.y
    ball.vx = 0.6 * p.vx + sp * math.cos(ang)
    ball.vy = 0.6 * p.vy + sp * math.sin(ang)
    ball.vz = 0.0
    ball.height = 0.5
    ball.in_flight = False
    events.append(GameEvent(EventKind.BALL_DROPPED, state.tick, player=p.player_id))


def pass_target(state: SimState, p: PlayerState) -> Optional[PlayerState]:
    """Ally that a Pass from ``p`` would go to: a caller in sight first, then the nearest ally in sight."""
    track = state.track
    best = None
    best_key = None
    for q in state.players:
        if q.team != p.team or q is p:
            continue
        if not track.line_of_sight(p.position, q.position):
            continue
        key = (0 if q.call_for_pass_timer > 0 else 1, math.hypot(q.x - p.x, q.y - p.y), q.player_id)
        if best_key is None or key < best_key:
            best, best_key = q, key
    return best


def throw_scores(state: SimState, p: PlayerState, dx: float, dy: float) -> bool:
    if not state.progress[p.team].goal_active:
        return False
    track = state.track
    goal = goal_position(track)
    end = (p.x + dx * PHYSICS.throw_distance, p.y + dy * PHYSICS.throw_distance)
    if not segment_hits_circle(p.position, end, goal, PHYSICS.goal_radius):
        return False
    return track.line_of_sight(p.position, goal)


def _fire_controls(state: SimState, p: PlayerState, c: ControlIntent, events: list[GameEvent]) -> None:
    ph = PHYSICS
    tick = state.tick
    p.last_action = (c.action, tick)
    imp = c.impulse
    if imp != Impulse.NONE and not p.hurt:
        fired = True
        if imp == Impulse.DASH and p.dash_cd == 0:
            p.vx += p.hx * ph.dash_boost
            p.vy += p.hy * ph.dash_boost
            p.tackle_timer, p.tackle_kind = ph.dash_ticks, imp
            p.dash_cd = ph.dash_cooldown
        elif imp == Impulse.DIVE and p.dash_cd == 0:
            p.vx += p.hx * ph.dive_boost
            p.vy += p.hy * ph.dive_boost
            p.tackle_timer, p.tackle_kind = ph.combo_ticks, imp
            p.dash_cd = ph.combo_cooldown
        elif imp == Impulse.DODGE_DIVE and p.dash_cd == 0:
            p.vx += p.hx * ph.dodge_dive_boost
            p.vy += p.hy * ph.dodge_dive_boost
            p.tackle_timer, p.tackle_kind = ph.combo_ticks, imp
            p.dash_cd = p.dodge_cd = ph.combo_cooldown
        elif imp == Impulse.UPPERCUT and p.jump_cd == 0 and not p.in_air:
            p.vx += p.hx * ph.uppercut_boost
            p.vy += p.hy * ph.uppercut_boost
            p.air_timer = ph.uppercut_air_ticks
            p.tackle_timer, p.tackle_kind = ph.combo_ticks, imp
            p.jump_cd = p.dash_cd = ph.combo_cooldown
        elif imp == Impulse.JUMP and p.jump_cd == 0 and not p.in_air:
            p.air_timer = ph.jump_ticks
            p.jump_cd = ph.jump_cooldown
        elif imp == Impulse.DODGE and p.dodge_cd == 0:
            dx, dy = c.desired_heading
            side = 1.0 if (p.hx * dy - p.hy * dx) >= 0.0 else -1.0
            if state.config.dodge_variant == DodgeVariant.SHARP_TURN:
                ang = side * math.radians(ph.sharp_turn_deg)
                p.hx, p.hy = _rotate(p.hx, p.hy, ang)
                p.vx, p.vy = _rotate(p.vx, p.vy, ang)
            else:
                lx, ly = -p.hy * side, p.hx * side
                x, y, _ = state.track.clamp(p.x + lx * ph.side_step, p.y + ly * ph.side_step)
                p.x, p.y = x, y
            p.dodge_timer = ph.dodge_ticks
            p.dodge_cd = ph.dodge_cooldown
        else:
            fired = False
        if fired:
            p.last_act_tick = tick
            if imp in COMBO_IMPULSES:
                # finishers close the combo chain
                p.last_action = (-1, tick)

    op = c.ball_op
    if op == BallOp.NONE or p.hurt:
        return
    if op == BallOp.CALL_FOR_PASS:
        if not p.has_ball:
            p.call_for_pass_timer = ph.call_for_pass_ticks
            p.last_act_tick = tick
        return
    if not p.has_ball:
        return
    if op == BallOp.THROW:
        dx, dy = c.throw_direction if c.throw_direction is not None else (p.hx, p.hy)
        n = math.hypot(dx, dy)
        if n <= 1e-12:
            dx, dy = p.hx, p.hy
        else:
            dx, dy = dx / n, dy / n
        p.last_act_tick = tick
        if throw_scores(state, p, dx, dy):
            points = goal_points(state.progress[p.team])
            state.score[p.team] += points
            events.append(GameEvent(EventKind.SCORED, tick, team=p.team, points=points))
            p.has_ball = False
            state.ball.holder = None
            state.progress[p.team].reset()
            state.done = True
            state.end_reason = "score"
            return
        _release_ball(state, p, dx, dy, ph.throw_distance, ph.throw_speed, ph.throw_apex)
    elif op == BallOp.PASS:
        q = pass_target(state, p)
        if q is None:
            return
        dx, dy = q.x - p.x, q.y - p.y
        dist = math.hypot(dx, dy)
        if dist <= 1e-9:
            dx, dy, dist = p.hx, p.hy, 1e-6
        else:
            dx, dy = dx / dist, dy / dist
        p.last_act_tick = tick
        _release_ball(state, p, dx, dy, dist, ph.pass_speed, ph.pass_apex)


def _integrate_player(state: SimState, p: PlayerState, c: Optional[ControlIntent], dt: float) -> None:
    ph = PHYSICS
    track = state.track
    if c is not None:
        _turn_towards(p, c.desired_heading[0], c.desired_heading[1], ph.turn_rate * dt)
        loco = c.locomotion
    else:
        loco = Locomotion.NEUTRAL

    vx, vy = p.vx, p.vy
    damp = 1.0 - ph.drag * dt
    if loco == Locomotion.BRAKE:
        damp *= 1.0 - ph.brake * dt
    vx *= damp
    vy *= damp
    # skates resist sideways motion
    along = vx * p.hx + vy * p.hy
    px, py = vx - along * p.hx, vy - along * p.hy
    keep = 1.0 - ph.grip * dt
    vx = along * p.hx + px * keep
    vy = along * p.hy + py * keep

    accel = 0.0
    if not p.in_air:
        if loco == Locomotion.ACCEL:
            accel = ph.accel_rate
        elif loco == Locomotion.PUMP:
            boosted = p.wall_height > 0.0 or track.on_curve(p.x)
            accel = ph.pump_rate * (1.0 if boosted else ph.pump_flat_factor)
        if accel > 0.0:
            if p.hurt:
                accel *= ph.hurt_accel_factor
            if state.config.draft_enabled and _in_draft(state, p):
                accel *= ph.draft_bonus
    vx += p.hx * accel * dt
    vy += p.hy * accel * dt

    cap = ph.boost_speed if p.tackle_timer > 0 else ph.max_speed
    sp = math.hypot(vx, vy)
    if sp > cap:
        f = max(cap / sp, ph.overspeed_decay)
        vx *= f
        vy *= f

    x = p.x + vx * dt
    y = p.y + vy * dt
    x, y, wall = track.clamp(x, y)
    if wall != 0:
        nx, ny = track.outward_normal(x, y)
        vn = vx * nx + vy * ny
        if (wall > 0 and vn > 0.0) or (wall < 0 and vn < 0.0):
            vx -= vn * nx
            vy -= vn * ny
    p.x, p.y, p.vx, p.vy = x, y, vx, vy

    near_wall = (
        track.inner_wall_distance(x, y) <= ph.wall_contact
        or track.outer_wall_distance(x, y) <= ph.wall_contact
    )
    if near_wall and math.hypot(vx, vy) >= ph.wall_speed_threshold:
        p.wall_height = min(p.wall_height + ph.wall_climb_rate * dt, state.config.wall_height)
    elif near_wall or p.in_air:
        p.wall_height = max(p.wall_height - ph.wall_descend_rate * dt, 0.0)
    else:
        p.wall_height = 0.0


def _integrate_ball(state: SimState, dt: float) -> None:
    ph = PHYSICS
    ball = state.ball
    track = state.track
    if ball.holder is not None:
        h = state.players[ball.holder]
        ball.x, ball.y = h.x, h.y
        ball.vx, ball.vy, ball.vz = h.vx, h.vy, 0.0
        ball.height = ph.release_height + h.wall_height
        return
    x = ball.x + ball.vx * dt
    y = ball.y + ball.vy * dt
    if ball.in_flight:
        step = math.hypot(ball.vx, ball.vy) * dt
        ball.flight_traveled += step
        f = min(ball.flight_traveled / ball.flight_distance, 1.0)
        new_h = ph.release_height * (1.0 - f) + ph.ball_rest_height * f + 4.0 * ball.flight_apex * f * (1.0 - f)
        ball.vz = (new_h - ball.height) / dt
        ball.height = new_h
        if f >= 1.0:
            ball.in_flight = False
            ball.vx *= 0.5
            ball.vy *= 0.5
            ball.vz = 0.0
            ball.height = ph.ball_rest_height
    else:
        keep = max(1.0 - ph.ball_roll_friction * dt, 0.0)
        ball.vx *= keep
        ball.vy *= keep
        ball.height = max(ball.height - 2.0 * dt, ph.ball_rest_height)
        ball.vz = 0.0
    cx, cy, wall = track.clamp(x, y)
    if wall != 0:
        nx, ny = track.outward_normal(cx, cy)
        vn = ball.vx * nx + ball.vy * ny
        if (wall > 0 and vn > 0.0) or (wall < 0 and vn < 0.0):
            ball.vx -= 2.0 * vn * nx
            ball.vy -= 2.0 * vn * ny
    ball.x, ball.y = cx, cy


def _resolve_tackles(state: SimState, events: list[GameEvent]) -> None:
    ph = PHYSICS
    tick = state.tick
    for a in state.players:
        if a.tackle_timer <= 0 or a.hurt:
            continue
        kind = a.tackle_kind
        radius = ph.dive_radius if kind in (Impulse.DIVE, Impulse.DODGE_DIVE) else ph.tackle_radius
        best = None
        best_key = None
        for v in state.players:
            if v.team == a.team or v.hurt or v.dodge_timer > 0:
                continue
            if kind != Impulse.UPPERCUT:
                if v.in_air or abs(v.wall_height - a.wall_height) > ph.tackle_height_gap:
                    continue
            d = math.hypot(v.x - a.x, v.y - a.y)
            if d > radius:
                continue
            key = (d, v.player_id)
            if best_key is None or key < best_key:
                best, best_key = v, key
        if best is None:
            continue
        events.append(GameEvent(EventKind.TACKLED, tick, attacker=a.player_id, victim=best.player_id))
        best.hurt_timer = ph.victim_hurt_ticks
        best.vx *= 0.3
        best.vy *= 0.3
        best.tackle_timer = 0
        best.call_for_pass_timer = 0
        if best.has_ball:
            _drop_ball(state, best, events)
        a.tackle_timer = 0
        if kind in COMBO_IMPULSES:
            _tumble(state, a, events)


def _tumble(state: SimState, p: PlayerState, events: list[GameEvent]) -> None:
    p.hurt_timer = max(p.hurt_timer, PHYSICS.tumble_ticks)
    p.tackle_timer = 0
    p.tackle_kind = Impulse.NONE
    if p.has_ball:
        _drop_ball(state, p, events)


def _resolve_catch(state: SimState, events: list[GameEvent]) -> None:
    ph = PHYSICS
    ball = state.ball
    if ball.holder is not None:
        return
    best = None
    best_key = None
    for p in state.players:
        if p.hurt or p.throw_cd > 0:
            continue
        d = math.hypot(ball.x - p.x, ball.y - p.y)
        if d > ph.catch_radius:
            continue
        reach = ph.air_reach if p.in_air else ph.ground_reach
        if not (p.wall_height - 0.5 <= ball.height <= p.wall_height + reach):
            continue
        key = (d, p.player_id)
        if best_key is None or key < best_key:
            best, best_key = p, key
    if best is None:
        return
    best.has_ball = True
    ball.holder = best.player_id
    ball.in_flight = False
    ball.x, ball.y = best.x, best.y
    if state.possession_team != best.team:
        prev = state.possession_team
        if prev is not None:
            state.progress[prev].reset()
        events.append(GameEvent(EventKind.POSSESSION_CHANGED, state.tick, from_team=prev, to_team=best.team))
        state.possession_team = best.team


def _progress_checkpoints(state: SimState, holder_start: Optional[int], start_arc: float, events: list[GameEvent]) -> None:
    ball = state.ball
    if ball.holder is None or ball.holder != holder_start:
        return
    h = state.players[ball.holder]
    track = state.track
    s_now = track.arc_position(h.x, h.y)
    delta = track.arc_delta(start_arc, s_now)
    if delta <= 0.0:
        return
    prog = state.progress[h.team]
    target = checkpoint_arc(track, prog.next_checkpoint)
    if (target - start_arc) % track.perimeter < delta:
        k = prog.next_checkpoint
        events.append(GameEvent(EventKind.CHECKPOINT_PROGRESSED, state.tick, team=h.team, checkpoint_index=k))
        if k == CHECKPOINT_COUNT:
            prog.next_checkpoint = 1
            prog.laps_completed += 1
            prog.goal_active = True
            events.append(GameEvent(EventKind.LAP_COMPLETED, state.tick, team=h.team))
        else:
            prog.next_checkpoint = k + 1


def _tick_timers(p: PlayerState) -> None:
    if p.hurt_timer > 0:
        p.hurt_timer -= 1
    if p.air_timer > 0:
        p.air_timer -= 1
    if p.dash_cd > 0:
        p.dash_cd -= 1
    if p.dodge_cd > 0:
        p.dodge_cd -= 1
    if p.jump_cd > 0:
        p.jump_cd -= 1
    if p.throw_cd > 0:
        p.throw_cd -= 1
    if p.call_for_pass_timer > 0:
        p.call_for_pass_timer -= 1
    if p.dodge_timer > 0:
        p.dodge_timer -= 1


def fixed_update(state: SimState, controls: Sequence[Optional[ControlIntent]]) -> tuple[SimState, list[GameEvent]]:
    """Advance ``state`` by one tick with one control per player (None = neutral)."""
    if state.done:
        state.events = []
        return state, []
    dt = state.config.fixed_dt
    track = state.track
    events: list[GameEvent] = []

    holder_start = state.ball.holder
    start_arc = track.arc_position(*state.players[holder_start].position) if holder_start is not None else 0.0

    for p, c in zip(state.players, controls):
        if c is not None and c.fresh:
            _fire_controls(state, p, c, events)
            if state.done:
                break

    if not state.done:
        for p, c in zip(state.players, controls):
            _integrate_player(state, p, c, dt)
        _integrate_ball(state, dt)
        _resolve_tackles(state, events)
        for p in state.players:
            if p.tackle_timer == 1 and p.tackle_kind in COMBO_IMPULSES and not p.hurt:
                _tumble(state, p, events)
            if p.tackle_timer > 0:
                p.tackle_timer -= 1
                if p.tackle_timer == 0:
                    p.tackle_kind = Impulse.NONE
        _resolve_catch(state, events)
        _progress_checkpoints(state, holder_start, start_arc, events)
        for p in state.players:
            _tick_timers(p)

    state.tick += 1
    if state.done:
        events.append(GameEvent(EventKind.EPISODE_END, state.tick - 1, reason="score"))
    elif state.tick >= state.config.max_episode_ticks:
        state.done = True
        state.end_reason = "timeout"
        events.append(GameEvent(EventKind.EPISODE_END, state.tick - 1, reason="timeout"))
    events.sort(key=GameEvent.sort_key)
    state.events = events
    return state, events


def arena_config_fields() -> list[str]:
    return [f.name for f in fields(ArenaConfig)]
