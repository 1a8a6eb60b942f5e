"""Decision-interval stepping and vectorised self-play rollout collection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from arena_rl.obs_action import (
    DECISION_INTERVAL,
    N_ACTIONS,
    N_DIRECTIONS,
    ActionPair,
    apply_action,
    build_action_mask,
    build_observation,
    observation_size,
)
from arena_rl.policy import PolicyParams, forward, masked_categorical, sample_index
from arena_rl.reward import RewardConfig, rewards_from_events, team_shaping
from arena_rl.sim import COMBO_IMPULSES, ArenaConfig, EventKind, GameEvent, Impulse, SimState, fixed_update, new_match
from arena_rl.trainer.ppo import RolloutBatch
from arena_rl.trainer.selfplay import DRAW, LOSS, WIN

COMBO_NAMES = {Impulse.DIVE: "dive", Impulse.DODGE_DIVE: "dodge_dive", Impulse.UPPERCUT: "uppercut"}


def stream_seed(*keys: int) -> int:
    """Deterministic 63-bit seed derived from a tuple of integers."""
    return int(np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in keys]).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass
class IntervalResult:
    team_reward: list[float]
    team_shaping: list[float]
    events: list[GameEvent]
    ticks: int


def run_interval(state: SimState, intents, reward_cfg: RewardConfig, shaping: bool,
                 interval: int = DECISION_INTERVAL, on_tick=None) -> IntervalResult:
    """Holds one set of intents for a decision interval, summing per-tick team rewards."""
    total = [0.0, 0.0]
    shaped = [0.0, 0.0]
    events: list[GameEvent] = []
    carried = [c.carry() for c in intents]
    ticks = 0
    for k in range(interval):
        if state.done:
            break
        _, evs = fixed_update(state, intents if k == 0 else carried)
        ticks += 1
        r = rewards_from_events(evs, reward_cfg)
        total[0] += r[0]
        total[1] += r[1]
        if shaping:
            s = team_shaping(state, reward_cfg)
            shaped[0] += s[0]
            shaped[1] += s[1]
        events.extend(evs)
        if on_tick is not None:
            on_tick(state)
    return IntervalResult([total[0] + shaped[0], total[1] + shaped[1]], shaped, events, ticks)


@dataclass
class Decisions:
    obs: np.ndarray
    action_mask: np.ndarray
    direction_mask: np.ndarray
    actions: np.ndarray
    directions: np.ndarray
    logprobs: np.ndarray
    values: np.ndarray


def observe(state: SimState, agent_ids: Sequence[int]):
    obs = np.stack([build_observation(state, i) for i in agent_ids])
    masks = [build_action_mask(state, i) for i in agent_ids]
    am = np.stack([m.action_mask for m in masks])
    dm = np.stack([m.direction_mask for m in masks])
    return obs, am, dm


def act(params: PolicyParams, obs: np.ndarray, am: np.ndarray, dm: np.ndarray,
        rngs: Sequence[np.random.Generator], rows_per_rng: int) -> Decisions:
    """Batched forward pass; rows ``[i*rows_per_rng, (i+1)*rows_per_rng)`` sample from ``rngs[i]``."""
    la, ld, v = forward(params, obs)
    da = masked_categorical(la, am)
    dd = masked_categorical(ld, dm)
    n = obs.shape[0]
    ai = np.empty(n, dtype=np.int64)
    di = np.empty(n, dtype=np.int64)
    for i, rng in enumerate(rngs):
        sl = slice(i * rows_per_rng, (i + 1) * rows_per_rng)
        ai[sl] = sample_index(da.probs[sl], rng)
        di[sl] = sample_index(dd.probs[sl], rng)
    rows = np.arange(n)
    lp = da.logprobs[rows, ai] + dd.logprobs[rows, di]
    return Decisions(obs, am, dm, ai, di, lp, np.asarray(v, dtype=np.float64))


@dataclass
class EpisodeStats:
    rewards: list[float] = field(default_factory=list)
    lengths: list[int] = field(default_factory=list)
    outcomes: list[float] = field(default_factory=list)
    learner_goal_points: list[int] = field(default_factory=list)
    opponent_goal_points: list[int] = field(default_factory=list)
    shaping_total: float = 0.0
    learner_decisions: int = 0
    action_counts: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS, dtype=np.int64))
    direction_counts: np.ndarray = field(default_factory=lambda: np.zeros(N_DIRECTIONS, dtype=np.int64))
    combo_counts: dict[str, int] = field(default_factory=lambda: {n: 0 for n in COMBO_NAMES.values()})
    masked_selections: int = 0
    sampled_decisions: int = 0
    elo_deltas: list[float] = field(default_factory=list)


@dataclass
class EnvSlot:
    index: int
    seed: int
    state: SimState
    rng: np.random.Generator
    episode: int = 0
    learner_team: int = 0
    ep_reward: float = 0.0
    ep_ticks: int = 0


def make_envs(arena: ArenaConfig, num_envs: int, seed: int) -> list[EnvSlot]:
    envs = []
    for e in range(num_envs):
        st = new_match(arena, stream_seed(seed, e, 0))
        envs.append(EnvSlot(e, seed, st, np.random.default_rng(stream_seed(seed, e, 1 << 20)), learner_team=e % 2))
    return envs


def _reset(env: EnvSlot, arena: ArenaConfig) -> None:
    env.episode += 1
    env.state = new_match(arena, stream_seed(env.seed, env.index, env.episode))
    env.learner_team = (env.index + env.episode) % 2
    env.ep_reward = 0.0
    env.ep_ticks = 0


def episode_outcome(state: SimState, learner_team: int) -> float:
    a, b = state.score[learner_team], state.score[1 - learner_team]
    if a > b:
        return WIN
    if a < b:
        return LOSS
    return DRAW


def collect_rollouts(learner: PolicyParams, opponent: PolicyParams, envs: list[EnvSlot], arena: ArenaConfig,
                     reward_cfg: RewardConfig, decisions_per_env: int, on_episode_end=None):
    """Advance every env ``decisions_per_env`` decisions and return learner-team records.

    Records are laid out time-major as (T, num_envs, team_size) before
    flattening, so GAE can run on contiguous per-agent sequences.
    """
    n = arena.team_size
    E = len(envs)
    T = decisions_per_env
    D = observation_size(n)
    obs = np.zeros((T, E, n, D), dtype=np.float32)
    am = np.zeros((T, E, n, N_ACTIONS), dtype=bool)
    dm = np.zeros((T, E, n, N_DIRECTIONS), dtype=bool)
    acts = np.zeros((T, E, n), dtype=np.int64)
    dirs = np.zeros((T, E, n), dtype=np.int64)
    logp = np.zeros((T, E, n))
    vals = np.zeros((T, E, n))
    rews = np.zeros((T, E, n))
    dones = np.zeros((T, E, n))
    stats = EpisodeStats()
    shaping = reward_cfg.wall_skate_shaping or arena.wall_skate_shaping
    rngs = [env.rng for env in envs]

    for t in range(T):
        for env in envs:
            if env.state.done:
                _reset(env, arena)
        lids = [[p.player_id for p in env.state.team_players(env.learner_team)] for env in envs]
        oids = [[p.player_id for p in env.state.team_players(1 - env.learner_team)] for env in envs]
        lo = [observe(env.state, ids) for env, ids in zip(envs, lids)]
        oo = [observe(env.state, ids) for env, ids in zip(envs, oids)]
        ld = act(learner, np.concatenate([x[0] for x in lo]), np.concatenate([x[1] for x in lo]),
                 np.concatenate([x[2] for x in lo]), rngs, n)
        od = act(opponent, np.concatenate([x[0] for x in oo]), np.concatenate([x[1] for x in oo]),
                 np.concatenate([x[2] for x in oo]), rngs, n)
        for e, env in enumerate(envs):
            st = env.state
            intents = [None] * len(st.players)
            for k in range(n):
                r = e * n + k
                for ids, dec in ((lids[e], ld), (oids[e], od)):
                    pair = ActionPair(int(dec.actions[r]), int(dec.directions[r]))
                    intents[ids[k]] = apply_action(st, ids[k], pair)
                for dec in (ld, od):
                    if not (dec.action_mask[r, dec.actions[r]] and dec.direction_mask[r, dec.directions[r]]):
                        stats.masked_selections += 1
                stats.sampled_decisions += 2
                stats.action_counts[ld.actions[r]] += 1
                stats.direction_counts[ld.directions[r]] += 1
                imp = intents[lids[e][k]].impulse
                if imp in COMBO_IMPULSES:
                    stats.combo_counts[COMBO_NAMES[imp]] += 1
            res = run_interval(st, intents, reward_cfg, shaping)
            team_r = res.team_reward[env.learner_team]
            stats.shaping_total += res.team_shaping[env.learner_team]
            stats.learner_decisions += n
            env.ep_reward += team_r
            env.ep_ticks += res.ticks
            sl = slice(e * n, (e + 1) * n)
            obs[t, e] = ld.obs[sl]
            am[t, e] = ld.action_mask[sl]
            dm[t, e] = ld.direction_mask[sl]
            acts[t, e] = ld.actions[sl]
            dirs[t, e] = ld.directions[sl]
            logp[t, e] = ld.logprobs[sl]
            vals[t, e] = ld.values[sl]
            rews[t, e] = team_r
            dones[t, e] = float(st.done)
            for ev in res.events:
                if ev.kind == EventKind.SCORED:
                    (stats.learner_goal_points if ev.team == env.learner_team else stats.opponent_goal_points).append(ev.points)
            if st.done:
                outcome = episode_outcome(st, env.learner_team)
                stats.rewards.append(env.ep_reward)
                stats.lengths.append(env.ep_ticks)
                stats.outcomes.append(outcome)
                if on_episode_end is not None:
                    stats.elo_deltas.append(on_episode_end(outcome))

    next_vals = np.zeros((E, n))
    live = [e for e, env in enumerate(envs) if not env.state.done]
    if live:
        boot = [observe(envs[e].state, [p.player_id for p in envs[e].state.team_players(envs[e].learner_team)])[0] for e in live]
        _, _, v = forward(learner, np.concatenate(boot))
        next_vals[live] = np.asarray(v, dtype=np.float64).reshape(len(live), n)

    batch = RolloutBatch(
        obs=obs, action_mask=am, direction_mask=dm, actions=acts, directions=dirs,
        logprobs=logp, values=vals, rewards=rews, dones=dones,
    )
    return batch, next_vals, stats


def flatten(batch: RolloutBatch) -> RolloutBatch:
    """Collapse the (T, E, n) leading axes into one sample axis."""
    out = {}
    for name in batch.__dataclass_fields__:
        a = getattr(batch, name)
        if a is None:
            out[name] = None
        elif a.ndim >= 3 and name in ("obs", "action_mask", "direction_mask"):
            out[name] = a.reshape(-1, a.shape[-1])
        else:
            out[name] = a.reshape(-1)
    return RolloutBatch(**out)
