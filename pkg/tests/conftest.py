import numpy as np
import pytest

from arena_rl.sim import ArenaConfig

SMOKE_ARENA = dict(straight_length=1.0, semicircle_radius=3.0, track_width=2.0)


@pytest.fixture
def arena3():
    return ArenaConfig(team_size=3)


@pytest.fixture
def arena2():
    return ArenaConfig(team_size=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def place(state, pid, x, y, heading=None, velocity=(0.0, 0.0)):
    """Teleport a player for scripted scenarios."""
    p = state.players[pid]
    p.x, p.y = x, y
    if heading is not None:
        p.hx, p.hy = heading
    p.vx, p.vy = velocity
    return p


def give_ball(state, pid):
    for q in state.players:
        q.has_ball = False
    p = state.players[pid]
    p.has_ball = True
    state.ball.holder = pid
    state.ball.in_flight = False
    state.ball.x, state.ball.y = p.x, p.y
    state.possession_team = p.team
    return p


def random_controls(state, rng):
    """One uniformly random unmasked ActionPair per player, resolved to intents."""
    from arena_rl.obs_action import ActionPair, apply_action, build_action_mask

    intents = []
    for p in state.players:
        m = build_action_mask(state, p.player_id)
        a = int(rng.choice(np.flatnonzero(m.action_mask)))
        d = int(rng.choice(np.flatnonzero(m.direction_mask)))
        intents.append(apply_action(state, p.player_id, ActionPair(a, d)))
    return intents


def fuzz_ticks(config, seed, ticks, check=None):
    """Plays random controls for ``ticks`` fixed updates (restarting matches), calling
    ``check(pre, controls, state, events)`` after every tick. ``pre`` is a copy of the
    state before the tick; making it costs time, so it is None when ``check`` is None."""
    from arena_rl.obs_action import DECISION_INTERVAL
    from arena_rl.sim import fixed_update, new_match

    rng = np.random.default_rng(seed)
    state = new_match(config, seed)
    intents = None
    for t in range(ticks):
        if state.done:
            state = new_match(config, seed + t)
            intents = None
        if intents is None or state.tick % DECISION_INTERVAL == 0:
            intents = random_controls(state, rng)
            controls = intents
        else:
            controls = [c.carry() for c in intents]
        pre = state.copy() if check is not None else None
        _, events = fixed_update(state, controls)
        if check is not None:
            check(pre, controls, state, events)
    return state


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
