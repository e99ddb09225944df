import json

import numpy as np
import pytest

from uavmarl.env import (
    PRESETS,
    ScenarioConfig,
    build_observation,
    env_reset,
    env_step,
    load_scenario,
    observation_size,
    preset,
    read_trace,
    save_scenario,
    write_trace,
)
from uavmarl.env.core import EnvState, clamp_speed, move_uavs
from uavmarl.errors import ConfigError, UsageError

from conftest import make_actions


def rollout(cfg, seed, steps, action_seed=0, vel=None):
    s = env_reset(cfg, seed)
    rng = np.random.default_rng(action_seed)
    outs = []
    for _ in range(steps):
        v = rng.normal(0, 15, (cfg.num_uavs, 3)) if vel is None else vel
        o = env_step(s, make_actions(cfg, rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)), vel=v), cfg)
        outs.append(o)
        s = o.next_state
    return outs


def test_unit_velocity_move(cfg):
    pos = np.array([[0.0, 0, 50]])
    new, _ = move_uavs(pos, np.array([[1.0, 0, 0]]), cfg)
    assert new.tolist() == [[1.0, 0.0, 50.0]]


def test_speed_clamp(cfg):
    v = np.array([[2 * cfg.uav_max_speed, 0, 0]])
    new, used = move_uavs(np.array([[0.0, 0, 50]]), v, cfg)
    assert np.linalg.norm(new[0] - [0, 0, 50]) == pytest.approx(cfg.uav_max_speed * cfg.dt_decision)
    assert np.linalg.norm(clamp_speed(np.array([3.0, 4, 0]), 1.0)) == pytest.approx(1.0)


def test_reset_deterministic(desk):
    a, b = env_reset(desk, 7), env_reset(desk, 7)
    for f in ("uav_pos", "uav_vel", "gu_pos", "gu_vel", "sigma"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert a.t == 0


def test_reset_bounds():
    cfg = ScenarioConfig(num_uavs=3, num_gus=9)
    for seed in range(50):
        s = env_reset(cfg, seed)
        assert s.uav_pos.shape == (3, 3)
        assert np.all((s.uav_pos[:, 2] >= cfg.altitude_min) & (s.uav_pos[:, 2] <= cfg.altitude_max))
        assert np.all(s.gu_pos[:, 2] == 0)
        assert not s.uav_vel.any()
        s.pairing.check()


def test_step_replay_bit_identical(desk):
    a = rollout(desk, 3, 30)
    b = rollout(desk, 3, 30)
    for x, y in zip(a, b):
        assert np.array_equal(x.rates_bps, y.rates_bps)
        assert np.array_equal(x.rewards, y.rewards)
        assert np.array_equal(x.next_state.gu_pos, y.next_state.gu_pos)


def test_step_does_not_mutate_state(desk):
    s = env_reset(desk, 1)
    before = (s.uav_pos.copy(), s.gu_pos.copy(), s.sigma.copy(), s.t, s.rng.bit_generator.state)
    env_step(s, make_actions(desk, np.random.default_rng(0)), desk)
    assert np.array_equal(before[0], s.uav_pos) and np.array_equal(before[1], s.gu_pos)
    assert np.array_equal(before[2], s.sigma) and before[3] == s.t
    assert before[4] == s.rng.bit_generator.state


def test_bounds_and_rates_hold(desk):
    for o in rollout(desk, 5, 60):
        s = o.next_state
        A = desk.area_half_extent
        assert np.all(np.abs(s.uav_pos[:, :2]) <= A) and np.all(np.abs(s.gu_pos[:, :2]) <= A)
        assert np.all((s.uav_pos[:, 2] >= desk.altitude_min) & (s.uav_pos[:, 2] <= desk.altitude_max))
        assert np.all(np.linalg.norm(s.uav_vel, axis=1) <= desk.uav_max_speed + 1e-9)
        assert np.all(np.linalg.norm(s.gu_vel, axis=1) <= desk.gu_max_speed + 1e-9)
        assert np.all(o.rates_bps >= 0)
        assert np.all(o.rates_bps[s.sigma == 0] == 0)


def test_done_at_horizon():
    cfg = ScenarioConfig(t_max=3)
    outs = rollout(cfg, 0, 3)
    assert [o.done for o in outs] == [False, False, True]
    with pytest.raises(UsageError):
        env_step(outs[-1].next_state, make_actions(cfg, np.random.default_rng(0)), cfg)


def test_wrong_action_count(desk):
    with pytest.raises(UsageError):
        env_step(env_reset(desk, 0), make_actions(desk, np.random.default_rng(0))[:1], desk)


def test_observation_layout():
    for M, N in [(2, 4), (3, 9), (4, 16)]:
        cfg = ScenarioConfig(num_uavs=M, num_gus=N)
        s = env_reset(cfg, 0)
        for m in range(M):
            assert build_observation(s, m, cfg).shape == (3 + 3 * M + 2 * N + M * N + 1,) == (observation_size(cfg),)


def test_observation_scaling(desk):
    s = env_reset(desk, 0)
    s.uav_pos[0] = [100, 100, 100]
    obs = build_observation(s, 0, desk)
    assert obs[:3].tolist() == [1.0, 1.0, 1.0]
    M, N = desk.num_uavs, desk.num_gus
    sig = obs[3 + 3 * M + 2 * N: 3 + 3 * M + 2 * N + M * N]
    assert np.array_equal(sig, s.sigma.ravel())


def test_observation_bad_agent(desk):
    with pytest.raises(IndexError):
        build_observation(env_reset(desk, 0), 2, desk)


def test_trace_roundtrip(tmp_path, desk):
    outs = rollout(desk, 2, 10)
    path = tmp_path / "trace.csv"
    write_trace(outs, desk, path)
    tr = read_trace(path)
    assert tr["t"].tolist() == list(range(1, 11))
    assert np.array_equal(tr["uav1_z"], [o.next_state.uav_pos[1, 2] for o in outs])
    assert np.array_equal(tr["reward_0"], [o.rewards[0] for o in outs])
    assert np.array_equal(tr["sigma_1_3"], [o.next_state.sigma[1, 3] for o in outs])


def test_presets():
    assert preset("2x8").num_gus == 8 and preset("2x8").num_uavs == 2
    assert set(PRESETS) == {"2x4", "2x8", "3x9", "4x16"}
    assert preset("2x4").t_max == 200
    with pytest.raises(ConfigError):
        preset("9x9")


@pytest.mark.parametrize("bad", [
    dict(num_uavs=0), dict(num_gus=1), dict(c1=0.6), dict(c3=0.3), dict(gu_max_speed=30.0), dict(gamma=1.5),
    dict(altitude_range=(50.0, 10.0)),
])
def test_config_invariants(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig(**bad)


def test_config_document_roundtrip(tmp_path):
    cfg = ScenarioConfig(num_uavs=3, num_gus=9, lambda_fair=0.1)
    path = tmp_path / "scenario.json"
    save_scenario(cfg, path)
    assert load_scenario(path) == cfg


def test_config_unknown_key(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"num_uavs": 2, "warp_drive": True}))
    with pytest.raises(ConfigError):
        load_scenario(path)


def test_state_helpers(desk):
    s = env_reset(desk, 0)
    assert isinstance(s, EnvState)
    assert s.distances().shape == (2, 4)
    assert s.num_uavs == 2 and s.num_gus == 4
