import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavmarl.env import ScenarioConfig, allocate_resources
from uavmarl.env.allocation import enforce_floor, scheme_shares
from uavmarl.errors import ConfigError, DomainError

from conftest import make_actions


def test_equal_split():
    cfg = ScenarioConfig(num_uavs=1, num_gus=4)
    acts = make_actions(cfg, np.random.default_rng(0), power=2)
    res = allocate_resources(acts, np.ones((1, 4), int), np.full((1, 4), 50.0), cfg)
    # 10 dBm = 10 mW split four ways
    assert np.allclose(res.power_w[0], 2.5e-3, rtol=1e-12)


def test_inverse_square_shares():
    # weights 1/100 and 1/400 -> 0.8 / 0.2
    s = scheme_shares(3, [10.0, 20.0], None, 2.0, 0.5, 0.5)
    assert s == pytest.approx([0.8, 0.2], abs=1e-12)


def test_equal_random_proportions():
    s = scheme_shares(1, np.ones(5), np.full(5, 0.3), 2.0, 0.5, 0.5)
    assert s == pytest.approx(np.full(5, 0.2))


def test_mixture_scheme():
    d = np.array([10.0, 20.0])
    r = np.array([1.0, 3.0])
    s = scheme_shares(4, d, r, 2.0, 0.5, 0.5)
    assert s == pytest.approx(0.5 * np.array([0.8, 0.2]) + 0.5 * np.array([0.25, 0.75]))


def test_unknown_scheme():
    with pytest.raises(DomainError):
        scheme_shares(5, [1.0], [1.0], 2.0, 0.5, 0.5)


def test_floor_lifts_small_shares():
    x = enforce_floor([0.001, 0.499, 0.5], 0.1)
    assert x.sum() == pytest.approx(1.0, abs=1e-12)
    assert x[0] == pytest.approx(0.1)
    assert x[1] / x[2] == pytest.approx(0.499 / 0.5)


def test_infeasible_floor():
    with pytest.raises(ConfigError):
        enforce_floor([0.5, 0.5], 0.6)


def test_config_rejects_infeasible_floor():
    with pytest.raises(ConfigError):
        ScenarioConfig(num_gus=4, b_min_hz=1e7, b_total_hz=30e6)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 4), st.integers(0, 12), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_conservation_and_floors(M, extra, ps, bs, seed):
    cfg = ScenarioConfig(num_uavs=M, num_gus=M + extra)
    rng = np.random.default_rng(seed)
    N = cfg.num_gus
    owner = np.concatenate([np.arange(M), rng.integers(0, M, N - M)])
    sigma = np.zeros((M, N), int)
    sigma[owner, np.arange(N)] = 1
    dist = rng.uniform(10, 300, (M, N))
    res = allocate_resources(make_actions(cfg, rng, ps, bs), sigma, dist, cfg)
    assert np.allclose(res.power_w.sum(1), cfg.p_total_w, rtol=1e-9, atol=0)
    assert np.allclose(res.bandwidth_hz.sum(1), cfg.b_total_hz, rtol=1e-9, atol=0)
    assert np.all(res.power_w[sigma == 0] == 0) and np.all(res.bandwidth_hz[sigma == 0] == 0)
    assert np.all(res.power_w[sigma == 1] >= cfg.p_min_w * (1 - 1e-12))
    assert np.all(res.bandwidth_hz[sigma == 1] >= cfg.b_min_hz * (1 - 1e-12))
