import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavmarl.env import ScenarioConfig
from uavmarl.env.channel import dbm_to_watts, link_rate_bps, path_loss_db, path_loss_from_distance, watts_to_dbm
from uavmarl.errors import DomainError

C = 2.99792458e8


def fspl_oracle(d, f):
    # written out independently of the package
    return 20 * math.log10(d) + 20 * math.log10(f) + 20 * math.log10(4 * math.pi / C)


def test_path_loss_100m():
    cfg = ScenarioConfig(sigma_los_db=0.0)
    pl = path_loss_db([0, 0, 100], [0, 0, 0], cfg)
    assert pl == pytest.approx(78.462, abs=0.01)
    assert pl == pytest.approx(fspl_oracle(100, 2e9), abs=1e-9)


def test_path_loss_1m():
    cfg = ScenarioConfig(sigma_los_db=0.0)
    assert path_loss_db([1, 0, 10], [0, 0, 10], cfg) == pytest.approx(38.462, abs=0.01)


def test_excess_los_loss_is_added(cfg):
    base = path_loss_from_distance(50.0, cfg.replace(sigma_los_db=0.0))
    assert path_loss_from_distance(50.0, cfg) - base == pytest.approx(cfg.sigma_los_db)


@given(st.floats(0.1, 1e4), st.floats(1e8, 1e11))
def test_doubling_distance_adds_6db(d, f):
    cfg = ScenarioConfig(f_c_hz=f)
    diff = path_loss_from_distance(2 * d, cfg) - path_loss_from_distance(d, cfg)
    assert diff == pytest.approx(20 * math.log10(2), abs=1e-9)


def test_coincident_positions_rejected(cfg):
    with pytest.raises(DomainError):
        path_loss_db([1, 2, 3], [1, 2, 3], cfg)


def test_path_loss_strictly_increasing(cfg):
    d = np.linspace(1, 500, 200)
    assert np.all(np.diff(path_loss_from_distance(d, cfg)) > 0)


def test_rate_unpaired_is_zero(cfg):
    assert link_rate_bps(1.0, 1e6, 60.0, 0, cfg) == 0.0


def test_rate_example(cfg):
    # 10 dBm at 79.462 dB loss over 30 MHz: P_rec = 10^(-6.9462) mW
    p_rec = 10 ** ((10 - 79.462) / 10) / 1000
    oracle = 30e6 * math.log2(1 + p_rec / (1e-17 * 30e6))
    got = link_rate_bps(0.01, 30e6, 79.462, 1, cfg)
    assert got == pytest.approx(13.8e6, rel=0.02)
    assert got == pytest.approx(oracle, rel=1e-12)


def test_rate_at_unit_snr_equals_bandwidth(cfg):
    # P_rec = n0 * B with zero path loss
    assert link_rate_bps(1e-12, 1e5, 0.0, 1, cfg) == 1e5


def test_rate_decreases_with_path_loss(cfg):
    pl = np.linspace(40, 120, 50)
    r = link_rate_bps(np.full(50, 0.005), np.full(50, 1e7), pl, np.ones(50), cfg)
    assert np.all(np.diff(r) < 0)


@pytest.mark.parametrize("p,b", [(-1e-3, 1e6), (1e-3, -1.0)])
def test_negative_resources_rejected(cfg, p, b):
    with pytest.raises(DomainError):
        link_rate_bps(p, b, 60.0, 1, cfg)


def test_paired_link_needs_bandwidth(cfg):
    with pytest.raises(DomainError):
        link_rate_bps(1e-3, 0.0, 60.0, 1, cfg)


@given(st.floats(1e-9, 10.0))
def test_dbm_roundtrip(p):
    assert dbm_to_watts(watts_to_dbm(p)) == pytest.approx(p, rel=1e-12)
