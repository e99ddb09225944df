"""Line-of-sight air-to-ground channel and Shannon link rate."""

from __future__ import annotations

import numpy as np

from uavmarl.env.config import SPEED_OF_LIGHT, ScenarioConfig
from uavmarl.errors import DomainError


def path_loss_db(uav_pos, gu_pos, cfg: ScenarioConfig):
    """Free-space LoS path loss plus the excess LoS loss, in dB.

    Accepts single 3-vectors or broadcastable ``(..., 3)`` arrays.
    """
    d = np.linalg.norm(np.asarray(uav_pos, dtype=float) - np.asarray(gu_pos, dtype=float), axis=-1)
    return path_loss_from_distance(d, cfg)


def path_loss_from_distance(d, cfg: ScenarioConfig):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("path loss undefined for coincident positions (d = 0)")
    pl = 20.0 * np.log10(4.0 * np.pi * cfg.f_c_hz * d / SPEED_OF_LIGHT) + cfg.sigma_los_db
    return float(pl) if pl.ndim == 0 else pl


def watts_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float) * 1000.0)


def dbm_to_watts(p_dbm):
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0) / 1000.0


def link_rate_bps(p_alloc_w, b_alloc_hz, pl_db, sigma, cfg: ScenarioConfig):
    """Downlink rate ``sigma * B * log2(1 + P_rec / (n0 * B))`` in bit/s.

    The received power is formed in the log domain (dBm minus dB path loss)
    and converted back to watts for the SNR. Works elementwise on arrays;
    unpaired entries (``sigma == 0``) are exactly zero.
    """
    p = np.asarray(p_alloc_w, dtype=float)
    b = np.asarray(b_alloc_hz, dtype=float)
    s = np.asarray(sigma)
    if np.any(p < 0) or np.any(b < 0):
        raise DomainError("allocated power and bandwidth must be nonnegative")
    p, b, pl, s = np.broadcast_arrays(p, b, np.asarray(pl_db, dtype=float), s)
    paired = s != 0
    if np.any(b[paired] <= 0):
        raise DomainError("paired links need positive bandwidth")
    rate = np.zeros(p.shape)
    if np.any(paired):
        with np.errstate(divide="ignore"):
            p_rec_w = dbm_to_watts(watts_to_dbm(p[paired]) - pl[paired])
        bp = b[paired]
        rate[paired] = bp * np.log2(1.0 + p_rec_w / (cfg.n0_w_per_hz * bp))
    return float(rate) if rate.ndim == 0 else rate
