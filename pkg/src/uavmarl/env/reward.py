"""Per-UAV fairness penalty and immediate reward."""

from __future__ import annotations

import numpy as np

from uavmarl.errors import DomainError

BPS_PER_MBPS = 1e6


def served_rate_stats(rates, sigma):
    """Mean and population std (Mbps) of served rates, one pair per UAV row."""
    rates = np.atleast_2d(np.asarray(rates, dtype=float)) / BPS_PER_MBPS
    mask = np.atleast_2d(np.asarray(sigma)) != 0
    s = mask.sum(axis=1)
    if np.any(s == 0):
        raise DomainError("fairness undefined for a UAV with no served GUs")
    c = np.where(mask, rates, 0.0)
    mean = c.sum(axis=1) / s
    dev = np.where(mask, rates - mean[:, None], 0.0)
    # scale before squaring so tiny spreads do not underflow to zero
    scale = np.abs(dev).max(axis=1)
    unit = dev / np.where(scale > 0, scale, 1.0)[:, None]
    eps = scale * np.sqrt((unit * unit).sum(axis=1) / s)
    # identical served rates give exactly zero spread
    hi = np.where(mask, rates, -np.inf).max(axis=1)
    lo = np.where(mask, rates, np.inf).min(axis=1)
    eps[hi == lo] = 0.0
    return mean, eps


def fairness_penalty(rates_row, pairing_row) -> float:
    """Population standard deviation of served-GU rates (Mbps)."""
    return float(served_rate_stats(rates_row, pairing_row)[1][0])


def agent_reward(rates_row, pairing_row, cfg) -> float:
    """Mean served rate in Mbps minus ``cfg.lambda_fair`` times the fairness penalty."""
    mean, eps = served_rate_stats(rates_row, pairing_row)
    return float(mean[0] - cfg.lambda_fair * eps[0])
