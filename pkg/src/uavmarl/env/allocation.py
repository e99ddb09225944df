"""Power and bandwidth splitting schemes for one UAV's served GUs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavmarl.errors import ConfigError, DomainError

SCHEMES = (1, 2, 3, 4)


@dataclass(frozen=True)
class AllocationResult:
    power_w: np.ndarray  # (M, N)
    bandwidth_hz: np.ndarray  # (M, N)


def scheme_shares(scheme: int, served_dist, random_props, alpha: float, c_dist: float, c_rand: float) -> np.ndarray:
    """Fractions of the total given to each served GU under one scheme.

    1: normalized random proportions; 2: equal split; 3: normalized
    ``d**-alpha``; 4: ``c_dist`` * scheme 3 + ``c_rand`` * scheme 1, renormalized.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"scheme index must be one of {SCHEMES}, got {scheme}")
    d = np.asarray(served_dist, dtype=float)
    s = d.size
    if s == 0:
        raise DomainError("no served GUs to allocate to")
    if scheme == 2:
        return np.full(s, 1.0 / s)
    if scheme in (1, 4):
        raw = np.asarray(random_props, dtype=float)
        if raw.shape != (s,) or np.any(raw < 0):
            raise DomainError("random proportions must be nonnegative, one per served GU")
        total = raw.sum()
        rand_share = raw / total if total > 0 else np.full(s, 1.0 / s)
        if scheme == 1:
            return rand_share
    w = d ** -alpha
    dist_share = w / w.sum()
    if scheme == 3:
        return dist_share
    mixed = c_dist * dist_share + c_rand * rand_share
    return mixed / mixed.sum()


def enforce_floor(shares, floor: float) -> np.ndarray:
    """Lift shares below ``floor`` to it; rescale the rest to keep the sum at 1."""
    x = np.asarray(shares, dtype=float) / np.sum(shares)
    s = x.size
    if s * floor > 1.0 + 1e-12:
        raise ConfigError(f"floor {floor} infeasible for {s} served GUs")
    pinned = np.zeros(s, dtype=bool)
    for _ in range(s):
        low = (x < floor) & ~pinned
        if not low.any():
            break
        pinned |= low
        free_mass = 1.0 - floor * pinned.sum()
        rest = x[~pinned]
        x[pinned] = floor
        if rest.size:
            x[~pinned] = rest * (free_mass / rest.sum())
    return x


def allocate_resources(actions, sigma, dist, cfg) -> AllocationResult:
    """Split P_total and B_total of every UAV over its served GUs.

    ``actions`` holds one HybridAction per UAV; ``sigma`` is the (M, N) pairing
    and ``dist`` the (M, N) UAV-GU distances in metres.
    """
    sigma = np.asarray(sigma)
    M, N = sigma.shape
    p_tot, b_tot = cfg.p_total_w, cfg.b_total_hz
    power = np.zeros((M, N))
    bw = np.zeros((M, N))
    for m, act in enumerate(actions):
        idx = np.flatnonzero(sigma[m])
        if idx.size * cfg.b_min_hz > b_tot or idx.size * cfg.p_min_w > p_tot:
            raise ConfigError(f"UAV {m}: {idx.size} served GUs cannot all receive the minimum floors")
        d = dist[m, idx]
        p_share = scheme_shares(int(act.power_scheme), d, np.asarray(act.random_proportions_p)[idx],
                                cfg.alpha, cfg.c1, cfg.c2)
        b_share = scheme_shares(int(act.bandwidth_scheme), d, np.asarray(act.random_proportions_b)[idx],
                                cfg.alpha, cfg.c3, cfg.c4)
        power[m, idx] = enforce_floor(p_share, cfg.p_min_w / p_tot) * p_tot
        bw[m, idx] = enforce_floor(b_share, cfg.b_min_hz / b_tot) * b_tot
    return AllocationResult(power, bw)
