"""World state, step/reset dynamics, observations and episode traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from uavmarl.env.allocation import AllocationResult, allocate_resources
from uavmarl.env.channel import link_rate_bps, path_loss_from_distance
from uavmarl.env.config import ScenarioConfig
from uavmarl.env.pairing import PairingAssignment, initial_pairing, resolve_pairing
from uavmarl.env.reward import served_rate_stats
from uavmarl.errors import UsageError


def clone_rng(rng: np.random.Generator) -> np.random.Generator:
    out = np.random.Generator(type(rng.bit_generator)(0))
    out.bit_generator.state = rng.bit_generator.state
    return out


@dataclass
class EnvState:
    uav_pos: np.ndarray  # (M, 3)
    uav_vel: np.ndarray  # (M, 3)
    gu_pos: np.ndarray  # (N, 3), z == 0
    gu_vel: np.ndarray  # (N, 3), vz == 0
    sigma: np.ndarray  # (M, N) pairing in force
    t: int
    rng: np.random.Generator = field(repr=False)

    @property
    def num_uavs(self) -> int:
        return self.uav_pos.shape[0]

    @property
    def num_gus(self) -> int:
        return self.gu_pos.shape[0]

    @property
    def pairing(self) -> PairingAssignment:
        return PairingAssignment(self.sigma)

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.uav_pos[:, None, :] - self.gu_pos[None, :, :], axis=-1)


@dataclass
class HybridAction:
    """Decision of one UAV for one step.

    ``pairing_claims`` is the sampled multi-hot claim set; when omitted the
    claims are ``pairing_intent > 0``. Schemes are 1-based.
    """

    velocity_cmd: np.ndarray
    pairing_intent: np.ndarray
    power_scheme: int
    bandwidth_scheme: int
    random_proportions_p: np.ndarray
    random_proportions_b: np.ndarray
    pairing_claims: np.ndarray | None = None

    def claims(self) -> np.ndarray:
        if self.pairing_claims is not None:
            return np.asarray(self.pairing_claims).astype(bool)
        return np.asarray(self.pairing_intent) > 0


@dataclass
class StepOutcome:
    rates_bps: np.ndarray  # (M, N)
    fairness_eps: np.ndarray  # (M,)
    rewards: np.ndarray  # (M,)
    next_state: EnvState
    done: bool
    allocation: AllocationResult
    uav_order: np.ndarray


def env_reset(cfg: ScenarioConfig, seed: int | None = None) -> EnvState:
    """Random take-off positions for UAVs, random GU positions, zero velocities."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    M, N, A = cfg.num_uavs, cfg.num_gus, cfg.area_half_extent
    uav_xy = rng.uniform(-A, A, size=(M, 2))
    uav_z = rng.uniform(cfg.altitude_min, cfg.altitude_max, size=(M, 1))
    gu_xy = rng.uniform(-A, A, size=(N, 2))
    uav_pos = np.hstack([uav_xy, uav_z])
    gu_pos = np.hstack([gu_xy, np.zeros((N, 1))])
    return EnvState(
        uav_pos=uav_pos,
        uav_vel=np.zeros((M, 3)),
        gu_pos=gu_pos,
        gu_vel=np.zeros((N, 3)),
        sigma=initial_pairing(uav_pos, gu_pos).sigma,
        t=0,
        rng=rng,
    )


def clamp_speed(v: np.ndarray, vmax: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(speed > vmax, vmax / np.maximum(speed, 1e-300), 1.0)
    return v * scale


def move_uavs(pos, vel_cmd, cfg: ScenarioConfig):
    v = clamp_speed(vel_cmd, cfg.uav_max_speed)
    new = pos + v * cfg.dt_decision
    A = cfg.area_half_extent
    new[:, :2] = np.clip(new[:, :2], -A, A)
    new[:, 2] = np.clip(new[:, 2], cfg.altitude_min, cfg.altitude_max)
    return new, v


def move_gus(pos, rng: np.random.Generator, cfg: ScenarioConfig):
    N = pos.shape[0]
    heading = rng.uniform(0.0, 2.0 * np.pi, size=N)
    speed = rng.uniform(0.0, cfg.gu_max_speed, size=N)
    vel = np.zeros((N, 3))
    vel[:, 0] = speed * np.cos(heading)
    vel[:, 1] = speed * np.sin(heading)
    new = pos + vel * cfg.dt_decision
    A = cfg.area_half_extent
    new[:, :2] = np.clip(new[:, :2], -A, A)
    new[:, 2] = 0.0
    return new, vel


def env_step(state: EnvState, actions: Sequence[HybridAction], cfg: ScenarioConfig) -> StepOutcome:
    """Advance the game by one decision interval; ``state`` is not modified."""
    M = cfg.num_uavs
    if state.t >= cfg.t_max:
        raise UsageError(f"episode already terminated at t={state.t}")
    if len(actions) != M:
        raise UsageError(f"expected {M} actions, got {len(actions)}")
    rng = clone_rng(state.rng)

    order = rng.permutation(M)
    intents = np.stack([np.asarray(a.pairing_intent, dtype=float) for a in actions])
    claims = np.stack([a.claims() for a in actions])
    pairing = resolve_pairing(intents, order, state.uav_pos, state.gu_pos, claims=claims)

    vel_cmd = np.stack([np.asarray(a.velocity_cmd, dtype=float) for a in actions])
    uav_pos, uav_vel = move_uavs(state.uav_pos, vel_cmd, cfg)
    gu_pos, gu_vel = move_gus(state.gu_pos, rng, cfg)

    dist = np.linalg.norm(uav_pos[:, None, :] - gu_pos[None, :, :], axis=-1)
    alloc = allocate_resources(actions, pairing.sigma, dist, cfg)
    pl = path_loss_from_distance(dist, cfg)
    rates = link_rate_bps(alloc.power_w, alloc.bandwidth_hz, pl, pairing.sigma, cfg)
    mean_rate, eps = served_rate_stats(rates, pairing.sigma)
    rewards = mean_rate - cfg.lambda_fair * eps

    t = state.t + 1
    nxt = EnvState(uav_pos, uav_vel, gu_pos, gu_vel, pairing.sigma, t, rng)
    return StepOutcome(rates, eps, rewards, nxt, t >= cfg.t_max, alloc, order)


def observation_size(cfg: ScenarioConfig) -> int:
    M, N = cfg.num_uavs, cfg.num_gus
    return 3 + 3 * M + 2 * N + M * N + 1


def scale_uav_pos(pos, cfg: ScenarioConfig) -> np.ndarray:
    pos = np.asarray(pos, dtype=float)
    return pos / np.array([cfg.area_half_extent, cfg.area_half_extent, cfg.altitude_max])


def build_observation(state: EnvState, agent: int, cfg: ScenarioConfig) -> np.ndarray:
    """Fixed-length view: own pos, all UAV pos, GU xy, pairing matrix, time fraction."""
    if not 0 <= agent < cfg.num_uavs:
        raise IndexError(f"agent {agent} out of range")
    uavs = scale_uav_pos(state.uav_pos, cfg)
    gus = state.gu_pos[:, :2] / cfg.area_half_extent
    return np.concatenate([
        uavs[agent],
        uavs.ravel(),
        gus.ravel(),
        state.sigma.ravel().astype(float),
        [state.t / cfg.t_max],
    ])


def trace_header(cfg: ScenarioConfig) -> list[str]:
    M, N = cfg.num_uavs, cfg.num_gus
    cols = ["t"]
    cols += [f"uav{m}_{ax}" for m in range(M) for ax in "xyz"]
    cols += [f"gu{n}_{ax}" for n in range(N) for ax in "xy"]
    cols += [f"sigma_{m}_{n}" for m in range(M) for n in range(N)]
    cols += [f"reward_{m}" for m in range(M)]
    return cols


def trace_row(outcome: StepOutcome) -> list:
    s = outcome.next_state
    return ([s.t] + [repr(float(v)) for v in s.uav_pos.ravel()]
            + [repr(float(v)) for v in s.gu_pos[:, :2].ravel()]
            + [int(v) for v in s.sigma.ravel()]
            + [repr(float(r)) for r in outcome.rewards])


def write_trace(outcomes: Sequence[StepOutcome], cfg: ScenarioConfig, path: str | Path) -> None:
    """One CSV row per step: time, UAV positions, GU positions, pairing, rewards."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(cfg))
        for o in outcomes:
            w.writerow(trace_row(o))


def read_trace(path: str | Path) -> dict[str, np.ndarray]:
    """Load a trace file as column name -> float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace")
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
