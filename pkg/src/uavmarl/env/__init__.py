"""Multi-UAV assisted downlink simulator."""

from uavmarl.env.allocation import AllocationResult, allocate_resources, enforce_floor, scheme_shares
from uavmarl.env.channel import link_rate_bps, path_loss_db
from uavmarl.env.config import PRESETS, ScenarioConfig, load_scenario, preset, save_scenario
from uavmarl.env.core import (
    EnvState,
    HybridAction,
    StepOutcome,
    build_observation,
    env_reset,
    env_step,
    observation_size,
    read_trace,
    write_trace,
)
from uavmarl.env.pairing import PairingAssignment, resolve_pairing
from uavmarl.env.reward import agent_reward, fairness_penalty

__all__ = [
    "AllocationResult", "EnvState", "HybridAction", "PRESETS", "PairingAssignment", "ScenarioConfig",
    "StepOutcome", "agent_reward", "allocate_resources", "build_observation", "enforce_floor",
    "env_reset", "env_step", "fairness_penalty", "link_rate_bps", "load_scenario", "observation_size",
    "path_loss_db", "preset", "read_trace", "resolve_pairing", "save_scenario", "scheme_shares",
    "write_trace",
]
