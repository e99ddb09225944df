"""Scenario configuration, presets and the plain-text config document."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from uavmarl.errors import ConfigError

SPEED_OF_LIGHT = 2.99792458e8  # m/s


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical constants, counts, bounds and seeds for one scenario.

    Defaults describe the small 2-UAV / 4-GU desk scenario. Every field can be
    overridden from a config document.
    """

    num_uavs: int = 2
    num_gus: int = 4
    area_half_extent: float = 100.0
    altitude_range: tuple[float, float] = (10.0, 100.0)
    p_total_dbm: float = 10.0
    b_total_hz: float = 30e6
    f_c_hz: float = 2e9
    n0_w_per_hz: float = 1e-17
    b_min_hz: float = 1e5
    p_min_w: float = 1e-5
    sigma_los_db: float = 1.0
    alpha: float = 2.0
    c1: float = 0.5
    c2: float = 0.5
    c3: float = 0.5
    c4: float = 0.5
    lambda_fair: float = 0.3
    t_max: int = 200
    dt_decision: float = 1.0
    uav_max_speed: float = 20.0
    gu_max_speed: float = 10.0
    gamma: float = 0.99
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "altitude_range", tuple(float(a) for a in self.altitude_range))
        self.validate()

    @property
    def p_total_w(self) -> float:
        return 10.0 ** (self.p_total_dbm / 10.0) / 1000.0

    @property
    def altitude_min(self) -> float:
        return self.altitude_range[0]

    @property
    def altitude_max(self) -> float:
        return self.altitude_range[1]

    def validate(self) -> None:
        M, N = self.num_uavs, self.num_gus
        if M < 1:
            raise ConfigError(f"num_uavs must be >= 1, got {M}")
        if N < M:
            raise ConfigError(f"num_gus ({N}) must be >= num_uavs ({M})")
        if len(self.altitude_range) != 2 or not 0.0 < self.altitude_range[0] <= self.altitude_range[1]:
            raise ConfigError(f"bad altitude_range {self.altitude_range}")
        if self.area_half_extent <= 0:
            raise ConfigError("area_half_extent must be positive")
        # sums must be exact, not approximately one
        if self.c1 + self.c2 != 1.0 or self.c3 + self.c4 != 1.0:
            raise ConfigError("mixing weights must satisfy c1+c2 == 1 and c3+c4 == 1")
        if min(self.c1, self.c2, self.c3, self.c4) < 0:
            raise ConfigError("mixing weights must be nonnegative")
        if self.b_min_hz * N > self.b_total_hz:
            raise ConfigError(f"b_min_hz*num_gus = {self.b_min_hz * N} exceeds b_total_hz = {self.b_total_hz}")
        if self.p_min_w * N > self.p_total_w:
            raise ConfigError(f"p_min_w*num_gus = {self.p_min_w * N} exceeds P_total = {self.p_total_w} W")
        if not self.gu_max_speed < self.uav_max_speed:
            raise ConfigError("gu_max_speed must be strictly below uav_max_speed")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.t_max < 1 or self.dt_decision <= 0:
            raise ConfigError("t_max must be >= 1 and dt_decision > 0")
        for name in ("f_c_hz", "n0_w_per_hz", "b_total_hz", "b_min_hz", "p_min_w"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not math.isfinite(self.p_total_dbm):
            raise ConfigError("p_total_dbm must be finite")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["altitude_range"] = list(self.altitude_range)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


PRESETS: dict[str, dict[str, Any]] = {
    "2x4": dict(num_uavs=2, num_gus=4, t_max=200),
    "2x8": dict(num_uavs=2, num_gus=8, t_max=1000),
    "3x9": dict(num_uavs=3, num_gus=9, t_max=1000),
    "4x16": dict(num_uavs=4, num_gus=16, t_max=1000),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ScenarioConfig(**{**base, **overrides})


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario document (JSON object with ScenarioConfig keys)."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return ScenarioConfig.from_dict(data)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
