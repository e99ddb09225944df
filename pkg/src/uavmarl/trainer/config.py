"""Trainer hyper-parameters and the variant table."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from uavmarl.errors import ConfigError

VARIANTS = ("GA-MATR", "MATR", "IPPO", "HATRPO", "GRAPH-MATR", "ATTN-MATR")

# variant -> (graph encoder in critic, attention in critic, update rule)
VARIANT_TABLE: dict[str, tuple[bool, bool, str]] = {
    "GA-MATR": (True, True, "trust_region"),
    "MATR": (False, False, "trust_region"),
    "IPPO": (False, False, "clipped"),
    "HATRPO": (False, False, "natural_gradient"),
    "GRAPH-MATR": (True, False, "trust_region"),
    "ATTN-MATR": (False, True, "trust_region"),
}

PENALTY_MODES = ("fixed", "theory")


@dataclass(frozen=True)
class TrainerConfig:
    """Knobs of the sequential trust-region learner.

    ``penalty_mode="theory"`` sets the KL penalty to ``4 gamma max|A| / (1 - gamma)^2``
    with ``max|A|`` taken over the batch; ``"fixed"`` uses ``penalty_coef``.
    """

    variant: str = "GA-MATR"
    iterations: int = 200
    kl_limit: float = 0.01
    penalty_mode: str = "fixed"
    penalty_coef: float = 1.0
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 10
    minibatches: int = 4
    backtrack_factor: float = 0.5
    backtrack_tries: int = 10
    clip_eps: float = 0.2
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    critic_epochs: int = 5
    hidden: int = 64
    embed_dim: int = 32
    attn_dim: int = 32
    grn_rounds: int = 2
    init_log_std: float = -0.5
    entropy_coef: float = 0.0
    rollout_steps: int | None = None  # None: one full episode per iteration
    eval_seeds: tuple[int, ...] = (1000, 1001, 1002, 1003)
    eval_every: int = 5
    checkpoint_every: int = 50
    cg_iters: int = 10
    cg_damping: float = 0.1
    ratio_cap: float = 50.0  # |log ratio| beyond this counts as overflow
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eval_seeds", tuple(int(s) for s in self.eval_seeds))
        self.validate()

    @property
    def uses_graph(self) -> bool:
        return VARIANT_TABLE[self.variant][0]

    @property
    def uses_attention(self) -> bool:
        return VARIANT_TABLE[self.variant][1]

    @property
    def update_rule(self) -> str:
        return VARIANT_TABLE[self.variant][2]

    def validate(self) -> None:
        if self.variant not in VARIANT_TABLE:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if not self.kl_limit > 0:
            raise ConfigError("kl_limit must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ConfigError("backtrack_factor must lie in (0, 1)")
        if self.penalty_mode not in PENALTY_MODES:
            raise ConfigError(f"penalty_mode must be one of {PENALTY_MODES}")
        if self.penalty_coef < 0:
            raise ConfigError("penalty_coef must be nonnegative")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")
        if self.penalty_mode == "theory" and self.gamma >= 1.0:
            raise ConfigError("the theory penalty needs gamma < 1")
        for name in ("iterations", "epochs", "minibatches", "backtrack_tries", "critic_epochs", "eval_every",
                     "checkpoint_every"):
            v = getattr(self, name)
            if v < (0 if name in ("iterations", "epochs", "critic_epochs") else 1):
                raise ConfigError(f"{name} out of range: {v}")
        if self.rollout_steps is not None and self.rollout_steps < 1:
            raise ConfigError("rollout_steps must be >= 1")
        if not self.eval_seeds:
            raise ConfigError("need at least one eval seed")
        if self.grn_rounds < 1:
            raise ConfigError("grn_rounds must be >= 1")
        if not math.isfinite(self.init_log_std):
            raise ConfigError("init_log_std must be finite")

    def penalty(self, advantages) -> float:
        if self.penalty_mode == "fixed":
            return self.penalty_coef
        amax = float(np.max(np.abs(advantages))) if np.size(advantages) else 0.0
        return 4.0 * self.gamma * amax / (1.0 - self.gamma) ** 2

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["eval_seeds"] = list(self.eval_seeds)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown trainer keys: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "TrainerConfig":
        return dataclasses.replace(self, **changes)
