"""Sequential multi-agent trust-region learner and its ablations."""

from uavmarl.trainer.config import VARIANTS, TrainerConfig
from uavmarl.trainer.envs import CommEnvAdapter, MatrixGameAdapter
from uavmarl.trainer.loop import (
    EvalReport,
    ProbeResult,
    Trainer,
    evaluate_policies,
    ne_deviation_probe,
    read_metrics,
    write_metrics,
)
from uavmarl.trainer.networks import Actor, Critic, ValueNorm
from uavmarl.trainer.rollout import RolloutBatch, collect_rollouts, estimate_advantages, gae
from uavmarl.trainer.updates import (
    AgentData,
    StepResult,
    natural_gradient_step,
    surrogate_objective,
    trust_region_step,
)

__all__ = [
    "Actor", "AgentData", "CommEnvAdapter", "Critic", "EvalReport", "MatrixGameAdapter", "ProbeResult",
    "RolloutBatch", "StepResult", "Trainer", "TrainerConfig", "VARIANTS", "ValueNorm", "collect_rollouts",
    "estimate_advantages", "evaluate_policies", "gae", "natural_gradient_step", "ne_deviation_probe",
    "read_metrics", "surrogate_objective", "trust_region_step", "write_metrics",
]
