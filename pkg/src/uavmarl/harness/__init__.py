"""Experiment orchestration, reporting and the command line."""

from uavmarl.harness.experiment import (
    ExperimentSpec,
    RunArtifacts,
    emit_reward_plot,
    emit_trajectory_plot,
    load_run_config,
    run_experiment,
    run_single,
    save_run_config,
    summarize_final_rewards,
)

__all__ = [
    "ExperimentSpec", "RunArtifacts", "emit_reward_plot", "emit_trajectory_plot", "load_run_config",
    "run_experiment", "run_single", "save_run_config", "summarize_final_rewards",
]
