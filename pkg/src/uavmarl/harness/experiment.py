"""Seeded multi-run experiments and the artifacts they leave on disk."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from uavmarl.env.config import ScenarioConfig, preset
from uavmarl.env.core import read_trace, write_trace
from uavmarl.errors import ConfigError, DomainError
from uavmarl.harness.plots import reward_curves, reward_series, save_svg, trajectory_figure
from uavmarl.trainer.config import VARIANTS, TrainerConfig
from uavmarl.trainer.envs import CommEnvAdapter
from uavmarl.trainer.loop import Trainer, ne_deviation_probe, read_metrics
from uavmarl.trainer.rollout import collect_rollouts

OUT_ENV = "UAVMARL_OUT"
DEFAULT_OUT = "runs"


def output_root(cli_value: str | None = None) -> Path:
    """``--out`` wins, then the ``UAVMARL_OUT`` environment variable, then ``./runs``."""
    return Path(cli_value or os.environ.get(OUT_ENV) or DEFAULT_OUT)


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    variants: Sequence[str]
    seeds: Sequence[int]
    iterations: int
    out_dir: Path
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    probe_budget: int = 0
    window: int = 10
    last_k: int = 25

    def validate(self) -> None:
        if not self.variants:
            raise ConfigError("need at least one variant")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown variants {bad}; choose from {', '.join(VARIANTS)}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        out = Path(self.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")


@dataclass
class RunArtifacts:
    run_dir: Path
    metrics: Path
    trajectory: Path
    config: Path
    checkpoints: list[Path]
    plots: list[Path]
    probes: Path | None = None


# -- config snapshots ----------------------------------------------------------

def save_run_config(path: str | Path, scenario: ScenarioConfig, trainer: TrainerConfig) -> None:
    with open(path, "w") as fh:
        json.dump({"scenario": scenario.to_dict(), "trainer": trainer.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_run_config(path: str | Path) -> tuple[ScenarioConfig, TrainerConfig | None]:
    """Read a run snapshot, or a bare scenario document (trainer then stays unset)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    if "scenario" in data:
        extra = sorted(set(data) - {"scenario", "trainer"})
        if extra:
            raise ConfigError(f"{path}: unknown sections {extra}")
        trainer = TrainerConfig.from_dict(data["trainer"]) if "trainer" in data else None
        return ScenarioConfig.from_dict(data["scenario"]), trainer
    return ScenarioConfig.from_dict(data), None


def resolve_scenario(preset_name: str | None, config_path: str | None) -> tuple[ScenarioConfig, TrainerConfig | None]:
    if config_path:
        return load_run_config(config_path)
    return preset(preset_name or "2x4"), None


# -- running -------------------------------------------------------------------

def run_single(scenario: ScenarioConfig, trainer_cfg: TrainerConfig, run_dir: str | Path, probe_budget: int = 0,
               window: int = 10, last_k: int = 25) -> RunArtifacts:
    """Train one (variant, seed) pair and write all of its artifacts into ``run_dir``."""
    run_dir = Path(run_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    config = run_dir / "config.json"
    save_run_config(config, scenario, trainer_cfg)
    adapter = CommEnvAdapter(scenario)
    tr = Trainer(adapter, trainer_cfg)
    metrics = run_dir / "metrics.csv"
    tr.train(metrics_path=metrics, checkpoint_dir=run_dir / "checkpoints")
    final_ckpt = run_dir / "checkpoints" / "final.npz"
    tr.save(final_ckpt)

    trajectory = run_dir / "trajectory.csv"
    seed = trainer_cfg.eval_seeds[0]
    ep = collect_rollouts(adapter, tr.actors, adapter.episode_len, np.random.default_rng(seed), greedy=True,
                          episode_seeds=[seed], keep_transitions=True)
    write_trace(ep.transitions, scenario, trajectory)

    plots = [emit_reward_plot([metrics], run_dir / "plots" / "rewards.svg", window, labels=[trainer_cfg.variant])]
    if scenario.t_max >= last_k:
        plots.append(emit_trajectory_plot(trajectory, run_dir / "plots" / "trajectory.svg", last_k))

    probes = None
    if probe_budget > 0:
        probes = run_dir / "probes.csv"
        with open(probes, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["agent", "budget", "improvement", "original", "best"])
            for m in range(scenario.num_uavs):
                r = ne_deviation_probe(tr, m, probe_budget)
                w.writerow([m, probe_budget, repr(r.improvement), repr(r.original), repr(r.best)])
    ckpts = sorted((run_dir / "checkpoints").glob("*.npz"))
    return RunArtifacts(run_dir, metrics, trajectory, config, ckpts, plots, probes)


def run_experiment(spec: ExperimentSpec) -> list[RunArtifacts]:
    """Every (variant, seed) combination, then a cross-run reward plot and summary table."""
    spec.validate()
    out = Path(spec.out_dir)
    arts = []
    for variant in spec.variants:
        for seed in spec.seeds:
            cfg = spec.trainer.replace(variant=variant, seed=int(seed), iterations=spec.iterations)
            arts.append(run_single(spec.scenario, cfg, out / variant / f"seed_{seed}", spec.probe_budget,
                                   spec.window, spec.last_k))
    files = [a.metrics for a in arts]
    emit_reward_plot(files, out / "rewards.svg", spec.window)
    summarize_final_rewards(files, out / "summary.csv")
    return arts


# -- reporting -----------------------------------------------------------------

def variant_of(metrics_file: str | Path) -> str:
    """Variant recorded in the snapshot beside a metrics file, else the grandparent directory name."""
    p = Path(metrics_file)
    snap = p.parent / "config.json"
    if snap.exists():
        _, tcfg = load_run_config(snap)
        if tcfg is not None:
            return tcfg.variant
    return p.parent.parent.name or p.stem


def _group(metrics_files: Iterable[str | Path], labels: Sequence[str] | None):
    files = [Path(f) for f in metrics_files]
    if not files:
        raise DomainError("need at least one metrics file")
    if labels is not None and len(labels) != len(files):
        raise DomainError("one label per metrics file expected")
    groups: dict[str, list] = {}
    for i, f in enumerate(files):
        label = labels[i] if labels is not None else variant_of(f)
        groups.setdefault(label, []).append(read_metrics(f))
    return groups


def emit_reward_plot(metrics_files, out_path, window: int = 10, labels: Sequence[str] | None = None) -> Path:
    """One smoothed curve per variant per agent, averaged over the files sharing a variant."""
    series = reward_series(_group(metrics_files, labels), window)
    return save_svg(reward_curves(series), out_path)


def emit_trajectory_plot(trajectory_file, out_path, last_k: int = 25) -> Path:
    return save_svg(trajectory_figure(read_trace(trajectory_file), last_k), out_path)


def final_rewards(metrics: dict[str, np.ndarray]) -> np.ndarray:
    """Per-agent evaluated reward at the last iteration that has one."""
    M = int(metrics["agent"].max()) + 1
    out = np.empty(M)
    for m in range(M):
        ev = metrics["eval_reward"][metrics["agent"] == m]
        ok = np.nonzero(np.isfinite(ev))[0]
        if ok.size == 0:
            raise DomainError(f"agent {m} has no evaluated reward")
        out[m] = ev[ok[-1]]
    return out


def summarize_final_rewards(metrics_files, out_path, labels: Sequence[str] | None = None) -> Path:
    """Delimited table: one row per variant, the median final reward over seeds for each agent."""
    groups = _group(metrics_files, labels)
    rows = {}
    for label, runs in groups.items():
        finals = np.stack([final_rewards(r) for r in runs])
        rows[label] = np.median(finals, axis=0)
    M = max(len(v) for v in rows.values())
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant"] + [f"uav{m}" for m in range(M)])
        for label, vals in rows.items():
            w.writerow([label] + [repr(float(v)) for v in vals])
    return out_path
