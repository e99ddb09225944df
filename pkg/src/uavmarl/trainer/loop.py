"""Training loop, greedy evaluation, unilateral-deviation probe and metric files."""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from uavmarl.autodiff.nn import load_checkpoint, save_checkpoint
from uavmarl.autodiff.optim import Adam
from uavmarl.errors import ConfigError
from uavmarl.trainer.config import TrainerConfig
from uavmarl.trainer.networks import Actor, Critic, ValueNorm
from uavmarl.trainer.rollout import RolloutBatch, collect_rollouts, estimate_advantages
from uavmarl.trainer.updates import (
    AgentData,
    StepResult,
    clipped_step,
    critic_inputs,
    fit_critic,
    natural_gradient_step,
    policy_ratio,
    trust_region_step,
)

METRIC_COLUMNS = ("iteration", "agent", "mean_episode_reward", "eval_reward", "kl", "kl_max", "surrogate_gain",
                  "accepted", "order_position", "backtracks", "excluded", "critic_loss")


@dataclass
class EvalReport:
    mean: np.ndarray  # (M,) mean greedy episode reward over seeds
    std: np.ndarray
    per_seed: np.ndarray  # (S, M)


def evaluate_policies(adapter, actors, seeds: Iterable[int]) -> EvalReport:
    """Greedy (distribution-mode) episodes, one per seed. Parameters are only read."""
    rows = []
    for s in seeds:
        b = collect_rollouts(adapter, actors, adapter.episode_len, np.random.default_rng(s), greedy=True,
                             episode_seeds=[s])
        rows.append(b.episode_returns[0])
    per_seed = np.stack(rows)
    return EvalReport(per_seed.mean(axis=0), per_seed.std(axis=0), per_seed)


class Trainer:
    """Actors, critics, optimizers and random streams of one training run."""

    def __init__(self, adapter, cfg: TrainerConfig):
        if cfg.uses_graph and not adapter.has_graph:
            raise ConfigError(f"variant {cfg.variant} needs a graph-capable environment")
        self.adapter = adapter
        self.cfg = cfg
        M = adapter.num_agents
        # separate streams keep actors and rollouts identical across critic variants
        actor_ss, critic_ss, rollout_ss, order_ss, update_ss = np.random.SeedSequence(cfg.seed).spawn(5)
        actor_rng, critic_rng = np.random.default_rng(actor_ss), np.random.default_rng(critic_ss)
        self.actors = [Actor(adapter.obs_dim, adapter.layout, cfg.hidden, actor_rng, cfg.init_log_std)
                       for _ in range(M)]
        self.critics = [Critic(m, M, adapter.obs_dim, cfg.hidden, critic_rng, cfg.uses_graph, cfg.uses_attention,
                               cfg.embed_dim, cfg.attn_dim, cfg.grn_rounds) for m in range(M)]
        self.actor_opts = [Adam(a.parameters(), lr=cfg.actor_lr, maximize=True) for a in self.actors]
        self.critic_opts = [Adam(c.parameters(), lr=cfg.critic_lr) for c in self.critics]
        self.value_norms = [ValueNorm() for _ in range(M)]
        self.rollout_rng = np.random.default_rng(rollout_ss)
        self.order_rng = np.random.default_rng(order_ss)
        self.update_rng = np.random.default_rng(update_ss)
        self.iteration = 0
        self.last_eval: np.ndarray | None = None
        self.last_order: np.ndarray | None = None

    @property
    def num_agents(self) -> int:
        return self.adapter.num_agents

    def clone(self) -> "Trainer":
        return copy.deepcopy(self)

    def attach_values(self, batch: RolloutBatch, agents: Sequence[int]) -> None:
        M = self.num_agents
        batch.values = np.zeros((batch.size, M))
        batch.last_values = np.zeros(M)
        for m in agents:
            vn = self.value_norms[m]
            batch.values[:, m] = vn.denormalize(self.critics[m](*critic_inputs(batch)).data)
            if not batch.dones[-1]:
                last = self.critics[m](batch.last_obs[None], _expand(batch.last_features), _expand(batch.last_adjacency))
                batch.last_values[m] = vn.denormalize(last.data)[0]

    def update_agent(self, m: int, data: AgentData) -> StepResult:
        rule = self.cfg.update_rule
        if rule == "clipped":
            return clipped_step(self.actors[m], self.actor_opts[m], data, self.cfg, self.update_rng)
        if rule == "natural_gradient":
            return natural_gradient_step(self.actors[m], data, self.cfg)
        return trust_region_step(self.actors[m], self.actor_opts[m], data, self.cfg, self.update_rng)

    def train_iteration(self, agents: Sequence[int] | None = None, evaluate: bool | None = None) -> list[dict]:
        """Collect, estimate advantages, update actors (sequentially unless clipped), fit critics.

        ``agents`` restricts which agents learn; the rest act with frozen parameters.
        """
        cfg, M = self.cfg, self.num_agents
        learners = list(range(M)) if agents is None else sorted(agents)
        steps = cfg.rollout_steps or self.adapter.episode_len
        batch = collect_rollouts(self.adapter, self.actors, steps, self.rollout_rng, with_graph=cfg.uses_graph)
        self.attach_values(batch, learners)
        estimate_advantages(batch, cfg.gamma, cfg.gae_lambda)

        if cfg.update_rule == "clipped":
            order = np.array(learners)
        else:
            order = self.order_rng.permutation(learners)
        self.last_order = order
        results: dict[int, StepResult] = {}
        pred = np.ones(batch.size)
        for m in order:
            # independent learners never see predecessor ratios
            data = AgentData.from_batch(batch, m, None if cfg.update_rule == "clipped" else pred)
            results[m] = self.update_agent(m, data)
            if cfg.update_rule != "clipped":
                pred = pred * policy_ratio(self.actors[m], data)

        losses = {}
        for m in learners:
            vn = self.value_norms[m]
            vn.update(batch.returns[:, m])
            losses[m] = fit_critic(self.critics[m], self.critic_opts[m], batch, vn.normalize(batch.returns[:, m]),
                                   cfg.critic_epochs, cfg.minibatches, self.update_rng)

        it = self.iteration
        if evaluate is None:
            evaluate = it % cfg.eval_every == 0 or it == cfg.iterations - 1
        ev = evaluate_policies(self.adapter, self.actors, cfg.eval_seeds).mean if evaluate else None
        if ev is not None:
            self.last_eval = ev
        ep = batch.mean_episode_reward()
        pos = {int(m): i for i, m in enumerate(order)}
        records = []
        for m in range(M):
            r = results.get(m)
            records.append({
                "iteration": it,
                "agent": m,
                "mean_episode_reward": float(ep[m]),
                "eval_reward": float(ev[m]) if ev is not None else math.nan,
                "kl": r.kl if r else math.nan,
                "kl_max": r.kl_max if r else math.nan,
                "surrogate_gain": r.surrogate_gain if r else math.nan,
                "accepted": int(r.accepted) if r else 0,
                "order_position": pos.get(m, -1),
                "backtracks": r.tries if r else 0,
                "excluded": r.excluded if r else 0,
                "critic_loss": losses.get(m, math.nan),
            })
        self.iteration += 1
        return records

    def train(self, iterations: int | None = None, metrics_path: str | Path | None = None,
              checkpoint_dir: str | Path | None = None) -> list[dict]:
        n = self.cfg.iterations if iterations is None else iterations
        writer = MetricsWriter(metrics_path) if metrics_path else None
        out = []
        try:
            for _ in range(n):
                recs = self.train_iteration()
                out.extend(recs)
                if writer:
                    writer.write(recs)
                if checkpoint_dir and self.iteration % self.cfg.checkpoint_every == 0:
                    self.save(Path(checkpoint_dir) / f"iter_{self.iteration:05d}.npz")
        finally:
            if writer:
                writer.close()
        return out

    def modules(self) -> dict:
        mods = {f"actor{m}": a for m, a in enumerate(self.actors)}
        mods.update({f"critic{m}": c for m, c in enumerate(self.critics)})
        return mods

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, self.modules())

    def load(self, path: str | Path) -> None:
        load_checkpoint(path, self.modules())

    def evaluate(self, seeds: Iterable[int] | None = None) -> EvalReport:
        return evaluate_policies(self.adapter, self.actors, self.cfg.eval_seeds if seeds is None else seeds)


def _expand(x):
    return None if x is None else np.asarray(x)[None]


# -- deviation probe -----------------------------------------------------------

@dataclass
class ProbeResult:
    agent: int
    improvement: float  # (best deviating return - original) / |original|
    original: float
    best: float
    history: list[float]


def ne_deviation_probe(trainer: Trainer, agent: int, budget: int, seeds: Iterable[int] | None = None) -> ProbeResult:
    """Retrain only ``agent`` against frozen partners on a copy of ``trainer``.

    The original trainer is never modified. The best greedy return seen over the
    budget (including the starting point) is compared with the starting return.
    """
    if not 0 <= agent < trainer.num_agents:
        raise IndexError(f"agent {agent} out of range")
    seeds = tuple(trainer.cfg.eval_seeds if seeds is None else seeds)
    original = float(evaluate_policies(trainer.adapter, trainer.actors, seeds).mean[agent])
    if budget <= 0:
        return ProbeResult(agent, 0.0, original, original, [])
    dev = trainer.clone()
    history, best = [], original
    for _ in range(budget):
        dev.train_iteration(agents=[agent], evaluate=False)
        r = float(evaluate_policies(dev.adapter, dev.actors, seeds).mean[agent])
        history.append(r)
        best = max(best, r)
    denom = abs(original) if original != 0 else 1.0
    return ProbeResult(agent, (best - original) / denom, original, best, history)


# -- metric files --------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class MetricsWriter:
    """Append metric records to a CSV file, flushing after every iteration."""

    def __init__(self, path: str | Path):
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh)
        self.w.writerow(METRIC_COLUMNS)

    def write(self, records: Iterable[dict]) -> None:
        for r in records:
            self.w.writerow([_fmt(r[c]) for c in METRIC_COLUMNS])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def write_metrics(records: Iterable[dict], path: str | Path) -> None:
    w = MetricsWriter(path)
    try:
        w.write(records)
    finally:
        w.close()


def read_metrics(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no metric records")
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float)
    return {name: data[:, i] for i, name in enumerate(header)}
