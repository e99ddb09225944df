"""Per-agent policy updates: penalized trust-region ascent, natural gradient, clipped ratio, critic fit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from uavmarl.autodiff import tensor as T
from uavmarl.autodiff.nn import Module
from uavmarl.autodiff.optim import Adam
from uavmarl.autodiff.tensor import Tensor
from uavmarl.distributions import HybridDistribution, entropy, kl_divergence, log_prob
from uavmarl.errors import DomainError
from uavmarl.trainer.config import TrainerConfig
from uavmarl.trainer.rollout import RolloutBatch

Objective = Callable[[np.ndarray | None], Tensor]


@dataclass
class StepResult:
    accepted: bool
    kl: float  # batch-mean KL(old || new) of the kept policy
    kl_max: float
    surrogate_gain: float
    tries: int = 0
    excluded: int = 0


# -- surrogate -----------------------------------------------------------------

@dataclass
class AgentData:
    """Everything one agent's update reads from the batch."""

    obs: np.ndarray  # (T, D)
    actions: object  # ActionSample with T rows
    logp: np.ndarray  # (T,)
    advantages: np.ndarray  # (T,)
    pred_ratio: np.ndarray  # (T,) compound ratio of already-updated agents

    @classmethod
    def from_batch(cls, batch: RolloutBatch, agent: int, pred_ratio=None) -> "AgentData":
        n = batch.size
        pr = np.ones(n) if pred_ratio is None else np.asarray(pred_ratio, dtype=float)
        return cls(batch.obs[:, agent], batch.actions[agent], batch.logp[:, agent], batch.advantages[:, agent], pr)

    @property
    def size(self) -> int:
        return self.logp.shape[0]


def overflow_mask(log_ratio: np.ndarray, pred_ratio: np.ndarray, cap: float) -> np.ndarray:
    """True where a sample's ratio is unusable (non-finite or beyond ``exp(cap)``)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pred = np.log(pred_ratio)
    return ~np.isfinite(log_ratio) | ~np.isfinite(log_pred) | (np.abs(log_ratio) > cap) | (np.abs(log_pred) > cap)


def surrogate_objective(actor, data: AgentData, idx=None, ratio_cap: float = 50.0) -> tuple[Tensor, int]:
    """Mean of predecessor ratio x own ratio x advantage over the kept samples.

    Returns the objective and the number of samples excluded for ratio overflow.
    """
    idx = np.arange(data.size) if idx is None else np.asarray(idx)
    dist = actor(data.obs[idx])
    lr = log_prob(dist, data.actions.take(idx)) - data.logp[idx]
    bad = overflow_mask(lr.data, data.pred_ratio[idx], ratio_cap)
    keep = np.nonzero(~bad)[0]
    if keep.size == 0:
        return Tensor(np.zeros(())), int(bad.sum())
    w = data.pred_ratio[idx][keep] * data.advantages[idx][keep]
    obj = (T.exp(lr[keep]) * w).sum() * (1.0 / keep.size)
    return obj, int(bad.sum())


def policy_ratio(actor, data: AgentData) -> np.ndarray:
    """Updated-vs-behaviour probability ratio per sample (no gradient)."""
    lp = log_prob(actor(data.obs), data.actions).data
    with np.errstate(over="ignore"):
        return np.exp(lp - data.logp)


def kl_to(old: HybridDistribution, actor, obs, idx=None) -> Tensor:
    """Per-sample KL(old || actor) on the selected rows."""
    if idx is None:
        return kl_divergence(old, actor(obs))
    return kl_divergence(_rows(old, idx), actor(obs[idx]))


def _rows(d: HybridDistribution, idx) -> HybridDistribution:
    ls = d.velocity_log_std.data
    return HybridDistribution(Tensor(d.velocity_mean.data[idx]), Tensor(ls if ls.ndim == 1 else ls[idx]),
                              Tensor(d.pairing_logits.data[idx]), tuple(Tensor(c.data[idx]) for c in d.scheme_log_probs))


# -- generic ascent + backtracking ---------------------------------------------

def penalized_ascent(module: Module, optimizer: Adam, objective: Objective, n: int, epochs: int,
                     minibatches: int, rng: np.random.Generator) -> bool:
    """Adam ascent on ``objective(idx)`` over shuffled minibatches. False on a non-finite value."""
    params = module.parameters()
    for _ in range(epochs):
        perm = rng.permutation(n)
        for chunk in np.array_split(perm, minibatches):
            if chunk.size == 0:
                continue
            val = objective(chunk)
            if not np.isfinite(val.data).all():
                return False
            try:
                optimizer.step(T.grad(val, params))
            except DomainError:
                return False
    return True


def backtrack(module: Module, theta_old: np.ndarray, direction: np.ndarray, check, factor: float,
              tries: int) -> tuple[bool, int, tuple]:
    """Shrink ``direction`` until ``check()`` accepts; restore ``theta_old`` when every try fails.

    ``check`` evaluates the module at its current parameters and returns ``(ok, *stats)``.
    """
    scale = 1.0
    for k in range(tries):
        module.set_flat(theta_old + scale * direction)
        ok, *stats = check()
        if ok:
            return True, k + 1, tuple(stats)
        scale *= factor
    module.set_flat(theta_old)
    return False, tries, ()


def _kl_stats(old, actor, obs) -> tuple[float, float]:
    kl = kl_to(old, actor, obs).data
    return float(kl.mean()), float(kl.max())


def _acceptance_check(actor, data: AgentData, old, base: float, cfg: TrainerConfig):
    def check():
        kl_mean, kl_max = _kl_stats(old, actor, data.obs)
        obj, _ = surrogate_objective(actor, data, ratio_cap=cfg.ratio_cap)
        gain = float(obj.data) - base
        ok = np.isfinite(kl_mean) and np.isfinite(gain) and kl_mean <= cfg.kl_limit and gain >= 0.0
        return ok, kl_mean, kl_max, gain
    return check


def trust_region_step(actor, optimizer: Adam, data: AgentData, cfg: TrainerConfig,
                      rng: np.random.Generator) -> StepResult:
    """Penalized ascent on ``L - C * KL`` followed by KL/gain backtracking."""
    old = actor(data.obs).detach()
    theta_old = actor.get_flat()
    base_obj, excluded = surrogate_objective(actor, data, ratio_cap=cfg.ratio_cap)
    base = float(base_obj.data)
    C = cfg.penalty(data.advantages)
    if not np.any(data.pred_ratio * data.advantages) and not cfg.entropy_coef:
        # constant surrogate: L - C*KL peaks at the old policy; Adam would only amplify roundoff
        return StepResult(True, 0.0, 0.0, 0.0, 0, excluded)

    def objective(idx):
        obj, _ = surrogate_objective(actor, data, idx, cfg.ratio_cap)
        val = obj - C * kl_to(old, actor, data.obs, idx).mean() if C else obj
        if cfg.entropy_coef:
            val = val + cfg.entropy_coef * entropy(actor(data.obs[idx])).mean()
        return val

    if not penalized_ascent(actor, optimizer, objective, data.size, cfg.epochs, cfg.minibatches, rng):
        actor.set_flat(theta_old)
        return StepResult(False, 0.0, 0.0, 0.0, 0, excluded)
    direction = actor.get_flat() - theta_old
    ok, tries, stats = backtrack(actor, theta_old, direction, _acceptance_check(actor, data, old, base, cfg),
                                 cfg.backtrack_factor, cfg.backtrack_tries)
    if not ok:
        return StepResult(False, 0.0, 0.0, 0.0, tries, excluded)
    kl_mean, kl_max, gain = stats
    return StepResult(True, kl_mean, kl_max, gain, tries, excluded)


# -- natural gradient ----------------------------------------------------------

def conjugate_gradient(Avp, b: np.ndarray, iters: int = 10, tol: float = 1e-10) -> np.ndarray:
    """Approximately solve ``A x = b`` for symmetric positive definite ``A``."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(iters):
        if rr < tol:
            break
        Ap = Avp(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def _flat_grad(val: Tensor, params) -> np.ndarray:
    return np.concatenate([g.ravel() for g in T.grad(val, params)])


def fisher_vector_product(actor, old, obs, theta_old: np.ndarray, v: np.ndarray, damping: float) -> np.ndarray:
    """Hessian of the mean KL at ``theta_old`` times ``v`` by central differences of its gradient."""
    params = actor.parameters()
    nv = np.linalg.norm(v)
    if nv == 0:
        return np.zeros_like(v)
    h = 1e-4 / nv
    actor.set_flat(theta_old + h * v)
    gp = _flat_grad(kl_to(old, actor, obs).mean(), params)
    actor.set_flat(theta_old - h * v)
    gm = _flat_grad(kl_to(old, actor, obs).mean(), params)
    actor.set_flat(theta_old)
    return (gp - gm) / (2 * h) + damping * v


def natural_gradient_step(actor, data: AgentData, cfg: TrainerConfig) -> StepResult:
    """Conjugate-gradient natural step scaled to the KL limit, then backtracking."""
    old = actor(data.obs).detach()
    theta_old = actor.get_flat()
    obj, excluded = surrogate_objective(actor, data, ratio_cap=cfg.ratio_cap)
    base = float(obj.data)
    g = _flat_grad(obj, actor.parameters())
    if not np.all(np.isfinite(g)) or not np.any(g):
        return StepResult(False, 0.0, 0.0, 0.0, 0, excluded)
    x = conjugate_gradient(lambda v: fisher_vector_product(actor, old, data.obs, theta_old, v, cfg.cg_damping),
                           g, cfg.cg_iters)
    shs = float(x @ fisher_vector_product(actor, old, data.obs, theta_old, x, cfg.cg_damping))
    if not np.isfinite(shs) or shs <= 0:
        return StepResult(False, 0.0, 0.0, 0.0, 0, excluded)
    direction = np.sqrt(2.0 * cfg.kl_limit / shs) * x
    ok, tries, stats = backtrack(actor, theta_old, direction, _acceptance_check(actor, data, old, base, cfg),
                                 cfg.backtrack_factor, cfg.backtrack_tries)
    if not ok:
        return StepResult(False, 0.0, 0.0, 0.0, tries, excluded)
    kl_mean, kl_max, gain = stats
    return StepResult(True, kl_mean, kl_max, gain, tries, excluded)


# -- clipped ratio -------------------------------------------------------------

def clipped_objective(actor, data: AgentData, idx, eps: float) -> Tensor:
    """Mean of ``min(r A, clip(r, 1-eps, 1+eps) A)``; clipped terms carry no gradient."""
    dist = actor(data.obs[idx])
    r = T.exp(log_prob(dist, data.actions.take(idx)) - data.logp[idx])
    A = data.advantages[idx]
    rc = np.clip(r.data, 1.0 - eps, 1.0 + eps)
    use_clip = rc * A < r.data * A
    live = (r * (A * ~use_clip)).sum()
    return (live + float(np.sum(rc * A * use_clip))) * (1.0 / len(idx))


def clipped_step(actor, optimizer: Adam, data: AgentData, cfg: TrainerConfig, rng: np.random.Generator) -> StepResult:
    """Independent clipped-ratio update; no predecessor ratios and no backtracking."""
    old = actor(data.obs).detach()
    theta_old = actor.get_flat()
    base = float(surrogate_objective(actor, data, ratio_cap=cfg.ratio_cap)[0].data)
    ok = penalized_ascent(actor, optimizer, lambda idx: clipped_objective(actor, data, idx, cfg.clip_eps),
                          data.size, cfg.epochs, cfg.minibatches, rng)
    if not ok:
        actor.set_flat(theta_old)
        return StepResult(False, 0.0, 0.0, 0.0)
    kl_mean, kl_max = _kl_stats(old, actor, data.obs)
    obj, excluded = surrogate_objective(actor, data, ratio_cap=cfg.ratio_cap)
    return StepResult(True, kl_mean, kl_max, float(obj.data) - base, 1, excluded)


# -- critic --------------------------------------------------------------------

def critic_inputs(batch: RolloutBatch, idx=None):
    sel = slice(None) if idx is None else idx
    f = None if batch.features is None else batch.features[sel]
    a = None if batch.adjacency is None else batch.adjacency[sel]
    return batch.obs[sel], f, a


def fit_critic(critic, optimizer: Adam, batch: RolloutBatch, targets: np.ndarray, epochs: int, minibatches: int,
               rng: np.random.Generator) -> float:
    """Squared-error regression of ``critic`` onto ``targets`` (already normalized). Returns the last loss."""
    params = critic.parameters()
    loss_val = float("nan")
    for _ in range(epochs):
        perm = rng.permutation(batch.size)
        for chunk in np.array_split(perm, minibatches):
            if chunk.size == 0:
                continue
            pred = critic(*critic_inputs(batch, chunk))
            loss = T.square(pred - targets[chunk]).mean()
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise DomainError("critic loss diverged")
            optimizer.step(T.grad(loss, params))
    return loss_val
