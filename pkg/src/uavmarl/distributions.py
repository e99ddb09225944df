"""Hybrid action distribution: squashed Gaussian velocity, Bernoulli pairing, categorical schemes.

All densities are batched over a leading axis. Tensor-valued fields keep the
computation differentiable so importance ratios and KL terms can be
back-propagated into the actor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavmarl.autodiff import tensor as T
from uavmarl.autodiff.tensor import Tensor
from uavmarl.errors import DomainError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ActionLayout:
    """Sizes of the action components one agent emits."""

    vel_dim: int = 3
    n_intents: int = 4
    cat_sizes: tuple[int, ...] = (4, 4)

    @property
    def head_size(self) -> int:
        return self.vel_dim + self.n_intents + sum(self.cat_sizes)


@dataclass
class HybridDistribution:
    velocity_mean: Tensor  # (B, vel_dim)
    velocity_log_std: Tensor  # (vel_dim,) or (B, vel_dim)
    pairing_logits: Tensor  # (B, N)
    scheme_log_probs: tuple[Tensor, ...]  # each (B, K)

    @classmethod
    def from_head(cls, head: Tensor, log_std: Tensor, layout: ActionLayout) -> "HybridDistribution":
        """Split a raw (B, head_size) network output into component parameters."""
        v, n = layout.vel_dim, layout.n_intents
        cats = []
        start = v + n
        for k in layout.cat_sizes:
            cats.append(T.log_softmax(head[:, start:start + k]))
            start += k
        return cls(head[:, :v], log_std, head[:, v:v + n], tuple(cats))

    @classmethod
    def from_probs(cls, velocity_mean, velocity_log_std, pairing_probs, scheme_probs) -> "HybridDistribution":
        """Build from explicit probabilities; 0 and 1 are allowed (degenerate components)."""
        p = np.atleast_2d(np.asarray(pairing_probs, dtype=float))
        with np.errstate(divide="ignore"):
            logits = np.log(p) - np.log1p(-p)
            cats = tuple(Tensor(np.log(np.atleast_2d(np.asarray(sp, dtype=float)))) for sp in scheme_probs)
        return cls(Tensor(np.atleast_2d(velocity_mean)), Tensor(np.asarray(velocity_log_std, dtype=float)),
                   Tensor(logits), cats)

    @property
    def batch_size(self) -> int:
        return self.pairing_logits.shape[0] if self.pairing_logits.ndim == 2 else self.velocity_mean.shape[0]

    @property
    def pairing_probs(self) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh(0.5 * self.pairing_logits.data))

    @property
    def power_scheme_probs(self) -> np.ndarray:
        return np.exp(self.scheme_log_probs[0].data)

    @property
    def bandwidth_scheme_probs(self) -> np.ndarray:
        return np.exp(self.scheme_log_probs[1].data)

    def detach(self) -> "HybridDistribution":
        return HybridDistribution(self.velocity_mean.detach(), self.velocity_log_std.detach(),
                                  self.pairing_logits.detach(), tuple(c.detach() for c in self.scheme_log_probs))

    def row(self, i: int) -> "HybridDistribution":
        ls = self.velocity_log_std.data
        return HybridDistribution(
            Tensor(self.velocity_mean.data[i:i + 1]),
            Tensor(ls if ls.ndim == 1 else ls[i:i + 1]),
            Tensor(self.pairing_logits.data[i:i + 1]),
            tuple(Tensor(c.data[i:i + 1]) for c in self.scheme_log_probs),
        )


@dataclass
class ActionSample:
    """Raw draws: pre-squash velocity, 0/1 intents, 0-based categorical choices."""

    velocity_raw: np.ndarray  # (B, vel_dim)
    intents: np.ndarray  # (B, N) float 0/1
    choices: np.ndarray  # (B, n_cat) int

    def row(self, i: int) -> "ActionSample":
        return ActionSample(self.velocity_raw[i:i + 1], self.intents[i:i + 1], self.choices[i:i + 1])

    def take(self, idx) -> "ActionSample":
        return ActionSample(self.velocity_raw[idx], self.intents[idx], self.choices[idx])

    def __len__(self) -> int:
        return self.intents.shape[0]

    @staticmethod
    def stack(samples) -> "ActionSample":
        return ActionSample(np.concatenate([s.velocity_raw for s in samples]),
                            np.concatenate([s.intents for s in samples]),
                            np.concatenate([s.choices for s in samples]))


def squash_velocity(velocity_raw, max_speed: float) -> np.ndarray:
    return np.tanh(velocity_raw) * max_speed


def _std(dist: HybridDistribution) -> np.ndarray:
    return np.broadcast_to(np.exp(dist.velocity_log_std.data), dist.velocity_mean.shape)


def sample_action(dist: HybridDistribution, rng: np.random.Generator) -> ActionSample:
    """Independent draws from every component."""
    mu = dist.velocity_mean.data
    raw = mu + _std(dist) * rng.standard_normal(mu.shape)
    p = dist.pairing_probs
    intents = (rng.random(p.shape) < p).astype(float)
    choices = np.empty((p.shape[0], len(dist.scheme_log_probs)), dtype=np.int64)
    for j, lp in enumerate(dist.scheme_log_probs):
        cdf = np.cumsum(np.exp(lp.data), axis=1)
        u = rng.random((cdf.shape[0], 1)) * cdf[:, -1:]
        choices[:, j] = np.minimum((u >= cdf).sum(axis=1), cdf.shape[1] - 1)
    return ActionSample(raw, intents, choices)


def mode_action(dist: HybridDistribution) -> ActionSample:
    """Greedy action: Gaussian mean, intents thresholded at p = 0.5, argmax schemes."""
    choices = np.stack([np.argmax(lp.data, axis=1) for lp in dist.scheme_log_probs], axis=1) \
        if dist.scheme_log_probs else np.zeros((dist.batch_size, 0), dtype=np.int64)
    return ActionSample(dist.velocity_mean.data.copy(), (dist.pairing_logits.data > 0).astype(float), choices)


def _sum_last(x: Tensor) -> Tensor:
    return x.sum(axis=-1) if x.shape[-1] else Tensor(np.zeros(x.shape[:-1]))


def continuous_log_prob(dist: HybridDistribution, action: ActionSample) -> Tensor:
    """Gaussian log-density of the pre-squash draw plus the tanh change of variables."""
    u = action.velocity_raw
    if u.shape[-1] == 0:
        return Tensor(np.zeros(u.shape[0]))
    ls = dist.velocity_log_std
    z = (u - dist.velocity_mean) * T.exp(-ls)
    gauss = -0.5 * T.square(z) - ls - 0.5 * LOG_2PI
    # log(1 - tanh(u)^2), written stably
    jac = 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))
    return _sum_last(gauss) - jac.sum(axis=-1)


def discrete_log_prob(dist: HybridDistribution, action: ActionSample) -> Tensor:
    """Log-mass of the intents and scheme choices; ``-inf`` for impossible actions."""
    b = np.asarray(action.intents, dtype=float)
    B = b.shape[0]
    if b.shape[1] != dist.pairing_logits.shape[-1]:
        raise DomainError("intent vector length does not match the distribution")
    sign = 2.0 * b - 1.0
    total = _sum_last(-T.softplus(-(dist.pairing_logits * sign)))
    rows = np.arange(B)
    for j, lp in enumerate(dist.scheme_log_probs):
        total = total + lp[rows, action.choices[:, j]]
    return total


def log_prob(dist: HybridDistribution, action: ActionSample) -> Tensor:
    """Joint log-probability (B,)."""
    return continuous_log_prob(dist, action) + discrete_log_prob(dist, action)


def _log_sigmoid(x: Tensor) -> Tensor:
    return -T.softplus(-x)


def kl_divergence(p: HybridDistribution, q: HybridDistribution) -> Tensor:
    """Closed-form KL(p || q) summed over components, per batch row.

    The velocity term is the Gaussian KL before the tanh squash.
    """
    if (p.velocity_mean.shape[-1] != q.velocity_mean.shape[-1]
            or p.pairing_logits.shape[-1] != q.pairing_logits.shape[-1]
            or [c.shape[-1] for c in p.scheme_log_probs] != [c.shape[-1] for c in q.scheme_log_probs]):
        raise DomainError("distributions have different component dimensions")
    lsp, lsq = p.velocity_log_std, q.velocity_log_std
    diff = p.velocity_mean - q.velocity_mean
    # arranged so that equal log-stds cancel exactly
    gauss = (lsq - lsp) + 0.5 * (T.exp(2.0 * (lsp - lsq)) - 1.0) + 0.5 * T.square(diff) * T.exp(-2.0 * lsq)
    total = _sum_last(gauss)

    xp, xq = p.pairing_logits, q.pairing_logits
    pp = T.sigmoid(xp)
    bern = pp * (_log_sigmoid(xp) - _log_sigmoid(xq)) + (1.0 - pp) * (_log_sigmoid(-xp) - _log_sigmoid(-xq))
    total = total + _sum_last(bern)
    for lp, lq in zip(p.scheme_log_probs, q.scheme_log_probs):
        total = total + (T.exp(lp) * (lp - lq)).sum(axis=-1)
    return total


def _plogp(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def entropy(dist: HybridDistribution) -> Tensor:
    """Sum of component entropies; the velocity part ignores the tanh squash."""
    B = dist.batch_size
    per_axis = dist.velocity_log_std + 0.5 * (LOG_2PI + 1.0)
    if dist.velocity_mean.shape[-1] == 0:
        total = Tensor(np.zeros(B))
    elif per_axis.ndim == 1:
        total = per_axis.sum() * np.ones(B)
    else:
        total = per_axis.sum(axis=-1)
    x = dist.pairing_logits
    finite = np.isfinite(x.data).all() and all(np.isfinite(lp.data).all() for lp in dist.scheme_log_probs)
    if not finite:
        # degenerate components: evaluate without gradients, with 0 log 0 = 0
        p = dist.pairing_probs
        h = -(_plogp(p) + _plogp(1.0 - p)).sum(axis=-1)
        for lp in dist.scheme_log_probs:
            h = h - _plogp(np.exp(lp.data)).sum(axis=-1)
        return total + h
    pp = T.sigmoid(x)
    total = total + _sum_last(-(pp * _log_sigmoid(x) + (1.0 - pp) * _log_sigmoid(-x)))
    for lp in dist.scheme_log_probs:
        total = total - (T.exp(lp) * lp).sum(axis=-1)
    return total
