"""Actor and critic networks plus the return normalizer used by the critics."""

from __future__ import annotations

import numpy as np

from uavmarl.autodiff import tensor as T
from uavmarl.autodiff.nn import MLP, Linear, Module, param
from uavmarl.autodiff.tensor import Tensor
from uavmarl.distributions import ActionLayout, HybridDistribution
from uavmarl.graph import NODE_FEATURES, AttentionHead, GRNEncoder


class Actor(Module):
    """Own observation -> hybrid action distribution. The velocity log-std is state independent."""

    def __init__(self, obs_dim: int, layout: ActionLayout, hidden: int, rng: np.random.Generator,
                 init_log_std: float = -0.5):
        self.layout = layout
        self.body = MLP([obs_dim, hidden, hidden, layout.head_size], rng, out_gain=0.01)
        self.log_std = param(np.full(layout.vel_dim, init_log_std))

    def __call__(self, obs) -> HybridDistribution:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        return HybridDistribution.from_head(self.body(obs), self.log_std, self.layout)


class Critic(Module):
    """State-value estimate for one agent.

    The input is the agent's own observation, optionally joined by its GRN
    embedding of the UAV-GU graph and by an attention readout over all agents
    (GRN embeddings when the graph is on, projected observations otherwise).
    """

    def __init__(self, agent: int, num_agents: int, obs_dim: int, hidden: int, rng: np.random.Generator,
                 use_graph: bool = False, use_attention: bool = False, embed_dim: int = 32,
                 attn_dim: int = 32, grn_rounds: int = 2):
        self.agent = agent
        self.num_agents = num_agents
        self.use_graph = use_graph
        self.use_attention = use_attention
        width = obs_dim
        self.grn = GRNEncoder(embed_dim, rng, rounds=grn_rounds, in_features=NODE_FEATURES) if use_graph else None
        if use_graph:
            width += embed_dim
        self.obs_enc = Linear(obs_dim, embed_dim, rng) if use_attention and not use_graph else None
        self.attn = AttentionHead(embed_dim, attn_dim, rng) if use_attention else None
        if use_attention:
            width += attn_dim
        self.head = MLP([width, hidden, hidden, 1], rng)

    @property
    def needs_graph(self) -> bool:
        return self.use_graph

    def __call__(self, obs_all, features=None, adjacency=None) -> Tensor:
        """``obs_all`` is (B, M, obs_dim); graph inputs (B, n, F) and (B, n, n). Returns (B,)."""
        obs_all = np.asarray(obs_all, dtype=float)
        B, M = obs_all.shape[0], self.num_agents
        m = self.agent
        parts: list = [obs_all[:, m]]
        if self.use_graph:
            emb = self.grn(features, adjacency)[:, :M]  # (B, M, H)
            own = emb[:, m]
            parts.append(own)
            if self.use_attention:
                H = own.shape[-1]
                parts.append(self.attn(own.reshape(B, 1, H), emb).reshape(B, -1))
        elif self.use_attention:
            z = T.tanh(self.obs_enc(obs_all))  # (B, M, H)
            parts.append(self.attn(z[:, m:m + 1], z).reshape(B, -1))
        x = T.concat(parts, axis=-1) if len(parts) > 1 else T.as_tensor(parts[0])
        return self.head(x).reshape(-1)


class ValueNorm:
    """Debiased exponential running mean/variance of critic targets."""

    def __init__(self, beta: float = 0.99, min_var: float = 1e-2):
        self.beta = beta
        self.min_var = min_var
        self.mean = 0.0
        self.mean_sq = 0.0
        self.debias = 0.0

    def update(self, x) -> None:
        x = np.asarray(x, dtype=float)
        b = self.beta
        self.mean = b * self.mean + (1 - b) * float(x.mean())
        self.mean_sq = b * self.mean_sq + (1 - b) * float(np.mean(x * x))
        self.debias = b * self.debias + (1 - b)

    def stats(self) -> tuple[float, float]:
        if self.debias == 0.0:
            return 0.0, 1.0
        mu = self.mean / self.debias
        var = max(self.mean_sq / self.debias - mu * mu, self.min_var)
        return mu, float(np.sqrt(var))

    def normalize(self, x):
        mu, sd = self.stats()
        return (np.asarray(x, dtype=float) - mu) / sd

    def denormalize(self, x):
        mu, sd = self.stats()
        return np.asarray(x, dtype=float) * sd + mu

    def state_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "mean_sq": self.mean_sq, "debias": self.debias}

    def load_state_dict(self, state) -> None:
        self.mean = float(state["mean"])
        self.mean_sq = float(state["mean_sq"])
        self.debias = float(state["debias"])
