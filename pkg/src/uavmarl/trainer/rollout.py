"""On-policy data collection and generalized advantage estimation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from uavmarl.autodiff.tensor import no_grad
from uavmarl.distributions import ActionSample, log_prob, mode_action, sample_action
from uavmarl.errors import DomainError


@dataclass
class RolloutBatch:
    obs: np.ndarray  # (T, M, D)
    actions: list[ActionSample]  # per agent, T rows each
    logp: np.ndarray  # (T, M) behaviour log-probs recorded while acting
    rewards: np.ndarray  # (T, M)
    dones: np.ndarray  # (T,) episode ended after this step
    features: np.ndarray | None = None  # (T, n, F)
    adjacency: np.ndarray | None = None  # (T, n, n)
    last_obs: np.ndarray | None = None  # (M, D) observation after the final step
    last_features: np.ndarray | None = None
    last_adjacency: np.ndarray | None = None
    episode_returns: np.ndarray | None = None  # (E, M) undiscounted episode sums
    values: np.ndarray | None = None  # (T, M)
    last_values: np.ndarray | None = None  # (M,)
    advantages: np.ndarray | None = None  # (T, M) normalized per agent
    raw_advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    transitions: list = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_agents(self) -> int:
        return self.rewards.shape[1]

    def mean_episode_reward(self) -> np.ndarray:
        return self.episode_returns.mean(axis=0)


def collect_rollouts(adapter, actors, steps: int, rng: np.random.Generator, greedy: bool = False,
                     episode_seeds=None, keep_transitions: bool = False, with_graph: bool = False) -> RolloutBatch:
    """Run the policies for ``steps`` decisions, resetting at episode ends.

    Greedy runs act with distribution modes and record zero log-probs.
    ``with_graph`` also stores the topology features the graph critics read.

    Episode seeds come from ``episode_seeds`` when given, else from ``rng``.
    Sampling noise and the random allocation proportions are drawn from ``rng``.
    """
    M = adapter.num_agents
    if len(actors) != M:
        raise DomainError(f"{len(actors)} policies for {M} agents")
    seeds = iter(episode_seeds) if episode_seeds is not None else None

    def next_seed():
        if seeds is not None:
            return int(next(seeds))
        return int(rng.integers(0, 2**31 - 1))

    use_graph = with_graph
    if use_graph and not adapter.has_graph:
        raise DomainError("environment provides no topology")
    obs_buf, feat_buf, adj_buf, logp_buf, rew_buf, done_buf = [], [], [], [], [], []
    act_buf: list[list[ActionSample]] = [[] for _ in range(M)]
    transitions = []
    ep_returns, running = [], np.zeros(M)

    state = None
    for _ in range(steps):
        if state is None:
            state = adapter.reset(next_seed())
        obs = adapter.observe(state)
        if not np.all(np.isfinite(obs)):
            raise DomainError(f"non-finite observation at t={getattr(state, 't', '?')}")
        if use_graph:
            f, a = adapter.graph(state)
            feat_buf.append(f)
            adj_buf.append(a)
        samples, dists, lps = [], [], np.zeros(M)
        with no_grad():
            for m, actor in enumerate(actors):
                d = actor(obs[m])
                if greedy:
                    s = mode_action(d)
                else:
                    s = sample_action(d, rng)
                    lps[m] = log_prob(d, s).data[0]
                samples.append(s)
                dists.append(d)
                act_buf[m].append(s)
        tr = adapter.step(state, samples, dists, rng)
        if not np.all(np.isfinite(tr.rewards)):
            raise DomainError(f"non-finite reward {tr.rewards}")
        if keep_transitions:
            transitions.append(tr.info)
        obs_buf.append(obs)
        logp_buf.append(lps)
        rew_buf.append(np.asarray(tr.rewards, dtype=float))
        done_buf.append(bool(tr.done))
        running += tr.rewards
        if tr.done:
            ep_returns.append(running.copy())
            running = np.zeros(M)
            state = None
        else:
            state = tr.next_state

    if not ep_returns:
        ep_returns.append(running.copy())
    batch = RolloutBatch(
        obs=np.stack(obs_buf),
        actions=[ActionSample.stack(a) for a in act_buf],
        logp=np.stack(logp_buf),
        rewards=np.stack(rew_buf),
        dones=np.array(done_buf),
        episode_returns=np.stack(ep_returns),
        transitions=transitions,
    )
    if use_graph:
        batch.features, batch.adjacency = np.stack(feat_buf), np.stack(adj_buf)
    # after a terminal step the bootstrap inputs are placeholders; their value is masked out
    if state is None:
        batch.last_obs = np.zeros_like(obs_buf[-1])
        if use_graph:
            batch.last_features, batch.last_adjacency = np.zeros_like(feat_buf[-1]), np.zeros_like(adj_buf[-1])
    else:
        batch.last_obs = adapter.observe(state)
        if use_graph:
            batch.last_features, batch.last_adjacency = adapter.graph(state)
    return batch


def gae(rewards, values, dones, last_value: float, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates for one agent's (T,) sequences."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    T_ = rewards.shape[0]
    adv = np.zeros(T_)
    next_v, next_a = float(last_value), 0.0
    for t in range(T_ - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_v * live - values[t]
        next_a = delta + gamma * lam * live * next_a
        adv[t] = next_a
        next_v = values[t]
    return adv


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero mean and unit variance along axis 0; constant columns map to zero."""
    adv = np.asarray(adv, dtype=float)
    centered = adv - adv.mean(axis=0)
    sd = adv.std(axis=0)
    return np.where(sd > 1e-12, centered / np.where(sd > 1e-12, sd, 1.0), 0.0)


def estimate_advantages(batch: RolloutBatch, gamma: float, gae_lambda: float) -> RolloutBatch:
    if batch.values is None or batch.last_values is None:
        raise DomainError("batch has no value estimates")
    M = batch.num_agents
    raw = np.stack([gae(batch.rewards[:, m], batch.values[:, m], batch.dones, batch.last_values[m],
                        gamma, gae_lambda) for m in range(M)], axis=1)
    batch.raw_advantages = raw
    batch.returns = raw + batch.values
    batch.advantages = normalize_advantages(raw)
    return batch
