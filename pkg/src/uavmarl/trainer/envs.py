"""Adapters that give the learner a uniform view of a multi-agent game."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavmarl.distributions import ActionLayout, ActionSample, HybridDistribution, squash_velocity
from uavmarl.env.config import ScenarioConfig
from uavmarl.env.core import EnvState, HybridAction, build_observation, env_reset, env_step, observation_size
from uavmarl.errors import DomainError
from uavmarl.graph import encode_topology


@dataclass
class Transition:
    next_state: object
    rewards: np.ndarray  # (M,)
    done: bool
    info: object = None


class CommEnvAdapter:
    """UAV downlink game: velocity, multi-hot pairing claims and two scheme choices per agent."""

    has_graph = True

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.num_agents = cfg.num_uavs
        self.layout = ActionLayout(vel_dim=3, n_intents=cfg.num_gus, cat_sizes=(4, 4))
        self.obs_dim = observation_size(cfg)
        self.episode_len = cfg.t_max

    def reset(self, seed: int) -> EnvState:
        return env_reset(self.cfg, seed)

    def observe(self, state: EnvState) -> np.ndarray:
        return np.stack([build_observation(state, m, self.cfg) for m in range(self.num_agents)])

    def graph(self, state: EnvState) -> tuple[np.ndarray, np.ndarray]:
        topo = encode_topology(state, state.pairing, self.cfg)
        return topo.features, topo.adjacency

    def decode(self, sample: ActionSample, dist: HybridDistribution, rng: np.random.Generator) -> HybridAction:
        """Turn one agent's raw draw into an environment action."""
        N = self.cfg.num_gus
        return HybridAction(
            velocity_cmd=squash_velocity(sample.velocity_raw[0], self.cfg.uav_max_speed),
            pairing_intent=dist.pairing_logits.data[0].copy(),
            power_scheme=int(sample.choices[0, 0]) + 1,
            bandwidth_scheme=int(sample.choices[0, 1]) + 1,
            random_proportions_p=rng.uniform(1e-3, 1.0, size=N),
            random_proportions_b=rng.uniform(1e-3, 1.0, size=N),
            pairing_claims=sample.intents[0] > 0.5,
        )

    def step(self, state: EnvState, samples, dists, rng: np.random.Generator) -> Transition:
        actions = [self.decode(s, d, rng) for s, d in zip(samples, dists)]
        out = env_step(state, actions, self.cfg)
        return Transition(out.next_state, out.rewards, out.done, out)


PRISONERS_DILEMMA = np.array([
    [[3.0, 3.0], [0.0, 5.0]],
    [[5.0, 0.0], [1.0, 1.0]],
])  # payoff[a0, a1] -> (r0, r1); action 0 cooperates, 1 defects


class MatrixGameAdapter:
    """Repeated one-shot two-player game with a constant observation."""

    has_graph = False

    def __init__(self, payoff: np.ndarray = PRISONERS_DILEMMA):
        payoff = np.asarray(payoff, dtype=float)
        if payoff.ndim != 3 or payoff.shape[2] != 2:
            raise DomainError("payoff must have shape (A0, A1, 2)")
        self.payoff = payoff
        self.num_agents = 2
        self.layout = ActionLayout(vel_dim=0, n_intents=0, cat_sizes=(payoff.shape[0],))
        if payoff.shape[0] != payoff.shape[1]:
            raise DomainError("both players need the same action count")
        self.obs_dim = 1
        self.episode_len = 1

    def reset(self, seed: int) -> int:
        return 0

    def observe(self, state) -> np.ndarray:
        return np.ones((2, 1))

    def graph(self, state):
        raise DomainError("matrix games carry no topology")

    def step(self, state, samples, dists, rng) -> Transition:
        a0, a1 = int(samples[0].choices[0, 0]), int(samples[1].choices[0, 0])
        return Transition(state + 1, self.payoff[a0, a1].copy(), True, (a0, a1))

    def pure_nash_equilibria(self) -> list[tuple[int, int]]:
        """Action pairs where neither player gains by deviating alone."""
        p = self.payoff
        out = []
        for i in range(p.shape[0]):
            for j in range(p.shape[1]):
                if p[i, j, 0] >= p[:, j, 0].max() and p[i, j, 1] >= p[i, :, 1].max():
                    out.append((i, j))
        return out
