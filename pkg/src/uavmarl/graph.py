"""UAV-GU topology graphs, GAT edge weights, GRN message passing, dot-product attention."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uavmarl.autodiff import tensor as T
from uavmarl.autodiff.nn import Linear, Module, glorot, param
from uavmarl.autodiff.tensor import Tensor
from uavmarl.env.core import EnvState, scale_uav_pos
from uavmarl.env.pairing import PairingAssignment
from uavmarl.errors import DomainError

NODE_FEATURES = 5  # x, y, z, is_uav, degree
GAT_SLOPE = 0.2
_NEG = -1e30


@dataclass(frozen=True)
class GraphTopology:
    """Undirected graph with UAV nodes ``0..M-1`` followed by GU nodes."""

    features: np.ndarray  # (M+N, NODE_FEATURES)
    adjacency: np.ndarray  # (M+N, M+N) symmetric 0/1, zero diagonal
    num_uavs: int

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))


def adjacency_from_edges(num_nodes: int, edges) -> np.ndarray:
    adj = np.zeros((num_nodes, num_nodes))
    for i, j in edges:
        if i == j:
            raise DomainError("self loops are not part of the topology")
        adj[i, j] = adj[j, i] = 1.0
    return adj


def encode_topology(state: EnvState, pairing: PairingAssignment, cfg) -> GraphTopology:
    """Nodes carry scaled position, a UAV flag and normalized degree.

    Edges: every UAV-UAV pair plus UAV-GU pairs with ``sigma == 1``.
    Degree is divided by ``M + N - 1`` so it stays in [0, 1].
    """
    sigma = np.asarray(pairing.sigma)
    M, N = sigma.shape
    n = M + N
    adj = np.zeros((n, n))
    adj[:M, :M] = 1.0 - np.eye(M)
    adj[:M, M:] = sigma
    adj[M:, :M] = sigma.T
    feats = np.zeros((n, NODE_FEATURES))
    feats[:M, :3] = scale_uav_pos(state.uav_pos, cfg)
    feats[M:, :2] = state.gu_pos[:, :2] / cfg.area_half_extent
    feats[:M, 3] = 1.0
    feats[:, 4] = adj.sum(axis=1) / max(n - 1, 1)
    return GraphTopology(feats, adj, M)


# -- attention primitives -------------------------------------------------------

def scaled_dot_attention(q, k, v) -> Tensor:
    """``softmax(q k^T / sqrt(d_k)) v`` with the softmax taken per query row."""
    q, k, v = T.as_tensor(q), T.as_tensor(k), T.as_tensor(v)
    dk = q.shape[-1]
    if dk == 0:
        raise DomainError("key dimension d_k must be positive")
    if k.shape[-1] != dk:
        raise DomainError(f"query/key widths differ: {dk} vs {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise DomainError("keys and values need the same number of rows")
    scores = T.matmul(q, k.T) * (1.0 / np.sqrt(dk))
    return T.matmul(T.softmax(scores), v)


def attention_weights(q, k) -> np.ndarray:
    q, k = np.asarray(q, float), np.asarray(k, float)
    s = q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1])
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def gat_edge_weights(h_i, h_neighbors, W, a, slope: float = GAT_SLOPE) -> Tensor:
    """Normalized GAT weights of one node over its neighbourhood.

    ``h_i`` is (F,), ``h_neighbors`` (K, F), ``W`` (F, H) and ``a`` (2H,).
    """
    h_i, h_nb, W, a = (T.as_tensor(x) for x in (h_i, h_neighbors, W, a))
    if h_nb.ndim != 2 or h_nb.shape[0] == 0:
        raise DomainError("GAT weights need a nonempty neighbourhood")
    H = W.shape[1]
    zi = T.matmul(h_i.reshape(1, -1), W)  # (1, H)
    zk = T.matmul(h_nb, W)  # (K, H)
    a_src = a[:H].reshape(H, 1)
    a_dst = a[H:].reshape(H, 1)
    raw = T.matmul(zi, a_src) + T.matmul(zk, a_dst)  # (K, 1)
    return T.softmax(T.leaky_relu(raw.reshape(-1), slope))


def gat_weight_matrix(h, adjacency, W, a, slope: float = GAT_SLOPE) -> Tensor:
    """Row-stochastic (over neighbours) GAT weights for all nodes at once.

    ``h`` is (..., n, F), ``adjacency`` (..., n, n). Rows of isolated nodes are zero.
    """
    h, W, a = T.as_tensor(h), T.as_tensor(W), T.as_tensor(a)
    adj = np.asarray(adjacency, dtype=float)
    H = W.shape[1]
    z = T.matmul(h, W)
    s_src = T.matmul(z, a[:H].reshape(H, 1))  # (..., n, 1)
    s_dst = T.matmul(z, a[H:].reshape(H, 1))
    e = T.leaky_relu(s_src + s_dst.T, slope)  # e[i, j] scores neighbour j of node i
    w = T.softmax(e + np.where(adj > 0, 0.0, _NEG))
    has_nb = (adj.sum(axis=-1, keepdims=True) > 0).astype(float)
    return w * has_nb


# -- recurrent graph encoder ----------------------------------------------------

class GRNEncoder(Module):
    """K rounds of GAT-weighted aggregation through a shared gated recurrent cell."""

    def __init__(self, hidden: int, rng: np.random.Generator, rounds: int = 2, in_features: int = NODE_FEATURES):
        if rounds < 1:
            raise DomainError("GRN needs at least one round")
        self.rounds = rounds
        self.hidden = hidden
        self.inp = Linear(in_features, hidden, rng)
        self.W_gat = param(glorot(rng, hidden, hidden))
        self.a_gat = param(rng.normal(0.0, 0.1, size=2 * hidden))
        self.W_msg = param(glorot(rng, hidden, hidden))
        self.gates = Linear(2 * hidden, 2 * hidden, rng)
        self.cand_msg = Linear(hidden, hidden, rng)
        self.cand_state = Linear(hidden, hidden, rng, bias=False)

    def __call__(self, features, adjacency) -> Tensor:
        """Final node states, shape (..., n, hidden)."""
        h = T.tanh(self.inp(features))
        H = self.hidden
        for _ in range(self.rounds):
            alpha = gat_weight_matrix(h, adjacency, self.W_gat, self.a_gat)
            msg = T.matmul(alpha, T.matmul(h, self.W_msg))
            g = T.sigmoid(self.gates(T.concat([msg, h], axis=-1)))
            update, reset = g[..., :H], g[..., H:]
            cand = T.tanh(self.cand_msg(msg) + self.cand_state(reset * h))
            h = h + update * (cand - h)
        return h


def grn_encode(topology: GraphTopology, rounds: int, weights: GRNEncoder) -> np.ndarray:
    """Per-UAV embeddings (M, hidden) after ``rounds`` of message passing."""
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    saved = weights.rounds
    weights.rounds = rounds
    try:
        h = weights(topology.features, topology.adjacency)
    finally:
        weights.rounds = saved
    return h.data[: topology.num_uavs]


class AttentionHead(Module):
    """Query/key/value projections followed by scaled dot-product attention."""

    def __init__(self, dim_in: int, dk: int, rng: np.random.Generator):
        if dk <= 0:
            raise DomainError("d_k must be positive")
        self.dk = dk
        self.Wq = param(glorot(rng, dim_in, dk))
        self.Wk = param(glorot(rng, dim_in, dk))
        self.Wv = param(glorot(rng, dim_in, dk))

    def __call__(self, query_rows, key_rows) -> Tensor:
        q = T.matmul(query_rows, self.Wq)
        return scaled_dot_attention(q, T.matmul(key_rows, self.Wk), T.matmul(key_rows, self.Wv))
