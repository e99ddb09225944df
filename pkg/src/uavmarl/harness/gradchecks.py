"""Finite-difference checks of the network building blocks on random inputs."""

from __future__ import annotations

import numpy as np

from uavmarl.autodiff.gradcheck import GradCheckReport, gradient_check
from uavmarl.autodiff.nn import MLP, param
from uavmarl.graph import AttentionHead, GRNEncoder, gat_weight_matrix

LAYERS = ("mlp", "attention", "gat", "grn")


def _random_graph(rng: np.random.Generator, n: int) -> np.ndarray:
    adj = (rng.random((n, n)) < 0.5).astype(float)
    adj = np.triu(adj, 1)
    adj = adj + adj.T
    adj[0, 1:] = adj[1:, 0] = 1.0  # keep it connected through node 0
    return adj


def check_layer(name: str, seed: int, tolerance: float = 1e-4) -> GradCheckReport:
    """Gradient check of one layer type with weights and inputs drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    if name == "mlp":
        net = MLP([5, 8, 8, 3], rng)
        x = rng.normal(size=(4, 5))
        w = rng.normal(size=(4, 3))
        return gradient_check(lambda: (net(x) * w).sum(), net.parameters(), tolerance)
    if name == "attention":
        head = AttentionHead(6, 4, rng)
        q_rows = param(rng.normal(size=(2, 6)))
        k_rows = param(rng.normal(size=(5, 6)))
        w = rng.normal(size=(2, 4))
        return gradient_check(lambda: (head(q_rows, k_rows) * w).sum(),
                              head.parameters() + [q_rows, k_rows], tolerance)
    if name == "gat":
        n, F, H = 6, 5, 4
        h = param(rng.normal(size=(n, F)))
        W = param(rng.normal(0, 0.5, size=(F, H)))
        a = param(rng.normal(size=2 * H))
        adj = _random_graph(rng, n)
        w = rng.normal(size=(n, n))
        return gradient_check(lambda: (gat_weight_matrix(h, adj, W, a) * w).sum(), [h, W, a], tolerance)
    if name == "grn":
        n = 6
        enc = GRNEncoder(8, rng, rounds=2)
        feats = rng.normal(size=(n, 5))
        adj = _random_graph(rng, n)
        w = rng.normal(size=(n, 8))
        return gradient_check(lambda: (enc(feats, adj) * w).sum(), enc.parameters(), tolerance)
    raise ValueError(f"unknown layer {name!r}; choose from {LAYERS}")


def worst_errors(seeds, tolerance: float = 1e-4) -> dict[str, float]:
    """Largest relative error per layer type over all ``seeds``."""
    return {name: max(check_layer(name, s, tolerance).max_rel_error for s in seeds) for name in LAYERS}


__all__ = ["LAYERS", "check_layer", "worst_errors"]
