"""Adam optimizer over lists of parameter tensors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from uavmarl.autodiff.tensor import Tensor
from uavmarl.errors import DomainError


class Adam:
    """Bias-corrected Adam. Moments persist across :meth:`step` calls.

    ``maximize=True`` ascends instead of descends.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 3e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8, maximize: bool = False):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.maximize = maximize
        self.t = 0
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]

    def step(self, grads: Sequence[np.ndarray] | None = None) -> None:
        if grads is None:
            grads = [np.zeros(p.shape) if p.grad is None else p.grad for p in self.params]
        if len(grads) != len(self.params):
            raise DomainError("one gradient per parameter expected")
        for p, g in zip(self.params, grads):
            if g.shape != p.shape:
                raise DomainError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            if not np.all(np.isfinite(g)):
                raise DomainError("non-finite gradient; update rejected")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        sign = 1.0 if self.maximize else -1.0
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data = p.data + sign * self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_dict(self) -> dict:
        return {"t": self.t, "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}

    def load_state_dict(self, state: dict) -> None:
        self.t = state["t"]
        self.m = [a.copy() for a in state["m"]]
        self.v = [a.copy() for a in state["v"]]
