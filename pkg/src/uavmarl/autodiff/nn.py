"""Parameter containers and the small layers the agents are built from."""

from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import numpy as np

from uavmarl.autodiff import tensor as T
from uavmarl.autodiff.tensor import Tensor
from uavmarl.errors import DomainError


class Module:
    """Anything holding parameter tensors, possibly in child modules."""

    def named_parameters(self, prefix: str = "") -> "OrderedDict[str, Tensor]":
        out: OrderedDict[str, Tensor] = OrderedDict()
        for name, val in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[key] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(key + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def get_flat(self) -> np.ndarray:
        ps = self.parameters()
        return np.concatenate([p.data.ravel() for p in ps]) if ps else np.zeros(0)

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.num_params():
            raise DomainError(f"flat vector has {flat.size} entries, module has {self.num_params()}")
        i = 0
        for p in self.parameters():
            p.data = flat[i:i + p.size].reshape(p.shape).copy()
            i += p.size

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(params) != set(state):
            missing = sorted(set(params) ^ set(state))
            raise DomainError(f"state dict keys differ: {missing}")
        for k, p in params.items():
            arr = np.asarray(state[k], dtype=float)
            if arr.shape != p.shape:
                raise DomainError(f"{k}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()

    def checksum(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for k, v in self.named_parameters().items():
            h.update(k.encode())
            h.update(np.ascontiguousarray(v.data).tobytes())
        return h.hexdigest()


def param(data) -> Tensor:
    return Tensor(np.array(data, dtype=float), requires_grad=True)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float = 1.0) -> np.ndarray:
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear(Module):
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator, gain: float = 1.0, bias: bool = True):
        self.W = param(glorot(rng, fan_in, fan_out, gain))
        self.b = param(np.zeros(fan_out)) if bias else None

    def __call__(self, x) -> Tensor:
        y = T.matmul(x, self.W)
        return y + self.b if self.b is not None else y


class MLP(Module):
    """Tanh hidden layers followed by a linear output layer."""

    def __init__(self, sizes, rng: np.random.Generator, out_gain: float = 1.0):
        self.layers = [Linear(a, b, rng, gain=out_gain if i == len(sizes) - 2 else 1.0)
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def __call__(self, x) -> Tensor:
        h = x
        for layer in self.layers[:-1]:
            h = T.tanh(layer(h))
        return self.layers[-1](h)


def save_checkpoint(path: str | Path, modules: dict[str, Module]) -> None:
    """Write named flat parameter arrays (with shapes) to an ``.npz`` container."""
    arrays = {}
    for mname, mod in modules.items():
        for k, v in mod.state_dict().items():
            arrays[f"{mname}/{k}"] = v
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path, modules: dict[str, Module]) -> None:
    with np.load(path) as data:
        for mname, mod in modules.items():
            pre = f"{mname}/"
            mod.load_state_dict({k[len(pre):]: data[k] for k in data.files if k.startswith(pre)})
