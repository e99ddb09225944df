"""Central-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from uavmarl.autodiff.tensor import Tensor, grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    per_param: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_error={self.max_rel_error:.3e} tol={self.tolerance:.1e}"


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_grad(fn: Callable[[], Tensor], p: Tensor, h: float = 1e-5) -> np.ndarray:
    out = np.zeros(p.shape)
    flat = p.data.reshape(-1)
    view = out.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = fn().item()
        flat[i] = old - h
        down = fn().item()
        flat[i] = old
        view[i] = (up - down) / (2.0 * h)
    return out


def gradient_check(fn: Callable[[], Tensor], params: Sequence[Tensor], tolerance: float = 1e-4,
                   h: float = 1e-5) -> GradCheckReport:
    """Compare every parameter's analytic gradient with central differences.

    ``fn`` rebuilds the scalar loss from the current parameter values.
    """
    params = list(params)
    analytic = grad(fn(), params)
    errs = []
    for p, g in zip(params, analytic):
        p.data = np.array(p.data, dtype=float)  # own a writable buffer
        num = numeric_grad(fn, p, h)
        errs.append(float(relative_error(g, num).max()) if g.size else 0.0)
    return GradCheckReport(max(errs) if errs else 0.0, tolerance, errs)
