"""Minimal reverse-mode autodiff, Adam, and parameter containers."""

from uavmarl.autodiff.gradcheck import GradCheckReport, gradient_check
from uavmarl.autodiff.nn import MLP, Linear, Module, load_checkpoint, param, save_checkpoint
from uavmarl.autodiff.optim import Adam
from uavmarl.autodiff.tensor import Tensor, as_tensor, backward, grad, no_grad

__all__ = [
    "Adam", "GradCheckReport", "Linear", "MLP", "Module", "Tensor", "as_tensor", "backward",
    "grad", "gradient_check", "load_checkpoint", "no_grad", "param", "save_checkpoint",
]
