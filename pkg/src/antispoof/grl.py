"""Gradient reversal: identity in the forward pass, gradient scaled by a
constant factor in the backward pass.

The factor is applied verbatim (default -0.2), so a negative value flips the
sign of the gradient flowing into the encoder and turns the domain
discriminator's minimization into the encoder's maximization. The layer has no
parameters and no schedule; the factor is constant throughout training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ConfigError

DEFAULT_GRL_FACTOR = -0.2


@dataclass(frozen=True)
class GrlConfig:
    lambda_grl: float = DEFAULT_GRL_FACTOR

    def __post_init__(self):
        if not math.isfinite(self.lambda_grl):
            raise ConfigError("lambda_grl must be finite")


class _ScaleGradient(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, factor):
        ctx.factor = factor
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output * ctx.factor, None


def reverse_gradient(x: torch.Tensor, factor: float = DEFAULT_GRL_FACTOR) -> torch.Tensor:
    """Identity on ``x`` whose backward pass multiplies the gradient by ``factor``."""
    return _ScaleGradient.apply(x, factor)


class GradientReversal(nn.Module):
    """Module wrapper around :func:`reverse_gradient`; holds no parameters."""

    def __init__(self, factor: float = DEFAULT_GRL_FACTOR):
        super().__init__()
        self.factor = float(factor)

    def forward(self, x):
        return reverse_gradient(x, self.factor)

    def extra_repr(self) -> str:
        return f"factor={self.factor}"


def grl_forward(x, cfg: GrlConfig | None = None) -> np.ndarray:
    """Forward contract on plain arrays: the input is returned unchanged."""
    return np.array(x, copy=True)


def grl_backward(grad_upstream, cfg: GrlConfig | None = None) -> np.ndarray:
    """Backward contract on plain arrays: elementwise ``lambda_grl * grad``."""
    cfg = cfg or GrlConfig()
    return np.asarray(grad_upstream) * cfg.lambda_grl
