"""Minimal SGD with classical momentum and weight decay.

Update rule, applied per parameter:

    v <- momentum * v - lr * (grad + weight_decay * param)
    param <- param + v

Weight decay is folded into the gradient before the momentum update, so a
parameter whose loss gradient is zero still shrinks. Velocity buffers are
keyed by parameter name and persist across steps; a step may update any subset
of the registered parameters (the two training networks own disjoint parameter
sets apart from the shared encoder).
"""

from __future__ import annotations

import torch

from .errors import ConfigError


class SgdMomentum:
    def __init__(self, lr: float, momentum: float = 0.0, weight_decay: float = 0.0):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if momentum < 0 or weight_decay < 0:
            raise ConfigError("momentum and weight_decay must be >= 0")
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: dict[str, torch.Tensor] = {}

    @torch.no_grad()
    def step(self, named_params: dict[str, torch.Tensor]) -> None:
        for name, param in named_params.items():
            grad = param.grad if param.grad is not None else torch.zeros_like(param)
            update = grad + self.weight_decay * param
            vel = self.velocity.get(name)
            if vel is None:
                vel = torch.zeros_like(param)
                self.velocity[name] = vel
            vel.mul_(self.momentum).sub_(self.lr * update)
            param.add_(vel)

    def zero_grad(self, named_params: dict[str, torch.Tensor]) -> None:
        for param in named_params.values():
            param.grad = None

    def state_arrays(self) -> dict[str, torch.Tensor]:
        return dict(self.velocity)

    def load_state_arrays(self, arrays: dict[str, torch.Tensor]) -> None:
        self.velocity = {k: v.clone() for k, v in arrays.items()}
