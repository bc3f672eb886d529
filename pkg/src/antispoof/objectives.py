"""Loss terms and the per-network training energies.

Each network minimizes   class loss + weight * (live domain loss + spoof
domain loss).  The adversarial part is not a sign in the energy: the gradient
reversal layer sitting between the encoder and the discriminator flips the
domain gradient on its way into the encoder, while the discriminator heads
themselves descend their own cross-entropy. All cross-entropies are means over
the batch, so the weights are batch-size independent; an empty split
contributes exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ConfigError, DataError, ShapeError


@dataclass(frozen=True)
class LossWeights:
    lambda_ib: float = 1.0
    lambda_vb: float = 1.0

    def __post_init__(self):
        for name in ("lambda_ib", "lambda_vb"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss components of one optimization step (pre-update values)."""

    class_loss: float
    live_domain_loss: float
    spoof_domain_loss: float
    total: float

    def as_record(self) -> dict:
        return {
            "class_loss": self.class_loss,
            "live_domain_loss": self.live_domain_loss,
            "spoof_domain_loss": self.spoof_domain_loss,
            "total": self.total,
        }


def class_loss(logits: torch.Tensor, labels) -> torch.Tensor:
    """Mean softmax cross-entropy of live/spoof logits against binary labels."""
    labels = torch.as_tensor(labels, dtype=torch.long, device=logits.device)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ShapeError(f"class logits must be (N, 2), got {tuple(logits.shape)}")
    if labels.numel() != logits.shape[0]:
        raise ShapeError(f"{labels.numel()} labels for {logits.shape[0]} logit rows")
    if logits.shape[0] == 0:
        raise DataError("class loss requires a non-empty batch")
    if labels.numel() and (labels.min() < 0 or labels.max() > 1):
        raise DataError("class labels must be 0 or 1")
    return F.cross_entropy(logits, labels)


def domain_cross_entropy(scores: torch.Tensor, labels) -> torch.Tensor:
    """Mean multinomial cross-entropy of softmax domain scores; empty input is 0."""
    labels = torch.as_tensor(labels, dtype=torch.long, device=scores.device)
    if labels.numel() != scores.shape[0]:
        raise ShapeError(f"{labels.numel()} domain labels for {scores.shape[0]} score rows")
    if scores.shape[0] == 0:
        return scores.new_zeros(())
    num_domains = scores.shape[1]
    if labels.min() < 0 or labels.max() >= num_domains:
        raise DataError(
            f"domain labels must lie in [0, {num_domains}), got "
            f"[{int(labels.min())}, {int(labels.max())}]")
    picked = scores.gather(1, labels.view(-1, 1)).squeeze(1)
    return -torch.log(picked).mean()


def domain_losses(s_live, s_spoof, live_domain_labels, spoof_domain_labels):
    """Per-head mean domain cross-entropies over the live and spoof splits."""
    return (domain_cross_entropy(s_live, live_domain_labels),
            domain_cross_entropy(s_spoof, spoof_domain_labels))


def ib_energy(class_term, live_term, spoof_term, weights: LossWeights):
    """Image-network energy: class term plus weighted domain terms."""
    return class_term + weights.lambda_ib * (live_term + spoof_term)


def vb_energy(class_term, live_term, spoof_term, weights: LossWeights):
    """Video-network energy: same composition with the video-side weight."""
    return class_term + weights.lambda_vb * (live_term + spoof_term)


def breakdown(class_term, live_term, spoof_term, total) -> LossBreakdown:
    def value(x):
        return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)

    return LossBreakdown(
        class_loss=value(class_term),
        live_domain_loss=value(live_term),
        spoof_domain_loss=value(spoof_term),
        total=value(total),
    )
