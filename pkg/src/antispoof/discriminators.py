"""Domain discriminators.

The class-conditional discriminator runs every embedding through a shared
two-layer trunk, splits the trunk output into live and spoof rows, and sends
each split through its own domain-prediction head. The unconditional
discriminator keeps the same trunk and uses a single head for all rows; it
exists as the comparison arm for ablations, so any performance difference
isolates the class conditioning rather than capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .data import LIVE, SPOOF
from .errors import DataError, ShapeError


@dataclass(frozen=True)
class SplitIndex:
    """Order-preserving partition of batch rows by class label."""

    live_rows: tuple[int, ...]
    spoof_rows: tuple[int, ...]
    batch_size: int

    def reassemble(self, live_values: torch.Tensor, spoof_values: torch.Tensor) -> torch.Tensor:
        """Merge per-split rows back into original batch order."""
        if len(self.live_rows) != live_values.shape[0]:
            raise ShapeError("live split size mismatch")
        if len(self.spoof_rows) != spoof_values.shape[0]:
            raise ShapeError("spoof split size mismatch")
        out = live_values.new_zeros((self.batch_size, live_values.shape[1]))
        out[list(self.live_rows)] = live_values
        out[list(self.spoof_rows)] = spoof_values
        return out


def split_by_class(class_labels) -> SplitIndex:
    labels = [int(l) for l in class_labels]
    if any(l not in (LIVE, SPOOF) for l in labels):
        raise DataError(f"class labels must be 0 or 1, got {sorted(set(labels))}")
    live = tuple(i for i, l in enumerate(labels) if l == LIVE)
    spoof = tuple(i for i, l in enumerate(labels) if l == SPOOF)
    return SplitIndex(live_rows=live, spoof_rows=spoof, batch_size=len(labels))


class _Trunk(nn.Module):
    """FC1 -> ReLU -> dropout -> FC2 -> ReLU -> dropout shared feature stack."""

    def __init__(self, in_dim: int, hidden: int, dropout: float):
        super().__init__()
        self.in_dim = in_dim
        self.fc1 = nn.Linear(in_dim, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.drop1 = nn.Dropout(dropout)
        self.drop2 = nn.Dropout(dropout)

    def forward(self, emb):
        if emb.ndim != 2 or emb.shape[1] != self.in_dim:
            raise ShapeError(
                f"discriminator expects (N, {self.in_dim}) embeddings, got {tuple(emb.shape)}")
        h = self.drop1(torch.relu(self.fc1(emb)))
        return self.drop2(torch.relu(self.fc2(h)))


class ClassConditionalDiscriminator(nn.Module):
    """Shared trunk plus separate live and spoof domain-prediction heads."""

    def __init__(self, in_dim: int, hidden: int, num_domains: int, dropout: float = 0.5):
        super().__init__()
        self.num_domains = num_domains
        self.trunk = _Trunk(in_dim, hidden, dropout)
        self.live_head = nn.Linear(hidden, num_domains)
        self.spoof_head = nn.Linear(hidden, num_domains)

    def forward(self, emb, class_labels):
        """Returns (live scores, spoof scores, split); each score matrix is a
        row-stochastic softmax over domains, empty splits give 0 x D."""
        split = split_by_class(class_labels)
        if split.batch_size != emb.shape[0]:
            raise ShapeError(
                f"{split.batch_size} class labels for a batch of {emb.shape[0]}")
        shared = self.trunk(emb)
        live_idx = torch.as_tensor(split.live_rows, dtype=torch.long, device=emb.device)
        spoof_idx = torch.as_tensor(split.spoof_rows, dtype=torch.long, device=emb.device)
        s_live = torch.softmax(self.live_head(shared[live_idx]), dim=1)
        s_spoof = torch.softmax(self.spoof_head(shared[spoof_idx]), dim=1)
        return s_live, s_spoof, split


class DomainDiscriminator(nn.Module):
    """Unconditional baseline: the same trunk with one head over all rows."""

    def __init__(self, in_dim: int, hidden: int, num_domains: int, dropout: float = 0.5):
        super().__init__()
        self.num_domains = num_domains
        self.trunk = _Trunk(in_dim, hidden, dropout)
        self.head = nn.Linear(hidden, num_domains)

    def forward(self, emb):
        return torch.softmax(self.head(self.trunk(emb)), dim=1)
