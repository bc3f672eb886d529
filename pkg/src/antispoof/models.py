"""Encoders, live/spoof classifiers and the recurrent temporal head.

Both networks share one encoder instance: the image path classifies a single
frame's embedding, the video path runs per-frame embeddings through an LSTM
and classifies the concatenated per-step hidden states. Initialization is
fan-in-scaled uniform, seeded per module so that the same base seed yields
identical encoder weights across model variants.
"""

from __future__ import annotations

import zlib

import torch
from torch import nn

from .errors import ConfigError, ShapeError
from .profiles import ModelProfile, fan_in_bound, tiny_spatial_dim


def module_generator(seed: int, name: str) -> torch.Generator:
    """Deterministic RNG stream for one module's initialization."""
    mixed = (seed * 0x9E3779B1 + zlib.crc32(name.encode())) % (2 ** 63)
    gen = torch.Generator()
    gen.manual_seed(mixed)
    return gen


def init_fan_in_(module: nn.Module, generator: torch.Generator) -> None:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for conv/linear/LSTM weights."""
    for sub in module.modules():
        if isinstance(sub, nn.Linear):
            bound = fan_in_bound(sub.in_features)
            sub.weight.data.uniform_(-bound, bound, generator=generator)
            if sub.bias is not None:
                sub.bias.data.uniform_(-bound, bound, generator=generator)
        elif isinstance(sub, nn.Conv2d):
            fan_in = sub.in_channels * sub.kernel_size[0] * sub.kernel_size[1]
            bound = fan_in_bound(fan_in)
            sub.weight.data.uniform_(-bound, bound, generator=generator)
            if sub.bias is not None:
                sub.bias.data.uniform_(-bound, bound, generator=generator)
        elif isinstance(sub, nn.LSTM):
            bound = fan_in_bound(sub.hidden_size)
            for param in sub.parameters():
                param.data.uniform_(-bound, bound, generator=generator)
            # positive forget-gate bias keeps the cell integrating early on
            hidden = sub.hidden_size
            sub.bias_ih_l0.data[hidden:2 * hidden] += 1.0


def check_mode(mode: str) -> bool:
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    return mode == "train"


class TinyEncoder(nn.Module):
    """Three conv-batchnorm blocks, flatten, linear projection to the
    embedding width.

    Batch normalization keeps per-channel activation statistics pinned, which
    stops the encoder from collapsing its output to a constant under the
    reversed domain gradient (the full-size backbone gets the same stability
    from its own normalization layers). The final stage flattens a small
    spatial map instead of pooling it away, so embeddings stay sensitive to
    the position of image content (the video head reads frame-to-frame motion
    from exactly that).
    """

    def __init__(self, profile: ModelProfile):
        super().__init__()
        self.profile = profile
        channels = profile.conv_channels
        if not channels:
            raise ConfigError("tiny encoder requires profile.conv_channels")
        blocks = []
        in_ch = 3
        for out_ch in channels:
            blocks += [nn.Conv2d(in_ch, out_ch, 3, padding=1),
                       nn.BatchNorm2d(out_ch), nn.ReLU(), nn.MaxPool2d(2)]
            in_ch = out_ch
        self.blocks = nn.Sequential(*blocks)
        self.project = nn.Linear(tiny_spatial_dim(profile), profile.embedding_dim)
        self.default_cam_layer = f"blocks.{4 * (len(channels) - 1)}"

    def forward(self, x):
        _check_image_batch(x, self.profile)
        h = self.blocks(x)
        return self.project(h.flatten(1))


class ResNet50Encoder(nn.Module):
    """ResNet-50 backbone with the classification layer removed; outputs the
    2048-d globally pooled feature vector. Pretrained weights are an optional
    hook and are never required."""

    def __init__(self, profile: ModelProfile, pretrained: bool = False):
        super().__init__()
        from torchvision.models import resnet50

        self.profile = profile
        weights = "IMAGENET1K_V2" if pretrained else None
        backbone = resnet50(weights=weights)
        backbone.fc = nn.Identity()
        self.backbone = backbone
        self.default_cam_layer = "backbone.layer4"

    def forward(self, x):
        _check_image_batch(x, self.profile)
        return self.backbone(x)


def _check_image_batch(x: torch.Tensor, profile: ModelProfile) -> None:
    expected = (3, *profile.input_size)
    if x.ndim != 4 or tuple(x.shape[1:]) != expected:
        raise ShapeError(
            f"encoder expects (N, {expected[0]}, {expected[1]}, {expected[2]}) "
            f"images, got {tuple(x.shape)}")


def build_encoder(profile: ModelProfile, pretrained: bool = False) -> nn.Module:
    if profile.conv_channels:
        if pretrained:
            raise ConfigError("pretrained weights exist only for the resnet50-shaped profile")
        return TinyEncoder(profile)
    return ResNet50Encoder(profile, pretrained=pretrained)


class LiveSpoofClassifier(nn.Module):
    """Two-layer head emitting live/spoof logits: FC -> ReLU -> dropout -> FC."""

    def __init__(self, in_dim: int, hidden: int, dropout: float = 0.5):
        super().__init__()
        self.in_dim = in_dim
        self.fc1 = nn.Linear(in_dim, hidden)
        self.drop = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden, 2)

    def forward(self, emb):
        if emb.ndim != 2 or emb.shape[1] != self.in_dim:
            raise ShapeError(
                f"classifier expects (N, {self.in_dim}) embeddings, got {tuple(emb.shape)}")
        return self.fc2(self.drop(torch.relu(self.fc1(emb))))


class TemporalHead(nn.Module):
    """Single-layer LSTM over per-frame embeddings; emits the per-step hidden
    states concatenated in time order (one vector of width T * hidden per clip).
    Initial hidden and cell states are zero.

    Two input transforms precede the recurrence. Batch normalization pins the
    embedding scale (the shared encoder's output grows while the image path
    trains, and unnormalized inputs saturate the gates). Subtracting each
    clip's temporal mean then removes all static appearance, so the video
    path judges how a clip moves rather than re-reading the single-frame
    evidence the image path already has; this is what makes its verdict
    complementary instead of a noisier copy.
    """

    def __init__(self, profile: ModelProfile, input_dropout: float = 0.15):
        super().__init__()
        self.profile = profile
        self.norm = nn.BatchNorm1d(profile.embedding_dim)
        self.drop = nn.Dropout(input_dropout)
        self.lstm = nn.LSTM(profile.embedding_dim, profile.lstm_hidden)

    def forward(self, seq):
        p = self.profile
        if seq.ndim != 3 or seq.shape[0] != p.sequence_length or seq.shape[2] != p.embedding_dim:
            raise ShapeError(
                f"temporal head expects ({p.sequence_length}, B, {p.embedding_dim}) "
                f"sequences, got {tuple(seq.shape)}")
        t, b, e = seq.shape
        seq = self.drop(self.norm(seq.reshape(t * b, e))).reshape(t, b, e)
        seq = seq - seq.mean(dim=0, keepdim=True)
        out, _ = self.lstm(seq)                      # (T, B, hidden)
        return out.permute(1, 0, 2).reshape(b, p.temporal_dim)
