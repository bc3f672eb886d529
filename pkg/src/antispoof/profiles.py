"""Model profiles: the full-size network shape and a desk-scale variant.

``resnet50-shaped`` mirrors the production geometry (224x224 inputs, 2048-d
embeddings, 8x256 temporal features). ``tiny`` is a 3-conv-block network small
enough for finite-difference gradient checks and fast CPU training; every
contract in the package is parametric over the profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError


@dataclass(frozen=True)
class ModelProfile:
    name: str
    input_size: tuple[int, int]          # (H, W) expected by the encoder
    embedding_dim: int                   # encoder output width E
    lstm_hidden: int                     # per-step temporal feature width
    sequence_length: int                 # frames per video clip
    cls_hidden: int                      # live/spoof classifier hidden width
    disc_hidden: int                     # domain discriminator trunk width
    conv_channels: tuple[int, ...] = ()  # tiny encoder only

    @property
    def temporal_dim(self) -> int:
        """Width of the concatenated per-step temporal features."""
        return self.sequence_length * self.lstm_hidden

    def validate(self) -> None:
        if min(self.input_size) < 8:
            raise ConfigError(f"profile input_size too small: {self.input_size}")
        for field in ("embedding_dim", "lstm_hidden", "sequence_length",
                      "cls_hidden", "disc_hidden"):
            if getattr(self, field) < 1:
                raise ConfigError(f"profile {field} must be >= 1")
        if self.conv_channels:
            # tiny encoder halves the spatial size once per block
            shrink = 2 ** len(self.conv_channels)
            if any(s % shrink for s in self.input_size):
                raise ConfigError(
                    f"input_size {self.input_size} not divisible by {shrink}")


_PROFILES = {
    "tiny": ModelProfile(
        name="tiny",
        input_size=(32, 32),
        embedding_dim=64,
        lstm_hidden=8,
        sequence_length=4,
        cls_hidden=32,
        disc_hidden=32,
        conv_channels=(8, 16, 32),
    ),
    "resnet50-shaped": ModelProfile(
        name="resnet50-shaped",
        input_size=(224, 224),
        embedding_dim=2048,
        lstm_hidden=256,
        sequence_length=8,
        cls_hidden=512,
        disc_hidden=1024,
    ),
}

PROFILE_NAMES = tuple(_PROFILES)


def get_profile(name: str, **overrides) -> ModelProfile:
    """Look up a profile by name, optionally overriding individual fields."""
    if name not in _PROFILES:
        raise ConfigError(f"unknown profile {name!r}, expected one of {PROFILE_NAMES}")
    profile = _PROFILES[name]
    if overrides:
        profile = replace(profile, **overrides)
    profile.validate()
    return profile


def tiny_spatial_dim(profile: ModelProfile) -> int:
    """Flattened size of the tiny encoder's final conv map."""
    h, w = profile.input_size
    shrink = 2 ** len(profile.conv_channels)
    return profile.conv_channels[-1] * (h // shrink) * (w // shrink)


def fan_in_bound(fan_in: int) -> float:
    """Half-width of the uniform init interval for a given fan-in."""
    return 1.0 / math.sqrt(fan_in)
