"""Variant-aware assembly of the full anti-spoofing network.

One model owns up to six submodules: the shared encoder, the image-path
classifier and discriminator, and the video-path temporal head, classifier
and discriminator. Ablation variants toggle which submodules exist; parameter
groups are named by function and stay disjoint, with the encoder referenced by
both training paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .discriminators import ClassConditionalDiscriminator, DomainDiscriminator
from .errors import ConfigError, UsageError
from .grl import DEFAULT_GRL_FACTOR, reverse_gradient
from .models import (LiveSpoofClassifier, TemporalHead, build_encoder,
                     check_mode, init_fan_in_, module_generator)
from .profiles import ModelProfile


@dataclass(frozen=True)
class VariantSpec:
    """Which components a model variant instantiates."""

    name: str
    image_discriminator: str  # "none" | "conditional" | "unconditional"
    video_branch: bool
    video_discriminator: bool

    @property
    def has_image_disc(self) -> bool:
        return self.image_discriminator != "none"


# The six component-grid rows, in increasing-component order, plus the
# unconditional-discriminator comparison arm.
TABLE_VARIANTS = (
    VariantSpec("backbone", "none", False, False),
    VariantSpec("dib", "conditional", False, False),
    VariantSpec("lstm", "none", True, False),
    VariantSpec("lstm-dvb", "none", True, True),
    VariantSpec("dib-lstm", "conditional", True, False),
    VariantSpec("full", "conditional", True, True),
)
DIS_VARIANT = VariantSpec("dis", "unconditional", False, False)
ALL_VARIANTS = TABLE_VARIANTS + (DIS_VARIANT,)
VARIANTS = {v.name: v for v in ALL_VARIANTS}

IB_HEAD, VB_HEAD = "IB", "VB"


def get_variant(name: str) -> VariantSpec:
    if name not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}, expected one of {sorted(VARIANTS)}")
    return VARIANTS[name]


class SpoofNet(nn.Module):
    """Shared-encoder image/video anti-spoofing network."""

    def __init__(self, profile: ModelProfile, variant: VariantSpec | str = "full",
                 num_domains: int = 3, grl_factor: float = DEFAULT_GRL_FACTOR,
                 dropout: float = 0.5, seed: int = 0, pretrained: bool = False):
        super().__init__()
        if isinstance(variant, str):
            variant = get_variant(variant)
        if num_domains < 2:
            raise ConfigError(f"need at least 2 source domains, got {num_domains}")
        self.profile = profile
        self.variant = variant
        self.num_domains = num_domains
        self.grl_factor = float(grl_factor)

        self.encoder = build_encoder(profile, pretrained=pretrained)
        self.image_classifier = LiveSpoofClassifier(
            profile.embedding_dim, profile.cls_hidden, dropout)

        self.image_disc = None
        if variant.image_discriminator == "conditional":
            self.image_disc = ClassConditionalDiscriminator(
                profile.embedding_dim, profile.disc_hidden, num_domains, dropout)
        elif variant.image_discriminator == "unconditional":
            self.image_disc = DomainDiscriminator(
                profile.embedding_dim, profile.disc_hidden, num_domains, dropout)

        self.temporal = None
        self.video_classifier = None
        self.video_disc = None
        if variant.video_branch:
            self.temporal = TemporalHead(profile)
            self.video_classifier = LiveSpoofClassifier(
                profile.temporal_dim, profile.cls_hidden, dropout)
            if variant.video_discriminator:
                self.video_disc = ClassConditionalDiscriminator(
                    profile.temporal_dim, profile.disc_hidden, num_domains, dropout)

        if not pretrained:
            self._seed_init(seed)
        else:
            # pretrained hook covers only the encoder; heads stay seeded
            for name, module in self._named_submodules():
                if name != "encoder":
                    init_fan_in_(module, module_generator(seed, name))

    def _named_submodules(self):
        pairs = [("encoder", self.encoder), ("image_classifier", self.image_classifier)]
        for name in ("image_disc", "temporal", "video_classifier", "video_disc"):
            module = getattr(self, name)
            if module is not None:
                pairs.append((name, module))
        return pairs

    def _seed_init(self, seed: int) -> None:
        # one RNG stream per submodule: adding or removing a component never
        # changes the init of the others
        for name, module in self._named_submodules():
            init_fan_in_(module, module_generator(seed, name))

    # -- forward paths ----------------------------------------------------

    def _set_mode(self, mode: str) -> None:
        self.train(check_mode(mode))

    def encode(self, images: torch.Tensor, mode: str = "eval") -> torch.Tensor:
        """Embed a batch of (N, C, H, W) images into (N, E)."""
        self._set_mode(mode)
        return self.encoder(images)

    def classify(self, emb: torch.Tensor, mode: str = "eval") -> torch.Tensor:
        """Live/spoof logits (N, 2) from image embeddings."""
        self._set_mode(mode)
        return self.image_classifier(emb)

    def temporal_encode(self, seq: torch.Tensor, mode: str = "eval") -> torch.Tensor:
        """Concatenated LSTM hidden states (B, T*hidden) from (T, B, E) input."""
        if self.temporal is None:
            raise UsageError(f"variant {self.variant.name!r} has no video branch")
        self._set_mode(mode)
        return self.temporal(seq)

    def image_forward(self, images: torch.Tensor, class_labels, mode: str = "train"):
        """Image-path forward: logits plus discriminator outputs (or None)."""
        self._set_mode(mode)
        emb = self.encoder(images)
        logits = self.image_classifier(emb)
        disc_out = None
        if self.image_disc is not None:
            reversed_emb = reverse_gradient(emb, self.grl_factor)
            if isinstance(self.image_disc, ClassConditionalDiscriminator):
                disc_out = self.image_disc(reversed_emb, class_labels)
            else:
                disc_out = self.image_disc(reversed_emb)
        return emb, logits, disc_out

    def video_forward(self, clips: torch.Tensor, class_labels, mode: str = "train"):
        """Video-path forward over a (T, B, C, H, W) clip batch."""
        if self.temporal is None:
            raise UsageError(f"variant {self.variant.name!r} has no video branch")
        self._set_mode(mode)
        t, b = clips.shape[:2]
        frames = clips.reshape(t * b, *clips.shape[2:])
        emb = self.encoder(frames).reshape(t, b, -1)
        feat = self.temporal(emb)
        logits = self.video_classifier(feat)
        disc_out = None
        if self.video_disc is not None:
            disc_out = self.video_disc(reverse_gradient(feat, self.grl_factor), class_labels)
        return feat, logits, disc_out

    # -- parameter bookkeeping --------------------------------------------

    def param_groups(self) -> dict[str, dict[str, torch.Tensor]]:
        """Named, disjoint parameter groups; the encoder group is shared by
        both training paths."""
        groups: dict[str, dict[str, torch.Tensor]] = {
            "encoder": dict(self.encoder.named_parameters()),
            "image_classifier": dict(self.image_classifier.named_parameters()),
        }
        if isinstance(self.image_disc, ClassConditionalDiscriminator):
            groups["image_disc_trunk"] = dict(self.image_disc.trunk.named_parameters())
            groups["image_disc_live_head"] = dict(self.image_disc.live_head.named_parameters())
            groups["image_disc_spoof_head"] = dict(self.image_disc.spoof_head.named_parameters())
        elif isinstance(self.image_disc, DomainDiscriminator):
            groups["image_disc_trunk"] = dict(self.image_disc.trunk.named_parameters())
            groups["image_disc_domain_head"] = dict(self.image_disc.head.named_parameters())
        if self.temporal is not None:
            groups["temporal"] = dict(self.temporal.named_parameters())
            groups["video_classifier"] = dict(self.video_classifier.named_parameters())
        if self.video_disc is not None:
            groups["video_disc_trunk"] = dict(self.video_disc.trunk.named_parameters())
            groups["video_disc_live_head"] = dict(self.video_disc.live_head.named_parameters())
            groups["video_disc_spoof_head"] = dict(self.video_disc.spoof_head.named_parameters())
        return groups

    def image_step_params(self) -> dict[str, torch.Tensor]:
        """Parameters owned by an image-network optimization step."""
        wanted = ("encoder", "image_classifier", "image_disc_trunk",
                  "image_disc_live_head", "image_disc_spoof_head",
                  "image_disc_domain_head")
        return self._flatten(wanted)

    def video_step_params(self) -> dict[str, torch.Tensor]:
        """Parameters owned by a video-network optimization step."""
        wanted = ("encoder", "temporal", "video_classifier", "video_disc_trunk",
                  "video_disc_live_head", "video_disc_spoof_head")
        return self._flatten(wanted)

    def _flatten(self, group_names) -> dict[str, torch.Tensor]:
        groups = self.param_groups()
        flat = {}
        for group in group_names:
            for name, param in groups.get(group, {}).items():
                flat[f"{group}/{name}"] = param
        return flat

    def buffer_groups(self) -> dict[str, dict[str, torch.Tensor]]:
        """Non-trainable state per group (normalization running statistics)."""
        groups = {}
        for name, module in self._named_submodules():
            buffers = dict(module.named_buffers())
            if buffers:
                groups[name] = buffers
        return groups

    def group_census(self) -> dict[str, int]:
        """Parameter count per group; gradient reversal contributes nothing."""
        return {g: sum(p.numel() for p in params.values())
                for g, params in self.param_groups().items()}

    def snapshot(self) -> dict[str, torch.Tensor]:
        """Clone of every parameter and buffer, keyed for load_snapshot."""
        state = {}
        for group, params in self.param_groups().items():
            for name, param in params.items():
                state[f"params/{group}/{name}"] = param.detach().clone()
        for group, buffers in self.buffer_groups().items():
            for name, buf in buffers.items():
                state[f"buffers/{group}/{name}"] = buf.detach().clone()
        return state

    @torch.no_grad()
    def load_snapshot(self, state: dict[str, torch.Tensor]) -> None:
        for group, params in self.param_groups().items():
            for name, param in params.items():
                param.copy_(state[f"params/{group}/{name}"])
        for group, buffers in self.buffer_groups().items():
            for name, buf in buffers.items():
                buf.copy_(state[f"buffers/{group}/{name}"])
