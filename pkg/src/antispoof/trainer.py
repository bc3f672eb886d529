"""Alternating image/video training with balanced multi-domain batches.

Every cycle runs one image-network step followed by one video-network step
(variants without the video branch run image steps only). Each step optimizes
exactly its own energy and updates exactly its own parameter groups; the
encoder belongs to both. Optimization is plain SGD with momentum and weight
decay at a constant learning rate.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .data import LIVE, SPOOF, VideoClip, class_labels_tensor, clips_to_tensor, images_to_tensor
from .errors import ConfigError, DataError, NumericalError, UsageError
from .grl import DEFAULT_GRL_FACTOR
from .network import IB_HEAD, VB_HEAD, SpoofNet, get_variant
from .objectives import (LossBreakdown, LossWeights, breakdown, class_loss,
                         domain_cross_entropy, domain_losses, ib_energy, vb_energy)
from .optim import SgdMomentum
from .profiles import get_profile
from .synthdata import DgProtocol


@dataclass
class TrainConfig:
    learning_rate: float = 0.0003
    momentum: float = 0.9
    weight_decay: float = 0.00001
    lambda_grl: float = DEFAULT_GRL_FACTOR
    lambda_ib: float = 1.0
    lambda_vb: float = 1.0
    ib_per_domain: int = 16
    vb_clips_per_domain: int = 2
    sequence_length: int = 8
    max_steps: int = 10000
    seed: int = 0
    profile: str = "resnet50-shaped"
    eval_every: int = 500
    variant: str = "full"
    dropout: float = 0.5

    def __post_init__(self):
        for name in ("learning_rate", "momentum", "weight_decay", "lambda_grl",
                     "lambda_ib", "lambda_vb", "dropout"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.ib_per_domain < 1 or self.vb_clips_per_domain < 1:
            raise ConfigError("per-domain batch counts must be >= 1")
        if self.sequence_length < 1 or self.max_steps < 1:
            raise ConfigError("sequence_length and max_steps must be >= 1")
        get_variant(self.variant)

    def weights(self) -> LossWeights:
        return LossWeights(lambda_ib=self.lambda_ib, lambda_vb=self.lambda_vb)

    def resolved_profile(self):
        return get_profile(self.profile, sequence_length=self.sequence_length)


def config_for_profile(profile: str, **overrides) -> TrainConfig:
    """TrainConfig whose sequence length matches the profile default."""
    base = {"profile": profile, "sequence_length": get_profile(profile).sequence_length}
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainStep:
    step: int
    network: str  # IB or VB
    losses: LossBreakdown
    wall_time: float

    def as_record(self) -> dict:
        rec = {"step": self.step, "network": self.network}
        rec.update(self.losses.as_record())
        return rec


@dataclass
class TrainResult:
    model: SpoofNet
    history: list[TrainStep]
    best_state: dict | None = None       # parameter tensors of the best-validation step
    best_val_hter: float = math.inf
    best_step: int = -1
    val_records: list[dict] = field(default_factory=list)


# ---------------------------------------------------------------------------
# batch composition

def compose_ib_batch(sources: dict[int, list], per_domain: int,
                     rng: np.random.Generator) -> list:
    """Draw ``per_domain`` images from every source domain, class balanced
    within each domain, then shuffle the batch."""
    if per_domain < 1:
        raise ConfigError(f"per_domain must be >= 1, got {per_domain}")
    if len(sources) < 2:
        raise DataError(f"need >= 2 source domains, got {len(sources)}")
    batch = []
    for pos, domain_id in enumerate(sorted(sources)):
        pool = sources[domain_id]
        if not pool:
            raise DataError(f"domain {domain_id} has no training images")
        live = [im for im in pool if im.class_label == LIVE]
        spoof = [im for im in pool if im.class_label == SPOOF]
        if live and spoof:
            n_live = per_domain // 2
            if per_domain % 2:
                # odd counts alternate the extra class across domains
                n_live += (pos + int(rng.integers(0, 2))) % 2
            picks = _draw(live, n_live, rng) + _draw(spoof, per_domain - n_live, rng)
        else:
            picks = _draw(pool, per_domain, rng)
        batch.extend(picks)
    order = rng.permutation(len(batch))
    return [batch[i] for i in order]


def _draw(pool: list, count: int, rng: np.random.Generator) -> list:
    if count == 0:
        return []
    replace = count > len(pool)
    idx = rng.choice(len(pool), size=count, replace=replace)
    return [pool[i] for i in idx]


def compose_vb_batch(sources: dict[int, list], clips_per_domain: int,
                     sequence_length: int, rng: np.random.Generator) -> list[VideoClip]:
    """Draw contiguous ``sequence_length``-frame clips, class balanced per
    domain; videos shorter than the sequence length are skipped."""
    if clips_per_domain < 1:
        raise ConfigError(f"clips_per_domain must be >= 1, got {clips_per_domain}")
    clips = []
    for pos, domain_id in enumerate(sorted(sources)):
        usable = [v for v in sources[domain_id] if len(v.frames) >= sequence_length]
        if not usable:
            raise DataError(
                f"domain {domain_id} has no video with >= {sequence_length} frames")
        live = [v for v in usable if v.class_label == LIVE]
        spoof = [v for v in usable if v.class_label == SPOOF]
        if live and spoof:
            n_live = clips_per_domain // 2
            if clips_per_domain % 2:
                n_live += (pos + int(rng.integers(0, 2))) % 2
            chosen = _draw(live, n_live, rng) + _draw(spoof, clips_per_domain - n_live, rng)
        else:
            chosen = _draw(usable, clips_per_domain, rng)
        for video in chosen:
            start = int(rng.integers(0, len(video.frames) - sequence_length + 1))
            clips.append(VideoClip(frames=video.frames[start:start + sequence_length]))
    order = rng.permutation(len(clips))
    return [clips[i] for i in order]


# ---------------------------------------------------------------------------
# optimization steps

def _domain_terms(disc_out, domain_indices, class_labels):
    """Live/spoof domain cross-entropies from a discriminator output."""
    if disc_out is None:
        return None
    if isinstance(disc_out, tuple):  # class-conditional: (s_live, s_spoof, split)
        s_live, s_spoof, split = disc_out
        live_labels = [domain_indices[i] for i in split.live_rows]
        spoof_labels = [domain_indices[i] for i in split.spoof_rows]
        return domain_losses(s_live, s_spoof, live_labels, spoof_labels)
    # unconditional: one head over all rows, reported on the live slot
    return domain_cross_entropy(disc_out, domain_indices), disc_out.new_zeros(())


def _check_finite(energy: torch.Tensor, network: str, step: int) -> None:
    if not torch.isfinite(energy):
        raise NumericalError(
            f"non-finite {network} energy {float(energy.detach())} at step {step}")


def ib_step(model: SpoofNet, optimizer: SgdMomentum, batch: list,
            domain_indices: list[int], cfg: TrainConfig, step: int = 0) -> LossBreakdown:
    """One image-network step; returns the pre-update losses."""
    images = images_to_tensor(batch).to(next(model.parameters()).dtype)
    labels = class_labels_tensor(batch)
    _, logits, disc_out = model.image_forward(images, labels, mode="train")
    cls_term = class_loss(logits, labels)
    terms = _domain_terms(disc_out, domain_indices, labels)
    live_term, spoof_term = terms if terms is not None else (
        cls_term.new_zeros(()), cls_term.new_zeros(()))
    energy = ib_energy(cls_term, live_term, spoof_term, cfg.weights())
    _check_finite(energy, IB_HEAD, step)
    params = model.image_step_params()
    optimizer.zero_grad(params)
    energy.backward()
    optimizer.step(params)
    return breakdown(cls_term, live_term, spoof_term, energy)


def vb_step(model: SpoofNet, optimizer: SgdMomentum, clip_batch: list[VideoClip],
            domain_indices: list[int], cfg: TrainConfig, step: int = 0) -> LossBreakdown:
    """One video-network step; returns the pre-update losses."""
    clips = clips_to_tensor(clip_batch).to(next(model.parameters()).dtype)
    labels = class_labels_tensor(clip_batch)
    _, logits, disc_out = model.video_forward(clips, labels, mode="train")
    cls_term = class_loss(logits, labels)
    terms = _domain_terms(disc_out, domain_indices, labels)
    live_term, spoof_term = terms if terms is not None else (
        cls_term.new_zeros(()), cls_term.new_zeros(()))
    energy = vb_energy(cls_term, live_term, spoof_term, cfg.weights())
    _check_finite(energy, VB_HEAD, step)
    params = model.video_step_params()
    optimizer.zero_grad(params)
    energy.backward()
    optimizer.step(params)
    return breakdown(cls_term, live_term, spoof_term, energy)


# ---------------------------------------------------------------------------
# the training loop

def build_model(cfg: TrainConfig, num_domains: int, pretrained: bool = False) -> SpoofNet:
    return SpoofNet(cfg.resolved_profile(), cfg.variant, num_domains=num_domains,
                    grl_factor=cfg.lambda_grl, dropout=cfg.dropout, seed=cfg.seed,
                    pretrained=pretrained)


def select_inference_head(val_report_ib, val_report_vb) -> str:
    """Pick the head with the lower validation HTER; ties go to the video head."""
    if val_report_ib is None or val_report_vb is None:
        raise UsageError("head selection needs validation reports for both heads")
    return IB_HEAD if val_report_ib.hter < val_report_vb.hter else VB_HEAD


def predict(model: SpoofNet, sample, head: str) -> float:
    """Live probability of a single image (IB head) or clip (VB head)."""
    from .data import LabeledImage

    if head == IB_HEAD:
        if not isinstance(sample, LabeledImage):
            raise UsageError("the image head scores single LabeledImage inputs")
        with torch.no_grad():
            emb = model.encode(images_to_tensor([sample]), mode="eval")
            logits = model.classify(emb, mode="eval")
    elif head == VB_HEAD:
        if not isinstance(sample, VideoClip):
            raise UsageError("the video head scores VideoClip inputs")
        if model.temporal is None:
            raise UsageError(f"variant {model.variant.name!r} has no video head")
        if len(sample) != model.profile.sequence_length:
            raise UsageError(
                f"clip length {len(sample)} != profile sequence length "
                f"{model.profile.sequence_length}")
        with torch.no_grad():
            clips = clips_to_tensor([sample])
            t, b = clips.shape[:2]
            emb = model.encode(clips.reshape(t * b, *clips.shape[2:]), mode="eval")
            feat = model.temporal_encode(emb.reshape(t, b, -1), mode="eval")
            logits = model.video_classifier(feat)
    else:
        raise UsageError(f"unknown head {head!r}")
    return float(torch.softmax(logits[0], dim=0)[LIVE])


def alternating_train(protocol: DgProtocol, cfg: TrainConfig,
                      model: SpoofNet | None = None,
                      start_step: int = 0,
                      optimizer: SgdMomentum | None = None,
                      eval_fn=None) -> TrainResult:
    """Run the training schedule over a leave-one-domain-out protocol.

    ``eval_fn(model) -> MetricReport`` is called every ``eval_every`` steps
    when provided; the parameter snapshot with the lowest validation HTER is
    retained. Resuming: pass the model, optimizer and ``start_step`` restored
    from a checkpoint.
    """
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng([cfg.seed, 917])
    if model is None:
        model = build_model(cfg, num_domains=protocol.num_source_domains)
    if optimizer is None:
        optimizer = SgdMomentum(cfg.learning_rate, cfg.momentum, cfg.weight_decay)

    image_sources = {d: protocol.train_images(d) for d in protocol.source_domain_ids}
    video_sources = {d: protocol.train_videos[d] for d in protocol.source_domain_ids}
    has_video = model.temporal is not None

    result = TrainResult(model=model, history=[])
    for step in range(start_step, cfg.max_steps):
        is_video_step = has_video and step % 2 == 1
        started = time.perf_counter()
        if is_video_step:
            batch = compose_vb_batch(video_sources, cfg.vb_clips_per_domain,
                                     model.profile.sequence_length, rng)
            indices = [protocol.domain_index(c.domain_id) for c in batch]
            losses = vb_step(model, optimizer, batch, indices, cfg, step)
            network = VB_HEAD
        else:
            batch = compose_ib_batch(image_sources, cfg.ib_per_domain, rng)
            indices = [protocol.domain_index(im.domain_id) for im in batch]
            losses = ib_step(model, optimizer, batch, indices, cfg, step)
            network = IB_HEAD
        result.history.append(TrainStep(step=step, network=network, losses=losses,
                                        wall_time=time.perf_counter() - started))

        due = (step + 1) % cfg.eval_every == 0 if cfg.eval_every > 0 else False
        if eval_fn is not None and (due or step + 1 == cfg.max_steps):
            report = eval_fn(model)
            result.val_records.append({"step": step, **report.as_record()})
            if report.hter < result.best_val_hter:
                result.best_val_hter = report.hter
                result.best_step = step
                result.best_state = model.snapshot()
    return result


def write_history(path, history: list[TrainStep]) -> None:
    """Newline-delimited step records: step, network and the loss components."""
    import json

    with open(path, "w") as fh:
        for step in history:
            fh.write(json.dumps(step.as_record(), sort_keys=True))
            fh.write("\n")


def config_as_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
