"""Scoring and protocol evaluation.

The image head scores individual frames; the video head scores non-overlapping
clips cut from each video. The operating threshold per head is the equal-error
threshold on source-domain validation scores and is applied unchanged to the
unseen target test set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .data import LIVE, VideoClip, clips_to_tensor, images_to_tensor
from .errors import DataError
from .metrics import MetricReport, compute_report, eer_threshold
from .network import IB_HEAD, VB_HEAD, SpoofNet
from .synthdata import DgProtocol


def score_images(model: SpoofNet, images, batch_size: int = 256) -> np.ndarray:
    """Live probability per frame under the image head."""
    if not images:
        raise DataError("no images to score")
    scores = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            chunk = images[start:start + batch_size]
            emb = model.encode(images_to_tensor(chunk), mode="eval")
            logits = model.classify(emb, mode="eval")
            scores.append(torch.softmax(logits, dim=1)[:, LIVE].numpy())
    return np.concatenate(scores).astype(np.float64)


def video_windows(video, sequence_length: int) -> list[VideoClip]:
    """Non-overlapping clips covering a video front to back."""
    clips = []
    for start in range(0, len(video.frames) - sequence_length + 1, sequence_length):
        clips.append(VideoClip(frames=video.frames[start:start + sequence_length]))
    return clips


def score_clips(model: SpoofNet, clips, batch_size: int = 32) -> np.ndarray:
    """Live probability per clip under the video head."""
    if not clips:
        raise DataError("no clips to score")
    scores = []
    with torch.no_grad():
        for start in range(0, len(clips), batch_size):
            chunk = clips[start:start + batch_size]
            stacked = clips_to_tensor(chunk)
            t, b = stacked.shape[:2]
            emb = model.encode(stacked.reshape(t * b, *stacked.shape[2:]), mode="eval")
            feat = model.temporal_encode(emb.reshape(t, b, -1), mode="eval")
            logits = model.video_classifier(feat)
            scores.append(torch.softmax(logits, dim=1)[:, LIVE].numpy())
    return np.concatenate(scores).astype(np.float64)


@dataclass
class HeadEvaluation:
    head: str
    val_report: MetricReport
    test_report: MetricReport


@dataclass
class EvalResult:
    heads: dict[str, HeadEvaluation]
    selected_head: str

    @property
    def selected(self) -> HeadEvaluation:
        return self.heads[self.selected_head]

    def as_record(self) -> dict:
        return {
            "selected_head": self.selected_head,
            "heads": {
                name: {"validation": he.val_report.as_record(),
                       "test": he.test_report.as_record()}
                for name, he in sorted(self.heads.items())
            },
        }


def _head_eval(head, val_scores, val_labels, test_scores, test_labels) -> HeadEvaluation:
    tau = eer_threshold(val_scores, val_labels)
    return HeadEvaluation(
        head=head,
        val_report=compute_report(val_scores, val_labels, tau),
        test_report=compute_report(test_scores, test_labels, tau),
    )


def image_head_validation(model: SpoofNet, protocol: DgProtocol) -> MetricReport:
    """Image-head metrics on source validation at its own EER threshold."""
    images = protocol.val_images()
    scores = score_images(model, images)
    labels = np.array([im.class_label for im in images])
    return compute_report(scores, labels, eer_threshold(scores, labels))


def evaluate_protocol(model: SpoofNet, protocol: DgProtocol) -> EvalResult:
    """Score validation and target test data with every available head and
    select the head with the better validation HTER (ties prefer video)."""
    val_images = protocol.val_images()
    test_images = protocol.test_images()
    if not test_images:
        raise DataError("target test split is empty")
    heads: dict[str, HeadEvaluation] = {}

    val_img_labels = np.array([im.class_label for im in val_images])
    test_img_labels = np.array([im.class_label for im in test_images])
    heads[IB_HEAD] = _head_eval(
        IB_HEAD,
        score_images(model, val_images), val_img_labels,
        score_images(model, test_images), test_img_labels,
    )

    if model.temporal is not None:
        seq = model.profile.sequence_length
        val_clips = [c for d in protocol.source_domain_ids
                     for v in protocol.val_videos[d] for c in video_windows(v, seq)]
        test_clips = [c for v in protocol.test_videos for c in video_windows(v, seq)]
        if not val_clips or not test_clips:
            raise DataError(f"no videos long enough for {seq}-frame clips")
        heads[VB_HEAD] = _head_eval(
            VB_HEAD,
            score_clips(model, val_clips), np.array([c.class_label for c in val_clips]),
            score_clips(model, test_clips), np.array([c.class_label for c in test_clips]),
        )

    if VB_HEAD in heads:
        from .trainer import select_inference_head
        selected = select_inference_head(heads[IB_HEAD].val_report, heads[VB_HEAD].val_report)
    else:
        selected = IB_HEAD
    return EvalResult(heads=heads, selected_head=selected)
