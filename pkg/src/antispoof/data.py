"""Core training-example types and tensor conversion helpers.

Pixels are stored channel-last (H, W, C) in [0, 1]; conversion to the
channel-first layout expected by the networks happens in the ``*_to_tensor``
helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DataError

LIVE, SPOOF = 0, 1


@dataclass
class LabeledImage:
    pixels: np.ndarray     # H x W x C float32 in [0, 1]
    class_label: int       # 0 = live, 1 = spoof
    domain_id: int
    video_id: int = 0
    frame_index: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 3:
            raise DataError(f"pixels must be H x W x C, got shape {self.pixels.shape}")
        if not np.isfinite(self.pixels).all():
            raise DataError("pixels contain non-finite values")
        if self.class_label not in (LIVE, SPOOF):
            raise DataError(f"class_label must be 0 or 1, got {self.class_label}")
        if self.domain_id < 0 or self.frame_index < 0:
            raise DataError("domain_id and frame_index must be non-negative")


@dataclass
class VideoClip:
    frames: list[LabeledImage]
    class_label: int = field(init=False)
    domain_id: int = field(init=False)

    def __post_init__(self):
        if not self.frames:
            raise DataError("a video clip needs at least one frame")
        first = self.frames[0]
        for prev, cur in zip(self.frames, self.frames[1:]):
            if cur.frame_index <= prev.frame_index:
                raise DataError("clip frame indices must be strictly increasing")
        for f in self.frames:
            if (f.video_id, f.class_label, f.domain_id) != (
                    first.video_id, first.class_label, first.domain_id):
                raise DataError("all clip frames must share video, class and domain")
        self.class_label = first.class_label
        self.domain_id = first.domain_id

    @property
    def video_id(self) -> int:
        return self.frames[0].video_id

    def __len__(self) -> int:
        return len(self.frames)


def images_to_tensor(images, dtype=torch.float32) -> torch.Tensor:
    """Stack images into an (N, C, H, W) tensor."""
    stacked = np.stack([img.pixels for img in images])
    return torch.from_numpy(stacked).permute(0, 3, 1, 2).contiguous().to(dtype)


def class_labels_tensor(items) -> torch.Tensor:
    return torch.tensor([it.class_label for it in items], dtype=torch.long)


def domain_ids(items) -> list[int]:
    return [it.domain_id for it in items]


def clips_to_tensor(clips, dtype=torch.float32) -> torch.Tensor:
    """Stack clips into a time-major (T, B, C, H, W) tensor."""
    lengths = {len(c) for c in clips}
    if len(lengths) != 1:
        raise DataError(f"clips in a batch must share a length, got {sorted(lengths)}")
    per_clip = [images_to_tensor(c.frames, dtype) for c in clips]
    return torch.stack(per_clip, dim=1)  # (T, B, C, H, W)
