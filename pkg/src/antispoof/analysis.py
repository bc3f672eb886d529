"""Feature-space inspection tools: embedding export and class activation maps.

Both operations are pure reads of frozen parameters. The embedding dump pairs
every sample's encoder output with its labels and split, optionally adding a
seeded 2-D projection; activation maps weight a convolutional feature map by
the spatial mean of the class-score gradient, clamp at zero, normalize, and
upsample to the input size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .data import LabeledImage, images_to_tensor
from .errors import DataError, UsageError
from .network import SpoofNet
from .tsne import project_2d


@dataclass
class EmbeddingRow:
    sample_id: str
    domain_id: int
    class_label: int
    split: str  # source | target
    embedding: np.ndarray
    projection: np.ndarray | None = None


@dataclass
class EmbeddingDump:
    rows: list[EmbeddingRow]

    @property
    def embeddings(self) -> np.ndarray:
        return np.stack([r.embedding for r in self.rows])

    def write_tsv(self, path) -> None:
        width = self.rows[0].embedding.shape[0]
        has_proj = self.rows[0].projection is not None
        header = ["sample_id", "domain_id", "class_label", "split"]
        header += [f"e{i}" for i in range(width)]
        if has_proj:
            header += ["p0", "p1"]
        with open(path, "w") as fh:
            fh.write("\t".join(header) + "\n")
            for row in self.rows:
                cells = [row.sample_id, str(row.domain_id), str(row.class_label), row.split]
                cells += [repr(float(v)) for v in row.embedding]
                if has_proj:
                    cells += [repr(float(v)) for v in row.projection]
                fh.write("\t".join(cells) + "\n")


def export_embeddings(model: SpoofNet, samples, project: bool = False,
                      seed: int = 0, batch_size: int = 256) -> EmbeddingDump:
    """Embed ``samples``: an iterable of (sample_id, LabeledImage, split)."""
    samples = list(samples)
    if not samples:
        raise DataError("no samples to embed")
    rows = []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            emb = model.encode(images_to_tensor([s[1] for s in chunk]), mode="eval")
            for (sample_id, image, split), vector in zip(chunk, emb):
                rows.append(EmbeddingRow(
                    sample_id=sample_id, domain_id=image.domain_id,
                    class_label=image.class_label, split=split,
                    embedding=vector.numpy().copy()))
    if project:
        coords = project_2d(np.stack([r.embedding for r in rows]), seed=seed)
        for row, xy in zip(rows, coords):
            row.projection = xy.astype(np.float64)
    return EmbeddingDump(rows=rows)


def protocol_analysis_samples(protocol) -> list[tuple[str, LabeledImage, str]]:
    """Source-validation plus target-test frames, tagged with their split."""
    samples = []
    for image in protocol.val_images():
        sid = f"d{image.domain_id}v{image.video_id:03d}f{image.frame_index:03d}"
        samples.append((sid, image, "source"))
    for image in protocol.test_images():
        sid = f"d{image.domain_id}v{image.video_id:03d}f{image.frame_index:03d}"
        samples.append((sid, image, "target"))
    return samples


# ---------------------------------------------------------------------------
# class activation maps

@dataclass
class ActivationMap:
    values: np.ndarray  # H x W in [0, 1], input resolution
    target_class: int
    layer_name: str


def grad_cam(model: SpoofNet, image: LabeledImage, target_class: int,
             conv_layer: str | None = None) -> ActivationMap:
    """Gradient-weighted activation map of the image classifier's class score."""
    if target_class not in (0, 1):
        raise UsageError(f"target_class must be 0 or 1, got {target_class}")
    layer_name = conv_layer or model.encoder.default_cam_layer
    modules = dict(model.encoder.named_modules())
    if layer_name not in modules or not layer_name:
        candidates = [n for n, m in modules.items()
                      if isinstance(m, torch.nn.Conv2d) and n]
        raise UsageError(
            f"unknown encoder layer {layer_name!r}; convolutional layers: {candidates}")
    layer = modules[layer_name]

    captured: dict[str, torch.Tensor] = {}

    def keep_activation(module, inputs, output):
        captured["activation"] = output

    handle = layer.register_forward_hook(keep_activation)
    try:
        model.eval()
        x = images_to_tensor([image])
        emb = model.encoder(x)
        logits = model.image_classifier(emb)
        activation = captured.get("activation")
        if activation is None or activation.ndim != 4:
            raise UsageError(f"layer {layer_name!r} has no spatial feature map")
        grads = torch.autograd.grad(logits[0, target_class], activation)[0]
    finally:
        handle.remove()

    weights = grads.mean(dim=(2, 3))[0]                       # channel weights
    cam = torch.relu((weights[:, None, None] * activation[0]).sum(dim=0))
    cam = cam.detach()[None, None]
    cam = F.interpolate(cam, size=model.profile.input_size, mode="bilinear",
                        align_corners=False)[0, 0]
    cam = cam.numpy().astype(np.float64)
    low, high = float(cam.min()), float(cam.max())
    if high == low:
        cam = np.zeros_like(cam) if high == 0.0 else np.ones_like(cam)
    else:
        cam = (cam - low) / (high - low)
    return ActivationMap(values=cam, target_class=target_class, layer_name=layer_name)


def save_activation_map(amap: ActivationMap, image: LabeledImage,
                        map_path, overlay_path) -> None:
    """Write the map as grayscale PNG plus a red-tinted blend over the input."""
    from PIL import Image

    gray = np.clip(np.rint(amap.values * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(map_path)

    heat = np.zeros((*amap.values.shape, 3))
    heat[:, :, 0] = amap.values              # red ramps with activation
    heat[:, :, 2] = 1.0 - amap.values        # blue where inactive
    blend = 0.55 * image.pixels + 0.45 * heat
    blended = np.clip(np.rint(blend * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(blended, mode="RGB").save(overlay_path)
