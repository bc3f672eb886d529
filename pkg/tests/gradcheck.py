"""Finite-difference gradient checking helpers shared by the test modules.

Central differences see the plain value of the energy, while the gradient
reversal layer rescales the domain term's gradient on its way into everything
upstream of it. The checker therefore measures the class and domain terms
separately and composes the expected gradient per parameter group:

    upstream of the reversal (encoder, temporal head):
        fd_class + weight * grl_factor * fd_domain
    everything else (classifiers, discriminators):
        fd_class + weight * fd_domain

Forwards run in eval mode (dropout off, normalization on running statistics)
in double precision. Coordinates straddling a ReLU or max-pool kink are
detected by a two-step-size consistency test and resampled, since central
differences are meaningless at nondifferentiable points.
"""

import numpy as np
import torch

from antispoof.grl import reverse_gradient
from antispoof.objectives import class_loss, domain_cross_entropy, domain_losses

IMAGE_UPSTREAM = ("encoder",)
VIDEO_UPSTREAM = ("encoder", "temporal")


def image_terms(model, images, labels, domain_indices, with_grl=False):
    """(class term, unweighted domain term) of the image-path energy."""
    emb = model.encoder(images)
    cls_term = class_loss(model.image_classifier(emb), labels)
    if model.image_disc is None:
        return cls_term, emb.new_zeros(())
    from antispoof.discriminators import ClassConditionalDiscriminator

    disc_in = reverse_gradient(emb, model.grl_factor) if with_grl else emb
    if isinstance(model.image_disc, ClassConditionalDiscriminator):
        s_live, s_spoof, split = model.image_disc(disc_in, labels)
        live, spoof = domain_losses(
            s_live, s_spoof,
            [domain_indices[i] for i in split.live_rows],
            [domain_indices[i] for i in split.spoof_rows])
        return cls_term, live + spoof
    return cls_term, domain_cross_entropy(model.image_disc(disc_in), domain_indices)


def video_terms(model, clips, labels, domain_indices, with_grl=False):
    """(class term, unweighted domain term) of the video-path energy."""
    t, b = clips.shape[:2]
    emb = model.encoder(clips.reshape(t * b, *clips.shape[2:])).reshape(t, b, -1)
    feat = model.temporal(emb)
    cls_term = class_loss(model.video_classifier(feat), labels)
    if model.video_disc is None:
        return cls_term, feat.new_zeros(())
    disc_in = reverse_gradient(feat, model.grl_factor) if with_grl else feat
    s_live, s_spoof, split = model.video_disc(disc_in, labels)
    live, spoof = domain_losses(
        s_live, s_spoof,
        [domain_indices[i] for i in split.live_rows],
        [domain_indices[i] for i in split.spoof_rows])
    return cls_term, live + spoof


def finite_difference_check(model, terms_fn, owned_params, upstream_groups,
                            weight, grl_factor, coords_per_group=6,
                            step=1e-4, rel_tol=1e-3, seed=0):
    """Assert the training gradient matches composed central differences.

    ``terms_fn(with_grl)`` evaluates the energy terms; the analytic gradient
    is taken through the reversal layer exactly as a training step would.
    Returns the worst relative error over all checked coordinates.
    """
    model.eval()
    for p in model.parameters():
        p.grad = None
    cls_term, dom_term = terms_fn(True)
    (cls_term + weight * dom_term).backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    groups = sorted({key.split("/", 1)[0] for key in owned_params})
    for group in groups:
        coeff = weight * grl_factor if group in upstream_groups else weight
        params = {k: v for k, v in owned_params.items() if k.startswith(group + "/")}
        flat_sizes = [(k, v.numel()) for k, v in sorted(params.items())]
        total = sum(n for _, n in flat_sizes)
        want = min(coords_per_group, total)
        picks = rng.permutation(total)[:min(total, 4 * want + 8)]
        checked = 0
        for flat_index in (int(i) for i in picks):
            if checked >= want:
                break
            key, local = _locate(flat_sizes, flat_index)
            tensor = params[key]
            analytic = tensor.grad.reshape(-1)[local].item()

            def expected_fd(h):
                plus_c, plus_d = _eval_terms(terms_fn, tensor, local, h)
                minus_c, minus_d = _eval_terms(terms_fn, tensor, local, -h)
                fd_cls = (plus_c - minus_c) / (2 * h)
                fd_dom = (plus_d - minus_d) / (2 * h)
                return fd_cls + coeff * fd_dom

            fd_full = expected_fd(step)
            fd_half = expected_fd(step / 2)
            denom = max(abs(analytic), abs(fd_half), 1e-8)
            if abs(fd_full - fd_half) > 0.25 * rel_tol * denom:
                continue  # straddling a kink, pick another coordinate
            rel = abs(analytic - fd_half) / denom
            worst = max(worst, rel)
            assert rel <= rel_tol, (
                f"{key}[{local}]: autograd {analytic:.3e} vs composed finite "
                f"difference {fd_half:.3e} (rel {rel:.2e})")
            checked += 1
        assert checked >= min(want, max(1, total // 2)), (
            f"group {group}: only {checked} smooth coordinates found")
    return worst


def _locate(flat_sizes, flat_index):
    offset = 0
    for key, numel in flat_sizes:
        if flat_index < offset + numel:
            return key, flat_index - offset
        offset += numel
    raise IndexError(flat_index)


def _eval_terms(terms_fn, tensor, local, delta):
    with torch.no_grad():
        view = tensor.reshape(-1)
        original = view[local].item()
        view[local] = original + delta
        cls_term, dom_term = terms_fn(False)
        value = (cls_term.item(), dom_term.item())
        view[local] = original
    return value
