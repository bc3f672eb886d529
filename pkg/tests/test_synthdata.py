import hashlib
import json
import os
from dataclasses import fields, replace

import numpy as np
import pytest

from antispoof.data import LIVE, SPOOF
from antispoof.errors import ConfigError, DataError
from antispoof.synthdata import (DEFAULT_PRESET_ORDER, DOMAIN_PRESETS,
                                 DomainSpec, apply_domain, default_benchmark,
                                 domain_texture, generate_domain, generate_video,
                                 load_benchmark, make_dg_protocol, preset_spec,
                                 read_dataset, render_frame, sample_geometry,
                                 write_dataset, _draw_motion, _video_rng)


def pixel_digest(datasets):
    h = hashlib.sha256()
    for ds in datasets:
        for video in ds.videos:
            for frame in video.frames:
                h.update(frame.pixels.tobytes())
    return h.hexdigest()


# --- generation ----------------------------------------------------------------

def test_video_and_frame_counts(neutral_domain_spec, default_signal):
    ds = generate_domain(neutral_domain_spec, default_signal, n_videos=4,
                         frames_per_video=8, seed=0)
    assert len(ds.videos) == 4
    assert sum(len(v.frames) for v in ds.videos) == 32
    labels = [v.class_label for v in ds.videos]
    assert labels.count(LIVE) == 2 and labels.count(SPOOF) == 2


def test_same_seed_is_bitwise_identical(neutral_domain_spec, default_signal):
    a = generate_domain(neutral_domain_spec, default_signal, 4, 6, seed=9)
    b = generate_domain(neutral_domain_spec, default_signal, 4, 6, seed=9)
    assert pixel_digest([a]) == pixel_digest([b])
    c = generate_domain(neutral_domain_spec, default_signal, 4, 6, seed=10)
    assert pixel_digest([a]) != pixel_digest([c])


def test_neutral_pipeline_is_identity(default_signal):
    spec = DomainSpec(domain_id=0)  # unit gains, no blur, no noise, factor 1
    rng = _video_rng(3, 0, 0)
    texture = domain_texture(3, 0)
    geom = sample_geometry(default_signal, rng)
    motion = _draw_motion(default_signal, rng)
    gray = render_frame(default_signal, spec, LIVE, geom, motion, texture)
    out = apply_domain(gray, spec, rng)
    expected = np.repeat(gray[:, :, None], 3, axis=2).astype(np.float32)
    assert np.array_equal(out, expected)


def test_class_balance_with_odd_video_count(neutral_domain_spec, default_signal):
    ds = generate_domain(neutral_domain_spec, default_signal, 5, 4, seed=1)
    labels = [v.class_label for v in ds.videos]
    assert abs(labels.count(LIVE) - labels.count(SPOOF)) == 1


def test_spec_validation():
    with pytest.raises(ConfigError):
        DomainSpec(domain_id=0, color_cast=(0.4, 1.0, 1.0)).validate((32, 32))
    with pytest.raises(ConfigError):
        DomainSpec(domain_id=0, background_texture="plaid").validate((32, 32))
    with pytest.raises(ConfigError):
        DomainSpec(domain_id=0, capture_resolution=9).validate((32, 32))
    with pytest.raises(ConfigError):
        DomainSpec(domain_id=0, blur_sigma=-1.0).validate((32, 32))


def test_generate_domain_preconditions(neutral_domain_spec, default_signal):
    with pytest.raises(ConfigError):
        generate_domain(neutral_domain_spec, default_signal, 1, 4, seed=0)
    with pytest.raises(ConfigError):
        generate_domain(neutral_domain_spec, default_signal, 4, 0, seed=0)


def test_spoof_videos_are_frozen_and_live_move(neutral_domain_spec, default_signal):
    ds = generate_domain(neutral_domain_spec, default_signal, 4, 6, seed=2)
    for video in ds.videos:
        diffs = [np.abs(a.pixels - b.pixels).mean()
                 for a, b in zip(video.frames, video.frames[1:])]
        if video.class_label == SPOOF:
            assert max(diffs) < 0.02  # sensor noise only
        else:
            assert max(diffs) > 0.02  # jitter moves the face


def test_overlay_survives_every_preset_above_noise_floor(default_signal):
    """Spoof-minus-live difference after the pipeline stays measurable."""
    for domain_id, name in enumerate(DEFAULT_PRESET_ORDER):
        spec = preset_spec(name, domain_id)
        texture = domain_texture(5, domain_id)
        rng = _video_rng(5, domain_id, 0)
        geom = sample_geometry(default_signal, rng)
        geom["overlay_gain"] = 1.0
        motion = _draw_motion(default_signal, rng)
        live = render_frame(default_signal, spec, LIVE, geom, motion, texture)
        spoof = render_frame(default_signal, spec, SPOOF, geom, motion, texture)
        # same noise draws on both sides so the difference isolates the overlay
        piped_live = apply_domain(live, spec, np.random.default_rng(77))
        piped_spoof = apply_domain(spoof, spec, np.random.default_rng(77))
        diff = piped_spoof - piped_live
        peak = float(np.abs(diff).max())
        assert peak > 2 * spec.noise_sigma, (name, peak, spec.noise_sigma)
        # template-matching view: total overlay energy dwarfs the noise scale
        assert float(np.sqrt((diff ** 2).sum())) > 10 * spec.noise_sigma


def test_presets_differ_pairwise_in_two_fields():
    nuisance_fields = [f.name for f in fields(DomainSpec) if f.name != "domain_id"]
    names = list(DEFAULT_PRESET_ORDER)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            sa, sb = DOMAIN_PRESETS[a], DOMAIN_PRESETS[b]
            differing = [f for f in nuisance_fields if sa.get(f) != sb.get(f)]
            assert len(differing) >= 2, (a, b, differing)


def test_unknown_preset_rejected_with_listing():
    with pytest.raises(ConfigError) as err:
        preset_spec("nope", 0)
    for name in DEFAULT_PRESET_ORDER:
        assert name in str(err.value)


def test_default_benchmark_shape():
    datasets = default_benchmark(seed=0, n_videos=4, frames_per_video=4)
    assert [d.domain_id for d in datasets] == [0, 1, 2, 3]
    for ds in datasets:
        ds.validate(min_frames=4)


# --- protocol ----------------------------------------------------------------

def test_protocol_sources_are_complement(small_domains):
    protocol = make_dg_protocol(small_domains, target_id=3)
    assert protocol.source_domain_ids == (0, 1, 2)
    assert protocol.target_domain_id == 3
    assert protocol.domain_index(1) == 1


def test_protocol_val_fraction_arithmetic(neutral_domain_spec, default_signal):
    spec0 = replace(neutral_domain_spec, domain_id=0)
    domains = [generate_domain(replace(spec0, domain_id=i), default_signal, 10, 4, seed=i)
               for i in range(3)]
    protocol = make_dg_protocol(domains, target_id=2, val_fraction=0.2)
    for d in protocol.source_domain_ids:
        assert len(protocol.val_videos[d]) == 2
        assert len(protocol.train_videos[d]) == 8


def test_protocol_hygiene_no_target_leak(small_domains):
    protocol = make_dg_protocol(small_domains, target_id=2)
    test_keys = {(v.domain_id, v.video_id) for v in protocol.test_videos}
    for d in protocol.source_domain_ids:
        for v in protocol.train_videos[d] + protocol.val_videos[d]:
            assert (v.domain_id, v.video_id) not in test_keys
    # train and validation are disjoint at video granularity
    for d in protocol.source_domain_ids:
        train_ids = {v.video_id for v in protocol.train_videos[d]}
        val_ids = {v.video_id for v in protocol.val_videos[d]}
        assert not train_ids & val_ids


def test_protocol_preconditions(small_domains):
    with pytest.raises(DataError):
        make_dg_protocol(small_domains[:2], target_id=0)
    with pytest.raises(DataError):
        make_dg_protocol(small_domains, target_id=9)
    with pytest.raises(ConfigError):
        make_dg_protocol(small_domains, target_id=0, val_fraction=1.5)


# --- manifest round trip ----------------------------------------------------------------

def test_manifest_round_trip(tmp_path, neutral_domain_spec, default_signal):
    ds = generate_domain(neutral_domain_spec, default_signal, 4, 4, seed=5)
    write_dataset(ds, tmp_path)
    back = read_dataset(tmp_path / "domains" / "0")
    assert back.domain_id == ds.domain_id
    assert back.spec == ds.spec
    assert len(back.videos) == len(ds.videos)
    for original, loaded in zip(ds.videos, back.videos):
        assert (loaded.video_id, loaded.class_label) == (original.video_id,
                                                         original.class_label)
        for a, b in zip(original.frames, loaded.frames):
            assert b.frame_index == a.frame_index
            # 8-bit quantization bound
            assert np.abs(a.pixels - b.pixels).max() <= 0.5 / 255 + 1e-6


def test_external_manifest_folder_loads(tmp_path):
    from PIL import Image

    domain_dir = tmp_path / "domains" / "7"
    os.makedirs(domain_dir)
    records = []
    rng = np.random.default_rng(0)
    for vid, label in ((0, 0), (1, 1)):
        for f in range(3):
            name = f"ext_{vid}_{f}.png"
            Image.fromarray(rng.integers(0, 255, (32, 32, 3), dtype=np.uint8),
                            mode="RGB").save(domain_dir / name)
            records.append({"path": name, "class_label": label, "domain_id": 7,
                            "video_id": vid, "frame_index": f})
    with open(domain_dir / "manifest.json", "w") as fh:
        json.dump({"domain_id": 7, "records": records}, fh)
    ds = read_dataset(domain_dir)
    assert ds.domain_id == 7 and len(ds.videos) == 2
    assert ds.videos[0].frames[0].pixels.shape == (32, 32, 3)


def test_load_benchmark_requires_generated_tree(tmp_path):
    with pytest.raises(DataError):
        load_benchmark(tmp_path)


def test_generation_is_parallel_safe_per_video(neutral_domain_spec, default_signal):
    """A video rendered alone matches the same video rendered inside a batch."""
    texture = domain_texture(4, 0)
    alone = generate_video(neutral_domain_spec, default_signal, 3, SPOOF, 4, seed=4,
                           texture=texture)
    ds = generate_domain(neutral_domain_spec, default_signal, 6, 4, seed=4)
    inside = next(v for v in ds.videos if v.video_id == 3)
    for a, b in zip(alone.frames, inside.frames):
        assert np.array_equal(a.pixels, b.pixels)
