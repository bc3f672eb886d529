"""Command-line surface: generate, train, evaluate, ablate, embed, cam.

Every command is a pure function of its configuration file, seed and input
artifacts; outputs land in a per-run directory whose name embeds the config
hash, and repeated invocations reproduce the same bytes. Configuration files
are ``key = value`` text with strict key checking; command-line flags override
file values.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import fields as dataclass_fields

from . import __version__
from .analysis import export_embeddings, grad_cam, protocol_analysis_samples, save_activation_map
from .checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
from .data import LIVE
from .errors import (AntispoofError, ConfigError, DataError, NumericalError,
                     ShapeError, UsageError)
from .evaluation import evaluate_protocol
from .network import ALL_VARIANTS, SpoofNet
from .synthdata import (DEFAULT_PRESET_ORDER, DOMAIN_PRESETS,
                        BENCHMARK_FRAMES_PER_VIDEO, BENCHMARK_VIDEOS_PER_DOMAIN,
                        default_benchmark, load_benchmark, make_dg_protocol,
                        write_dataset)
from .trainer import TrainConfig, alternating_train, config_for_profile, write_history

DATA_ROOT_ENV = "ANTISPOOF_DATA_ROOT"

_TRAIN_KEYS = {f.name for f in dataclass_fields(TrainConfig)}

# configuration keys accepted per command; "out" is never hashed
_COMMAND_KEYS = {
    "generate": {"seed", "out", "presets", "videos_per_domain", "frames_per_video"},
    "train": _TRAIN_KEYS | {"out", "data", "target_domain", "val_fraction"},
    "evaluate": {"seed", "out", "data", "target_domain", "checkpoint", "val_fraction",
                 "profile", "sequence_length"},
    "ablate": _TRAIN_KEYS | {"out", "data", "targets", "variants", "num_seeds",
                             "val_fraction", "workers"},
    "embed": {"seed", "out", "data", "target_domain", "checkpoint", "val_fraction",
              "project", "max_points"},
    "cam": {"seed", "out", "data", "target_domain", "checkpoint", "val_fraction",
            "layer", "count", "target_class"},
}

_INT_KEYS = {"seed", "videos_per_domain", "frames_per_video", "target_domain",
             "ib_per_domain", "vb_clips_per_domain", "sequence_length", "max_steps",
             "eval_every", "num_seeds", "max_points", "count", "target_class", "workers"}
_FLOAT_KEYS = {"learning_rate", "momentum", "weight_decay", "lambda_grl", "lambda_ib",
               "lambda_vb", "dropout", "val_fraction"}
_BOOL_KEYS = {"project"}


def parse_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return values


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: {exc}") from None
    if key in _BOOL_KEYS:
        lowered = value.lower()
        if lowered not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"config key {key}: expected a boolean, got {value!r}")
        return lowered in ("true", "1", "yes")
    return value


def build_config(command: str, file_values: dict, overrides: dict) -> dict:
    allowed = _COMMAND_KEYS[command]
    unknown = sorted(set(file_values) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown config keys for {command!r}: {unknown}; allowed: {sorted(allowed)}")
    merged = dict(file_values)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return {key: _coerce(key, value) for key, value in merged.items()}


def config_hash(command: str, config: dict) -> str:
    hashable = {k: v for k, v in sorted(config.items()) if k != "out"}
    canonical = command + "\n" + "\n".join(f"{k} = {v}" for k, v in hashable.items())
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def make_run_dir(command: str, config: dict, force: bool) -> tuple[str, str]:
    out = config.get("out") or "runs"
    digest = config_hash(command, config)
    run_dir = os.path.join(os.fspath(out), f"{command}-{digest}")
    if os.path.isdir(run_dir) and os.listdir(run_dir) and not force:
        raise ConfigError(f"run directory {run_dir} exists and is not empty; use --force")
    os.makedirs(run_dir, exist_ok=True)
    _write_meta(run_dir, command, config, digest)
    return run_dir, digest


def _write_meta(run_dir: str, command: str, config: dict, digest: str) -> None:
    snapshot = {k: v for k, v in sorted(config.items()) if k != "out"}
    with open(os.path.join(run_dir, "config.txt"), "w") as fh:
        for key, value in snapshot.items():
            fh.write(f"{key} = {value}\n")
    meta = {"command": command, "config_hash": digest,
            "seed": snapshot.get("seed", 0), "version": __version__}
    with open(os.path.join(run_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _data_root(config: dict) -> str:
    data = config.get("data") or os.environ.get(DATA_ROOT_ENV)
    if not data:
        raise ConfigError(
            f"no dataset path: set 'data' in the config, pass --data, or export {DATA_ROOT_ENV}")
    return data


def _load_protocol(config: dict):
    domains = load_benchmark(_data_root(config))
    if "target_domain" not in config:
        raise ConfigError("missing 'target_domain' (which domain is held out)")
    return make_dg_protocol(domains, int(config["target_domain"]),
                            float(config.get("val_fraction", 0.2)))


def _train_config(config: dict) -> TrainConfig:
    kwargs = {k: v for k, v in config.items() if k in _TRAIN_KEYS}
    profile = kwargs.pop("profile", "tiny")
    return config_for_profile(profile, **kwargs)


def _restore_model(config: dict, num_domains: int) -> SpoofNet:
    if "checkpoint" not in config:
        raise ConfigError("missing 'checkpoint' path")
    ckpt = load_checkpoint(config["checkpoint"])
    cfg_profile = config.get("profile")
    if cfg_profile and cfg_profile != ckpt.meta["profile"]:
        raise ShapeError(
            f"checkpoint profile {ckpt.meta['profile']!r} does not match "
            f"configured profile {cfg_profile!r}")
    cfg = config_for_profile(ckpt.meta["profile"],
                             sequence_length=int(ckpt.meta["sequence_length"]),
                             variant=ckpt.meta["variant"])
    model = SpoofNet(cfg.resolved_profile(), cfg.variant,
                     num_domains=int(ckpt.meta["num_domains"]))
    if model.num_domains != num_domains:
        raise DataError(
            f"checkpoint was trained with {model.num_domains} source domains, "
            f"protocol has {num_domains}")
    apply_checkpoint(model, ckpt)
    return model


# ---------------------------------------------------------------------------
# commands

def cmd_generate(config: dict, force: bool) -> str:
    preset_names = [p.strip() for p in
                    str(config.get("presets", ",".join(DEFAULT_PRESET_ORDER))).split(",")]
    for name in preset_names:
        if name not in DOMAIN_PRESETS:
            raise ConfigError(
                f"unknown domain preset {name!r}, valid presets: {sorted(DOMAIN_PRESETS)}")
    run_dir, _ = make_run_dir("generate", config, force)
    datasets = default_benchmark(
        seed=int(config.get("seed", 0)),
        presets=tuple(preset_names),
        n_videos=int(config.get("videos_per_domain", BENCHMARK_VIDEOS_PER_DOMAIN)),
        frames_per_video=int(config.get("frames_per_video", BENCHMARK_FRAMES_PER_VIDEO)),
    )
    for dataset in datasets:
        write_dataset(dataset, run_dir)
    print(f"wrote {len(datasets)} domains under {run_dir}/domains")
    return run_dir


def cmd_train(config: dict, force: bool) -> str:
    protocol = _load_protocol(config)
    cfg = _train_config(config)
    run_dir, _ = make_run_dir("train", config, force)

    from .evaluation import image_head_validation
    result = alternating_train(protocol, cfg,
                               eval_fn=lambda model: image_head_validation(model, protocol))
    write_history(os.path.join(run_dir, "history.ndjson"), result.history)
    save_checkpoint(os.path.join(run_dir, "checkpoint.npz"), result.model,
                    step=cfg.max_steps)
    if result.best_state is not None:
        _save_state_checkpoint(os.path.join(run_dir, "best.npz"), result.model,
                               result.best_state, result.best_step)
    with open(os.path.join(run_dir, "validation.ndjson"), "w") as fh:
        for record in result.val_records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"trained {cfg.variant} for {cfg.max_steps} steps -> {run_dir}")
    return run_dir


def _save_state_checkpoint(path, model, state: dict, step: int) -> None:
    current = model.snapshot()
    model.load_snapshot(state)
    save_checkpoint(path, model, step=step)
    model.load_snapshot(current)


def cmd_evaluate(config: dict, force: bool) -> str:
    protocol = _load_protocol(config)
    model = _restore_model(config, protocol.num_source_domains)
    run_dir, digest = make_run_dir("evaluate", config, force)
    result = evaluate_protocol(model, protocol)
    payload = {"config_hash": digest, "seed": int(config.get("seed", 0)),
               "target_domain": protocol.target_domain_id}
    payload.update(result.as_record())
    with open(os.path.join(run_dir, "evaluation.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    sel = result.selected
    print(f"selected head {result.selected_head}: "
          f"test HTER {sel.test_report.hter:.4f}, AUC {sel.test_report.auc:.4f}")
    return run_dir


def cmd_ablate(config: dict, force: bool) -> str:
    from .ablation import run_ablation

    protocol_targets = config.get("targets")
    variants = config.get("variants")
    run_dir, digest = make_run_dir("ablate", config, force)
    table = run_ablation(
        data_root=_data_root(config),
        base_config=_train_config(config),
        targets=[int(t) for t in str(protocol_targets).split(",")] if protocol_targets else None,
        variant_names=[v.strip() for v in str(variants).split(",")] if variants else None,
        num_seeds=int(config.get("num_seeds", 3)),
        val_fraction=float(config.get("val_fraction", 0.2)),
        workers=int(config.get("workers", 0)),
    )
    payload = {"config_hash": digest, "rows": table.as_records()}
    with open(os.path.join(run_dir, "ablation.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    text = table.render()
    with open(os.path.join(run_dir, "ablation.txt"), "w") as fh:
        fh.write(text)
    print(text)
    return run_dir


def cmd_embed(config: dict, force: bool) -> str:
    protocol = _load_protocol(config)
    model = _restore_model(config, protocol.num_source_domains)
    run_dir, _ = make_run_dir("embed", config, force)
    samples = protocol_analysis_samples(protocol)
    max_points = int(config.get("max_points", 2000))
    if len(samples) > max_points:
        stride = -(-len(samples) // max_points)
        samples = samples[::stride]
    dump = export_embeddings(model, samples, project=bool(config.get("project", True)),
                             seed=int(config.get("seed", 0)))
    dump.write_tsv(os.path.join(run_dir, "embeddings.tsv"))
    print(f"wrote {len(dump.rows)} embedding rows -> {run_dir}/embeddings.tsv")
    return run_dir


def cmd_cam(config: dict, force: bool) -> str:
    protocol = _load_protocol(config)
    model = _restore_model(config, protocol.num_source_domains)
    run_dir, _ = make_run_dir("cam", config, force)
    count = int(config.get("count", 4))
    layer = config.get("layer")
    images = protocol.test_images()
    live = [im for im in images if im.class_label == LIVE][:(count + 1) // 2]
    spoof = [im for im in images if im.class_label != LIVE][:count // 2]
    for image in live + spoof:
        target = int(config.get("target_class", image.class_label))
        amap = grad_cam(model, image, target_class=target, conv_layer=layer)
        stem = f"cam_d{image.domain_id}v{image.video_id:03d}f{image.frame_index:03d}" \
               f"_c{image.class_label}"
        save_activation_map(amap, image,
                            os.path.join(run_dir, stem + "_map.png"),
                            os.path.join(run_dir, stem + "_overlay.png"))
    print(f"wrote {len(live) + len(spoof)} activation maps -> {run_dir}")
    return run_dir


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="base output directory")
    parser.add_argument("--force", action="store_true",
                        help="overwrite an existing non-empty run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antispoof",
        description="Domain-generalized face anti-spoofing: synthetic benchmark, "
                    "training, evaluation and analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="materialize the synthetic benchmark")
    _add_common(p)
    p.add_argument("--presets", default=None,
                   help=f"comma-separated domain presets (default: all of "
                        f"{', '.join(DEFAULT_PRESET_ORDER)})")

    p = sub.add_parser("train", help="train one model variant")
    _add_common(p)
    p.add_argument("--data", default=None, help="dataset root (generate output)")
    p.add_argument("--target-domain", dest="target_domain", type=int, default=None)
    p.add_argument("--variant", default=None,
                   choices=[v.name for v in ALL_VARIANTS])
    p.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    p.add_argument("--profile", default=None)

    p = sub.add_parser("evaluate", help="score a checkpoint on the held-out domain")
    _add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--target-domain", dest="target_domain", type=int, default=None)
    p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("ablate", help="train and evaluate the variant grid")
    _add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--targets", default=None, help="comma-separated target domains")
    p.add_argument("--variants", default=None, help="comma-separated variant names")
    p.add_argument("--num-seeds", dest="num_seeds", type=int, default=None)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    p.add_argument("--profile", default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("embed", help="export embeddings with optional 2-D projection")
    _add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--target-domain", dest="target_domain", type=int, default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--no-project", dest="project", action="store_const", const="false",
                   default=None, help="skip the 2-D projection columns")

    p = sub.add_parser("cam", help="class activation maps for target samples")
    _add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--target-domain", dest="target_domain", type=int, default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--layer", default=None, help="encoder layer feeding the map")
    return parser


_HANDLERS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "embed": cmd_embed,
    "cam": cmd_cam,
}

_OVERRIDE_KEYS = ("seed", "out", "data", "target_domain", "variant", "max_steps",
                  "profile", "presets", "checkpoint", "targets", "variants",
                  "num_seeds", "layer", "project", "workers")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        overrides = {key: getattr(args, key) for key in _OVERRIDE_KEYS
                     if hasattr(args, key)}
        config = build_config(args.command, file_values, overrides)
        _HANDLERS[args.command](config, force=args.force)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except AntispoofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
