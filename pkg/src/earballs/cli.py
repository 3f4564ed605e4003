"""Command-line entry point tying the toolkit into reproducible workflows.

Every run resolves its configuration with precedence CLI flag > config file
> built-in default, writes a run manifest (resolved config, seed, input
hashes, output paths) into the output directory before any work starts, and
exits 0 on success, 2 on usage/configuration errors, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__, evaluation, testgen
from .audio import AudioClip, FeatureParams, write_clip
from .data import (
    load_audio_corpus,
    load_feature_table,
    save_feature_table,
    split_by_label,
    synth_audio,
    synth_source,
)
from .errors import ConfigurationError, EarballsError
from .models import generate_waveforms, load_checkpoint
from .training import TrainConfig, train

SEED_ENV_VAR = "EARBALLS_SEED"

TRAIN_FLAGS = [
    ("steps", int), ("batch_size", int), ("lr", float), ("beta1", float), ("beta2", float),
    ("d_updates_per_g", int), ("lambda_metric", float), ("lambda_gp", float), ("uri_p", float),
    ("target_metric", str), ("model_dim", int), ("output_len", int), ("phase_shuffle_n", int),
    ("sample_rate", int), ("log_every", int), ("val_every", int), ("checkpoint_every", int),
]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_input(path) -> str:
    path = Path(path)
    if path.is_file():
        return _sha256(path)
    if path.is_dir():
        h = hashlib.sha256()
        for child in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(child.relative_to(path)).encode())
            h.update(_sha256(child).encode())
        return h.hexdigest()
    raise FileNotFoundError(f"input not found: {path}")


def write_manifest(out_dir: Path, command: str, config: dict, seed, inputs: dict, outputs: list) -> Path:
    """Record the resolved run before any work begins."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "input_hashes": {name: _hash_input(p) for name, p in inputs.items()},
        "output_paths": [str(p) for p in outputs],
        "toolkit_version": __version__,
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):  # allow one [section] of grouping, e.g. [train]
            flat.update(value)
        else:
            flat[key] = value
    return flat


def _resolve_seed(args, file_config: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in file_config:
        return int(file_config["seed"])
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return 0


def _resolve_train_config(args) -> TrainConfig:
    file_config = _load_config_file(getattr(args, "config", None))
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(file_config) - known - {"seed"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    config = TrainConfig(seed=_resolve_seed(args, file_config))
    config = replace(config, **{k: v for k, v in file_config.items() if k in known and k != "seed"})
    overrides = {}
    for name, _type in TRAIN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        config = replace(config, **overrides)
    config.validate()
    return config


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (flag > file > default)")
    for name, ftype in TRAIN_FLAGS:
        flag = "--" + name.replace("_", "-")
        if name == "target_metric":
            parser.add_argument(flag, choices=("l2", "mfcc"), help="target audio metric")
        else:
            parser.add_argument(flag, type=ftype, help=f"training parameter {name}")


def _load_vectors(path):
    table = load_feature_table(path)
    return table


def cmd_synth_data(args) -> int:
    out = Path(args.out)
    rng_seed = _resolve_seed(args, {})
    config = {
        "clusters": args.clusters, "per_cluster": args.per_cluster, "dim": args.dim,
        "spread": args.spread, "clips": args.clips, "clip_len": args.clip_len,
        "sample_rate": args.sample_rate,
    }
    write_manifest(out, "synth-data", config, rng_seed, {}, [out / "features.csv", out / "audio"])
    rng = np.random.default_rng(rng_seed)
    table = synth_source(args.clusters, args.per_cluster, args.dim, args.spread, rng)
    save_feature_table(table, out / "features.csv")
    corpus = synth_audio(args.clips, args.clip_len, rng, args.sample_rate)
    audio_dir = out / "audio"
    audio_dir.mkdir(exist_ok=True)
    for i, clip in enumerate(corpus.clips):
        write_clip(clip, audio_dir / f"clip-{i:05d}.wav")
    print(f"wrote {len(table)} records and {len(corpus)} clips under {out}")
    return 0


def cmd_prepare_data(args) -> int:
    out = Path(args.out)
    seed = _resolve_seed(args, {})
    inputs = {"features": args.features}
    if args.audio_dir:
        inputs["audio_dir"] = args.audio_dir
    config = {
        "val_labels": args.val_labels, "test_labels": args.test_labels,
        "clip_len": args.clip_len, "sample_rate": args.sample_rate,
    }
    write_manifest(out, "prepare-data", config, seed, inputs,
                   [out / "train.csv", out / "val.csv", out / "test.csv", out / "audio"])
    rng = np.random.default_rng(seed)
    table = load_feature_table(args.features)
    train_t, val_t, test_t = split_by_label(table, rng, reserve=(args.val_labels, args.test_labels))
    save_feature_table(train_t, out / "train.csv")
    save_feature_table(val_t, out / "val.csv")
    save_feature_table(test_t, out / "test.csv")
    msg = f"split: {len(train_t)} train / {len(val_t)} val / {len(test_t)} test records"
    if args.audio_dir:
        corpus = load_audio_corpus(args.audio_dir, args.clip_len, rng, args.sample_rate)
        audio_out = out / "audio"
        audio_out.mkdir(exist_ok=True)
        for i, clip in enumerate(corpus.clips):
            write_clip(clip, audio_out / f"clip-{i:05d}.wav")
        msg += f"; {len(corpus)} clips preprocessed ({corpus.skipped} skipped)"
    print(msg)
    return 0


def cmd_train(args) -> int:
    config = _resolve_train_config(args)
    out = Path(args.out)
    inputs = {"features": args.features, "audio_dir": args.audio_dir}
    if args.val_features:
        inputs["val_features"] = args.val_features
    if args.config:
        inputs["config"] = args.config
    if args.resume:
        inputs["resume"] = args.resume
    write_manifest(out, "train", asdict(config), config.seed, inputs,
                   [out / "log.csv", out / "checkpoint.pt"])
    table = load_feature_table(args.features)
    val_table = load_feature_table(args.val_features) if args.val_features else None
    corpus_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC0]))
    corpus = load_audio_corpus(args.audio_dir, config.output_len, corpus_rng, config.sample_rate)
    state, log = train(table, corpus, config, val_table=val_table, out_dir=out, resume_from=args.resume)
    last = log.rows[-1] if log.rows else None
    summary = f"trained {state.step} generator steps ({state.d_steps} discriminator steps)"
    if last is not None and last.val_pc is not None:
        summary += f"; val pc {last.val_pc:.4f} mae {last.val_mae:.4f}"
    print(summary)
    return 0


def cmd_sonify(args) -> int:
    out = Path(args.out)
    write_manifest(out, "sonify", {"checkpoint": args.checkpoint}, None,
                   {"checkpoint": args.checkpoint, "vectors": args.vector_file}, [out])
    state, _ = load_checkpoint(args.checkpoint)
    table = _load_vectors(args.vector_file)
    if table.dimension != state.gen_config.input_dim:
        raise ConfigurationError(
            f"vectors are {table.dimension}-dimensional, model expects {state.gen_config.input_dim}"
        )
    waves = generate_waveforms(state, table.vectors()).numpy()
    for rec, wave in zip(table.records, waves):
        write_clip(AudioClip(wave, state.sample_rate), out / f"{rec.id}.wav")
    print(f"wrote {len(table)} sonifications to {out}")
    return 0


def cmd_evaluate(args) -> int:
    out = Path(args.out) if args.out else None
    manifest_dir = out.parent if out is not None else Path.cwd()
    write_manifest(manifest_dir, "evaluate",
                   {"metric": args.metric}, None,
                   {"checkpoint": args.checkpoint, "features": args.features},
                   [out] if out is not None else [])
    state, _ = load_checkpoint(args.checkpoint)
    table = load_feature_table(args.features)
    report = evaluation.evaluate_model(
        state, table, args.metric, model_id=args.checkpoint, test_set_id=args.features
    )
    text = report.to_text()
    sys.stdout.write(text)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    return 0


def cmd_sweep(args) -> int:
    config = _resolve_train_config(args)
    out = Path(args.out)
    values = [float(v) for v in args.values.split(",") if v != ""]
    inputs = {
        "features": args.features, "val_features": args.val_features,
        "test_features": args.test_features, "audio_dir": args.audio_dir,
    }
    write_manifest(out, "sweep", {**asdict(config), "parameter": args.parameter, "values": values},
                   config.seed, inputs, [out / "sweep.csv"])
    tables = (
        load_feature_table(args.features),
        load_feature_table(args.val_features),
        load_feature_table(args.test_features),
    )
    corpus_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC0]))
    corpus = load_audio_corpus(args.audio_dir, config.output_len, corpus_rng, config.sample_rate)
    rows = evaluation.run_sweep(tables, corpus, config, args.parameter, values, out)
    for row in rows:
        status = "failed: " + row.error if row.error else f"pc={row.report.pc:.4f} mae={row.report.mae:.4f}"
        print(f"{args.parameter}={row.value}: {status}")
    return 0


def cmd_make_test(args) -> int:
    out = Path(args.out)
    seed = _resolve_seed(args, {})
    write_manifest(out, "make-test", {"count": args.count}, seed,
                   {"checkpoint": args.checkpoint, "features": args.features}, [out])
    state, _ = load_checkpoint(args.checkpoint)
    table = load_feature_table(args.features)
    rng = np.random.default_rng(seed)
    for i in range(args.count):
        pkg = testgen.generate_test(state, table, rng, model_id=args.checkpoint, seed=seed)
        pkg_dir = out / f"package-{i:03d}"
        testgen.write_package(pkg, pkg_dir)
        check = testgen.check_package(pkg_dir)
        if not check.valid:
            raise EarballsError(f"emitted package failed validation: {check.problems}")
        print(f"{pkg_dir}: id {pkg.package_id}, counts {pkg.counts}, attempts {pkg.attempts}")
    return 0


def cmd_grade(args) -> int:
    out_dir = Path(args.out).parent if args.out else Path.cwd()
    write_manifest(out_dir, "grade", {}, None,
                   {f"keys{i}": k for i, k in enumerate(args.keys)},
                   [args.out] if args.out else [])
    keys = {}
    for key_path in args.keys:
        p = Path(key_path)
        candidates = [p] if p.is_file() else sorted(p.rglob("key.json"))
        for c in candidates:
            key = testgen.load_key(c)
            keys[key["package_id"]] = key
    if not keys:
        raise ConfigurationError("no key files found")
    responses = []
    for resp_path in args.responses:
        p = Path(resp_path)
        candidates = [p] if p.is_file() else sorted(p.rglob("*.json"))
        responses.extend(testgen.parse_response(c) for c in candidates)
    report = testgen.grade_responses(responses, keys)
    lines = [f"graded {len(report.participants)} responses, excluded {report.excluded} incomplete"]
    for model_id, score in report.per_model.items():
        lines.append(
            f"model {model_id or '(unnamed)'}: n={score.n} mean_hsa={score.mean_hsa:.4f} "
            f"hsa_range={score.hsa_min}-{score.hsa_max} mean_hsm={score.mean_hsm:.4f}"
        )
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earballs",
        description="Metric-preserving sonification toolkit",
    )
    parser.add_argument("--version", action="version", version=f"earballs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a desk-scale synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--clusters", type=int, default=8, help="number of source clusters")
    p.add_argument("--per-cluster", type=int, default=25, help="records per cluster")
    p.add_argument("--dim", type=int, default=16, help="feature dimension")
    p.add_argument("--spread", type=float, default=0.1, help="intra-cluster Gaussian scale")
    p.add_argument("--clips", type=int, default=500, help="number of audio clips")
    p.add_argument("--clip-len", type=int, default=4096, help="samples per clip")
    p.add_argument("--sample-rate", type=int, default=16000, help="clip sample rate")
    p.add_argument("--seed", type=int, help="random seed (or EARBALLS_SEED)")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("prepare-data", help="split a feature table and preprocess an audio corpus")
    p.add_argument("--features", required=True, help="feature table CSV")
    p.add_argument("--audio-dir", help="directory of 16 kHz mono WAVs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--clip-len", type=int, default=16384, help="preprocessed clip length")
    p.add_argument("--sample-rate", type=int, default=16000, help="expected WAV sample rate")
    p.add_argument("--val-labels", type=int, default=1, help="labels reserved for validation")
    p.add_argument("--test-labels", type=int, default=2, help="labels reserved for the test split")
    p.add_argument("--seed", type=int, help="random seed (or EARBALLS_SEED)")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="train a sonification model")
    p.add_argument("--features", required=True, help="training feature table CSV")
    p.add_argument("--val-features", help="validation feature table CSV")
    p.add_argument("--audio-dir", required=True, help="preprocessed target corpus directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="random seed (or EARBALLS_SEED)")
    p.add_argument("--resume", help="checkpoint to resume from")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sonify", help="sonify feature vectors into WAV files")
    p.add_argument("--checkpoint", required=True, help="model checkpoint")
    p.add_argument("--vector-file", required=True, help="feature table CSV to sonify")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sonify)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a test split")
    p.add_argument("--checkpoint", required=True, help="model checkpoint")
    p.add_argument("--features", required=True, help="test feature table CSV")
    p.add_argument("--metric", choices=("l2", "mfcc"), default="mfcc", help="target audio metric")
    p.add_argument("--out", help="write the report to this file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train/evaluate across lambda_metric or uri_p values")
    p.add_argument("--parameter", required=True, choices=evaluation.SWEEP_PARAMETERS,
                   help="which training parameter to sweep")
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 0,1,3")
    p.add_argument("--features", required=True, help="training feature table CSV")
    p.add_argument("--val-features", required=True, help="validation feature table CSV")
    p.add_argument("--test-features", required=True, help="test feature table CSV")
    p.add_argument("--audio-dir", required=True, help="preprocessed target corpus directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="random seed (or EARBALLS_SEED)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("make-test", help="generate listening-test packages")
    p.add_argument("--checkpoint", required=True, help="model checkpoint")
    p.add_argument("--features", required=True, help="test feature table CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=1, help="number of packages")
    p.add_argument("--seed", type=int, help="random seed (or EARBALLS_SEED)")
    p.set_defaults(func=cmd_make_test)

    p = sub.add_parser("grade", help="grade participant responses against package keys")
    p.add_argument("--keys", nargs="+", required=True, help="key files or package directories")
    p.add_argument("--responses", nargs="+", required=True, help="response files or directories")
    p.add_argument("--out", help="write the score report to this file")
    p.set_defaults(func=cmd_grade)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: MissingInput: {exc}", file=sys.stderr)
        return 2
    except EarballsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
