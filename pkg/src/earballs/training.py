"""Training loop: URI batch construction, 5:1 alternating updates, logging.

Randomness is split into per-purpose streams (batch choice, URI draws,
gradient-penalty interpolation, phase shuffle) so that toggling one feature
never perturbs the others.  All stream states travel with checkpoints, which
makes a checkpointed-and-resumed run bit-identical to an uninterrupted one.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import geometry
from .audio import FeatureParams, mel_feature_tensor
from .data import AudioCorpus, FeatureTable
from .errors import ConfigurationError, SamplingError
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    ModelState,
    discriminator_loss,
    generate_waveforms,
    generator_loss,
    load_checkpoint,
    restore_optimizers,
    save_checkpoint,
)

LOG_HEADER = "step,g_loss,d_loss,metric_loss,val_pc,val_mae,uri_flag"

RNG_PURPOSES = ("batch", "uri", "gp", "shuffle")


@dataclass
class TrainConfig:
    steps: int = 30000
    batch_size: int = 64
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    d_updates_per_g: int = 5
    lambda_metric: float | None = None  # None: 3 for the mfcc variant, 10 for l2
    lambda_gp: float = 10.0
    uri_p: float = 0.5
    target_metric: str = "mfcc"
    seed: int = 0
    model_dim: int = 64
    output_len: int = 16384
    phase_shuffle_n: int = 2
    sample_rate: int = 16000
    feature_params: FeatureParams = field(default_factory=FeatureParams)
    log_every: int = 100
    val_every: int = 500
    checkpoint_every: int = 0  # 0: only the final checkpoint

    def resolved_lambda_metric(self) -> float:
        if self.lambda_metric is not None:
            return self.lambda_metric
        return 3.0 if self.target_metric == "mfcc" else 10.0

    def validate(self) -> None:
        if self.target_metric not in ("l2", "mfcc"):
            raise ConfigurationError(f"target_metric must be l2 or mfcc, got {self.target_metric!r}")
        if not 0.0 <= self.uri_p <= 1.0:
            raise ConfigurationError(f"uri_p must be in [0, 1], got {self.uri_p}")
        for name in ("steps", "batch_size", "d_updates_per_g"):
            if getattr(self, name) < 0 or (name != "steps" and getattr(self, name) < 1):
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")


@dataclass
class LogRow:
    step: int
    g_loss: float
    d_loss: float
    metric_loss: float
    val_pc: float | None
    val_mae: float | None
    uri_flag: bool

    def to_csv(self) -> str:
        def num(x):
            return "" if x is None else repr(float(x))

        flag = "true" if self.uri_flag else "false"
        return (
            f"{self.step},{num(self.g_loss)},{num(self.d_loss)},"
            f"{num(self.metric_loss)},{num(self.val_pc)},{num(self.val_mae)},{flag}"
        )


@dataclass
class TrainLog:
    rows: list[LogRow] = field(default_factory=list)
    g_steps: int = 0
    d_steps: int = 0
    d_uri_batches: int = 0  # must stay 0: URI never reaches the discriminator

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(LOG_HEADER + "\n")
        for row in self.rows:
            buf.write(row.to_csv() + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def make_batch(
    table: FeatureTable,
    batch_size: int,
    uri_p: float,
    rng: np.random.Generator,
    uri_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, bool]:
    """One generator batch: dataset records or uniform unit-sphere samples.

    With probability ``uri_p`` the whole batch is drawn from the unit sphere
    (uri_flag true); otherwise it is ``batch_size`` records sampled without
    replacement (uri_flag false).  The batch never mixes the two sources.
    """
    uri_rng = uri_rng if uri_rng is not None else rng
    if len(table) == 0:
        raise SamplingError("empty feature table")
    if float(uri_rng.uniform()) < uri_p:
        return geometry.sample_unit_sphere(batch_size, table.dimension, uri_rng).astype(np.float32), True
    return _draw_records(table, batch_size, rng), False


def _draw_records(table: FeatureTable, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    if batch_size > len(table):
        raise SamplingError(f"batch_size {batch_size} exceeds dataset size {len(table)}")
    idx = rng.choice(len(table), size=batch_size, replace=False)
    return table.vectors()[idx]


def validation_metrics(state: ModelState, table: FeatureTable, target_metric: str) -> tuple[float, float]:
    """(pc, mae) of the frozen model on a held-out table."""
    waves = generate_waveforms(state, table.vectors())
    if target_metric == "mfcc":
        with torch.no_grad():
            points = mel_feature_tensor(waves, state.feature_params, state.sample_rate).numpy()
        point_metric = "squared-feature-frame"
    else:
        points, point_metric = waves.numpy(), "euclidean"
    src = table.vectors()
    pc = geometry.pearson_distance_correlation(src, points, "euclidean", point_metric)
    mae = geometry.metric_loss(src, points, "euclidean", point_metric)
    return pc, mae


def _make_streams(seed: int) -> tuple[int, dict[str, np.random.Generator]]:
    children = np.random.SeedSequence(seed).spawn(len(RNG_PURPOSES) + 1)
    init_seed = int(children[0].generate_state(1)[0])
    streams = {
        name: np.random.Generator(np.random.PCG64(ss))
        for name, ss in zip(RNG_PURPOSES, children[1:])
    }
    return init_seed, streams


def _stream_states(streams: dict) -> dict:
    return {name: gen.bit_generator.state for name, gen in streams.items()}


def _restore_streams(states: dict) -> dict[str, np.random.Generator]:
    streams = {}
    for name in RNG_PURPOSES:
        gen = np.random.Generator(np.random.PCG64())
        gen.bit_generator.state = states[name]
        streams[name] = gen
    return streams


def train(
    train_table: FeatureTable,
    corpus: AudioCorpus,
    config: TrainConfig,
    val_table: FeatureTable | None = None,
    out_dir=None,
    resume_from=None,
) -> tuple[ModelState, TrainLog]:
    """Run the alternating WGAN-GP schedule for ``config.steps`` generator updates.

    Before each generator update the discriminator is updated
    ``d_updates_per_g`` times on fresh non-URI feature batches paired with
    fresh audio batches.  Returns the final state and the structured log;
    when ``out_dir`` is given, also writes ``log.csv`` and checkpoints there.
    """
    config.validate()
    if len(train_table) == 0:
        raise ConfigurationError("training feature table is empty")
    if len(corpus) == 0:
        raise ConfigurationError("audio corpus is empty")
    if config.batch_size > len(train_table):
        raise ConfigurationError(
            f"batch_size {config.batch_size} exceeds training table size {len(train_table)}"
        )
    if config.batch_size > len(corpus):
        raise ConfigurationError(f"batch_size {config.batch_size} exceeds corpus size {len(corpus)}")
    clip_lens = {len(c) for c in corpus.clips}
    if clip_lens != {config.output_len}:
        raise ConfigurationError(
            f"corpus clip lengths {sorted(clip_lens)} do not match output_len {config.output_len}"
        )

    lam = config.resolved_lambda_metric()
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    last_val: tuple[float, float] | None = None
    if resume_from is not None:
        state, extra = load_checkpoint(resume_from)
        if state.gen_config.output_len != config.output_len:
            raise ConfigurationError(
                f"checkpoint generates {state.gen_config.output_len} samples "
                f"but the config asks for {config.output_len}"
            )
        restore_optimizers(state, config.lr, config.beta1, config.beta2)
        streams = _restore_streams(extra["rng"])
        if extra.get("last_val") is not None:
            last_val = tuple(extra["last_val"])
    else:
        init_seed, streams = _make_streams(config.seed)
        gen_config = GeneratorConfig(
            input_dim=train_table.dimension, model_dim=config.model_dim, output_len=config.output_len
        )
        disc_config = DiscriminatorConfig(
            model_dim=config.model_dim, input_len=config.output_len,
            phase_shuffle_n=config.phase_shuffle_n,
        )
        state = ModelState.initialize(
            gen_config, disc_config, seed=init_seed,
            feature_params=config.feature_params, sample_rate=config.sample_rate,
        )
        state.attach_optimizers(config.lr, config.beta1, config.beta2)
        if val_table is not None and len(val_table) >= 2 and config.steps > 0:
            last_val = validation_metrics(state, val_table, config.target_metric)

    if state.gen_config.input_dim != train_table.dimension:
        raise ConfigurationError(
            f"model expects {state.gen_config.input_dim}-dim features, table has {train_table.dimension}"
        )

    audio = torch.as_tensor(corpus.waveforms(), dtype=torch.float32)
    log = TrainLog()

    def checkpoint(path) -> None:
        save_checkpoint(
            state, path,
            extra={"rng": _stream_states(streams), "last_val": list(last_val) if last_val else None},
        )

    while state.step < config.steps:
        for _ in range(config.d_updates_per_g):
            fb = _draw_records(train_table, config.batch_size, streams["batch"])
            ai = streams["batch"].choice(len(corpus), size=config.batch_size, replace=False)
            d_loss = discriminator_loss(
                state, fb, audio[ai], config.lambda_gp,
                rng=streams["gp"], shuffle_rng=streams["shuffle"],
            )
            state.opt_d.zero_grad()
            d_loss.backward()
            state.opt_d.step()
            state.d_steps += 1
            log.d_steps += 1

        gb, uri_flag = make_batch(
            train_table, config.batch_size, config.uri_p, streams["batch"], uri_rng=streams["uri"]
        )
        g_loss, parts = generator_loss(
            state, gb, lam, target_metric=config.target_metric, uri_flag=uri_flag, return_parts=True,
        )
        state.opt_g.zero_grad()
        g_loss.backward()
        state.opt_g.step()
        state.step += 1
        log.g_steps += 1

        if val_table is not None and len(val_table) >= 2 and state.step % config.val_every == 0:
            last_val = validation_metrics(state, val_table, config.target_metric)

        if state.step % config.log_every == 0 or state.step == config.steps:
            log.rows.append(
                LogRow(
                    step=state.step,
                    g_loss=float(g_loss.detach()),
                    d_loss=float(d_loss.detach()),
                    metric_loss=parts["metric"],
                    val_pc=last_val[0] if last_val else None,
                    val_mae=last_val[1] if last_val else None,
                    uri_flag=uri_flag,
                )
            )

        if out_dir is not None and config.checkpoint_every and state.step % config.checkpoint_every == 0:
            checkpoint(out_dir / f"checkpoint-{state.step:06d}.pt")

    if out_dir is not None:
        checkpoint(out_dir / "checkpoint.pt")
        log.write(out_dir / "log.csv")
    return state, log


def desk_config(**overrides) -> TrainConfig:
    """Reduced configuration that trains end to end on commodity CPUs."""
    base = TrainConfig(
        steps=2000,
        batch_size=16,
        model_dim=32,
        output_len=4096,
        target_metric="mfcc",
        uri_p=0.5,
        log_every=50,
        val_every=250,
    )
    return replace(base, **overrides)
