"""Waveform generator and discriminator networks plus their loss terms.

The generator projects a feature vector to a short base sequence and
upsamples it through strided transposed convolutions to a tanh-bounded
waveform; the discriminator mirrors it with strided convolutions, phase
shuffle between layers, and a single unbounded score per clip.  Losses follow
the Wasserstein objective with gradient penalty, with the geometric
preservation term added on the generator side.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
from torch import nn

from . import geometry
from .audio import DEFAULT_SAMPLE_RATE, AudioClip, FeatureParams, mel_feature_tensor
from .errors import ConfigurationError, ShapeError

CHECKPOINT_FORMAT = "earballs-checkpoint"
CHECKPOINT_VERSION = 1

BASE_LEN = 16  # sequence length entering the first upsampling layer


def _layer_count(output_len: int, upsample_factor: int) -> int:
    if output_len < BASE_LEN * upsample_factor:
        raise ConfigurationError(f"output_len {output_len} too short for base length {BASE_LEN}")
    layers = round(math.log(output_len / BASE_LEN, upsample_factor))
    if BASE_LEN * upsample_factor**layers != output_len:
        raise ConfigurationError(
            f"output_len must be {BASE_LEN} * {upsample_factor}^k for integer k, got {output_len}"
        )
    return layers


@dataclass
class GeneratorConfig:
    input_dim: int = 128
    model_dim: int = 64
    output_len: int = 16384
    kernel: int = 25
    upsample_factor: int = 4

    @property
    def layers(self) -> int:
        return _layer_count(self.output_len, self.upsample_factor)


@dataclass
class DiscriminatorConfig:
    model_dim: int = 64
    input_len: int = 16384
    kernel: int = 25
    stride: int = 4
    phase_shuffle_n: int = 2

    @property
    def layers(self) -> int:
        return _layer_count(self.input_len, self.stride)


def phase_shuffle(activations: torch.Tensor, n: int, rng: np.random.Generator) -> torch.Tensor:
    """Shift each feature map by a uniform integer in [-n, n], reflect-padded."""
    if n < 0:
        raise ConfigurationError(f"phase shuffle radius must be >= 0, got {n}")
    if n == 0:
        return activations
    b, c, t = activations.shape
    shifts = torch.as_tensor(rng.integers(-n, n + 1, size=(b, c)), device=activations.device)
    idx = torch.arange(t, device=activations.device)[None, None, :] - shifts[:, :, None]
    idx = idx.abs()  # reflect at the left edge
    overrun = idx - (t - 1)
    idx = torch.where(overrun > 0, t - 1 - overrun, idx)
    return activations.gather(2, idx)


class WaveGenerator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        layers = config.layers
        c0 = config.model_dim * 2 ** (layers - 1)
        self.base_channels = c0
        self.project = nn.Linear(config.input_dim, BASE_LEN * c0)
        # kernel 25 / stride 4 upsampling needs pad 11 + output pad 1 for an exact 4x
        out_pad = (config.kernel - config.upsample_factor) % 2
        pad = (config.kernel - config.upsample_factor + out_pad) // 2
        ups = []
        channels = c0
        for i in range(layers):
            out_channels = 1 if i == layers - 1 else channels // 2
            ups.append(
                nn.ConvTranspose1d(
                    channels, out_channels, config.kernel,
                    stride=config.upsample_factor, padding=pad, output_padding=out_pad,
                )
            )
            channels = out_channels
        self.upsample = nn.ModuleList(ups)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ShapeError(
                f"generator expects (batch, {self.config.input_dim}) inputs, got {tuple(x.shape)}"
            )
        h = torch.relu(self.project(x)).view(x.shape[0], self.base_channels, BASE_LEN)
        for i, up in enumerate(self.upsample):
            h = up(h)
            if i < len(self.upsample) - 1:
                h = torch.relu(h)
        return torch.tanh(h).squeeze(1)


class WaveDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        layers = config.layers
        # symmetric padding that keeps length at exactly input/stride per layer
        pad = (config.kernel - config.stride + (config.kernel - config.stride) % 2) // 2
        convs = []
        channels = 1
        for i in range(layers):
            out_channels = config.model_dim * 2**i
            convs.append(nn.Conv1d(channels, out_channels, config.kernel, stride=config.stride, padding=pad))
            channels = out_channels
        self.convs = nn.ModuleList(convs)
        self.score = nn.Linear(channels * BASE_LEN, 1)

    def forward(self, x: torch.Tensor, shuffle_rng: np.random.Generator | None = None) -> torch.Tensor:
        if x.ndim != 2 or x.shape[1] != self.config.input_len:
            raise ShapeError(
                f"discriminator expects (batch, {self.config.input_len}) clips, got {tuple(x.shape)}"
            )
        h = x.unsqueeze(1)
        last = len(self.convs) - 1
        for i, conv in enumerate(self.convs):
            h = torch.nn.functional.leaky_relu(conv(h), 0.2)
            if shuffle_rng is not None and i < last:
                h = phase_shuffle(h, self.config.phase_shuffle_n, shuffle_rng)
        return self.score(h.flatten(1)).squeeze(1)


@dataclass
class ModelState:
    """Generator + discriminator with optimizer moments and step counters."""

    generator: WaveGenerator
    discriminator: WaveDiscriminator
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    step: int = 0
    d_steps: int = 0
    opt_g: torch.optim.Optimizer | None = None
    opt_d: torch.optim.Optimizer | None = None
    feature_params: FeatureParams = field(default_factory=FeatureParams)
    sample_rate: int = DEFAULT_SAMPLE_RATE

    @classmethod
    def initialize(
        cls,
        gen_config: GeneratorConfig,
        disc_config: DiscriminatorConfig | None = None,
        seed: int = 0,
        feature_params: FeatureParams | None = None,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
    ) -> "ModelState":
        if disc_config is None:
            disc_config = DiscriminatorConfig(model_dim=gen_config.model_dim, input_len=gen_config.output_len)
        if disc_config.input_len != gen_config.output_len:
            raise ConfigurationError(
                f"discriminator input_len {disc_config.input_len} != generator output_len {gen_config.output_len}"
            )
        init_rng = torch.Generator().manual_seed(seed)
        torch.manual_seed(int(torch.randint(0, 2**62, (1,), generator=init_rng).item()))
        return cls(
            generator=WaveGenerator(gen_config),
            discriminator=WaveDiscriminator(disc_config),
            gen_config=gen_config,
            disc_config=disc_config,
            feature_params=feature_params or FeatureParams(),
            sample_rate=sample_rate,
        )

    def attach_optimizers(self, lr: float, beta1: float, beta2: float) -> None:
        self.opt_g = torch.optim.Adam(self.generator.parameters(), lr=lr, betas=(beta1, beta2))
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(), lr=lr, betas=(beta1, beta2))


def _module_dtype(module: nn.Module) -> torch.dtype:
    return next(module.parameters()).dtype


def _input_tensor(state: ModelState, inputs) -> torch.Tensor:
    x = torch.as_tensor(np.asarray(inputs), dtype=_module_dtype(state.generator))
    if x.ndim == 1:
        x = x.unsqueeze(0)
    if not torch.isfinite(x).all():
        raise ShapeError("generator inputs contain non-finite values")
    return x


def generate_waveforms(state: ModelState, inputs) -> torch.Tensor:
    """Frozen-parameter inference: (batch, output_len) waveforms in [-1, 1]."""
    x = _input_tensor(state, inputs)
    with torch.no_grad():
        return state.generator(x)


def generate(state: ModelState, inputs) -> list[AudioClip]:
    """Sonify a batch of feature vectors into audio clips."""
    waves = generate_waveforms(state, inputs).numpy()
    return [AudioClip(w, state.sample_rate) for w in waves]


def discriminate(state: ModelState, clips) -> np.ndarray:
    """Score a batch of clips; one finite scalar per clip."""
    if isinstance(clips, (list, tuple)) and clips and isinstance(clips[0], AudioClip):
        clips = np.stack([c.samples for c in clips])
    x = torch.as_tensor(np.asarray(clips), dtype=torch.float32)
    if x.ndim == 1:
        x = x.unsqueeze(0)
    with torch.no_grad():
        return state.discriminator(x).numpy()


def _discriminator_of(model) -> nn.Module:
    return model.discriminator if isinstance(model, ModelState) else model


def gradient_penalty(
    model,
    real_batch: torch.Tensor,
    fake_batch: torch.Tensor,
    rng: np.random.Generator,
    shuffle_rng: np.random.Generator | None = None,
) -> torch.Tensor:
    """Mean over the batch of (||grad_x D(x_hat)||_2 - 1)^2.

    x_hat interpolates real and fake clips with a uniform per-sample factor.
    """
    disc = _discriminator_of(model)
    if real_batch.shape != fake_batch.shape:
        raise ShapeError(f"real/fake batch shapes differ: {tuple(real_batch.shape)} vs {tuple(fake_batch.shape)}")
    eps_np = rng.uniform(size=(real_batch.shape[0], 1))
    eps = torch.as_tensor(eps_np, dtype=real_batch.dtype, device=real_batch.device)
    mixed = (eps * real_batch + (1.0 - eps) * fake_batch).detach().requires_grad_(True)
    if shuffle_rng is not None:
        scores = disc(mixed, shuffle_rng)
    else:
        scores = disc(mixed)
    grads = torch.autograd.grad(scores.sum(), mixed, create_graph=True)[0]
    norms = grads.flatten(1).norm(dim=1)
    return ((norms - 1.0) ** 2).mean()


def generator_loss(
    state: ModelState,
    feature_batch,
    lambda_metric: float,
    source_metric: str = "euclidean",
    target_metric: str = "mfcc",
    uri_flag: bool = False,
    return_parts: bool = False,
):
    """Generator objective: -mean(D(G(x))) + lambda * metric preservation.

    For batches of undiscriminated random inputs (``uri_flag``) the
    adversarial term is dropped and only the weighted metric term remains.
    """
    x = _input_tensor(state, feature_batch)
    out = state.generator(x)
    if target_metric == "mfcc":
        out_points = mel_feature_tensor(out, state.feature_params, state.sample_rate)
        point_metric = "squared-feature-frame"
    elif target_metric == "l2":
        out_points, point_metric = out, "euclidean"
    else:
        raise ValueError(f"unknown target metric {target_metric!r}")
    metric_term = geometry.metric_loss(x.detach(), out_points, source_metric, point_metric)
    if uri_flag:
        loss = lambda_metric * metric_term
        adv = 0.0
    else:
        adv_term = -state.discriminator(out).mean()
        loss = adv_term + lambda_metric * metric_term
        adv = float(adv_term.detach())
    if return_parts:
        return loss, {"adversarial": adv, "metric": float(metric_term.detach())}
    return loss


def discriminator_loss(
    state: ModelState,
    feature_batch,
    audio_batch,
    lambda_gp: float,
    rng: np.random.Generator | None = None,
    shuffle_rng: np.random.Generator | None = None,
) -> torch.Tensor:
    """Critic objective: mean D(G(x)) - mean D(a) + lambda_gp * gradient penalty."""
    x = _input_tensor(state, feature_batch)
    real = torch.as_tensor(np.asarray(audio_batch), dtype=_module_dtype(state.discriminator))
    if real.ndim == 1:
        real = real.unsqueeze(0)
    if real.shape[0] != x.shape[0]:
        raise ShapeError(f"feature batch of {x.shape[0]} but audio batch of {real.shape[0]}")
    with torch.no_grad():
        fake = state.generator(x)
    disc = state.discriminator
    if shuffle_rng is not None:
        scores = disc(torch.cat([fake, real]), shuffle_rng)
    else:
        scores = disc(torch.cat([fake, real]))
    n = fake.shape[0]
    loss = scores[:n].mean() - scores[n:].mean()
    if lambda_gp != 0.0:
        if rng is None:
            raise ConfigurationError("gradient penalty requires an rng for the interpolation draw")
        loss = loss + lambda_gp * gradient_penalty(state, real, fake, rng, shuffle_rng)
    return loss


def save_checkpoint(state: ModelState, path, extra: dict | None = None) -> None:
    """Write a self-describing checkpoint (configs, tensors, moments, counters)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "gen_config": asdict(state.gen_config),
        "disc_config": asdict(state.disc_config),
        "feature_params": asdict(state.feature_params),
        "sample_rate": state.sample_rate,
        "step": state.step,
        "d_steps": state.d_steps,
        "generator": state.generator.state_dict(),
        "discriminator": state.discriminator.state_dict(),
        "opt_g": state.opt_g.state_dict() if state.opt_g is not None else None,
        "opt_d": state.opt_d.state_dict() if state.opt_d is not None else None,
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[ModelState, dict]:
    """Load a checkpoint; returns (state, extra). Optimizers restore lazily."""
    payload = torch.load(path, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path}: not an earballs checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    gen_config = GeneratorConfig(**payload["gen_config"])
    disc_config = DiscriminatorConfig(**payload["disc_config"])
    state = ModelState(
        generator=WaveGenerator(gen_config),
        discriminator=WaveDiscriminator(disc_config),
        gen_config=gen_config,
        disc_config=disc_config,
        step=payload["step"],
        d_steps=payload["d_steps"],
        feature_params=FeatureParams(**payload["feature_params"]),
        sample_rate=payload["sample_rate"],
    )
    state.generator.load_state_dict(payload["generator"])
    state.discriminator.load_state_dict(payload["discriminator"])
    state._opt_payload = (payload["opt_g"], payload["opt_d"])  # restored by attach_optimizers callers
    return state, payload.get("extra", {})


def restore_optimizers(state: ModelState, lr: float, beta1: float, beta2: float) -> None:
    """Attach Adam optimizers, reloading moments captured in the checkpoint."""
    state.attach_optimizers(lr, beta1, beta2)
    payload = getattr(state, "_opt_payload", None)
    if payload is not None:
        opt_g_sd, opt_d_sd = payload
        if opt_g_sd is not None:
            state.opt_g.load_state_dict(opt_g_sd)
        if opt_d_sd is not None:
            state.opt_d.load_state_dict(opt_d_sd)
