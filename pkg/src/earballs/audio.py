"""Waveform I/O and the differentiable mel-feature pipeline.

The feature extractor is a log mel spectrogram: magnitude short-time spectrum
(Hann window), triangular filterbank spaced uniformly on the mel scale, then
a floored logarithm.  An orthonormal DCT-II across bands can be enabled via
``FeatureParams.apply_dct`` for true cepstral coefficients.

Two clip-level distances are provided: plain L2 on samples, and the squared
L2 difference of mel features (the psychoacoustic target metric).
"""

from __future__ import annotations

import math
import wave as _wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import DomainError, FormatError, ShapeError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_CLIP_LEN = 16384

AUDIO_METRIC_MODES = ("l2", "mfcc")


@dataclass
class FeatureParams:
    """Mel feature extraction parameters."""

    bands: int = 80
    f_min: float = 80.0
    f_max: float = 7600.0
    window: int = 1024
    fft_length: int = 1024
    step: int = 256
    log_floor: float = 1e-6
    apply_dct: bool = False

    def validate(self, sample_rate: int) -> None:
        if not (0 <= self.f_min < self.f_max):
            raise DomainError(f"need 0 <= f_min < f_max, got [{self.f_min}, {self.f_max}]")
        if self.f_max > sample_rate / 2:
            raise DomainError(f"f_max {self.f_max} above Nyquist for rate {sample_rate}")
        if self.window > self.fft_length:
            raise DomainError(f"window {self.window} exceeds fft_length {self.fft_length}")
        if self.log_floor <= 0:
            raise DomainError("log_floor must be positive")

    def frame_count(self, clip_len: int) -> int:
        if clip_len < self.window:
            raise ShapeError(f"clip of {clip_len} samples is shorter than the {self.window}-sample window")
        return (clip_len - self.window) // self.step + 1


@dataclass
class AudioClip:
    """Fixed-length mono waveform, samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if not np.all(np.isfinite(self.samples)):
            raise ShapeError("clip contains non-finite samples")
        peak = float(np.max(np.abs(self.samples))) if self.samples.size else 0.0
        if peak > 1.0 + 1e-6:
            raise ShapeError(f"clip amplitude {peak:.6f} exceeds 1")

    def __len__(self) -> int:
        return int(self.samples.shape[0])


@dataclass
class FeatureFrame:
    """Time x band matrix of mel features for one clip."""

    frames: np.ndarray
    params: FeatureParams = field(default_factory=FeatureParams)

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.frames.shape)


def mel_scale(f):
    """Map frequency in Hz to mels: 1127 * ln(1 + f/700)."""
    arr = np.asarray(f, dtype=np.float64)
    if np.any(arr < 0):
        raise DomainError("frequency must be nonnegative")
    out = 1127.0 * np.log1p(arr / 700.0)
    return float(out) if np.isscalar(f) or arr.ndim == 0 else out


def mel_filterbank(params: FeatureParams, sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """Triangular filterbank matrix of shape (bands, fft_bins).

    Band edges are spaced uniformly in mels over [f_min, f_max]; triangle
    slopes are linear in the mel domain, evaluated at the FFT bin centers.
    """
    params.validate(sample_rate)
    n_bins = params.fft_length // 2 + 1
    bin_mels = mel_scale(np.arange(n_bins) * sample_rate / params.fft_length)
    edges = np.linspace(mel_scale(params.f_min), mel_scale(params.f_max), params.bands + 2)
    lower, center, upper = edges[:-2], edges[1:-1], edges[2:]
    up = (bin_mels[None, :] - lower[:, None]) / (center - lower)[:, None]
    down = (upper[:, None] - bin_mels[None, :]) / (upper - center)[:, None]
    return np.clip(np.minimum(up, down), 0.0, None)


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (rows are cosine basis vectors)."""
    k = np.arange(n)[:, None]
    t = (np.arange(n)[None, :] + 0.5) / n
    m = np.sqrt(2.0 / n) * np.cos(np.pi * k * t)
    m[0] /= math.sqrt(2.0)
    return m


_BANK_CACHE: dict[tuple, torch.Tensor] = {}


def _filterbank_tensor(params: FeatureParams, sample_rate: int, dtype, device) -> torch.Tensor:
    key = (
        params.bands, params.f_min, params.f_max, params.window, params.fft_length,
        params.step, sample_rate, str(dtype), str(device),
    )
    bank = _BANK_CACHE.get(key)
    if bank is None:
        bank = torch.as_tensor(mel_filterbank(params, sample_rate), dtype=dtype, device=device)
        _BANK_CACHE[key] = bank
    return bank


def mel_feature_tensor(
    waves: torch.Tensor,
    params: FeatureParams | None = None,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> torch.Tensor:
    """Mel features for a batch of waveforms, differentiable w.r.t. samples.

    ``waves`` is (batch, samples) or (samples,); the result is
    (batch, frames, bands) or (frames, bands) respectively.
    """
    params = params or FeatureParams()
    squeeze = waves.ndim == 1
    if squeeze:
        waves = waves.unsqueeze(0)
    if waves.ndim != 2:
        raise ShapeError(f"expected (batch, samples) waveforms, got shape {tuple(waves.shape)}")
    params.frame_count(waves.shape[1])  # validates length >= window
    params.validate(sample_rate)
    window = torch.hann_window(params.window, periodic=True, dtype=waves.dtype, device=waves.device)
    spec = torch.stft(
        waves,
        n_fft=params.fft_length,
        hop_length=params.step,
        win_length=params.window,
        window=window,
        center=False,
        return_complex=True,
    )
    mag = spec.abs()  # (batch, bins, frames)
    bank = _filterbank_tensor(params, sample_rate, waves.dtype, waves.device)
    feats = torch.einsum("bft,mf->btm", mag, bank)
    feats = torch.log(feats + params.log_floor)
    if params.apply_dct:
        dct = torch.as_tensor(dct_matrix(params.bands), dtype=waves.dtype, device=waves.device)
        feats = feats @ dct.T
    return feats.squeeze(0) if squeeze else feats


def extract_features(clip: AudioClip, params: FeatureParams | None = None) -> FeatureFrame:
    """Mel feature frame for one clip (numpy-facing wrapper)."""
    params = params or FeatureParams()
    wave = torch.as_tensor(clip.samples, dtype=torch.float64)
    with torch.no_grad():
        frames = mel_feature_tensor(wave, params, clip.sample_rate)
    return FeatureFrame(frames.numpy(), params)


def _dist_tensor(w1: torch.Tensor, w2: torch.Tensor, mode: str, params, sample_rate: int):
    if mode == "l2":
        return torch.linalg.vector_norm(w1 - w2)
    f1 = mel_feature_tensor(w1, params, sample_rate)
    f2 = mel_feature_tensor(w2, params, sample_rate)
    diff = f1 - f2
    return (diff * diff).sum()


def audio_distance(y1, y2, mode: str = "mfcc", params: FeatureParams | None = None):
    """Distance between two clips: ``l2`` on samples or squared mel-feature L2.

    Accepts AudioClips (returns float) or 1-D torch waveforms of a shared
    sample rate (returns a differentiable scalar tensor; pass FeatureParams
    for the mfcc mode's extraction settings).
    """
    if mode not in AUDIO_METRIC_MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {AUDIO_METRIC_MODES}")
    params = params or FeatureParams()
    if isinstance(y1, AudioClip) or isinstance(y2, AudioClip):
        if not (isinstance(y1, AudioClip) and isinstance(y2, AudioClip)):
            raise ShapeError("cannot mix AudioClip and raw waveform arguments")
        if len(y1) != len(y2):
            raise ShapeError(f"clip lengths differ: {len(y1)} vs {len(y2)}")
        if y1.sample_rate != y2.sample_rate:
            raise ShapeError(f"sample rates differ: {y1.sample_rate} vs {y2.sample_rate}")
        w1 = torch.as_tensor(y1.samples, dtype=torch.float64)
        w2 = torch.as_tensor(y2.samples, dtype=torch.float64)
        with torch.no_grad():
            return float(_dist_tensor(w1, w2, mode, params, y1.sample_rate))
    if y1.shape != y2.shape:
        raise ShapeError(f"waveform lengths differ: {tuple(y1.shape)} vs {tuple(y2.shape)}")
    return _dist_tensor(y1, y2, mode, params, DEFAULT_SAMPLE_RATE)


def write_clip(clip: AudioClip, path) -> None:
    """Write a clip as mono 16-bit little-endian PCM WAV."""
    quantized = np.round(np.clip(clip.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with _wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(clip.sample_rate)
        fh.writeframes(quantized.tobytes())


def read_clip(path, expected_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Read a mono 16-bit PCM WAV; no resampling or channel mixing."""
    path = Path(path)
    try:
        with _wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            if channels != 1:
                raise FormatError(f"{path.name}: expected mono audio, got {channels} channels")
            if width != 2:
                raise FormatError(f"{path.name}: expected 16-bit PCM, got {8 * width}-bit")
            if rate != expected_rate:
                raise FormatError(f"{path.name}: expected sample rate {expected_rate} Hz, got {rate} Hz")
            raw = fh.readframes(fh.getnframes())
    except _wave.Error as exc:
        raise FormatError(f"{path.name}: not a readable PCM WAV file ({exc})") from exc
    samples = np.clip(np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32767.0, -1.0, 1.0)
    return AudioClip(samples, rate)
