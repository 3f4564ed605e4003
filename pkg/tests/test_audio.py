import math
import wave as wave_mod

import numpy as np
import pytest
import scipy.fft
import torch

from earballs import audio
from earballs.audio import AudioClip, FeatureParams
from earballs.errors import DomainError, FormatError, ShapeError

from conftest import finite_difference_grad


def oracle_mel(f):
    return 1127.0 * math.log(1.0 + f / 700.0)


def oracle_features(samples, params: FeatureParams, sample_rate=16000):
    """Independent feature pipeline: explicit framing, rfft, inline triangles."""
    n = params.window
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))  # periodic Hann
    frames = []
    for start in range(0, len(samples) - n + 1, params.step):
        seg = np.asarray(samples[start:start + n], dtype=np.float64) * w
        frames.append(np.abs(np.fft.rfft(seg, params.fft_length)))
    mag = np.stack(frames)  # (T, bins)

    bin_freq = np.arange(params.fft_length // 2 + 1) * sample_rate / params.fft_length
    bin_mel = np.array([oracle_mel(f) for f in bin_freq])
    edges = np.linspace(oracle_mel(params.f_min), oracle_mel(params.f_max), params.bands + 2)
    bank = np.zeros((params.bands, len(bin_mel)))
    for b in range(params.bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        rising = (bin_mel - lo) / (mid - lo)
        falling = (hi - bin_mel) / (hi - mid)
        bank[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    feats = np.log(mag @ bank.T + params.log_floor)
    if params.apply_dct:
        feats = scipy.fft.dct(feats, type=2, norm="ortho", axis=1)
    return feats


class TestMelScale:
    def test_zero(self):
        assert audio.mel_scale(0.0) == 0.0

    def test_known_point(self):
        assert audio.mel_scale(700.0 * (math.e - 1.0)) == pytest.approx(1127.0, abs=1e-9)

    def test_1000_hz(self):
        assert audio.mel_scale(1000.0) == pytest.approx(1127.0 * math.log(1 + 1000 / 700), abs=1e-9)
        assert audio.mel_scale(1000.0) == pytest.approx(999.99, abs=0.005)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            audio.mel_scale(-1.0)

    def test_strictly_increasing(self, rng):
        for _ in range(200):
            f1, f2 = sorted(rng.uniform(0.0, 8000.0, size=2))
            if f1 == f2:
                continue
            assert audio.mel_scale(f1) < audio.mel_scale(f2)


class TestExtractFeatures:
    def test_full_length_clip_shape(self):
        clip = AudioClip(np.zeros(16384, dtype=np.float32))
        assert audio.extract_features(clip).shape == (61, 80)

    def test_silence_hits_log_floor(self):
        clip = AudioClip(np.zeros(16384, dtype=np.float32))
        frames = audio.extract_features(clip).frames
        assert np.abs(frames - math.log(1e-6)).max() <= 1e-12

    def test_pure_tone_band_is_nearest_mel_center(self):
        sr = 16000
        t = np.arange(16384) / sr
        clip = AudioClip((0.7 * np.sin(2 * np.pi * 440.0 * t)).astype(np.float32), sr)
        params = FeatureParams()
        frames = audio.extract_features(clip, params).frames
        edges = np.linspace(audio.mel_scale(params.f_min), audio.mel_scale(params.f_max), params.bands + 2)
        nearest = int(np.argmin(np.abs(edges[1:-1] - audio.mel_scale(440.0))))
        assert (frames.argmax(axis=1) == nearest).all()
        # the independent pipeline agrees frame by frame
        oracle = oracle_features(clip.samples, params)
        assert (oracle.argmax(axis=1) == nearest).all()

    def test_matches_oracle_pipeline(self, rng):
        params = FeatureParams()
        samples = rng.uniform(-0.9, 0.9, size=4096).astype(np.float32)
        ours = audio.extract_features(AudioClip(samples), params).frames
        oracle = oracle_features(samples, params)
        assert ours.shape == oracle.shape == (13, 80)
        assert np.abs(ours - oracle).max() <= 1e-8

    def test_dct_option_matches_scipy(self, rng):
        samples = rng.uniform(-0.9, 0.9, size=4096).astype(np.float32)
        plain = audio.extract_features(AudioClip(samples), FeatureParams(apply_dct=False)).frames
        dct = audio.extract_features(AudioClip(samples), FeatureParams(apply_dct=True)).frames
        assert np.abs(dct - scipy.fft.dct(plain, type=2, norm="ortho", axis=1)).max() <= 1e-8

    @pytest.mark.parametrize("length", [1024, 1025, 2047, 4096, 9000, 16384])
    def test_frame_count_formula(self, length, rng):
        samples = rng.uniform(-0.5, 0.5, size=length).astype(np.float32)
        frames = audio.extract_features(AudioClip(samples)).frames
        assert frames.shape[0] == (length - 1024) // 256 + 1

    def test_short_clip_rejected(self):
        with pytest.raises(ShapeError):
            audio.extract_features(AudioClip(np.zeros(512, dtype=np.float32)))


class TestAudioDistance:
    def test_identity_is_zero(self, rng):
        clip = AudioClip(rng.uniform(-0.9, 0.9, size=2048).astype(np.float32))
        assert audio.audio_distance(clip, clip, "l2") == 0.0
        assert audio.audio_distance(clip, clip, "mfcc") == 0.0

    def test_unit_impulse_l2(self):
        impulse = np.zeros(2048, dtype=np.float32)
        impulse[100] = 1.0
        d = audio.audio_distance(AudioClip(impulse), AudioClip(np.zeros(2048, dtype=np.float32)), "l2")
        assert d == 1.0

    def test_mfcc_matches_two_step_oracle(self, rng):
        params = FeatureParams()
        a = rng.uniform(-0.9, 0.9, size=4096).astype(np.float32)
        b = rng.uniform(-0.9, 0.9, size=4096).astype(np.float32)
        ours = audio.audio_distance(AudioClip(a), AudioClip(b), "mfcc", params)
        oracle = float(((oracle_features(a, params) - oracle_features(b, params)) ** 2).sum())
        assert ours == pytest.approx(oracle, rel=1e-6)

    def test_symmetry(self, rng):
        a = AudioClip(rng.uniform(-0.9, 0.9, size=2048).astype(np.float32))
        b = AudioClip(rng.uniform(-0.9, 0.9, size=2048).astype(np.float32))
        for mode in ("l2", "mfcc"):
            assert audio.audio_distance(a, b, mode) == audio.audio_distance(b, a, mode)

    def test_l2_amplitude_scaling_exact(self, rng):
        a = rng.uniform(-0.2, 0.2, size=1024)
        b = rng.uniform(-0.2, 0.2, size=1024)
        base = audio.audio_distance(AudioClip(a), AudioClip(b), "l2")
        for alpha in (0.5, 2.0):  # powers of two scale exactly
            scaled = audio.audio_distance(AudioClip(alpha * a), AudioClip(alpha * b), "l2")
            assert scaled == alpha * base

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            audio.audio_distance(
                AudioClip(np.zeros(1024, dtype=np.float32)),
                AudioClip(np.zeros(2048, dtype=np.float32)),
                "l2",
            )

    def test_rate_mismatch(self):
        with pytest.raises(ShapeError):
            audio.audio_distance(
                AudioClip(np.zeros(1024, dtype=np.float32), 16000),
                AudioClip(np.zeros(1024, dtype=np.float32), 8000),
                "l2",
            )

    @pytest.mark.parametrize("mode", ["l2", "mfcc"])
    def test_gradient_matches_finite_differences(self, rng, mode):
        params = FeatureParams()
        w1 = torch.tensor(rng.uniform(-0.9, 0.9, size=2048), dtype=torch.float64, requires_grad=True)
        w2 = torch.tensor(rng.uniform(-0.9, 0.9, size=2048), dtype=torch.float64)
        dist = audio.audio_distance(w1, w2, mode, params)
        dist.backward()
        analytic = w1.grad.numpy()

        coords = rng.choice(2048, size=40, replace=False)
        probe = w1.detach().clone()
        fd = finite_difference_grad(
            lambda: audio.audio_distance(probe, w2, mode, params), probe, coords, h=1e-6
        )
        an = analytic[coords]
        assert np.linalg.norm(fd - an) <= 1e-3 * max(np.linalg.norm(an), 1e-12)


class TestClipIO:
    def test_roundtrip_quantization_bound(self, tmp_path):
        ramp = np.linspace(-1.0, 1.0, 16384).astype(np.float32)
        clip = AudioClip(ramp)
        path = tmp_path / "ramp.wav"
        audio.write_clip(clip, path)
        back = audio.read_clip(path)
        assert len(back) == 16384 and back.sample_rate == 16000
        assert np.abs(back.samples - ramp).max() <= 2.0**-15

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        with wave_mod.open(str(path), "wb") as fh:
            fh.setnchannels(2)
            fh.setsampwidth(2)
            fh.setframerate(16000)
            fh.writeframes(b"\x00\x00" * 64)
        with pytest.raises(FormatError, match="mono"):
            audio.read_clip(path)

    def test_wrong_rate_rejected_naming_expected(self, tmp_path):
        path = tmp_path / "slow.wav"
        with wave_mod.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(8000)
            fh.writeframes(b"\x00\x00" * 32)
        with pytest.raises(FormatError, match="16000"):
            audio.read_clip(path)

    def test_wrong_depth_rejected(self, tmp_path):
        path = tmp_path / "deep.wav"
        with wave_mod.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(4)
            fh.setframerate(16000)
            fh.writeframes(b"\x00\x00\x00\x00" * 32)
        with pytest.raises(FormatError, match="16-bit"):
            audio.read_clip(path)

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "noise.bin"
        path.write_bytes(b"not a riff file at all")
        with pytest.raises(FormatError):
            audio.read_clip(path)

    def test_amplitude_bound_enforced(self):
        with pytest.raises(ShapeError):
            AudioClip(np.array([0.0, 1.5], dtype=np.float32))
        with pytest.raises(ShapeError):
            AudioClip(np.array([0.0, np.nan], dtype=np.float32))
