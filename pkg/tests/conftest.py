import numpy as np
import pytest
import torch

from earballs.data import synth_audio, synth_source
from earballs.models import DiscriminatorConfig, GeneratorConfig, ModelState


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_state():
    """Reduced config from the gradient-check contract: 8-dim in, 1024 samples out."""
    gen = GeneratorConfig(input_dim=8, model_dim=4, output_len=1024)
    disc = DiscriminatorConfig(model_dim=4, input_len=1024, phase_shuffle_n=2)
    return ModelState.initialize(gen, disc, seed=7)


def make_tiny_state(seed=7, phase_shuffle_n=2):
    gen = GeneratorConfig(input_dim=8, model_dim=4, output_len=1024)
    disc = DiscriminatorConfig(model_dim=4, input_len=1024, phase_shuffle_n=phase_shuffle_n)
    return ModelState.initialize(gen, disc, seed=seed)


@pytest.fixture(scope="session")
def desk_table():
    return synth_source(8, 25, 16, 0.1, np.random.default_rng(99))


@pytest.fixture(scope="session")
def small_corpus():
    return synth_audio(24, 1024, np.random.default_rng(98))


def clone_rng(rng: np.random.Generator) -> np.random.Generator:
    """Independent copy that will replay the same stream."""
    fresh = np.random.Generator(np.random.PCG64())
    fresh.bit_generator.state = rng.bit_generator.state
    return fresh


def finite_difference_grad(fn, x: torch.Tensor, coords, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function at selected coordinates."""
    grads = []
    flat = x.reshape(-1)
    for c in coords:
        orig = float(flat[c])
        step = h * max(1.0, abs(orig))
        with torch.no_grad():
            flat[c] = orig + step
            up = float(fn())
            flat[c] = orig - step
            down = float(fn())
            flat[c] = orig
        grads.append((up - down) / (2 * step))
    return np.array(grads)
