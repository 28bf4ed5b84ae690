"""Shared fixtures: seeded generators, tiny model configs and small datasets."""
import os
import sys

import numpy as np
import pytest

# Add project root to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data import generate_dataset
from model import SanParams, SequenceSample
from training import xavier_init
from utils import Config, GeneratorConfig, SanConfig, Variant


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_tiny_config(variant: Variant = Variant.RELMASK, **overrides) -> SanConfig:
    values = dict(d_in=4, d_in_hand=3, d_model=8, heads=2, d_k=4, d_ff=16, n_layers=1,
                  dropout=0.0, window=2, variant=variant, vocab_size=3)
    values.update(overrides)
    return SanConfig(**values)


def make_params(config: SanConfig, seed: int = 0) -> SanParams:
    params = SanParams.create(config)
    xavier_init(params.named_parameters(), seed)
    return params


def make_sample(rng: np.random.Generator, config: SanConfig, steps: int = 5, hand_steps: int = None,
                target=(1, 2)) -> SequenceSample:
    hand_steps = steps if hand_steps is None else hand_steps
    return SequenceSample(rng.standard_normal((steps, config.d_in)),
                          rng.standard_normal((hand_steps, config.d_in_hand)), list(target))


@pytest.fixture
def tiny_config():
    """Fused model with a relative window of 2, one layer, three glosses."""
    return make_tiny_config()


@pytest.fixture
def tiny_params(tiny_config):
    return make_params(tiny_config)


@pytest.fixture
def small_generator_config():
    return GeneratorConfig(vocab_size=4, samples=12, min_glosses=1, max_glosses=3, d_in=4, d_in_hand=3,
                           sigma=0.2, rho=0.8, seed=3)


@pytest.fixture
def small_dataset(small_generator_config):
    return generate_dataset(small_generator_config)


def make_run_config(**train_overrides) -> Config:
    """Config matching ``small_generator_config`` data with a tiny model."""
    config = Config()
    config.model = make_tiny_config(vocab_size=4)
    config.optim.lr = 1e-2
    config.train.batch_size = 2
    config.train.beam_width = 3
    for key, value in train_overrides.items():
        setattr(config.train, key, value)
    return config
