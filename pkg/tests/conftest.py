import numpy as np
import pytest

from latentcollage.generators import build_procedural_generator
from latentcollage.latent import LatentKind, LatentSpec
from latentcollage.training import Ablation, TrainConfig, train

# One shared training budget for the oracle encoders used across tests.
# Calibrated once on the reference box; acceptance thresholds assume it.
ORACLE_DIM = 12
ORACLE_SEED = 7
TRAIN_SEED = 11
TRAIN_STEPS = 1500


def oracle_spec() -> LatentSpec:
    return LatentSpec(LatentKind.SPHERICAL_Z, ORACLE_DIM)


@pytest.fixture(scope="session")
def oracle64():
    return build_procedural_generator(oracle_spec(), (3, 64, 64), seed=ORACLE_SEED)


@pytest.fixture(scope="session")
def oracle32():
    return build_procedural_generator(oracle_spec(), (3, 32, 32), seed=ORACLE_SEED)


@pytest.fixture(scope="session")
def enc_full(oracle64):
    """Mask-aware encoder trained on the 64x64 oracle (shared, expensive)."""
    encoder, history = train(
        oracle64, TrainConfig(steps=TRAIN_STEPS, seed=TRAIN_SEED, ablation=Ablation.FULL)
    )
    encoder.meta_history = history
    return encoder


@pytest.fixture(scope="session")
def enc_nomask(oracle64):
    """Mask-unaware (3-channel) encoder trained without masks (shared)."""
    encoder, history = train(
        oracle64, TrainConfig(steps=TRAIN_STEPS, seed=TRAIN_SEED, ablation=Ablation.NO_MASK)
    )
    encoder.meta_history = history
    return encoder


@pytest.fixture(scope="session")
def enc_tiny(oracle32):
    """Small, quickly trained encoder for contract tests that just need
    a functioning (not accurate) model."""
    encoder, _ = train(
        oracle32,
        TrainConfig(steps=150, seed=3, base_channels=8, batch_size=8),
    )
    return encoder


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
