import numpy as np
import pytest
import torch

from apps.pavenet.app.schemas.run_config import RunConfig
from apps.pavenet.core.settings import run_slow
from apps.pavenet.models.config import AttentionConfig, ModelConfig


torch.set_default_dtype(torch.float64)

TINY_MODEL = dict(
    embed_dims=16,
    num_heads=2,
    num_points=2,
    feedforward_channels=32,
    num_queries=4,
    encoder_layers=1,
    decoder_layers=1,
    joint_decoder_layers=1,
)


def pytest_collection_modifyitems(config, items):
    if run_slow():
        return

    skip = pytest.mark.skip(reason="set PAVENET_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def seeded_torch():
    torch.manual_seed(0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def attn_config() -> AttentionConfig:
    return AttentionConfig(
        embed_dims=8, num_heads=2, num_levels=2, num_points=2, feedforward_channels=16
    )


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    """Small widths on 32 x 48 frames (120 tokens per frame)."""
    return ModelConfig(image_size=(32, 48), **TINY_MODEL)


@pytest.fixture
def tiny_run_config() -> RunConfig:
    """Seconds-scale run on full-size synthetic frames."""
    return RunConfig.parse_obj(
        dict(
            steps=2,
            batch_size=2,
            model=TINY_MODEL,
            data=dict(persons=(1, 2), train_clips=4, val_clips=2, augment=False),
            optim=dict(val_every=0),
        )
    )


def perturb_(module: torch.nn.Module, std: float = 0.1, seed: int = 0) -> torch.nn.Module:
    """Adds seeded noise to every parameter so zero-initialised heads stop
    being trivially constant."""
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for param in module.parameters():
            param.add_(std * torch.randn(param.shape, generator=generator, dtype=param.dtype))

    return module
