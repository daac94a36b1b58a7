"""
Pytest конфигурация и общие фикстуры.
"""

import sys
from pathlib import Path

import pytest
import torch

# Добавляем src в путь для импортов
src_path = Path(__file__).parent.parent / "src"
if str(src_path) not in sys.path:
    sys.path.insert(0, str(src_path))

from state_tracking.core.config import ModelConfig  # noqa: E402
from state_tracking.datasets.corpus import Vocab  # noqa: E402
from state_tracking.model.transformer import init_model  # noqa: E402


@pytest.fixture
def s3_vocab():
    return Vocab.for_group(3)


@pytest.fixture
def tiny_config(s3_vocab):
    """Крошечная модель: 2 слоя, 2 головы, d_model 16."""
    return ModelConfig(
        n_layers=2,
        d_model=16,
        n_heads=2,
        d_mlp=32,
        vocab_size=len(s3_vocab),
        max_positions=32,
        seed=0,
    )


@pytest.fixture
def tiny_model(tiny_config):
    model = init_model(tiny_config)
    model.eval()
    return model


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)
    yield
