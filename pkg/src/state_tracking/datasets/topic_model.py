"""
Тематическая модель для next-token предобучения на элементах S_3.

Документ: смесь тем ~ Dirichlet(alpha), затем для каждого токена тема
из смеси и токен из строки p(token | topic).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import DataError
from .corpus import Corpus, CorpusMode, Vocab
from .generators import next_token_document

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-3
PRESET_TOKENS = ("123", "132", "213", "231", "312", "321")

# Строки - темы, столбцы - токены в порядке PRESET_TOKENS
_PRESET_MATRICES: Dict[str, Tuple[Tuple[float, ...], ...]] = {
    "appG1": (
        (3.06e-2, 1.11e-1, 5.79e-4, 6.45e-3, 6.58e-3, 8.45e-1),
        (3.36e-1, 1.69e-4, 6.63e-1, 8.05e-7, 1.68e-7, 7.81e-4),
        (7.92e-5, 1.41e-2, 9.44e-1, 4.53e-4, 4.13e-2, 3.27e-11),
        (2.85e-3, 1.29e-9, 7.06e-1, 6.37e-7, 2.58e-3, 2.89e-1),
    ),
    "appG2": (
        (9.31e-1, 2.32e-3, 1.38e-8, 5.86e-10, 4.62e-5, 6.63e-2),
        (2.10e-4, 3.12e-4, 9.32e-7, 9.07e-6, 2.53e-1, 7.47e-1),
        (4.95e-1, 1.18e-3, 4.55e-1, 2.17e-2, 1.86e-8, 2.71e-2),
        (6.55e-1, 4.92e-4, 3.44e-1, 2.28e-7, 1.94e-4, 2.14e-8),
    ),
}
PRESET_ALPHA = 0.3


@dataclass
class TopicModelParams:
    """Параметры тематической модели."""

    alpha: float
    token_topic: np.ndarray  # (n_topics, n_tokens)
    tokens: Tuple[str, ...] = PRESET_TOKENS
    name: str = "custom"

    def __post_init__(self) -> None:
        self.token_topic = np.asarray(self.token_topic, dtype=np.float64)
        self.validate()

    @property
    def n_topics(self) -> int:
        return self.token_topic.shape[0]

    def validate(self) -> None:
        if self.alpha <= 0:
            raise DataError(f"alpha must be positive, got {self.alpha}")
        shape = self.token_topic.shape
        if self.token_topic.ndim != 2 or shape[1] != len(self.tokens):
            raise DataError(
                f"token_topic must have shape (topics, {len(self.tokens)}), "
                f"got {shape}"
            )
        if (self.token_topic < 0).any():
            raise DataError("token_topic has negative entries")
        sums = self.token_topic.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOLERANCE)
        if bad.size:
            raise DataError(
                f"token_topic rows {bad.tolist()} do not sum to 1 "
                f"(sums {sums[bad].tolist()})"
            )

    def marginal(self) -> np.ndarray:
        """Ожидаемая частота токенов: E[theta] = 1/K для симметричного Dirichlet."""
        rows = self.token_topic / self.token_topic.sum(axis=1, keepdims=True)
        return rows.mean(axis=0)


def topic_preset(name: str) -> TopicModelParams:
    """Встроенные матрицы p(token | topic): "appG1" и "appG2"."""
    if name not in _PRESET_MATRICES:
        raise DataError(
            f"unknown topic preset {name!r}; available: {sorted(_PRESET_MATRICES)}"
        )
    matrix = np.array(_PRESET_MATRICES[name])
    return TopicModelParams(alpha=PRESET_ALPHA, token_topic=matrix, name=name)


def available_presets() -> Sequence[str]:
    return sorted(_PRESET_MATRICES)


def random_topic_params(
    n_topics: int = 4,
    alpha: float = 0.3,
    beta: float = 0.1,
    seed: int = 0,
    tokens: Tuple[str, ...] = PRESET_TOKENS,
) -> TopicModelParams:
    """Случайная тематическая модель: строки p(token | topic) ~ Dirichlet(beta)."""
    if beta <= 0:
        raise DataError(f"beta must be positive, got {beta}")
    rng = np.random.default_rng(seed)
    matrix = rng.dirichlet([beta] * len(tokens), size=n_topics)
    return TopicModelParams(
        alpha=alpha, token_topic=matrix, tokens=tokens, name=f"random-{seed}"
    )


def gen_topic_corpus(
    params: TopicModelParams,
    count: int,
    length: int,
    seed: int,
    vocab: Optional[Vocab] = None,
) -> Corpus:
    """
    Генерирует next-token корпус из тематической модели.

    Args:
        params: Параметры модели
        count: Количество документов
        length: Длина документа
        seed: Сид генератора
        vocab: Словарь (по умолчанию словарь S_3)

    Returns:
        Корпус в режиме next-token
    """
    vocab = vocab or Vocab.for_group(3)
    token_ids = np.array(vocab.encode(params.tokens), dtype=np.int64)

    rows = params.token_topic / params.token_topic.sum(axis=1, keepdims=True)
    cdf = np.cumsum(rows, axis=1)
    rng = np.random.default_rng(seed)
    documents = []
    for _ in range(count):
        if params.n_topics == 1:
            topics = np.zeros(length, dtype=np.int64)
        else:
            mixture = rng.dirichlet([params.alpha] * params.n_topics)
            topics = rng.choice(params.n_topics, size=length, p=mixture)
        u = rng.random(length)
        counts = (u[:, None] >= cdf[topics]).sum(axis=1)
        picks = np.minimum(counts, len(params.tokens) - 1)
        documents.append(next_token_document(token_ids[picks].tolist()))

    metadata = {
        "generator": "topic",
        "preset": params.name,
        "alpha": params.alpha,
        "token_topic": params.token_topic.tolist(),
        "seed": seed,
        "length": length,
        "count": count,
    }
    logger.info(f"Сгенерирован тематический корпус '{params.name}': {count} документов")
    return Corpus(
        documents=documents,
        vocab=vocab,
        mode=CorpusMode.NEXT_TOKEN,
        metadata=metadata,
    )
