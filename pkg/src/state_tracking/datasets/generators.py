"""
Генераторы корпусов word problem.

Предоставляет:
- gen_word_corpus: уникальные последовательности действий с целями-состояниями
- split_corpus: детерминированное разбиение train/analysis
- gen_uniform_corpus: контрольный next-token корпус из равномерных токенов
- parity_targets: замена целей на токены чётности (parity curriculum)
"""

import logging
import math
from dataclasses import replace
from typing import Sequence, Tuple

import numpy as np

from ..core.errors import DataError
from ..core.permutations import group_table
from .corpus import Corpus, CorpusMode, Document, Vocab

logger = logging.getLogger(__name__)

RETRY_FACTOR = 100


def _sample_unique_sequences(n: int, count: int, length: int, seed: int) -> np.ndarray:
    """Уникальные последовательности индексов группы (rejection sampling)."""
    size = math.factorial(n)
    if count < 0 or length < 1:
        raise DataError(f"invalid corpus shape: count={count}, length={length}")
    if count > size ** length:
        raise DataError(
            f"cannot draw {count} unique sequences: "
            f"only {size}^{length} = {size ** length} exist"
        )

    rng = np.random.default_rng(seed)
    seen = set()
    sequences = np.empty((count, length), dtype=np.int64)
    budget = RETRY_FACTOR * max(count, 1)
    draws = 0
    filled = 0
    while filled < count:
        if draws >= budget:
            raise DataError(
                f"retry budget exhausted: "
                f"{filled}/{count} unique sequences after {draws} draws"
            )
        candidate = rng.integers(0, size, size=length)
        draws += 1
        key = candidate.tobytes()
        if key in seen:
            continue
        seen.add(key)
        sequences[filled] = candidate
        filled += 1

    logger.debug(f"Уникальных последовательностей: {count}, попыток: {draws}")
    return sequences


def gen_word_corpus(n: int, count: int, length: int, seed: int) -> Corpus:
    """
    Генерирует корпус word problem на S_n.

    Args:
        n: Степень группы
        count: Количество уникальных документов
        length: Длина каждого документа
        seed: Сид генератора

    Returns:
        Корпус в режиме state-prediction: цель на позиции t - состояние s_t

    Пример использования:
        corpus = gen_word_corpus(3, count=1000, length=24, seed=1)
    """
    table = group_table(n)
    vocab = Vocab.for_group(n)
    sequences = _sample_unique_sequences(n, count, length, seed)
    states = table.prefix_products(sequences) if count else sequences

    state_ids = vocab.state_token_ids
    documents = [
        Document(
            input_ids=[state_ids[i] for i in seq],
            target_ids=[state_ids[s] for s in st],
            mode=CorpusMode.STATE_PREDICTION,
        )
        for seq, st in zip(sequences.tolist(), states.tolist())
    ]
    metadata = {"generator": "word", "seed": seed, "length": length, "count": count}
    logger.info(f"Сгенерирован корпус S{n}: {count} документов длины {length}")
    return Corpus(
        documents=documents,
        vocab=vocab,
        mode=CorpusMode.STATE_PREDICTION,
        metadata=metadata,
    )


def split_corpus(
    corpus: Corpus, train_fraction: float, seed: int = 0
) -> Tuple[Corpus, Corpus]:
    """
    Разбивает корпус на train/analysis части.

    Порядок перемешивается сидом; размеры floor(f·N) и остаток.
    """
    if not 0 < train_fraction < 1:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    total = len(corpus)
    n_train = int(math.floor(train_fraction * total))
    if n_train == 0 or n_train == total:
        raise DataError(
            f"split of {total} documents at {train_fraction} leaves an empty side"
        )

    order = np.random.default_rng(seed).permutation(total)
    train = corpus.subset(order[:n_train].tolist())
    held_out = corpus.subset(order[n_train:].tolist())
    split = {"fraction": train_fraction, "seed": seed}
    train.metadata["split"] = dict(split, part="train")
    held_out.metadata["split"] = dict(split, part="analysis")
    return train, held_out


def next_token_document(input_ids: Sequence[int]) -> Document:
    """Документ next-token: цель = следующий токен, последняя позиция без цели."""
    input_ids = list(input_ids)
    targets = input_ids[1:] + [None]
    return Document(input_ids=input_ids, target_ids=targets, mode=CorpusMode.NEXT_TOKEN)


def gen_uniform_corpus(n: int, count: int, length: int, seed: int) -> Corpus:
    """Контрольный корпус: i.i.d. равномерные элементы S_n, next-token режим."""
    vocab = Vocab.for_group(n)
    rng = np.random.default_rng(seed)
    state_ids = np.array(vocab.state_token_ids, dtype=np.int64)
    draws = rng.integers(0, len(state_ids), size=(count, length))
    documents = [next_token_document(state_ids[row].tolist()) for row in draws]
    metadata = {"generator": "uniform", "seed": seed, "length": length, "count": count}
    return Corpus(
        documents=documents,
        vocab=vocab,
        mode=CorpusMode.NEXT_TOKEN,
        metadata=metadata,
    )


def parity_targets(corpus: Corpus) -> Corpus:
    """
    Заменяет цели-состояния на токены чётности "0"/"1".

    Raises:
        DataError: Корпус не в режиме state-prediction
    """
    if corpus.mode != CorpusMode.STATE_PREDICTION:
        raise DataError(
            f"parity targets need a state-prediction corpus, got {corpus.mode.value}"
        )

    table = group_table(corpus.vocab.group_degree)
    to_group = corpus.vocab.group_index_array()
    even_id, odd_id = corpus.vocab.parity_token_ids
    documents = []
    for doc in corpus.documents:
        parities = table.prefix_parities(to_group[doc.input_ids])
        targets = [odd_id if p else even_id for p in parities.tolist()]
        documents.append(Document(list(doc.input_ids), targets, CorpusMode.PARITY))

    metadata = dict(corpus.metadata, targets="parity")
    return replace(
        corpus, documents=documents, mode=CorpusMode.PARITY, metadata=metadata
    )
