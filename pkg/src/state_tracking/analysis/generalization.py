"""
Кривые обобщения по длине и длины отсечения.

Точность на позиции t - это точность для длины t + 1: одна
последовательность длины max_len даёт оценку сразу для всех длин.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np
import torch

from ..core.errors import DataError
from ..core.permutations import group_table
from ..datasets.corpus import Vocab
from ..model.transformer import StateTrackingTransformer

logger = logging.getLogger(__name__)

BATCH_SIZE = 256


class CutoffFlag(str, Enum):
    OK = "ok"
    NO_DIP = "no-dip"
    UNCONVERGED = "unconverged"


@dataclass
class GeneralizationCurve:
    """Точности состояния и чётности по длинам."""
    lengths: List[int]
    state_accuracy: List[float]
    parity_accuracy: List[float]
    counts: List[int]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise DataError("curve lengths must be strictly increasing")
        columns = (self.state_accuracy, self.parity_accuracy, self.counts)
        if any(len(column) != len(self.lengths) for column in columns):
            raise DataError("curve columns differ in length")

    @property
    def max_len(self) -> int:
        return self.lengths[-1] if self.lengths else 0

    def accuracy(self, target: str) -> List[float]:
        if target == "state":
            return self.state_accuracy
        if target == "parity":
            return self.parity_accuracy
        raise DataError(f"unknown accuracy target: {target}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lengths": self.lengths,
            "state_accuracy": self.state_accuracy,
            "parity_accuracy": self.parity_accuracy,
            "counts": self.counts,
            "metadata": self.metadata,
        }

    def to_records(self) -> List[Dict[str, Any]]:
        """Строки для CSV."""
        return [
            {"length": l, "state_accuracy": s, "parity_accuracy": p, "count": c}
            for l, s, p, c in zip(
                self.lengths, self.state_accuracy, self.parity_accuracy, self.counts
            )
        ]


def curve_from_predictions(
    predicted: np.ndarray,
    true_states: np.ndarray,
    group_degree: int,
) -> GeneralizationCurve:
    """
    Кривая по предсказаниям.

    Args:
        predicted: (N, T) индексы предсказанных состояний; -1 - предсказан
            токен, не являющийся состоянием (неверно и по состоянию, и по чётности)
        true_states: (N, T) индексы верных состояний
        group_degree: Степень группы
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    true_states = np.asarray(true_states, dtype=np.int64)
    if predicted.shape != true_states.shape or predicted.ndim != 2:
        raise DataError(
            f"prediction shape {predicted.shape} != state shape {true_states.shape}"
        )
    parities = group_table(group_degree).parities
    valid = predicted >= 0
    state_ok = valid & (predicted == true_states)
    predicted_parity = parities[np.where(valid, predicted, 0)]
    parity_ok = valid & (predicted_parity == parities[true_states])

    N, T = predicted.shape
    return GeneralizationCurve(
        lengths=list(range(1, T + 1)),
        state_accuracy=state_ok.mean(axis=0).tolist(),
        parity_accuracy=parity_ok.mean(axis=0).tolist(),
        counts=[N] * T,
    )


def generalization_curve(
    model: StateTrackingTransformer,
    vocab: Vocab,
    max_len: int,
    n_eval: int = 500,
    seed: int = 0,
) -> GeneralizationCurve:
    """
    Точность модели на отложенных случайных последовательностях длины max_len.

    Предсказание - argmax по всему словарю.

    Raises:
        DataError: max_len больше max_positions модели
    """
    if max_len > model.config.max_positions:
        raise DataError(
            f"max_len {max_len} exceeds max_positions {model.config.max_positions}"
        )
    if n_eval < 1:
        raise DataError(f"n_eval must be >= 1, got {n_eval}")

    table = group_table(vocab.group_degree)
    state_ids = np.array(vocab.state_token_ids, dtype=np.int64)
    to_group = vocab.group_index_array()
    indices = np.random.default_rng(seed).integers(
        0, len(table), size=(n_eval, max_len)
    )
    true_states = table.prefix_products(indices)

    model.eval()
    predicted = []
    with torch.no_grad():
        for start in range(0, n_eval, BATCH_SIZE):
            tokens = torch.as_tensor(state_ids[indices[start : start + BATCH_SIZE]])
            logits, _ = model(tokens)
            predicted.append(to_group[logits.argmax(dim=-1).numpy()])

    curve = curve_from_predictions(
        np.concatenate(predicted), true_states, vocab.group_degree
    )
    curve.metadata = {"n_eval": n_eval, "seed": seed, "max_len": max_len}
    return curve


def cutoff_length(
    curve: GeneralizationCurve, threshold: float = 0.98, target: str = "state"
) -> Tuple[int, CutoffFlag]:
    """
    Последняя длина, на которой точность ещё не ниже threshold.

    Returns:
        (длина, флаг): max_len с NO_DIP, если кривая не падает; 0 с
        UNCONVERGED, если падает уже на первой длине

    Пример:
        точность 1.0 до длины 40, затем 0.5 -> (40, CutoffFlag.OK)
    """
    if not curve.lengths:
        raise DataError("empty generalization curve")
    accuracy = curve.accuracy(target)
    for i, (length, value) in enumerate(zip(curve.lengths, accuracy)):
        if value < threshold:
            if i == 0:
                return 0, CutoffFlag.UNCONVERGED
            return length - 1, CutoffFlag.OK
    return curve.max_len, CutoffFlag.NO_DIP
