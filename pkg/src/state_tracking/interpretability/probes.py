"""
Линейные пробы на residual stream.

Проба - мультиномиальная логистическая регрессия (float64, L2-штраф),
обучаемая полным батчем через torch LBFGS до нормы градиента 1e-8.
Обучающая и отложенная выборки не пересекаются по документам.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..algorithms.registers import ParityRegister, RegisterGrid
from ..core.errors import DataError
from ..core.permutations import group_table
from ..datasets.corpus import Corpus, CorpusMode, Vocab
from ..model.transformer import StateTrackingTransformer

logger = logging.getLogger(__name__)

POSITION_POLICIES = ("last-token", "per-position")
PROBE_TARGETS = ("state", "parity")
GRADIENT_TOLERANCE = 1e-8
BATCH_SIZE = 256


@dataclass
class ProbeData:
    """Признаки (residual-векторы) и метки для обучения пробы."""
    features: np.ndarray  # (N, d_model), float64
    state_labels: np.ndarray  # индекс состояния в enumerate_group
    parity_labels: np.ndarray
    doc_index: np.ndarray
    positions: np.ndarray
    group_size: int
    layer: int = 0
    position_policy: str = "last-token"

    def __post_init__(self) -> None:
        n = len(self.features)
        for name in ("state_labels", "parity_labels", "doc_index", "positions"):
            if len(getattr(self, name)) != n:
                rows = len(getattr(self, name))
                raise DataError(
                    f"probe data field {name} has {rows} rows, expected {n}"
                )

    def __len__(self) -> int:
        return len(self.features)

    def labels(self, target: str) -> Tuple[np.ndarray, int]:
        """Метки и число классов для цели probe."""
        if target == "state":
            return self.state_labels, self.group_size
        if target == "parity":
            return self.parity_labels, 2
        raise DataError(f"unknown probe target: {target}")

    def select(self, mask: np.ndarray) -> "ProbeData":
        return ProbeData(
            features=self.features[mask],
            state_labels=self.state_labels[mask],
            parity_labels=self.parity_labels[mask],
            doc_index=self.doc_index[mask],
            positions=self.positions[mask],
            group_size=self.group_size,
            layer=self.layer,
            position_policy=self.position_policy,
        )


@dataclass
class Probe:
    """Обученная линейная проба residual -> классы."""
    weight: np.ndarray  # (d_model, classes)
    bias: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    layer: int
    position_policy: str
    target: str

    @property
    def n_classes(self) -> int:
        return self.weight.shape[1]

    def logits(self, features: np.ndarray) -> np.ndarray:
        return ((features - self.mean) / self.scale) @ self.weight + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        logits = self.logits(features)
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        return probs / probs.sum(axis=1, keepdims=True)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.logits(features).argmax(axis=1)

    def accuracy(self, features: np.ndarray, labels: np.ndarray) -> float:
        return float((self.predict(features) == labels).mean())

    def correct_probability(self, features: np.ndarray, labels: np.ndarray) -> float:
        """Средняя вероятность, которую проба даёт верному классу."""
        probs = self.predict_proba(features)
        return float(probs[np.arange(len(labels)), labels].mean())


def _check_state_corpus(corpus: Corpus) -> None:
    if corpus.mode != CorpusMode.STATE_PREDICTION:
        raise DataError(
            f"probing needs a state-prediction corpus, got {corpus.mode.value}"
        )
    if len(corpus) == 0:
        raise DataError("probing corpus is empty")


def _state_labels(vocab: Vocab, inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    table = group_table(vocab.group_degree)
    indices = vocab.group_index_array()[inputs]
    if (indices < 0).any():
        raise DataError("probing inputs contain non-permutation tokens")
    return table.prefix_products(indices), table.prefix_parities(indices)


def collect_layer_features(
    model: StateTrackingTransformer,
    inputs: np.ndarray,
    layers: Sequence[int],
    position_policy: str = "last-token",
) -> np.ndarray:
    """
    Residual-векторы выбранных слоёв.

    Returns:
        Массив (len(layers), N, d_model), где N = число документов
        (last-token) или документов × позиций (per-position)
    """
    if position_policy not in POSITION_POLICIES:
        raise DataError(f"unknown position policy: {position_policy}")
    for layer in layers:
        if not 0 <= layer <= model.n_layers:
            raise DataError(f"layer {layer} outside 0..{model.n_layers}")

    model.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(inputs), BATCH_SIZE):
            batch = torch.as_tensor(inputs[start : start + BATCH_SIZE])
            _, trace = model(batch, capture="resid")
            resid = trace.resid[:, list(layers)].double()  # (B, k, T, d)
            if position_policy == "last-token":
                resid = resid[:, :, -1]
            else:
                resid = resid.permute(0, 2, 1, 3)
                resid = resid.reshape(-1, len(layers), resid.shape[-1])
            chunks.append(resid.numpy())
    return np.concatenate(chunks, axis=0).transpose(1, 0, 2)


def collect_probe_data(
    model: StateTrackingTransformer,
    corpus: Corpus,
    layer: int,
    position_policy: str = "last-token",
) -> ProbeData:
    """
    Собирает признаки и метки для одного слоя.

    Метки (состояние и его чётность) пересчитываются по входам, а не
    берутся из целей корпуса.

    Raises:
        DataError: Корпус не в режиме state-prediction или слой вне 0..L
    """
    return _collect_many(model, corpus, [layer], position_policy)[0]


def _collect_many(
    model: StateTrackingTransformer,
    corpus: Corpus,
    layers: Sequence[int],
    position_policy: str,
) -> List[ProbeData]:
    _check_state_corpus(corpus)
    inputs = corpus.input_matrix()
    features = collect_layer_features(model, inputs, layers, position_policy)
    states, parities = _state_labels(corpus.vocab, inputs)
    n_docs, T = inputs.shape

    if position_policy == "last-token":
        states, parities = states[:, -1], parities[:, -1]
        doc_index = np.arange(n_docs)
        positions = np.full(n_docs, T - 1)
    else:
        states, parities = states.reshape(-1), parities.reshape(-1)
        doc_index = np.repeat(np.arange(n_docs), T)
        positions = np.tile(np.arange(T), n_docs)

    group_size = len(group_table(corpus.vocab.group_degree))
    return [
        ProbeData(
            features=features[i],
            state_labels=states,
            parity_labels=parities,
            doc_index=doc_index,
            positions=positions,
            group_size=group_size,
            layer=layer,
            position_policy=position_policy,
        )
        for i, layer in enumerate(layers)
    ]


def split_by_document(
    data: ProbeData, held_out_fraction: float, seed: int
) -> Tuple[ProbeData, ProbeData]:
    """Делит данные так, что один документ целиком попадает в одну часть."""
    documents = np.unique(data.doc_index)
    if len(documents) < 2:
        raise DataError("need at least two documents to hold out probe data")
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(documents)
    n_held = int(math.ceil(held_out_fraction * len(documents)))
    n_held = min(max(1, n_held), len(documents) - 1)
    held = np.isin(data.doc_index, shuffled[:n_held])
    return data.select(~held), data.select(held)


def _fit_logistic(
    features: np.ndarray, labels: np.ndarray, n_classes: int, l2: float
) -> Tuple[np.ndarray, np.ndarray]:
    x = torch.as_tensor(features, dtype=torch.float64)
    y = torch.as_tensor(labels, dtype=torch.long)
    weight = torch.zeros(x.shape[1], n_classes, dtype=torch.float64, requires_grad=True)
    bias = torch.zeros(n_classes, dtype=torch.float64, requires_grad=True)
    optimizer = torch.optim.LBFGS(
        [weight, bias],
        lr=1.0,
        max_iter=500,
        tolerance_grad=GRADIENT_TOLERANCE,
        tolerance_change=1e-12,
        history_size=20,
        line_search_fn="strong_wolfe",
    )

    def closure() -> torch.Tensor:
        optimizer.zero_grad()
        penalty = 0.5 * l2 * (weight**2).sum()
        objective = F.cross_entropy(x @ weight + bias, y) + penalty
        objective.backward()
        return objective

    optimizer.step(closure)
    return weight.detach().numpy(), bias.detach().numpy()


def train_probe(
    data: ProbeData,
    target: str = "state",
    l2: float = 1e-4,
    seed: int = 0,
    held_out_fraction: float = 0.2,
) -> Tuple[Probe, float]:
    """
    Обучает пробу и оценивает её на отложенных документах.

    Args:
        data: Признаки и метки
        target: "state" или "parity"
        l2: L2-штраф на веса
        seed: Сид разбиения по документам
        held_out_fraction: Доля отложенных документов

    Returns:
        (проба, точность на отложенной части)

    Raises:
        DataError: В обучающей части присутствует только один класс
    """
    if target not in PROBE_TARGETS:
        raise DataError(f"unknown probe target: {target}")
    train_part, held_part = split_by_document(data, held_out_fraction, seed)
    labels, n_classes = train_part.labels(target)
    if len(np.unique(labels)) < 2:
        raise DataError(
            f"probe target '{target}' has a single class in the training data"
        )

    mean = train_part.features.mean(axis=0)
    scale = train_part.features.std(axis=0)
    scale[scale < 1e-12] = 1.0
    features = (train_part.features - mean) / scale
    weight, bias = _fit_logistic(features, labels, n_classes, l2)

    probe = Probe(
        weight=weight,
        bias=bias,
        mean=mean,
        scale=scale,
        layer=data.layer,
        position_policy=data.position_policy,
        target=target,
    )
    held_labels, _ = held_part.labels(target)
    accuracy = probe.accuracy(held_part.features, held_labels)
    logger.debug(
        f"Проба {target} слоя {data.layer}: точность {accuracy:.3f} "
        f"на {len(held_part)} примерах"
    )
    return probe, accuracy


@dataclass
class ProbeCurves:
    """Точности проб по слоям (last-token) и уровни случайного угадывания."""
    layers: List[int]
    state_accuracy: List[float]
    parity_accuracy: List[float]
    state_chance: float
    parity_chance: float = 0.5
    metadata: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "layers": self.layers,
            "state_accuracy": self.state_accuracy,
            "parity_accuracy": self.parity_accuracy,
            "state_chance": self.state_chance,
            "parity_chance": self.parity_chance,
            "metadata": self.metadata,
        }


def probe_curves(
    model: StateTrackingTransformer,
    corpus: Corpus,
    seed: int = 0,
    l2: float = 1e-4,
) -> ProbeCurves:
    """По одной пробе на (слой, цель) с политикой last-token."""
    layers = list(range(model.n_layers + 1))
    datasets = _collect_many(model, corpus, layers, "last-token")
    state_acc, parity_acc = [], []
    for data in datasets:
        state_acc.append(train_probe(data, "state", l2=l2, seed=seed)[1])
        parity_acc.append(train_probe(data, "parity", l2=l2, seed=seed)[1])
        logger.info(
            f"Слой {data.layer}: state-проба {state_acc[-1]:.3f}, "
            f"parity-проба {parity_acc[-1]:.3f}"
        )
    group_size = datasets[0].group_size
    return ProbeCurves(
        layers=layers,
        state_accuracy=state_acc,
        parity_accuracy=parity_acc,
        state_chance=1.0 / group_size,
        metadata={
            "documents": len(corpus),
            "length": len(corpus[0]),
            "seed": seed,
            "l2": l2,
        },
    )


def probe_length_matrix(
    features_by_length: Sequence[np.ndarray],
    final_states: Sequence[np.ndarray],
    group_size: int,
    seed: int = 0,
    l2: float = 1e-4,
    held_out_fraction: float = 0.2,
) -> np.ndarray:
    """
    Средняя вероятность верного финального состояния по слоям и длинам.

    Args:
        features_by_length: Для каждой длины массив (layers, N, d) признаков
            последней позиции
        final_states: Для каждой длины индексы финальных состояний (N,)
        group_size: Число классов

    Returns:
        Матрица (layers, lengths)
    """
    columns = []
    for features, states in zip(features_by_length, final_states):
        n = len(states)
        parities = np.zeros(n, dtype=np.int64)
        column = []
        for layer_features in features:
            data = ProbeData(
                features=np.asarray(layer_features, dtype=np.float64),
                state_labels=np.asarray(states),
                parity_labels=parities,
                doc_index=np.arange(n),
                positions=np.zeros(n, dtype=np.int64),
                group_size=group_size,
            )
            train_part, held_part = split_by_document(data, held_out_fraction, seed)
            if len(np.unique(train_part.state_labels)) < 2:
                # единственное возможное состояние угадывается всегда
                column.append(1.0)
                continue
            probe, _ = train_probe(
                data, "state", l2=l2, seed=seed, held_out_fraction=held_out_fraction
            )
            column.append(
                probe.correct_probability(held_part.features, held_part.state_labels)
            )
        columns.append(column)
    return np.array(columns).T


def probe_by_length(
    model: StateTrackingTransformer,
    group_degree: int,
    lengths: Sequence[int],
    n_samples: int = 300,
    seed: int = 0,
    l2: float = 1e-4,
) -> np.ndarray:
    """
    Проба финального состояния с последней позиции последовательностей длины i.

    Returns:
        Матрица (L + 1, len(lengths)) средней вероятности верного состояния
    """
    if not lengths:
        raise DataError("no lengths to probe")
    if max(lengths) > model.config.max_positions:
        raise DataError(
            f"probe length {max(lengths)} exceeds "
            f"max_positions {model.config.max_positions}"
        )
    layers = list(range(model.n_layers + 1))
    features_by_length, final_states = [], []
    for offset, length in enumerate(lengths):
        inputs, states = _random_sequences(
            group_degree, n_samples, length, seed + offset
        )
        features_by_length.append(
            collect_layer_features(model, inputs, layers, "last-token")
        )
        final_states.append(states)
        logger.debug(f"Собраны признаки для длины {length}")
    group_size = len(group_table(group_degree))
    return probe_length_matrix(
        features_by_length, final_states, group_size, seed=seed, l2=l2
    )


def _random_sequences(
    group_degree: int, count: int, length: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Равномерные последовательности действий: (токены, финальные состояния)."""
    table = group_table(group_degree)
    state_ids = np.array(Vocab.for_group(group_degree).state_token_ids, dtype=np.int64)
    indices = np.random.default_rng(seed).integers(0, len(table), size=(count, length))
    return state_ids[indices], table.prefix_products(indices)[:, -1]


def embed_registers(
    grids: Sequence[RegisterGrid], dim: int, seed: int = 0
) -> np.ndarray:
    """
    Признаки последней позиции эталонных регистров через случайное линейное вложение.

    Ячейка кодируется one-hot: перестановка - индексом в группе, регистр
    PAA - чётностью и индексом дополнения. Одно вложение на все слои.

    Returns:
        Массив (depth + 1, len(grids), dim)
    """
    if not grids:
        raise DataError("no register grids to embed")
    first = grids[0].cell(0, 0)
    if isinstance(first, ParityRegister):
        degree = first.complement.degree
    else:
        degree = first.degree
    table = group_table(degree)
    size = len(table)
    paired = isinstance(first, ParityRegister)
    width = size + 2 if paired else size
    embedding = np.random.default_rng(seed).normal(size=(width, dim))

    depth = grids[0].depth
    onehot = np.zeros((depth + 1, len(grids), width))
    for i, grid in enumerate(grids):
        for layer in range(depth + 1):
            cell = grid.cell(grid.length - 1, layer)
            if paired:
                onehot[layer, i, int(cell.parity)] = 1.0
                onehot[layer, i, 2 + table.index(cell.complement)] = 1.0
            else:
                onehot[layer, i, table.index(cell)] = 1.0
    return onehot @ embedding
