"""
Разложение представлений состояний на ось чётности и кластерные компоненты.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..algorithms.simulators import canonical_complement, complement_transposition
from ..core.errors import DataError
from ..core.permutations import apply_to_labels, group_table
from ..datasets.corpus import Corpus
from ..model.transformer import StateTrackingTransformer
from .probes import collect_probe_data

logger = logging.getLogger(__name__)


@dataclass
class Decomposition:
    """
    Результат разложения средних представлений по состояниям.

    coordinates[i] = (проекция на ось чётности, проекции на components)
    для состояния states[i].
    """
    parity_axis: np.ndarray
    components: np.ndarray  # (k, d)
    parity_variance: float
    explained_variance: np.ndarray  # доли от полной дисперсии средних
    coordinates: np.ndarray  # (S, 1 + k)
    states: List[str]
    cluster_labels: Dict[str, str] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parity_axis": self.parity_axis.tolist(),
            "components": self.components.tolist(),
            "parity_variance": self.parity_variance,
            "explained_variance": self.explained_variance.tolist(),
            "coordinates": {
                s: c.tolist() for s, c in zip(self.states, self.coordinates)
            },
            "cluster_labels": self.cluster_labels,
            "metadata": self.metadata,
        }


def cluster_label(state_index: int, group_degree: int) -> str:
    """
    Кластер состояния: для S_3 - каноническое дополнение, иначе слот объекта 1.
    """
    state = group_table(group_degree).elements[state_index]
    if group_degree == 3:
        return str(canonical_complement(state, complement_transposition(3)))
    labels = "".join(str(i + 1) for i in range(group_degree))
    return f"slot{apply_to_labels(state, labels).index('1') + 1}"


def decompose_state_means(
    features: np.ndarray,
    state_labels: np.ndarray,
    parity_labels: np.ndarray,
    group_size: int,
    n_components: int = 2,
) -> Decomposition:
    """
    Ось чётности и главные компоненты средних по состояниям.

    Ось чётности - нормированная разность средних нечётного и чётного
    классов. Компоненты - главные направления центрированных средних по
    состояниям после удаления проекции на ось чётности.

    Raises:
        DataError: Наблюдается меньше состояний, чем классов, или один класс чётности
    """
    features = np.asarray(features, dtype=np.float64)
    states = np.unique(state_labels)
    if len(states) < group_size:
        raise DataError(f"only {len(states)} of {group_size} states observed")
    if len(np.unique(parity_labels)) < 2:
        raise DataError("both parity classes are needed for the parity axis")

    odd_mean = features[parity_labels == 1].mean(axis=0)
    difference = odd_mean - features[parity_labels == 0].mean(axis=0)
    norm = np.linalg.norm(difference)
    if norm < 1e-12:
        raise DataError("parity class means coincide")
    axis = difference / norm

    means = np.stack([features[state_labels == s].mean(axis=0) for s in states])
    centred = means - means.mean(axis=0)
    along = centred @ axis
    residual = centred - np.outer(along, axis)

    _, singular, vt = np.linalg.svd(residual, full_matrices=False)
    k = min(n_components, len(singular))
    total = float((centred ** 2).sum())
    if total <= 0:
        raise DataError("state means have no variance")

    components = vt[:k]
    coordinates = np.column_stack([along, residual @ components.T])
    return Decomposition(
        parity_axis=axis,
        components=components,
        parity_variance=float((along ** 2).sum() / total),
        explained_variance=singular[:k] ** 2 / total,
        coordinates=coordinates,
        states=[str(int(s)) for s in states],
    )


def pca_decomposition(
    model: StateTrackingTransformer,
    corpus: Corpus,
    layer: Optional[int] = None,
    n_components: int = 2,
) -> Decomposition:
    """Разложение last-token представлений слоя (по умолчанию последнего)."""
    layer = model.n_layers if layer is None else layer
    data = collect_probe_data(model, corpus, layer, "last-token")
    result = decompose_state_means(
        data.features,
        data.state_labels,
        data.parity_labels,
        data.group_size,
        n_components,
    )

    degree = corpus.vocab.group_degree
    elements = group_table(degree).elements
    result.states = [str(elements[int(i)]) for i in result.states]
    result.cluster_labels = {
        str(elements[i]): cluster_label(i, degree) for i in range(len(elements))
    }
    result.metadata = {"layer": layer, "documents": len(corpus)}
    logger.info(
        f"Разложение слоя {layer}: ось чётности {result.parity_variance:.3f}, "
        f"компоненты {np.round(result.explained_variance, 3).tolist()}"
    )
    return result
