"""
Идеальные сигнатуры патчинга и пробинга для каждого алгоритма.

Сетки хранятся как массивы формы (L + 1, T): строка - граница слоя l,
столбец - позиция t. Так же они выгружаются в CSV.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..core.errors import ConfigError
from ..utils.export import write_json, write_matrix_csv
from .registers import Algorithm

logger = logging.getLogger(__name__)


class ParityRelation(str, Enum):
    """Отношение чётностей чистого и испорченного ответа в паре патчинга."""
    SAME = "same"
    OPPOSITE = "opposite"
    AVERAGED = "averaged"


@dataclass
class IdealSignature:
    """
    Ожидаемые сигнатуры алгоритма.

    grid - сетка восстановления (L + 1, T); probe_state / probe_parity -
    точности проб по слоям; probe_parity_flat - второе прочтение для
    алгоритмов без отдельного канала чётности (проба чётности на уровне 0.5).
    """

    algorithm: Algorithm
    length: int
    depth: int
    parity_relation: ParityRelation = ParityRelation.AVERAGED
    grid: Optional[np.ndarray] = None
    probe_state: Optional[np.ndarray] = None
    probe_parity: Optional[np.ndarray] = None
    probe_parity_flat: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm.value,
            "length": self.length,
            "depth": self.depth,
            "parity_relation": self.parity_relation.value,
            "grid": _as_list(self.grid),
            "probe_state": _as_list(self.probe_state),
            "probe_parity": _as_list(self.probe_parity),
            "probe_parity_flat": _as_list(self.probe_parity_flat),
            "metadata": self.metadata,
        }


def _as_list(array: Optional[np.ndarray]) -> Optional[List[Any]]:
    return None if array is None else array.tolist()


def _parse_algorithm(algorithm: Union[Algorithm, str]) -> Algorithm:
    try:
        return Algorithm(algorithm)
    except ValueError:
        raise ConfigError(
            f"unknown algorithm {algorithm!r}; "
            f"choose from {[a.value for a in Algorithm]}"
        ) from None


def _sequential_grid(T: int, L: int) -> np.ndarray:
    layers = np.arange(L + 1)[:, None]
    positions = np.arange(T)[None, :]
    return (layers >= positions).astype(float)


def _parallel_grid(T: int, L: int, depth: int) -> np.ndarray:
    grid = np.zeros((L + 1, T))
    grid[: min(depth, L) + 1, :] = 1.0
    grid[:, T - 1] = 1.0
    return grid


def _associative_grid(T: int, L: int) -> np.ndarray:
    layers = np.arange(L + 1)[:, None].astype(float)
    positions = np.arange(T)[None, :]
    return (positions >= T * (1.0 - 2.0 ** (layers - L))).astype(float)


def ideal_patching_signature(
    algorithm: Union[Algorithm, str],
    length: int,
    depth: int,
    parity_relation: Union[ParityRelation, str] = ParityRelation.AVERAGED,
    parallel_depth: int = 2,
    parity_depth: int = 2,
) -> IdealSignature:
    """
    Идеальная сетка патчинга префикса.

    Args:
        algorithm: Алгоритм (sequential, parallel, associative, parity-associative)
        length: Длина T
        depth: Число слоёв L
        parity_relation: Для PAA - same, opposite или averaged
        parallel_depth: Слой l_P, к которому параллельный алгоритм досчитывает ответ
        parity_depth: Слой, к которому PAA досчитывает чётность

    Returns:
        IdealSignature с заполненным grid
    """
    algorithm = _parse_algorithm(algorithm)
    relation = ParityRelation(parity_relation)
    if length < 1 or depth < 0:
        raise ConfigError(f"invalid signature shape T={length}, L={depth}")

    if algorithm == Algorithm.SEQUENTIAL:
        grid = _sequential_grid(length, depth)
    elif algorithm == Algorithm.PARALLEL:
        grid = _parallel_grid(length, depth, parallel_depth)
    elif algorithm == Algorithm.ASSOCIATIVE:
        grid = _associative_grid(length, depth)
    else:
        same = _associative_grid(length, depth)
        opposite = _parallel_grid(length, depth, parity_depth)
        grid = {
            ParityRelation.SAME: same,
            ParityRelation.OPPOSITE: opposite,
            ParityRelation.AVERAGED: 0.5 * same + 0.5 * opposite,
        }[relation]

    return IdealSignature(
        algorithm=algorithm,
        length=length,
        depth=depth,
        parity_relation=relation,
        grid=grid,
        metadata={"parallel_depth": parallel_depth, "parity_depth": parity_depth},
    )


def resolved_fraction(
    algorithm: Union[Algorithm, str], length: int, depth: int, parallel_depth: int = 2
) -> np.ndarray:
    """Доля префиксов, состояние которых уже вычислено к слою l."""
    algorithm = _parse_algorithm(algorithm)
    layers = np.arange(depth + 1, dtype=float)
    if algorithm == Algorithm.SEQUENTIAL:
        return np.minimum(layers / length, 1.0)
    if algorithm == Algorithm.PARALLEL:
        return (layers >= parallel_depth).astype(float)
    return np.minimum(2.0 ** layers / length, 1.0)


def ideal_probing_signature(
    algorithm: Union[Algorithm, str],
    length: int,
    depth: int,
    chance: Optional[float] = None,
    parallel_depth: int = 2,
    parity_depth: int = 2,
    group_size: int = 6,
) -> IdealSignature:
    """
    Ожидаемые точности state- и parity-проб по слоям.

    Точность пробы состояния: rf + (1 - rf)·chance, где rf - доля уже
    вычисленных префиксов. Для parallel и PAA проба чётности выходит на 1
    к своей глубине; для sequential и associative выдаются оба прочтения:
    чётность следует за состоянием или остаётся на 0.5.
    """
    algorithm = _parse_algorithm(algorithm)
    chance = 1.0 / group_size if chance is None else chance
    rf = resolved_fraction(algorithm, length, depth, parallel_depth)
    state = rf + (1.0 - rf) * chance
    tracking = rf + (1.0 - rf) * 0.5
    layers = np.arange(depth + 1)

    flat = None
    if algorithm == Algorithm.PARALLEL:
        parity = np.where(layers >= parallel_depth, 1.0, tracking)
    elif algorithm == Algorithm.PARITY_ASSOCIATIVE:
        parity = np.where(layers >= parity_depth, 1.0, tracking)
    else:
        parity = tracking
        flat = np.full(depth + 1, 0.5)

    return IdealSignature(
        algorithm=algorithm,
        length=length,
        depth=depth,
        probe_state=state,
        probe_parity=parity,
        probe_parity_flat=flat,
        metadata={
            "chance": chance,
            "parallel_depth": parallel_depth,
            "parity_depth": parity_depth,
        },
    )


def export_signature(
    signature: IdealSignature, directory: Path, stem: Optional[str] = None
) -> Dict[str, Path]:
    """Выгружает сетку (CSV) и полную сигнатуру (JSON)."""
    directory = Path(directory)
    default_stem = (
        f"ideal_{signature.algorithm.value}_{signature.parity_relation.value}"
    )
    stem = stem or default_stem
    paths = {"json": write_json(signature.to_dict(), directory / f"{stem}.json")}
    if signature.grid is not None:
        paths["csv"] = write_matrix_csv(signature.grid, directory / f"{stem}.csv")
    return paths
