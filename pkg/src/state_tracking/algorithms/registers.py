"""
Типы регистров эталонных алгоритмов.

RegisterGrid хранит значения h_{t,l} для всех позиций t и слоёв l = 0..L.
Слой 0 - сырые действия (или инициализированные регистры чётности).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

from ..core.errors import DataError
from ..core.permutations import Parity, Permutation


class Algorithm(str, Enum):
    """Кандидатные механизмы отслеживания состояния (от простого к сложному)."""
    SEQUENTIAL = "sequential"
    PARALLEL = "parallel"
    ASSOCIATIVE = "associative"
    PARITY_ASSOCIATIVE = "parity-associative"

    @property
    def rank(self) -> int:
        return list(Algorithm).index(self)


@dataclass(frozen=True)
class ParityRegister:
    """Пара регистров PAA: чётность состояния и каноническое дополнение окна."""
    parity: Parity
    complement: Permutation


@dataclass(frozen=True)
class ParallelS3State:
    """Нормальная форма b^c a^p элемента S_3: чётность транспозиций и 3-циклы."""
    transposition_parity: int
    cycle_count: int

    def __post_init__(self) -> None:
        if self.transposition_parity not in (0, 1) or self.cycle_count not in (0, 1, 2):
            raise DataError(f"invalid normal form: {self}")


Cell = Union[Permutation, ParityRegister, None]


@dataclass(frozen=True)
class RegisterGrid:
    """
    Неизменяемая сетка регистров (позиция × слой).

    cells[t][l] - значение регистра; None означает неактивную ячейку.
    complete=False, если глубины L не хватает, чтобы досчитать все префиксы.
    """

    algorithm: Algorithm
    cells: Tuple[Tuple[Cell, ...], ...]
    complete: bool
    transposition: Optional[Permutation] = None  # для PAA: τ, задающая дополнение

    @property
    def length(self) -> int:
        return len(self.cells)

    @property
    def depth(self) -> int:
        return len(self.cells[0]) - 1

    def cell(self, t: int, layer: int) -> Cell:
        return self.cells[t][layer]

    def layer(self, layer: int) -> Tuple[Cell, ...]:
        return tuple(row[layer] for row in self.cells)
