"""
Точная алгебра симметрической группы S_n.

Предоставляет:
- Permutation: перестановка в однострочной записи (dest[i] - слот, куда
  переезжает объект из слота i)
- Parity: чётность перестановки
- compose, inverse, parity: групповые операции
- cumulative_states, state_parities: решение word problem
- apply_to_labels, enumerate_group, random_permutation
- GroupTable: таблица умножения для пакетной работы с корпусами

Внутреннее представление 0-based, отображение - строка цифр 1-based ("42315").
"""

import itertools
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError

MAX_ENUMERATION_DEGREE = 8
MAX_TABLE_DEGREE = 6  # 720 x 720 индексов


class Parity(IntEnum):
    """Чётность перестановки: even=0, odd=1."""
    EVEN = 0
    ODD = 1


@dataclass(frozen=True, order=True)
class Permutation:
    """
    Перестановка n объектов.

    Пример использования:
        a = Permutation.from_string("42315")
        b = Permutation.from_string("12534")
        str(compose(a, b))  # "32514"
    """

    dest: Tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.dest) != list(range(len(self.dest))):
            raise DataError(f"not a bijection on 0..{len(self.dest) - 1}: {self.dest}")

    @property
    def degree(self) -> int:
        return len(self.dest)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_string(cls, text: str) -> "Permutation":
        """Разбирает строку вида "42315" (цифры 1-based)."""
        if not text.isdigit():
            raise DataError(f"permutation token must be digits: {text!r}")
        return cls(tuple(int(ch) - 1 for ch in text))

    def is_identity(self) -> bool:
        return all(i == d for i, d in enumerate(self.dest))

    def __str__(self) -> str:
        if self.degree > 9:
            return "-".join(str(d + 1) for d in self.dest)
        return "".join(str(d + 1) for d in self.dest)

    def __repr__(self) -> str:
        return f"Permutation({self})"


def _check_degree(a: Permutation, b: Permutation) -> None:
    if a.degree != b.degree:
        raise DataError(f"degree mismatch: {a.degree} vs {b.degree}")


def compose(a: Permutation, b: Permutation) -> Permutation:
    """
    Композиция "сначала a, потом b": result[i] = b[a[i]].

    Args:
        a: Первое действие
        b: Второе действие

    Returns:
        Произведение ab
    """
    _check_degree(a, b)
    return Permutation(tuple(b.dest[i] for i in a.dest))


def inverse(p: Permutation) -> Permutation:
    """Обратная перестановка: compose(p, inverse(p)) = identity."""
    inv = [0] * p.degree
    for i, d in enumerate(p.dest):
        inv[d] = i
    return Permutation(tuple(inv))


def cycle_count(p: Permutation) -> int:
    """Количество циклов (включая неподвижные точки)."""
    seen = [False] * p.degree
    cycles = 0
    for start in range(p.degree):
        if seen[start]:
            continue
        cycles += 1
        j = start
        while not seen[j]:
            seen[j] = True
            j = p.dest[j]
    return cycles


def parity(p: Permutation) -> Parity:
    """Чётность через подсчёт циклов: (n - cycles) mod 2."""
    return Parity((p.degree - cycle_count(p)) % 2)


def _check_actions(actions: Sequence[Permutation]) -> None:
    if len(actions) == 0:
        raise DataError("action sequence is empty")
    n = actions[0].degree
    for a in actions:
        if a.degree != n:
            raise DataError(f"degree mismatch in action sequence: {a.degree} vs {n}")


def cumulative_states(actions: Sequence[Permutation]) -> List[Permutation]:
    """
    Решает word problem: states[t] = a_0 a_1 ... a_t.

    Args:
        actions: Непустая последовательность действий одной степени

    Returns:
        Последовательность состояний той же длины
    """
    _check_actions(actions)
    states = [actions[0]]
    for a in actions[1:]:
        states.append(compose(states[-1], a))
    return states


def state_parities(actions: Sequence[Permutation]) -> List[Parity]:
    """Чётности состояний как накопленная сумма чётностей действий по модулю 2."""
    _check_actions(actions)
    running = 0
    result = []
    for a in actions:
        running ^= int(parity(a))
        result.append(Parity(running))
    return result


def apply_to_labels(state: Permutation, labels: str) -> str:
    """
    Раскладывает метки объектов по слотам: слот state[i] получает labels[i].

    Пример:
        apply_to_labels(Permutation.from_string("32514"), "ABCDE")  # "DBAEC"
    """
    if len(labels) != state.degree:
        raise DataError(f"expected {state.degree} labels, got {len(labels)}")
    out = [""] * state.degree
    for i, d in enumerate(state.dest):
        out[d] = labels[i]
    return "".join(out)


def enumerate_group(n: int) -> List[Permutation]:
    """Все n! перестановок в лексикографическом порядке строковой записи."""
    if n < 1 or n > MAX_ENUMERATION_DEGREE:
        raise ConfigError(
            f"group degree must be in 1..{MAX_ENUMERATION_DEGREE}, got {n}"
        )
    return [Permutation(tuple(p)) for p in itertools.permutations(range(n))]


def random_permutation(rng: np.random.Generator, n: int) -> Permutation:
    """Равномерная перестановка из S_n (Fisher–Yates внутри numpy)."""
    return Permutation(tuple(int(x) for x in rng.permutation(n)))


def parse_actions(tokens: Iterable[str]) -> List[Permutation]:
    """Разбирает последовательность строковых токенов в действия."""
    return [Permutation.from_string(tok) for tok in tokens]


class GroupTable:
    """
    Таблица умножения S_n над индексами enumerate_group(n).

    Нужна для пакетной работы с корпусами: свёртка последовательностей
    индексов идёт через numpy без создания объектов Permutation.

    Пример использования:
        table = group_table(3)
        states = table.prefix_products(np.array([[1, 4, 2]]))
    """
    def __init__(self, n: int) -> None:
        if n > MAX_TABLE_DEGREE:
            raise ConfigError(
                f"multiplication table supports degree <= {MAX_TABLE_DEGREE}, got {n}"
            )
        self.degree = n
        self.elements: List[Permutation] = enumerate_group(n)
        self._index = {p: i for i, p in enumerate(self.elements)}
        size = len(self.elements)
        self.product = np.empty((size, size), dtype=np.int64)
        for i, a in enumerate(self.elements):
            for j, b in enumerate(self.elements):
                self.product[i, j] = self._index[compose(a, b)]
        self.parities = np.array(
            [int(parity(p)) for p in self.elements], dtype=np.int64
        )
        self.inverses = np.array(
            [self._index[inverse(p)] for p in self.elements], dtype=np.int64
        )
        self.identity_index = self._index[Permutation.identity(n)]

    def __len__(self) -> int:
        return len(self.elements)

    def index(self, p: Permutation) -> int:
        if p.degree != self.degree:
            raise DataError(f"degree mismatch: {p.degree} vs {self.degree}")
        return self._index[p]

    def prefix_products(self, indices: np.ndarray) -> np.ndarray:
        """Накопленные произведения вдоль последней оси (states[..., t])."""
        indices = np.asarray(indices, dtype=np.int64)
        out = np.empty_like(indices)
        out[..., 0] = indices[..., 0]
        for t in range(1, indices.shape[-1]):
            out[..., t] = self.product[out[..., t - 1], indices[..., t]]
        return out

    def prefix_parities(self, indices: np.ndarray) -> np.ndarray:
        parities = self.parities[np.asarray(indices, dtype=np.int64)]
        return np.cumsum(parities, axis=-1) % 2


@lru_cache(maxsize=None)
def group_table(n: int) -> GroupTable:
    """Кешированная таблица умножения для степени n."""
    return GroupTable(n)
