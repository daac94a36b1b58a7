"""
Точные симуляторы четырёх кандидатных механизмов.

Предоставляет:
- run_sequential: композиция слева направо, по одному действию на слой
- run_parallel_s3: константная глубина для S_3 через нормальную форму b^c a^p
- run_associative: попарная композиция окон, ширина окна удваивается на слой
- run_parity_associative: чётность параллельно, дополнение ассоциативно
- final_prediction: ответ сетки на каждой позиции
"""

import logging
from typing import Dict, List, Sequence, Tuple

from ..core.errors import DataError
from ..core.permutations import (
    Parity,
    Permutation,
    compose,
    cumulative_states,
    parity,
    state_parities,
)
from .registers import Algorithm, ParallelS3State, ParityRegister, RegisterGrid

logger = logging.getLogger(__name__)

# Образующие S_3: a = транспозиция (2 3), b = 3-цикл; a·b^k = b^{-k}·a
GENERATOR_A = Permutation.from_string("132")
GENERATOR_B = Permutation.from_string("231")

_COMPLEMENT_TRANSPOSITIONS = {
    3: Permutation.from_string("132"),
    5: Permutation.from_string("21345"),
}


def _check(actions: Sequence[Permutation], depth: int) -> None:
    if len(actions) == 0:
        raise DataError("action sequence is empty")
    if depth < 0:
        raise DataError(f"depth must be non-negative, got {depth}")


def _freeze(columns: List[List]) -> Tuple[Tuple, ...]:
    return tuple(tuple(row) for row in columns)


def run_sequential(actions: Sequence[Permutation], depth: int) -> RegisterGrid:
    """
    Последовательный алгоритм: h_{t,l} = a_t при l < t, иначе s_t.

    Если depth < T - 1, сетка помечается как незавершённая (без исключения).
    """
    _check(actions, depth)
    states = cumulative_states(actions)
    cells = [
        [actions[t] if layer < t else states[t] for layer in range(depth + 1)]
        for t in range(len(actions))
    ]
    complete = depth >= len(actions) - 1
    if not complete:
        logger.warning(
            f"Sequential: глубины {depth} не хватает для длины {len(actions)}"
        )
    return RegisterGrid(Algorithm.SEQUENTIAL, _freeze(cells), complete)


def s3_normal_form(p: Permutation) -> ParallelS3State:
    """Нормальная форма элемента S_3: p = b^c · a^p."""
    if p.degree != 3:
        raise DataError(f"normal form is defined for S3 only, got degree {p.degree}")
    return _NORMAL_FORMS[p]


def s3_from_normal_form(state: ParallelS3State) -> Permutation:
    element = Permutation.identity(3)
    for _ in range(state.cycle_count):
        element = compose(element, GENERATOR_B)
    if state.transposition_parity:
        element = compose(element, GENERATOR_A)
    return element


def _build_normal_forms() -> Dict[Permutation, ParallelS3State]:
    table = {}
    for p_bit in (0, 1):
        for c in (0, 1, 2):
            state = ParallelS3State(p_bit, c)
            table[s3_from_normal_form(state)] = state
    return table


_NORMAL_FORMS = _build_normal_forms()


def run_parallel_s3(
    actions: Sequence[Permutation],
) -> Tuple[List[Permutation], List[ParallelS3State]]:
    """
    Алгоритм константной глубины для S_3.

    Каждое действие g раскладывается как b^{c_g} a^{p_g}. Чётность префикса -
    сумма p_g по модулю 2; счётчик 3-циклов - сумма c_g со знаком
    (-1)^{чётность до g} по модулю 3. Оба значения - независимые суммы,
    которые считаются параллельно по всем позициям.

    Returns:
        (состояния, нормальные формы каждого префикса)
    """
    _check(actions, 0)
    for a in actions:
        if a.degree != 3:
            raise DataError(f"run_parallel_s3 needs degree 3, got {a.degree}")

    forms = [_NORMAL_FORMS[a] for a in actions]

    # Чётность перед каждой позицией (исключающая префиксная сумма)
    before = [0] * len(forms)
    running = 0
    for t, form in enumerate(forms):
        before[t] = running
        running ^= form.transposition_parity

    signed = [(-f.cycle_count if b else f.cycle_count) for f, b in zip(forms, before)]
    prefix_forms = []
    total = 0
    for t, form in enumerate(forms):
        total += signed[t]
        parity_bit = before[t] ^ form.transposition_parity
        prefix_forms.append(ParallelS3State(parity_bit, total % 3))

    states = [s3_from_normal_form(f) for f in prefix_forms]
    return states, prefix_forms


def run_associative(actions: Sequence[Permutation], depth: int) -> RegisterGrid:
    """
    Ассоциативный алгоритм: h_{t,l} = h_{t-2^{l-1}, l-1} · h_{t, l-1}.

    Ячейка (t, l) хранит произведение окна a_{max(0, t-2^l+1)} .. a_t; окно,
    выходящее за начало последовательности, обрезается на позиции 0.
    """
    _check(actions, depth)
    T = len(actions)
    cells = [[a] for a in actions]
    for layer in range(1, depth + 1):
        offset = 2 ** (layer - 1)
        for t in range(T):
            current = cells[t][layer - 1]
            if t - offset >= 0:
                current = compose(cells[t - offset][layer - 1], current)
            cells[t].append(current)
    complete = 2 ** depth >= T
    if not complete:
        logger.warning(f"Associative: глубины {depth} не хватает для длины {T}")
    return RegisterGrid(Algorithm.ASSOCIATIVE, _freeze(cells), complete)


def complement_transposition(n: int) -> Permutation:
    """
    Фиксированная транспозиция τ канонического дополнения.

    132 для S_3, 21345 для S_5, для прочих n - обмен первых двух элементов.
    """
    if n in _COMPLEMENT_TRANSPOSITIONS:
        return _COMPLEMENT_TRANSPOSITIONS[n]
    if n < 2:
        raise DataError(f"no transposition in S{n}")
    dest = list(range(n))
    dest[0], dest[1] = 1, 0
    return Permutation(tuple(dest))


def canonical_complement(p: Permutation, tau: Permutation) -> Permutation:
    """Представитель p в знакопеременной подгруппе: p, если p чётная, иначе p·τ."""
    return compose(p, tau) if parity(p) == Parity.ODD else p


def _restore(kappa: Permutation, window_parity: int, tau: Permutation) -> Permutation:
    return compose(kappa, tau) if window_parity else kappa


def run_parity_associative(actions: Sequence[Permutation], depth: int) -> RegisterGrid:
    """
    Parity-associative алгоритм.

    ε_{t,l} - чётность состояния s_t (считается сразу, на слое 0, и далее
    не меняется). κ_{t,l} - каноническое дополнение произведения того же окна,
    что и в run_associative. Чётность окна [i..t] восстанавливается из
    регистров ε как ε_t xor ε_{i-1}, поэтому дополнения можно перемножать.
    """
    _check(actions, depth)
    T = len(actions)
    tau = complement_transposition(actions[0].degree)
    eps = [int(e) for e in state_parities(actions)]

    def window_parity(start: int, stop: int) -> int:
        return eps[stop] ^ (eps[start - 1] if start > 0 else 0)

    kappa = [[canonical_complement(a, tau)] for a in actions]
    for layer in range(1, depth + 1):
        offset = 2 ** (layer - 1)
        width = 2 ** (layer - 1)
        for t in range(T):
            current = kappa[t][layer - 1]
            left = t - offset
            if left >= 0:
                right_start = max(0, t - width + 1)
                left_start = max(0, left - width + 1)
                right = _restore(current, window_parity(right_start, t), tau)
                left_parity = window_parity(left_start, left)
                left_product = _restore(kappa[left][layer - 1], left_parity, tau)
                current = canonical_complement(compose(left_product, right), tau)
            kappa[t].append(current)

    cells = [
        [ParityRegister(Parity(eps[t]), kappa[t][layer]) for layer in range(depth + 1)]
        for t in range(T)
    ]
    complete = 2 ** depth >= T
    return RegisterGrid(
        Algorithm.PARITY_ASSOCIATIVE, _freeze(cells), complete, transposition=tau
    )


def decode_parity_register(register: ParityRegister, tau: Permutation) -> Permutation:
    """(ε, κ) -> состояние: κ при чётном ε, иначе κ·τ."""
    return _restore(register.complement, int(register.parity), tau)


def final_prediction(grid: RegisterGrid) -> List[Permutation]:
    """Ответ алгоритма на каждой позиции: значение на самом глубоком слое."""
    deepest = grid.layer(grid.depth)
    if grid.algorithm == Algorithm.PARITY_ASSOCIATIVE:
        return [decode_parity_register(cell, grid.transposition) for cell in deepest]
    return list(deepest)


def simulate(
    algorithm: Algorithm, actions: Sequence[Permutation], depth: int
) -> List[Permutation]:
    """Финальные предсказания выбранного алгоритма (для parallel глубина не важна)."""
    algorithm = Algorithm(algorithm)
    if algorithm == Algorithm.PARALLEL:
        return run_parallel_s3(actions)[0]
    runners = {
        Algorithm.SEQUENTIAL: run_sequential,
        Algorithm.ASSOCIATIVE: run_associative,
        Algorithm.PARITY_ASSOCIATIVE: run_parity_associative,
    }
    return final_prediction(runners[algorithm](actions, depth))
