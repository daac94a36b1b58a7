"""
Activation patching на residual stream.

Предоставляет:
- PatchPair, make_patch_pairs: пары чистый/испорченный вход (отличие только в позиции 0)
- nld: нормированная разность логитов для одной пары и патча
- PatchingExperiment: пакетный расчёт сеток для всех пар
- prefix_patch_grid, suffix_patch_grid, window_patch_grid: сигнатурные сетки

Сетки имеют форму (L + 1, T): строка - граница слоя, столбец - позиция t.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..algorithms.signatures import ParityRelation
from ..core.errors import DataError
from ..core.permutations import Permutation, group_table
from ..datasets.corpus import Vocab
from ..model.transformer import PatchEdit, PatchSpec, StateTrackingTransformer

logger = logging.getLogger(__name__)

DEGENERATE_DENOMINATOR = 1e-6


class GridMode(str, Enum):
    """Вид патчинга, которым получена сетка."""
    PREFIX_SUB = "prefix-sub"
    PREFIX_SUB_SAME = "prefix-sub-same-parity"
    PREFIX_SUB_OPPOSITE = "prefix-sub-opposite-parity"
    SUFFIX_DEL = "suffix-del"
    SUFFIX_SUB = "suffix-sub"
    WINDOW_DEL = "window-del"


class Metric(str, Enum):
    NLD = "nld"
    CLEAN_PROB = "clean-prob"


@dataclass
class PatchPair:
    """Пара входов, отличающихся только первым действием."""
    clean_tokens: List[int]
    corrupt_tokens: List[int]
    clean_state: Permutation
    corrupt_state: Permutation
    parity_relation: ParityRelation

    def __post_init__(self) -> None:
        if len(self.clean_tokens) != len(self.corrupt_tokens):
            raise DataError("clean and corrupted inputs differ in length")
        same_tail = self.clean_tokens[1:] == self.corrupt_tokens[1:]
        if not same_tail or self.clean_tokens[0] == self.corrupt_tokens[0]:
            raise DataError("patch pair must differ in the first token only")


@dataclass
class SignatureGrid:
    """Эмпирическая сетка восстановления (среднее, std и число пар на ячейку)."""
    values: np.ndarray
    std: np.ndarray
    counts: np.ndarray
    metric: Metric
    mode: GridMode
    skipped: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.metric.value,
            "mode": self.mode.value,
            "values": self.values.tolist(),
            "std": self.std.tolist(),
            "counts": self.counts.tolist(),
            "skipped": self.skipped,
            "metadata": self.metadata,
        }


def make_patch_pairs(
    group_degree: int,
    length: int,
    n_pairs: int = 200,
    seed: int = 0,
    vocab: Optional[Vocab] = None,
) -> List[PatchPair]:
    """
    Строит пары со стратификацией по отношению чётностей.

    Чётные номера пар получают испорченное первое действие той же чётности,
    нечётные - противоположной; внутри класса выбор равномерный.

    Args:
        group_degree: Степень группы
        length: Длина входа T
        n_pairs: Количество пар
        seed: Сид

    Returns:
        Список PatchPair
    """
    if n_pairs < 1:
        raise DataError(f"n_pairs must be >= 1, got {n_pairs}")
    table = group_table(group_degree)
    vocab = vocab or Vocab.for_group(group_degree)
    state_ids = vocab.state_token_ids
    rng = np.random.default_rng(seed)
    size = len(table)

    pairs = []
    for index in range(n_pairs):
        sequence = rng.integers(0, size, size=length)
        first = int(sequence[0])
        wanted = ParityRelation.SAME if index % 2 == 0 else ParityRelation.OPPOSITE
        same_parity = table.parities == table.parities[first]
        mask = same_parity if wanted == ParityRelation.SAME else ~same_parity
        mask[first] = False
        if not mask.any():
            mask = np.ones(size, dtype=bool)
            mask[first] = False
        alternatives = np.flatnonzero(mask)
        corrupt_first = int(rng.choice(alternatives))

        corrupt = sequence.copy()
        corrupt[0] = corrupt_first
        clean_state = int(table.prefix_products(sequence)[-1])
        corrupt_state = int(table.prefix_products(corrupt)[-1])
        relation = (
            ParityRelation.SAME
            if table.parities[clean_state] == table.parities[corrupt_state]
            else ParityRelation.OPPOSITE
        )
        pairs.append(
            PatchPair(
                clean_tokens=[state_ids[i] for i in sequence.tolist()],
                corrupt_tokens=[state_ids[i] for i in corrupt.tolist()],
                clean_state=table.elements[clean_state],
                corrupt_state=table.elements[corrupt_state],
                parity_relation=relation,
            )
        )
    return pairs


def _final_log_probs(logits: torch.Tensor) -> torch.Tensor:
    return torch.log_softmax(logits[:, -1].double(), dim=-1)


def _state_argmax(log_probs: torch.Tensor, state_ids: torch.Tensor) -> torch.Tensor:
    return state_ids[log_probs[:, state_ids].argmax(dim=-1)]


def nld(
    model: StateTrackingTransformer,
    pair: PatchPair,
    patch: PatchSpec,
    vocab: Vocab,
) -> Optional[float]:
    """
    Нормированная разность логитов для одной пары.

    NLD = (LD(x'; patch) - LD(x')) / (LD(x) - LD(x')), где
    LD(·) = log p(ŷ|·) - log p(ŷ'|·) на последней позиции, а ŷ, ŷ' - ответы
    модели (argmax по токенам состояний) на чистом и испорченном входе.
    Патч применяется к испорченному прогону.

    Returns:
        NLD или None, если знаменатель меньше 1e-6 (пара вырождена)
    """
    state_ids = torch.tensor(vocab.state_token_ids)
    clean = torch.tensor([pair.clean_tokens])
    corrupt = torch.tensor([pair.corrupt_tokens])
    with torch.no_grad():
        lp_clean = _final_log_probs(model(clean)[0])
        lp_corrupt = _final_log_probs(model(corrupt)[0])
        lp_patched = _final_log_probs(model.forward_patched(corrupt, patch))

    y_clean = _state_argmax(lp_clean, state_ids)[0]
    y_corrupt = _state_argmax(lp_corrupt, state_ids)[0]

    def ld(lp: torch.Tensor) -> float:
        return float(lp[0, y_clean] - lp[0, y_corrupt])

    denominator = ld(lp_clean) - ld(lp_corrupt)
    if abs(denominator) < DEGENERATE_DENOMINATOR:
        return None
    return (ld(lp_patched) - ld(lp_corrupt)) / denominator


class PatchingExperiment:
    """
    Пакетный патчинг для набора пар.

    Чистые и испорченные прогоны считаются один раз, трассы чистого
    прогона служат источником подставляемых векторов. Вырожденные пары
    (|LD(x) - LD(x')| < 1e-6) отбрасываются и учитываются в skipped.
    """

    def __init__(
        self,
        model: StateTrackingTransformer,
        pairs: Sequence[PatchPair],
        vocab: Vocab,
    ) -> None:
        if not pairs:
            raise DataError("no patch pairs")
        self.model = model
        self.vocab = vocab
        self.state_ids = torch.tensor(vocab.state_token_ids)
        self.clean = torch.tensor([p.clean_tokens for p in pairs])
        self.corrupt = torch.tensor([p.corrupt_tokens for p in pairs])
        self.relations = np.array(
            [p.parity_relation == ParityRelation.SAME for p in pairs]
        )

        model.eval()
        with torch.no_grad():
            clean_logits, self.clean_trace = model(self.clean, capture="resid")
            corrupt_logits, _ = model(self.corrupt)
        lp_clean = _final_log_probs(clean_logits)
        lp_corrupt = _final_log_probs(corrupt_logits)

        self.y_clean = _state_argmax(lp_clean, self.state_ids)
        self.y_corrupt = _state_argmax(lp_corrupt, self.state_ids)
        # второй по вероятности ответ чистого прогона (для NLD удаления)
        masked = lp_clean[:, self.state_ids].clone()
        masked[torch.arange(len(pairs)), masked.argmax(dim=-1)] = -math.inf
        self.y_runner_up = self.state_ids[masked.argmax(dim=-1)]

        self.ld_clean = self._ld(lp_clean, self.y_corrupt)
        self.ld_corrupt = self._ld(lp_corrupt, self.y_corrupt)
        self.ld_clean_margin = self._ld(lp_clean, self.y_runner_up)

        denominator = (self.ld_clean - self.ld_corrupt).abs().numpy()
        self.valid = denominator >= DEGENERATE_DENOMINATOR
        self.valid_deletion = self.ld_clean_margin.numpy() >= DEGENERATE_DENOMINATOR
        self.T = self.clean.shape[1]
        self.L = model.n_layers
        skipped = int((~self.valid).sum())
        if skipped:
            logger.info(f"Пропущено вырожденных пар: {skipped} из {len(pairs)}")

    def _ld(self, log_probs: torch.Tensor, other: torch.Tensor) -> torch.Tensor:
        rows = torch.arange(log_probs.shape[0])
        return log_probs[rows, self.y_clean] - log_probs[rows, other]

    def _run(
        self,
        tokens: torch.Tensor,
        layer: int,
        start: int,
        stop: int,
        source: Optional[torch.Tensor],
    ) -> torch.Tensor:
        if stop < start:
            with torch.no_grad():
                return _final_log_probs(self.model(tokens)[0])
        vectors = None if source is None else source[:, layer, start : stop + 1]
        patch = PatchSpec([PatchEdit(layer, start, stop, vectors)])
        with torch.no_grad():
            return _final_log_probs(self.model.forward_patched(tokens, patch))

    def substitution_effects(
        self, layer: int, start: int, stop: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        NLD и вероятность чистого ответа, когда позиции start..stop
        испорченного прогона берутся из чистого.
        """
        lp = self._run(self.corrupt, layer, start, stop, self.clean_trace.resid)
        ld_patched = self._ld(lp, self.y_corrupt)
        delta = self.ld_clean - self.ld_corrupt
        nld_values = ((ld_patched - self.ld_corrupt) / delta).numpy()
        clean_prob = lp[torch.arange(lp.shape[0]), self.y_clean].exp().numpy()
        return nld_values, clean_prob

    def deletion_effects(
        self, layer: int, start: int, stop: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Эффект обнуления позиций start..stop чистого прогона.

        NLD удаления = (LD(x) - LD(x; h <- 0)) / LD(x), где LD берётся между
        ответом модели и вторым по вероятности состоянием.
        """
        lp = self._run(self.clean, layer, start, stop, None)
        ld_deleted = self._ld(lp, self.y_runner_up)
        effect = ((self.ld_clean_margin - ld_deleted) / self.ld_clean_margin).numpy()
        clean_prob = lp[torch.arange(lp.shape[0]), self.y_clean].exp().numpy()
        return effect, clean_prob


def _aggregate(
    per_cell: Dict[Tuple[int, int], np.ndarray], L: int, T: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    values = np.zeros((L + 1, T))
    std = np.zeros((L + 1, T))
    counts = np.zeros((L + 1, T), dtype=np.int64)
    for (layer, t), samples in per_cell.items():
        counts[layer, t] = samples.size
        if samples.size:
            values[layer, t] = samples.mean()
            std[layer, t] = samples.std()
    return values, std, counts


def prefix_patch_grid(
    model: StateTrackingTransformer,
    pairs: Sequence[PatchPair],
    vocab: Vocab,
    include_position_zero: bool = False,
) -> Dict[str, SignatureGrid]:
    """
    Сетки патчинга префикса: ячейка (l, t) - средний эффект подстановки
    чистых h_{1..t, l} в испорченный прогон.

    Returns:
        Словарь "<mode>/<metric>" -> SignatureGrid для режимов
        prefix-sub (все пары), prefix-sub-same-parity, prefix-sub-opposite-parity
        и метрик nld, clean-prob

    Raises:
        DataError: Все пары вырождены
    """
    experiment = PatchingExperiment(model, pairs, vocab)
    if not experiment.valid.any():
        raise DataError(
            "all patch pairs are degenerate (clean and corrupted predictions agree)"
        )

    start = 0 if include_position_zero else 1
    L, T = experiment.L, experiment.T
    subsets = {
        GridMode.PREFIX_SUB: experiment.valid,
        GridMode.PREFIX_SUB_SAME: experiment.valid & experiment.relations,
        GridMode.PREFIX_SUB_OPPOSITE: experiment.valid & ~experiment.relations,
    }
    cells: Dict[Tuple[GridMode, Metric], Dict[Tuple[int, int], np.ndarray]] = {
        (mode, metric): {} for mode in subsets for metric in Metric
    }
    for layer in range(L + 1):
        for t in range(T):
            nld_values, clean_prob = experiment.substitution_effects(layer, start, t)
            for mode, mask in subsets.items():
                cells[(mode, Metric.NLD)][(layer, t)] = nld_values[mask]
                cells[(mode, Metric.CLEAN_PROB)][(layer, t)] = clean_prob[mask]

    grids = {}
    for (mode, metric), per_cell in cells.items():
        values, std, counts = _aggregate(per_cell, L, T)
        grids[f"{mode.value}/{metric.value}"] = SignatureGrid(
            values=values,
            std=std,
            counts=counts,
            metric=metric,
            mode=mode,
            skipped=int((~experiment.valid).sum()),
            metadata={
                "pairs": len(pairs),
                "include_position_zero": include_position_zero,
            },
        )
    return grids


def suffix_patch_grid(
    model: StateTrackingTransformer,
    pairs: Sequence[PatchPair],
    vocab: Vocab,
    content: str = "zeros",
) -> SignatureGrid:
    """
    Сетка патчинга суффикса: позиции t..T-2 на слое l.

    content="zeros" - удаление на чистых входах (NLD удаления);
    content="clean" - подстановка чистых векторов в испорченный прогон (NLD).
    """
    if content not in ("zeros", "clean"):
        raise DataError(f"unknown suffix patch content: {content}")
    experiment = PatchingExperiment(model, pairs, vocab)
    L, T = experiment.L, experiment.T
    if T < 2:
        raise DataError("suffix patching needs inputs of length >= 2")

    deletion = content == "zeros"
    mask = experiment.valid_deletion if deletion else experiment.valid
    per_cell = {}
    for layer in range(L + 1):
        for t in range(T):
            if t > T - 2:
                per_cell[(layer, t)] = np.zeros(int(mask.sum()))
                continue
            if deletion:
                effect, _ = experiment.deletion_effects(layer, t, T - 2)
            else:
                effect, _ = experiment.substitution_effects(layer, t, T - 2)
            per_cell[(layer, t)] = effect[mask]

    values, std, counts = _aggregate(per_cell, L, T)
    return SignatureGrid(
        values=values,
        std=std,
        counts=counts,
        metric=Metric.NLD,
        mode=GridMode.SUFFIX_DEL if deletion else GridMode.SUFFIX_SUB,
        skipped=int((~mask).sum()),
        metadata={"pairs": len(pairs), "content": content},
    )


def window_patch_grid(
    model: StateTrackingTransformer,
    pairs: Sequence[PatchPair],
    vocab: Vocab,
    width: int = 1,
) -> SignatureGrid:
    """
    Сетка удаления окна: обнуление позиций t..t+w-1 на слое l (чистые входы).

    Окна, выходящие за конец входа, обрезаются; число таких окон
    записывается в metadata["clipped_windows"].
    """
    if width < 1:
        raise DataError(f"window width must be >= 1, got {width}")
    experiment = PatchingExperiment(model, pairs, vocab)
    L, T = experiment.L, experiment.T
    mask = experiment.valid_deletion

    clipped = 0
    per_cell = {}
    for t in range(T):
        stop = t + width - 1
        if stop > T - 1:
            stop = T - 1
            clipped += 1
        for layer in range(L + 1):
            effect, _ = experiment.deletion_effects(layer, t, stop)
            per_cell[(layer, t)] = effect[mask]

    values, std, counts = _aggregate(per_cell, L, T)
    return SignatureGrid(
        values=values,
        std=std,
        counts=counts,
        metric=Metric.NLD,
        mode=GridMode.WINDOW_DEL,
        skipped=int((~mask).sum()),
        metadata={"pairs": len(pairs), "width": width, "clipped_windows": clipped},
    )
