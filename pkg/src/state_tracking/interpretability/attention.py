"""
Анализ внимания: parity head score и граф внимания.

Parity head score головы - доля префиксов t = 5..T-1, на которых среднее
внимание к действиям нечётной чётности, уменьшенное на ci_factor·CI,
превышает среднее внимание к чётным действиям. CI - полуширина
нормального 95% интервала: 1.96·sd/sqrt(n_odd).
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np
import torch

from ..core.errors import DataError
from ..core.permutations import group_table
from ..datasets.corpus import Vocab
from ..model.transformer import StateTrackingTransformer

logger = logging.getLogger(__name__)

SCORE_START = 5
Z_95 = 1.96
DEFAULT_MAX_LEN = {3: 80, 5: 50}
BATCH_SIZE = 64

Node = Tuple[int, int]  # (позиция, граница слоя)


@dataclass
class HeadScoreTable:
    """Parity head scores по (слой, голова) со стандартным отклонением по примерам."""
    scores: np.ndarray  # (L, H)
    std: np.ndarray
    n_examples: int
    skipped: int = 0
    max_len: int = 0

    def top_heads(self, k: int = 5) -> List[Tuple[int, int, float]]:
        order = np.argsort(-self.scores, axis=None, kind="stable")[:k]
        width = self.scores.shape[1]
        return [
            (int(i // width), int(i % width), float(self.scores.flat[i]))
            for i in order
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scores": self.scores.tolist(),
            "std": self.std.tolist(),
            "n_examples": self.n_examples,
            "skipped_prefixes": self.skipped,
            "max_len": self.max_len,
            "top_heads": [list(h) for h in self.top_heads()],
        }


def _example_scores(
    attn: np.ndarray,
    odd_mask: np.ndarray,
    start: int,
    ci_factor: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Доли выполненных условий по примерам: ((N, L, H), число оценённых t)."""
    N, L, H, T, _ = attn.shape
    odd = odd_mask.astype(np.float64)
    hits = np.zeros((N, L, H))
    evaluated = np.zeros(N, dtype=np.int64)

    for t in range(start, T):
        prefix_odd = odd[:, : t + 1]
        prefix_even = 1.0 - prefix_odd
        n_odd = prefix_odd.sum(axis=1)
        n_even = prefix_even.sum(axis=1)
        valid = (n_odd > 0) & (n_even > 0)

        weights = attn[:, :, :, t, : t + 1]
        w_odd = prefix_odd[:, None, None, :]
        w_even = prefix_even[:, None, None, :]
        safe_odd = np.maximum(n_odd, 1)[:, None, None]
        mean_odd = (weights * w_odd).sum(-1) / safe_odd
        mean_even = (weights * w_even).sum(-1) / np.maximum(n_even, 1)[:, None, None]
        sq = ((weights - mean_odd[..., None]) ** 2 * w_odd).sum(-1)
        sd = np.sqrt(sq / np.maximum(n_odd - 1, 1)[:, None, None])
        sd = np.where((n_odd > 1)[:, None, None], sd, 0.0)
        half_width = Z_95 * sd / np.sqrt(safe_odd)

        passed = mean_odd - ci_factor * half_width > mean_even
        hits += passed & valid[:, None, None]
        evaluated += valid

    return hits, evaluated


def parity_head_scores_from_attention(
    attn: np.ndarray,
    odd_mask: np.ndarray,
    start: int = SCORE_START,
    ci_factor: float = 0.95,
) -> HeadScoreTable:
    """
    Parity head scores по готовым матрицам внимания.

    Args:
        attn: Внимание (N, L, H, T, T), строки - позиции запроса
        odd_mask: (N, T), True для действий нечётной чётности
        start: Первая оцениваемая позиция
        ci_factor: Множитель полуширины интервала

    Returns:
        HeadScoreTable; префиксы без нечётных или без чётных действий
        пропускаются и учитываются в skipped
    """
    attn = np.asarray(attn, dtype=np.float64)
    odd_mask = np.asarray(odd_mask, dtype=bool)
    if attn.ndim != 5 or odd_mask.shape != (attn.shape[0], attn.shape[-1]):
        raise DataError(
            f"attention {attn.shape} and parity mask {odd_mask.shape} do not match"
        )
    T = attn.shape[-1]
    if T <= start:
        raise DataError(f"head scores need length >= {start + 1}, got {T}")

    hits, evaluated = _example_scores(attn, odd_mask, start, ci_factor)
    skipped = int(attn.shape[0] * (T - start) - evaluated.sum())
    used = evaluated > 0
    if not used.any():
        raise DataError("no prefix contains both odd and even actions")
    per_example = hits[used] / evaluated[used][:, None, None]
    return HeadScoreTable(
        scores=per_example.mean(axis=0),
        std=per_example.std(axis=0),
        n_examples=int(used.sum()),
        skipped=skipped,
        max_len=T,
    )


def default_score_length(group_degree: int, max_positions: int) -> int:
    """80 для S_3, 50 для S_5 (и прочих), не больше max_positions."""
    return min(DEFAULT_MAX_LEN.get(group_degree, 50), max_positions)


def parity_head_scores(
    model: StateTrackingTransformer,
    vocab: Vocab,
    max_len: Optional[int] = None,
    n_examples: int = 100,
    seed: int = 0,
    ci_factor: float = 0.95,
) -> HeadScoreTable:
    """
    Parity head scores модели на случайных последовательностях действий.

    Raises:
        DataError: max_len < 6 или больше max_positions модели
    """
    max_len = max_len or default_score_length(
        vocab.group_degree, model.config.max_positions
    )
    if max_len <= SCORE_START:
        raise DataError(f"max_len must be >= {SCORE_START + 1}, got {max_len}")
    if max_len > model.config.max_positions:
        raise DataError(
            f"max_len {max_len} exceeds max_positions {model.config.max_positions}"
        )

    table = group_table(vocab.group_degree)
    state_ids = np.array(vocab.state_token_ids, dtype=np.int64)
    indices = np.random.default_rng(seed).integers(
        0, len(table), size=(n_examples, max_len)
    )
    odd_mask = table.parities[indices] == 1

    model.eval()
    hits, evaluated = [], []
    with torch.no_grad():
        for begin in range(0, n_examples, BATCH_SIZE):
            tokens = torch.as_tensor(state_ids[indices[begin : begin + BATCH_SIZE]])
            _, trace = model(tokens, capture="resid+attn")
            h, e = _example_scores(
                trace.attn.double().numpy(),
                odd_mask[begin : begin + BATCH_SIZE],
                SCORE_START,
                ci_factor,
            )
            hits.append(h)
            evaluated.append(e)

    hits_all = np.concatenate(hits)
    evaluated_all = np.concatenate(evaluated)
    used = evaluated_all > 0
    per_example = hits_all[used] / evaluated_all[used][:, None, None]
    result = HeadScoreTable(
        scores=per_example.mean(axis=0),
        std=per_example.std(axis=0),
        n_examples=int(used.sum()),
        skipped=int(n_examples * (max_len - SCORE_START) - evaluated_all.sum()),
        max_len=max_len,
    )
    best = result.top_heads(1)[0]
    logger.info(
        f"Parity head scores: лучшая голова L{best[0]}H{best[1]} = {best[2]:.3f}"
    )
    return result


@dataclass
class AttentionGraph:
    """Рёбра (t1, l-1) -> (t2, l) с весом внимания."""
    edges: List[Tuple[Node, Node, float]] = field(default_factory=list)
    length: int = 0
    n_layers: int = 0

    @property
    def nodes(self) -> Set[Node]:
        found: Set[Node] = set()
        for source, target, _ in self.edges:
            found.add(source)
            found.add(target)
        return found

    def to_dict(self) -> Dict[str, Any]:
        return {
            "length": self.length,
            "n_layers": self.n_layers,
            "edges": [[list(s), list(t), w] for s, t, w in self.edges],
        }


def _kth_largest(values: np.ndarray, k: int, axis: int) -> np.ndarray:
    k = min(k, values.shape[axis])
    return -np.sort(-values, axis=axis).take(k - 1, axis=axis)


def attention_graph(
    attn: np.ndarray,
    threshold: float = 0.95,
    k_to: int = 3,
    k_from: int = 10,
    restrict_to_final: bool = False,
) -> AttentionGraph:
    """
    Граф внимания одного примера.

    Ребро (t1, l-1) -> (t2, l) есть, если максимум по головам слоя l веса
    внимания t2 -> t1 больше threshold, t1 среди k_to самых посещаемых
    позиций для t2 и t2 среди k_from позиций, сильнее всего смотрящих на t1.

    Args:
        attn: Внимание (L, H, T, T) или трасса с батчем 1
        restrict_to_final: Оставить только подграф, из которого достижим (T-1, L)
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim == 5:
        if attn.shape[0] != 1:
            raise DataError("attention_graph takes a single example")
        attn = attn[0]
    if attn.ndim != 4:
        raise DataError(f"attention must be (layers, heads, T, T), got {attn.shape}")
    L, _, T, _ = attn.shape

    combined = attn.max(axis=1)  # (L, T_query, T_key)
    row_cut = _kth_largest(combined, k_to, axis=2)[:, :, None]
    column_cut = _kth_largest(combined, k_from, axis=1)[:, None, :]
    keep = (combined > threshold) & (combined >= row_cut) & (combined >= column_cut)

    edges = []
    for layer, t2, t1 in zip(*np.nonzero(keep)):
        source = (int(t1), int(layer))
        target = (int(t2), int(layer) + 1)
        edges.append((source, target, float(combined[layer, t2, t1])))
    graph = AttentionGraph(edges=edges, length=T, n_layers=L)
    if restrict_to_final:
        graph = _reaching(graph, (T - 1, L))
    logger.debug(f"Граф внимания: {len(graph.edges)} рёбер")
    return graph


def _reaching(graph: AttentionGraph, sink: Node) -> AttentionGraph:
    incoming: Dict[Node, List[Tuple[Node, Node, float]]] = {}
    for edge in graph.edges:
        incoming.setdefault(edge[1], []).append(edge)
    kept = []
    seen = {sink}
    queue = deque([sink])
    while queue:
        node = queue.popleft()
        for edge in incoming.get(node, []):
            kept.append(edge)
            if edge[0] not in seen:
                seen.add(edge[0])
                queue.append(edge[0])
    kept.sort(key=lambda e: (e[1][1], e[1][0], e[0][0]))
    return AttentionGraph(edges=kept, length=graph.length, n_layers=graph.n_layers)
