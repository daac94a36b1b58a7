"""
Обучение трансформера: loss, градиенты, цикл обучения и лог.

Предоставляет:
- collate: документы -> тензоры входов и целей (-100 там, где цели нет)
- loss: cross-entropy по позициям с целями (mean или sum)
- AuxParityHead: линейный классификатор чётности на residual stream слоя
- compute_gradients: градиенты основного и вспомогательного loss
- Trainer / train: детерминированный цикл обучения по стадиям
- TrainingRecord / TrainingLog: JSONL лог обучения
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from ..core.config import AuxParityConfig, TrainConfig
from ..core.errors import DataError, NumericError
from ..core.permutations import group_table
from ..datasets.corpus import Corpus, Document, Vocab
from .optimizer import AdamW
from .transformer import StateTrackingTransformer

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100
PAD_ID = 0

# (step, model) -> метрики, которые добавляются в запись лога
Callback = Callable[[int, nn.Module], Dict[str, Any]]


def collate(
    documents: Sequence[Document], pad_id: int = PAD_ID
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Собирает батч; документы разной длины дополняются справа.

    Дополнение стоит после всех настоящих токенов, поэтому причинное
    внимание не даёт ему влиять на настоящие позиции.
    """
    width = max(len(d) for d in documents)
    inputs = torch.full((len(documents), width), pad_id, dtype=torch.long)
    targets = torch.full((len(documents), width), IGNORE_INDEX, dtype=torch.long)
    for row, doc in enumerate(documents):
        inputs[row, : len(doc)] = torch.tensor(doc.input_ids, dtype=torch.long)
        targets[row, : len(doc)] = torch.tensor(
            [IGNORE_INDEX if t is None else t for t in doc.target_ids], dtype=torch.long
        )
    return inputs, targets


def loss(
    logits: torch.Tensor, targets: torch.Tensor, reduction: str = "mean"
) -> torch.Tensor:
    """
    Отрицательное лог-правдоподобие по позициям с целями.

    Args:
        logits: (batch, T, vocab)
        targets: (batch, T), IGNORE_INDEX - позиция без цели
        reduction: "mean" (по позициям с целями) или "sum"

    Raises:
        DataError: В батче нет ни одной позиции с целью
    """
    if not (targets != IGNORE_INDEX).any():
        raise DataError("batch has no targeted positions")
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        targets.reshape(-1),
        ignore_index=IGNORE_INDEX,
        reduction=reduction,
    )


class AuxParityHead(nn.Module):
    """
    Вспомогательный классификатор на residual stream слоя layer.

    target="parity": 2 класса (чётность текущего состояния);
    target="parity+action": 2·n! классов (чётность и само действие).
    """

    def __init__(
        self, d_model: int, group_degree: int, config: AuxParityConfig
    ) -> None:
        super().__init__()
        self.config = config
        self.group_size = math.factorial(group_degree)
        n_classes = 2 if config.target == "parity" else 2 * self.group_size
        self.classifier = nn.Linear(d_model, n_classes)

    def forward(self, resid: torch.Tensor) -> torch.Tensor:
        return self.classifier(resid)

    def targets(self, inputs: torch.Tensor, vocab: Vocab) -> torch.Tensor:
        """Цели классификатора для каждой позиции по входным действиям."""
        to_group = vocab.group_index_array()
        indices = to_group[inputs.numpy()]
        if (indices < 0).any():
            raise DataError(
                "auxiliary parity targets need permutation tokens at every position"
            )
        parities = group_table(vocab.group_degree).prefix_parities(indices)
        if self.config.target == "parity":
            labels = parities
        else:
            labels = parities * self.group_size + indices
        return torch.as_tensor(labels, dtype=torch.long)


def compute_gradients(
    model: StateTrackingTransformer,
    inputs: torch.Tensor,
    targets: torch.Tensor,
    reduction: str = "mean",
    aux_head: Optional[AuxParityHead] = None,
    aux_targets: Optional[torch.Tensor] = None,
) -> Tuple[float, Dict[str, torch.Tensor]]:
    """
    Обратный проход: заполняет .grad и возвращает (loss, градиенты по именам).

    Вспомогательный loss добавляется с весом aux_head.config.weight; при
    нулевом весе он не вычисляется вовсе.

    Raises:
        NumericError: loss не конечен
    """
    use_aux = aux_head is not None and aux_head.config.weight != 0
    modules = [model] + ([aux_head] if aux_head is not None else [])
    for module in modules:
        module.zero_grad(set_to_none=True)

    if use_aux:
        logits, trace = model(inputs, capture="resid")
        resid = trace.resid[:, aux_head.config.layer]
        aux_logits = aux_head(resid)
        main = loss(logits, targets, reduction)
        aux = F.cross_entropy(
            aux_logits.reshape(-1, aux_logits.shape[-1]),
            aux_targets.reshape(-1),
            reduction=reduction,
        )
        total = main + aux_head.config.weight * aux
    else:
        logits, _ = model(inputs)
        total = loss(logits, targets, reduction)

    if not torch.isfinite(total):
        raise NumericError(f"non-finite loss: {total.item()}")
    total.backward()

    grads = {}
    for prefix, module in (("", model), ("aux.", aux_head)):
        if module is None:
            continue
        for name, param in module.named_parameters():
            if param.grad is not None:
                grads[prefix + name] = param.grad
    return float(total.item()), grads


@dataclass
class TrainingRecord:
    """Запись лога обучения."""
    step: int
    epoch: int
    stage: int
    loss: float
    state_cutoff: Optional[int] = None
    parity_cutoff: Optional[int] = None
    metrics: Dict[str, Any] = field(default_factory=dict)


@dataclass
class TrainingLog:
    """Лог обучения; шаги строго возрастают."""
    records: List[TrainingRecord] = field(default_factory=list)
    loss_convention: str = "mean"

    def append(self, record: TrainingRecord) -> None:
        if self.records and record.step <= self.records[-1].step:
            raise DataError(
                f"training log steps must increase: "
                f"{record.step} after {self.records[-1].step}"
            )
        self.records.append(record)

    def extend(self, other: "TrainingLog") -> None:
        for record in other.records:
            self.append(record)

    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    def evaluated_records(self) -> List[TrainingRecord]:
        """Записи, в которых замерены оба отсечения."""
        return [
            r
            for r in self.records
            if r.state_cutoff is not None and r.parity_cutoff is not None
        ]

    def to_jsonl(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for record in self.records:
                row = asdict(record)
                row["loss_convention"] = self.loss_convention
                f.write(json.dumps(row, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_jsonl(cls, path: Path) -> "TrainingLog":
        log = cls()
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(
                        f"malformed training log: {e}", line=lineno
                    ) from None
                log.loss_convention = row.pop("loss_convention", log.loss_convention)
                log.append(TrainingRecord(**row))
        return log


@dataclass
class Progress:
    """Позиция в расписании обучения (для возобновления)."""
    stage: int = 0
    epoch: int = 0
    batch: int = 0
    step: int = 0


def epoch_order(n_documents: int, data_seed: int, stage: int, epoch: int) -> np.ndarray:
    """Порядок документов в эпохе; зависит только от (data_seed, stage, epoch)."""
    return np.random.default_rng([data_seed, stage, epoch]).permutation(n_documents)


class Trainer:
    """
    Цикл обучения с AdamW.

    Оптимизатор создаётся заново на каждой стадии curriculum; модель
    переходит между стадиями без изменений.

    Пример использования:
        trainer = Trainer(model, TrainConfig(epochs=5), vocab)
        log = trainer.train_stage(corpus, stage=0, epochs=5)
    """

    def __init__(
        self,
        model: StateTrackingTransformer,
        config: TrainConfig,
        vocab: Vocab,
        aux_head: Optional[AuxParityHead] = None,
        show_progress: bool = True,
    ) -> None:
        self.model = model
        self.config = config
        self.vocab = vocab
        self.aux_head = aux_head
        self.show_progress = show_progress
        self.progress = Progress()
        self.current_log = TrainingLog(loss_convention=config.loss_reduction)
        self.optimizer = self._new_optimizer()

    def _new_optimizer(self) -> AdamW:
        params = list(self.model.parameters())
        if self.aux_head is not None:
            params += list(self.aux_head.parameters())
        return AdamW(
            params,
            lr=self.config.learning_rate,
            betas=self.config.betas,
            eps=self.config.eps,
            weight_decay=self.config.weight_decay,
        )

    def named_parameters(self) -> List[Tuple[str, nn.Parameter]]:
        named = list(self.model.named_parameters())
        if self.aux_head is not None:
            named += [(f"aux.{n}", p) for n, p in self.aux_head.named_parameters()]
        return named

    def train_stage(
        self,
        corpus: Corpus,
        stage: int,
        epochs: int,
        callbacks: Sequence[Callback] = (),
        on_checkpoint: Optional[Callable[[Progress], None]] = None,
        resume: Optional[Progress] = None,
    ) -> TrainingLog:
        """
        Обучает модель на одной стадии.

        Args:
            corpus: Корпус стадии
            stage: Номер стадии (входит в сид порядка данных)
            epochs: Число эпох
            callbacks: Вызываются каждые eval_every шагов, метрики идут в лог
            on_checkpoint: Вызывается каждые checkpoint_every шагов
            resume: Позиция, с которой продолжить (оптимизатор уже восстановлен)

        Returns:
            Лог стадии

        Raises:
            NumericError: loss или шаг оптимизатора не конечен (с частичным логом)
        """
        cfg = self.config
        log = TrainingLog(loss_convention=cfg.loss_reduction)
        if len(corpus) == 0:
            raise DataError("cannot train on an empty corpus")
        self.current_log = log

        if resume is None:
            self.optimizer = self._new_optimizer()
            self.progress = Progress(
                stage=stage, epoch=0, batch=0, step=self.progress.step
            )
        else:
            self.progress = resume

        self.model.train()
        n_batches = math.ceil(len(corpus) / cfg.batch_size)
        logger.info(
            f"Стадия {stage}: {len(corpus)} документов, {epochs} эпох, "
            f"{n_batches} батчей в эпохе, loss={cfg.loss_reduction}"
        )

        for epoch in range(self.progress.epoch, epochs):
            order = epoch_order(len(corpus), cfg.data_seed, stage, epoch)
            start_batch = self.progress.batch if epoch == self.progress.epoch else 0
            batches = range(start_batch, n_batches)
            for batch_index in tqdm(
                batches,
                desc=f"stage {stage} epoch {epoch}",
                disable=not self.show_progress,
                leave=False,
            ):
                start = batch_index * cfg.batch_size
                indices = order[start : start + cfg.batch_size]
                documents = [corpus[int(i)] for i in indices]
                try:
                    value = self._step(documents)
                except NumericError as e:
                    e.partial_log = log
                    logger.error(
                        f"Обучение остановлено на шаге {self.progress.step}: {e}"
                    )
                    raise

                self.progress = Progress(
                    stage, epoch, batch_index + 1, self.progress.step + 1
                )
                step = self.progress.step
                evaluate = cfg.eval_every > 0 and step % cfg.eval_every == 0
                if evaluate or step % max(cfg.log_every, 1) == 0 or step == 1:
                    record = TrainingRecord(
                        step=step, epoch=epoch, stage=stage, loss=value
                    )
                    if evaluate:
                        self._run_callbacks(record, callbacks)
                    log.append(record)
                    logger.debug(f"step {step}: loss={value:.5f}")

                checkpoint_due = (
                    cfg.checkpoint_every > 0 and step % cfg.checkpoint_every == 0
                )
                if on_checkpoint is not None and checkpoint_due:
                    on_checkpoint(self.progress)

            self.progress = Progress(stage, epoch + 1, 0, self.progress.step)
            logger.info(
                f"Стадия {stage}: эпоха {epoch} завершена, шаг {self.progress.step}"
            )

        self.model.eval()
        return log

    def _step(self, documents: List[Document]) -> float:
        inputs, targets = collate(documents)
        aux_targets = None
        if self.aux_head is not None and self.aux_head.config.weight != 0:
            aux_targets = self.aux_head.targets(inputs, self.vocab)
        value, _ = compute_gradients(
            self.model,
            inputs,
            targets,
            self.config.loss_reduction,
            self.aux_head,
            aux_targets,
        )
        if self.config.grad_clip > 0:
            params = [p for _, p in self.named_parameters()]
            torch.nn.utils.clip_grad_norm_(params, self.config.grad_clip)
        self.optimizer.step()
        return value

    def _run_callbacks(
        self, record: TrainingRecord, callbacks: Sequence[Callback]
    ) -> None:
        self.model.eval()
        with torch.no_grad():
            for callback in callbacks:
                metrics = dict(callback(record.step, self.model))
                record.state_cutoff = metrics.pop(
                    "state_cutoff", record.state_cutoff
                )
                record.parity_cutoff = metrics.pop(
                    "parity_cutoff", record.parity_cutoff
                )
                record.metrics.update(metrics)
        self.model.train()


def train(
    model: StateTrackingTransformer,
    corpus: Corpus,
    config: TrainConfig,
    callbacks: Sequence[Callback] = (),
    stage: int = 0,
    epochs: Optional[int] = None,
    aux_head: Optional[AuxParityHead] = None,
    show_progress: bool = False,
) -> Tuple[StateTrackingTransformer, TrainingLog]:
    """
    Обучает модель на корпусе (одна стадия curriculum).

    Стадии curriculum - последовательные вызовы train с той же моделью.
    """
    trainer = Trainer(
        model, config, corpus.vocab, aux_head=aux_head, show_progress=show_progress
    )
    log = trainer.train_stage(corpus, stage, epochs or config.epochs, callbacks)
    return model, log
