"""
Модель: трансформер, оптимизатор, обучение и чекпоинты.

Компоненты:
- StateTrackingTransformer, init_model: модель и её инициализация
- ForwardTrace, PatchSpec, PatchEdit: захват и патчинг residual stream
- AdamW: оптимизатор
- Trainer, train, loss, compute_gradients: обучение
- save_checkpoint, load_checkpoint: бинарные чекпоинты
"""

from .checkpoint import (
    Checkpoint,
    load_checkpoint,
    restore_trainer_state,
    save_checkpoint,
)
from .optimizer import AdamW
from .training import (
    AuxParityHead,
    Progress,
    Trainer,
    TrainingLog,
    TrainingRecord,
    collate,
    compute_gradients,
    loss,
    train,
)
from .transformer import (
    CaptureMode,
    ForwardTrace,
    PatchEdit,
    PatchSpec,
    StateTrackingTransformer,
    init_model,
    parameter_count,
)

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "restore_trainer_state",
    "save_checkpoint",
    "AdamW",
    "AuxParityHead",
    "Progress",
    "Trainer",
    "TrainingLog",
    "TrainingRecord",
    "collate",
    "compute_gradients",
    "loss",
    "train",
    "CaptureMode",
    "ForwardTrace",
    "PatchEdit",
    "PatchSpec",
    "StateTrackingTransformer",
    "init_model",
    "parameter_count",
]
