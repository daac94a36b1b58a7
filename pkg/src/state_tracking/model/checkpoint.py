"""
Самоописывающий бинарный формат чекпоинта.

Структура файла:
    b"STCK" | uint32 LE длина заголовка | JSON заголовок | тензоры (little-endian)

Заголовок хранит версию схемы, ModelConfig, словарь, позицию обучения,
флаг состояния оптимизатора и таблицу тензоров (имя, dtype, форма,
смещение, размер). Времени создания в файле нет, поэтому одинаковое
обучение даёт побайтно одинаковый чекпоинт.
"""

import json
import logging
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch

from ..core.config import AuxParityConfig, ModelConfig
from ..core.errors import CheckpointError
from ..datasets.corpus import Vocab
from .training import AuxParityHead, Progress, Trainer
from .transformer import StateTrackingTransformer

logger = logging.getLogger(__name__)

MAGIC = b"STCK"
SCHEMA_VERSION = 1

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
}


@dataclass
class Checkpoint:
    """Содержимое чекпоинта после загрузки."""
    model: StateTrackingTransformer
    vocab: Vocab
    progress: Progress
    optimizer_state: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    aux_head: Optional[AuxParityHead] = None
    extra: Dict[str, Any] = field(default_factory=dict)


def _tensor_bytes(tensor: torch.Tensor) -> Tuple[str, bytes]:
    tensor = tensor.detach().cpu().contiguous()
    if tensor.dtype not in _DTYPES:
        raise CheckpointError(f"unsupported tensor dtype {tensor.dtype}")
    dtype = _DTYPES[tensor.dtype]
    return dtype, tensor.numpy().astype(dtype, copy=False).tobytes()


def save_checkpoint(
    path: Path,
    model: StateTrackingTransformer,
    vocab: Vocab,
    trainer: Optional[Trainer] = None,
    progress: Optional[Progress] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Записывает модель (и, если передан trainer, состояние оптимизатора и aux head).

    Args:
        path: Путь к файлу
        model: Модель
        vocab: Словарь, на котором обучена модель
        trainer: Тренер - источник состояния AdamW и позиции обучения
        progress: Позиция обучения (по умолчанию trainer.progress)
        extra: Дополнительные JSON-поля заголовка

    Returns:
        Путь к записанному файлу
    """
    path = Path(path)
    tensors: List[Tuple[str, torch.Tensor]] = list(model.state_dict().items())

    aux_config = None
    if trainer is not None and trainer.aux_head is not None:
        aux_config = asdict(trainer.aux_head.config)
        tensors += [(f"aux.{k}", v) for k, v in trainer.aux_head.state_dict().items()]

    scalar_state: Dict[str, int] = {}
    if trainer is not None:
        for name, param in trainer.named_parameters():
            state = trainer.optimizer.state.get(param)
            if not state:
                continue
            scalar_state[name] = int(state["step"])
            tensors.append((f"optimizer.{name}.exp_avg", state["exp_avg"]))
            tensors.append((f"optimizer.{name}.exp_avg_sq", state["exp_avg_sq"]))
        progress = progress or trainer.progress

    table = []
    blobs = []
    offset = 0
    for name, tensor in tensors:
        dtype, blob = _tensor_bytes(tensor)
        table.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(tensor.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)

    header = {
        "schema_version": SCHEMA_VERSION,
        "model_config": asdict(model.config),
        "vocab": {"tokens": vocab.tokens, "group_degree": vocab.group_degree},
        "progress": asdict(progress or Progress()),
        "has_optimizer": bool(scalar_state),
        "optimizer_steps": scalar_state,
        "aux_config": aux_config,
        "extra": extra or {},
        "tensors": table,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    tmp.replace(path)
    logger.info(f"Чекпоинт сохранён: {path} (шаг {header['progress']['step']})")
    return path


def read_header(path: Path) -> Tuple[Dict[str, Any], int]:
    """Читает заголовок; возвращает (заголовок, смещение начала тензоров)."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"not a checkpoint file: {path}")
        raw_len = f.read(4)
        if len(raw_len) != 4:
            raise CheckpointError(f"truncated checkpoint header: {path}")
        (length,) = struct.unpack("<I", raw_len)
        try:
            header = json.loads(f.read(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"corrupted checkpoint header: {e}") from None

    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint schema version {version} "
            f"(expected {SCHEMA_VERSION})"
        )
    return header, 8 + length


def _check_config(stored: ModelConfig, expected: ModelConfig) -> None:
    mismatched = [
        f"{f.name}: checkpoint {getattr(stored, f.name)!r} "
        f"!= config {getattr(expected, f.name)!r}"
        for f in fields(ModelConfig)
        if f.name != "seed" and getattr(stored, f.name) != getattr(expected, f.name)
    ]
    if mismatched:
        raise CheckpointError("model config mismatch: " + "; ".join(mismatched))


def load_checkpoint(
    path: Path, expected_config: Optional[ModelConfig] = None
) -> Checkpoint:
    """
    Загружает чекпоинт.

    Args:
        path: Путь к файлу
        expected_config: Если задан, архитектура чекпоинта обязана совпадать

    Raises:
        CheckpointError: Версия схемы, конфигурация или содержимое не совпадают
    """
    header, data_start = read_header(path)
    stored = ModelConfig(**header["model_config"])
    if expected_config is not None:
        _check_config(stored, expected_config)

    with open(path, "rb") as f:
        f.seek(data_start)
        data = f.read()

    tensors: Dict[str, torch.Tensor] = {}
    for entry in header["tensors"]:
        start, size = entry["offset"], entry["nbytes"]
        if start + size > len(data):
            raise CheckpointError(f"truncated tensor data for {entry['name']}")
        raw = data[start : start + size]
        array = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"])
        tensors[entry["name"]] = torch.from_numpy(array.copy())

    model = StateTrackingTransformer(stored)
    model_state = {
        k: v for k, v in tensors.items() if not k.startswith(("aux.", "optimizer."))
    }
    try:
        model.load_state_dict(model_state)
    except RuntimeError as e:
        raise CheckpointError(
            f"checkpoint tensors do not match the model: {e}"
        ) from None
    model.eval()

    vocab = Vocab(
        tokens=header["vocab"]["tokens"],
        group_degree=header["vocab"]["group_degree"],
    )

    aux_head = None
    if header.get("aux_config"):
        aux_config = AuxParityConfig(**header["aux_config"])
        aux_head = AuxParityHead(stored.d_model, vocab.group_degree, aux_config)
        aux_head.load_state_dict(
            {k[len("aux.") :]: v for k, v in tensors.items() if k.startswith("aux.")}
        )

    optimizer_state = {
        name: {
            "step": step,
            "exp_avg": tensors[f"optimizer.{name}.exp_avg"],
            "exp_avg_sq": tensors[f"optimizer.{name}.exp_avg_sq"],
        }
        for name, step in header.get("optimizer_steps", {}).items()
    }

    return Checkpoint(
        model=model,
        vocab=vocab,
        progress=Progress(**header["progress"]),
        optimizer_state=optimizer_state,
        aux_head=aux_head,
        extra=header.get("extra", {}),
    )


def restore_trainer_state(trainer: Trainer, checkpoint: Checkpoint) -> None:
    """Переносит состояние AdamW из чекпоинта в тренер (для возобновления)."""
    for name, param in trainer.named_parameters():
        state = checkpoint.optimizer_state.get(name)
        if state is None:
            continue
        trainer.optimizer.state[param] = {
            "step": state["step"],
            "exp_avg": state["exp_avg"].to(param.dtype).clone(),
            "exp_avg_sq": state["exp_avg_sq"].to(param.dtype).clone(),
        }
    trainer.progress = checkpoint.progress
