"""
Выгрузка артефактов: JSON, CSV матрицы, хеши файлов и (опционально) тепловые карты.

Все записи детерминированы: ключи JSON отсортированы, временные метки
в артефакты не попадают.
"""

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Приводит numpy/dataclass/enum значения к типам, понятным json."""
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: Any, path: Path) -> Path:
    """Записывает JSON с отсортированными ключами."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_matrix_csv(
    matrix: np.ndarray,
    path: Path,
    row_label: str = "layer",
    column_label: str = "position",
) -> Path:
    """
    Записывает матрицу (строка = слой, столбец = позиция).

    Args:
        matrix: Массив формы (rows, columns)
        path: Путь к CSV
        row_label: Подпись строк
        column_label: Подпись столбцов
    """
    matrix = np.asarray(matrix, dtype=float)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"{row_label}\\{column_label}"] + list(range(matrix.shape[1])))
        for i, row in enumerate(matrix):
            writer.writerow([i] + [_fmt(v) for v in row])
    return path


def write_records_csv(records: Sequence[Dict[str, Any]], path: Path) -> Path:
    """Записывает список словарей одинаковой структуры как таблицу."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: List[str] = list(records[0].keys()) if records else []
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for record in records:
            writer.writerow([_fmt(record.get(c)) for c in columns])
    return path


def _fmt(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return "nan" if not math.isfinite(float(value)) else repr(float(value))
    return value


def sha256_file(path: Path) -> str:
    """SHA-256 содержимого файла."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(root: Path, paths: Iterable[Path]) -> Dict[str, str]:
    """Манифест артефактов: относительный путь -> sha256."""
    root = Path(root)
    return {
        Path(p).relative_to(root).as_posix(): sha256_file(Path(p))
        for p in sorted(Path(p) for p in paths)
    }


def verify_manifest(root: Path, manifest: Dict[str, str]) -> List[str]:
    """Возвращает список проблем (отсутствующие файлы, несовпавшие хеши)."""
    problems = []
    for rel, expected in sorted(manifest.items()):
        path = Path(root) / rel
        if not path.exists():
            problems.append(f"missing: {rel}")
        elif sha256_file(path) != expected:
            problems.append(f"hash mismatch: {rel}")
    return problems


def save_heatmap(
    matrix: np.ndarray,
    path: Path,
    title: str = "",
    xlabel: str = "position",
    ylabel: str = "layer",
    vmin: Optional[float] = 0.0,
    vmax: Optional[float] = 1.0,
) -> Optional[Path]:
    """
    Сохраняет тепловую карту (PNG или SVG по расширению пути).

    Требует extra-зависимость plots (matplotlib); без неё возвращает None.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.error(
            "matplotlib не установлен. "
            "Установите: pip install state-tracking-workbench[plots]"
        )
        return None

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figsize = (max(4.0, matrix.shape[1] * 0.25), max(3.0, matrix.shape[0] * 0.5))
    fig, ax = plt.subplots(figsize=figsize)
    image = ax.imshow(
        np.asarray(matrix, dtype=float),
        origin="lower",
        aspect="auto",
        cmap="viridis",
        vmin=vmin,
        vmax=vmax,
    )
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax)
    # metadata=None убирает дату создания из файла
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path
