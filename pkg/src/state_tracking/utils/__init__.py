"""
Утилиты для state_tracking.

Модули:
- tracing: Трассировка этапов прогона
- logging: Настройка логирования
- export: JSON/CSV артефакты, манифест хешей, тепловые карты
"""

from .export import (
    build_manifest,
    read_json,
    save_heatmap,
    sha256_file,
    verify_manifest,
    write_json,
    write_matrix_csv,
    write_records_csv,
)
from .logging import get_logger, setup_logging
from .tracing import TraceEvent, TracingManager

__all__ = [
    "build_manifest",
    "read_json",
    "save_heatmap",
    "sha256_file",
    "verify_manifest",
    "write_json",
    "write_matrix_csv",
    "write_records_csv",
    "get_logger",
    "setup_logging",
    "TraceEvent",
    "TracingManager",
]
