"""
Логирование пакета state_tracking.

Все модули пишут в logging.getLogger(__name__); здесь настраивается только
корневой логгер пакета. Обработчики пересоздаются при каждом вызове, так что
воркеры sweep и повторные запуски CLI в одном процессе не дублируют вывод.
"""

import logging
from pathlib import Path
from typing import Optional

PACKAGE_LOGGER = "state_tracking"
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# На уровне DEBUG они засоряют лог обучения
NOISY_LOGGERS = ("matplotlib", "PIL")


def _handler(handler: logging.Handler, log_format: str) -> logging.Handler:
    handler.setFormatter(logging.Formatter(log_format))
    return handler


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    log_format: str = DEFAULT_FORMAT,
) -> logging.Logger:
    """
    Настраивает логгер пакета: консоль и, если задан, файл прогона.

    Args:
        log_level: DEBUG, INFO, WARNING или ERROR; неизвестное значение даёт INFO
        log_file: Файл лога, например runs/s3/logs/run.log
        log_format: Формат сообщений

    Returns:
        Логгер "state_tracking"
    """
    level = logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level)
    for old in list(logger.handlers):
        logger.removeHandler(old)
        old.close()

    logger.addHandler(_handler(logging.StreamHandler(), log_format))
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        logger.addHandler(_handler(file_handler, log_format))

    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))
    return logger


def get_logger(name: str) -> logging.Logger:
    """Логгер внутри иерархии пакета: "workbench" -> "state_tracking.workbench"."""
    if name.split(".")[0] == PACKAGE_LOGGER:
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")
