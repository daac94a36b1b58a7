"""
Исключения state_tracking.

Иерархия:
- StateTrackingError: базовое исключение пакета
- ConfigError: ошибка конфигурации или аргументов (код выхода 1)
- DataError: некорректные или невыполнимые данные (код выхода 2)
- CheckpointError: несовместимый или повреждённый чекпоинт (код выхода 2)
- NumericError: нечисловые значения при обучении (код выхода 3)
"""

from typing import Any, Optional


class StateTrackingError(Exception):
    """Базовое исключение пакета."""

    exit_code = 1


class ConfigError(StateTrackingError, ValueError):
    """Некорректная конфигурация или аргументы командной строки."""

    exit_code = 1


class DataError(StateTrackingError, ValueError):
    """Некорректные данные: битый файл корпуса, невыполнимая генерация."""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointError(DataError):
    """Чекпоинт не совпадает по версии или конфигурации."""


class NumericError(StateTrackingError, ArithmeticError):
    """
    Нечисловой loss или шаг оптимизатора.

    Хранит частичный лог обучения, собранный до сбоя.
    """

    exit_code = 3

    def __init__(self, message: str, partial_log: Any = None) -> None:
        super().__init__(message)
        self.partial_log = partial_log
