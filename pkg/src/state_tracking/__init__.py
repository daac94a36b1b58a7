"""
State Tracking Workbench - обучение и интерпретация маленьких трансформеров,
отслеживающих композицию перестановок.

Пакет предоставляет:
- StateTrackingWorkbench: Оркестратор прогонов (данные, обучение, анализ, sweep)
- Эталонные алгоритмы (sequential, parallel, associative, parity-associative)
- Батарею интерпретируемости: патчинг, пробы, внимание, разложение

Быстрый старт:
    from state_tracking import StateTrackingWorkbench, load_config

    bench = StateTrackingWorkbench(load_config())
    bench.gen_data()
    bench.train()
    report = bench.analyze()
    print(report["verdict"]["label"])

Модули:
- core: Перестановки, конфигурация, ошибки, оркестратор
- datasets: Корпуса word problem, тематическая модель, вариант на естественном языке
- algorithms: Симуляторы алгоритмов и идеальные сигнатуры
- model: Трансформер, AdamW, обучение, чекпоинты
- interpretability: Патчинг, пробы, внимание, PCA
- analysis: Кривые обобщения и вердикты о механизме
- utils: Трассировка, логирование, экспорт
"""

__version__ = "0.1.0"

from .core.config import ExperimentConfig, load_config
from .core.errors import (
    CheckpointError,
    ConfigError,
    DataError,
    NumericError,
    StateTrackingError,
)
from .core.workbench import StateTrackingWorkbench
from .utils import TracingManager, setup_logging

__all__ = [
    "ExperimentConfig",
    "load_config",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "NumericError",
    "StateTrackingError",
    "StateTrackingWorkbench",
    "TracingManager",
    "setup_logging",
]
