"""
Ядро state_tracking.

Компоненты:
- workbench: Оркестратор прогонов (импортируется из state_tracking)
- ExperimentConfig: Конфигурация эксперимента
- permutations: Перестановки, композиция, чётность, таблицы групп
- errors: Иерархия ошибок с кодами выхода CLI
"""

from .config import (
    AnalysisConfig,
    AuxParityConfig,
    CorpusConfig,
    ExperimentConfig,
    LoggingConfig,
    ModelConfig,
    StageConfig,
    SweepConfig,
    TrainConfig,
    load_config,
    save_config,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    NumericError,
    StateTrackingError,
)
from .permutations import (
    GroupTable,
    Parity,
    Permutation,
    apply_to_labels,
    compose,
    cumulative_states,
    enumerate_group,
    group_table,
    inverse,
    parity,
)

__all__ = [
    "AnalysisConfig",
    "AuxParityConfig",
    "CorpusConfig",
    "ExperimentConfig",
    "LoggingConfig",
    "ModelConfig",
    "StageConfig",
    "SweepConfig",
    "TrainConfig",
    "load_config",
    "save_config",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "NumericError",
    "StateTrackingError",
    "GroupTable",
    "Parity",
    "Permutation",
    "apply_to_labels",
    "compose",
    "cumulative_states",
    "enumerate_group",
    "group_table",
    "inverse",
    "parity",
]
