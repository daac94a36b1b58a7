"""
Модуль загрузки и управления конфигурацией.

Предоставляет:
- ExperimentConfig: датакласс с типизированной конфигурацией эксперимента
- load_config / save_config: чтение и запись YAML
- get_log_level_override / get_num_threads: необязательные переменные окружения
"""

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv

from .errors import ConfigError

# Загружаем переменные окружения из .env файла (все необязательны)
load_dotenv()

POSITIONAL_SCHEMES = ("rotary", "learned")
STAGE_MODES = ("state-prediction", "parity", "topic", "uniform", "natural-language")
AUX_TARGETS = ("parity", "parity+action")
LOSS_REDUCTIONS = ("mean", "sum")


def get_log_level_override() -> Optional[str]:
    """Уровень логирования из STATE_TRACKING_LOG_LEVEL (если задан)."""
    return os.getenv("STATE_TRACKING_LOG_LEVEL")


def get_num_threads() -> Optional[int]:
    """Число потоков torch из STATE_TRACKING_NUM_THREADS (если задано)."""
    value = os.getenv("STATE_TRACKING_NUM_THREADS")
    return int(value) if value else None


@dataclass
class CorpusConfig:
    """Конфигурация корпуса word problem."""
    group_degree: int = 3
    count: int = 50000
    length: int = 24
    seed: int = 1
    train_fraction: float = 0.9


@dataclass
class ModelConfig:
    """Конфигурация маленького decoder-only трансформера."""
    n_layers: int = 4
    d_model: int = 64
    n_heads: int = 4
    d_mlp: int = 256
    vocab_size: int = 0  # 0 = вычислить по словарю
    max_positions: int = 64
    positional_scheme: str = "rotary"  # "rotary" (Pythia) или "learned" (GPT-2)
    tied_embeddings: bool = False
    seed: int = 0

    def validate(self) -> None:
        """Проверяет инварианты конфигурации модели."""
        sizes = (
            "n_layers",
            "d_model",
            "n_heads",
            "d_mlp",
            "vocab_size",
            "max_positions",
        )
        for name in sizes:
            if getattr(self, name) <= 0:
                raise ConfigError(
                    f"model.{name} must be positive, got {getattr(self, name)}"
                )
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"model.d_model ({self.d_model}) "
                f"must be divisible by n_heads ({self.n_heads})"
            )
        if self.positional_scheme not in POSITIONAL_SCHEMES:
            raise ConfigError(f"unknown positional_scheme: {self.positional_scheme}")
        if self.positional_scheme == "rotary" and (self.d_model // self.n_heads) % 2:
            raise ConfigError("rotary embeddings need an even head dimension")


@dataclass
class AuxParityConfig:
    """Вспомогательный классификатор чётности на residual stream."""
    enabled: bool = False
    layer: int = 1
    target: str = "parity"  # "parity" или "parity+action"
    weight: float = 0.1


@dataclass
class TrainConfig:
    """Конфигурация обучения (AdamW)."""
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    eval_every: int = 0  # 0 = без периодической оценки
    log_every: int = 50
    checkpoint_every: int = 0  # 0 = только в конце стадии
    loss_reduction: str = "mean"
    data_seed: int = 0
    aux_parity: AuxParityConfig = field(default_factory=AuxParityConfig)

    def validate(self) -> None:
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ConfigError(
                "train.epochs, batch_size and learning_rate must be positive"
            )
        if self.weight_decay < 0 or self.grad_clip < 0:
            raise ConfigError("train.weight_decay and grad_clip must be non-negative")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            raise ConfigError(f"unknown loss_reduction: {self.loss_reduction}")
        if self.aux_parity.target not in AUX_TARGETS:
            raise ConfigError(f"unknown aux_parity.target: {self.aux_parity.target}")


@dataclass
class StageConfig:
    """Одна стадия curriculum."""
    mode: str = "state-prediction"
    epochs: int = 20
    max_length: Optional[int] = None  # length curriculum: обрезка документов
    preset: Optional[str] = None  # пресет тематической модели для mode=topic
    count: Optional[int] = None  # размер корпуса стадии (по умолчанию corpus.count)

    def validate(self) -> None:
        if self.mode not in STAGE_MODES:
            raise ConfigError(f"unknown curriculum stage mode: {self.mode}")
        if self.epochs <= 0:
            raise ConfigError("curriculum stage epochs must be positive")


@dataclass
class AnalysisConfig:
    """Параметры батареи интерпретируемости."""
    seed: int = 0
    n_pairs: int = 200
    eval_max_len: int = 48
    n_eval: int = 500
    probe_docs: int = 2000
    probe_l2: float = 1e-4
    probe_length_step: int = 5
    probe_length_samples: int = 300
    window_width: int = 1
    head_score_max_len: Optional[int] = None  # None = 80 для S3, 50 для S5
    head_score_examples: int = 100
    ci_factor: float = 0.95
    attention_threshold: float = 0.95
    k_to: int = 3
    k_from: int = 10
    parallel_depth: int = 2
    parity_depth: int = 2
    cutoff_threshold: float = 0.98
    tolerance: int = 2
    converged_fraction: float = 0.9
    include_position_zero: bool = False
    pca_layer: Optional[int] = None  # None = последний слой
    emit_images: bool = False


@dataclass
class SweepConfig:
    """Параметры перебора сидов."""
    n_seeds: int = 3
    positional_schemes: List[str] = field(default_factory=lambda: ["rotary"])
    workers: int = 1


@dataclass
class LoggingConfig:
    """Конфигурация логирования."""
    level: str = "INFO"
    log_file: Optional[str] = None


@dataclass
class ExperimentConfig:
    """
    Главный класс конфигурации эксперимента.

    Объединяет все конфигурации в единую структуру; сиды задаются явно.
    """
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    stages: List[StageConfig] = field(default_factory=lambda: [StageConfig()])
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    output_dir: str = "runs/default"

    SECTIONS = {
        "CORPUS": "corpus",
        "MODEL": "model",
        "TRAINING": "train",
        "ANALYSIS": "analysis",
        "SWEEP": "sweep",
        "LOGGING": "logging",
    }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Создаёт конфигурацию из словаря (секции в верхнем регистре)."""
        config = cls()
        data = data or {}

        unknown = set(data) - set(cls.SECTIONS) - {"CURRICULUM", "OUTPUT"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")

        for section, attr in cls.SECTIONS.items():
            if section in data:
                merged = _merge(getattr(config, attr), data[section], section)
                setattr(config, attr, merged)

        if "CURRICULUM" in data:
            stages = data["CURRICULUM"] or []
            config.stages = [_merge(StageConfig(), s, "CURRICULUM") for s in stages]

        if "OUTPUT" in data:
            config.output_dir = data["OUTPUT"].get("directory", config.output_dir)

        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Обратное преобразование в словарь для записи в YAML."""
        data: Dict[str, Any] = {
            section: _plain(asdict(getattr(self, attr)))
            for section, attr in self.SECTIONS.items()
        }
        data["CURRICULUM"] = [_plain(asdict(s)) for s in self.stages]
        data["OUTPUT"] = {"directory": self.output_dir}
        return data

    def validate(self) -> None:
        if not self.stages:
            raise ConfigError("curriculum must contain at least one stage")
        if self.corpus.group_degree < 2 or self.corpus.group_degree > 6:
            raise ConfigError(
                f"group degree must be in 2..6, got {self.corpus.group_degree}"
            )
        if not 0 < self.corpus.train_fraction < 1:
            raise ConfigError("corpus.train_fraction must be in (0, 1)")
        self.train.validate()
        for stage in self.stages:
            stage.validate()
        for scheme in self.sweep.positional_schemes:
            if scheme not in POSITIONAL_SCHEMES:
                raise ConfigError(f"unknown positional scheme in sweep: {scheme}")

    def with_seeds(self, init_seed: int, data_seed: int) -> "ExperimentConfig":
        """Копия конфигурации с другими сидами инициализации и порядка данных."""
        return replace(
            self,
            model=replace(self.model, seed=init_seed),
            train=replace(self.train, data_seed=data_seed),
        )


def _merge(base: Any, values: Optional[Dict[str, Any]], section: str) -> Any:
    """Накладывает значения словаря на датакласс, проверяя имена полей."""
    if values is None:
        return base
    if not isinstance(values, dict):
        raise ConfigError(f"section {section} must be a mapping")
    known = {f.name: f for f in fields(base)}
    updates = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown field {section}.{key}")
        current = getattr(base, key)
        if is_dataclass(current):
            value = _merge(current, value, f"{section}.{key}")
        elif isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        updates[key] = value
    return replace(base, **updates)


def _plain(value: Any) -> Any:
    """Приводит кортежи к спискам, чтобы YAML оставался читаемым."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def get_default_config_path() -> Path:
    """Возвращает путь к default_config.yaml внутри пакета."""
    return Path(__file__).parent.parent / "default_config.yaml"


def load_config(config_path: Optional[str] = None) -> ExperimentConfig:
    """
    Загружает конфигурацию из YAML файла.

    Args:
        config_path: Путь к файлу конфигурации.
                    Если не указан, использует default_config.yaml из пакета

    Returns:
        ExperimentConfig с загруженными настройками
    """
    if config_path is None:
        default_path = get_default_config_path()
        if default_path.exists():
            config_path = str(default_path)

    if config_path is None:
        return ExperimentConfig()

    if not Path(config_path).exists():
        raise ConfigError(f"config file not found: {config_path}")

    with open(config_path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)

    return ExperimentConfig.from_dict(data or {})


def save_config(config: ExperimentConfig, path: Path) -> Path:
    """Записывает разрешённую конфигурацию (со всеми значениями по умолчанию)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False, allow_unicode=True)
    return path
