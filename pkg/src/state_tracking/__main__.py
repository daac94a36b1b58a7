"""
CLI интерфейс State Tracking Workbench.

Запуск:
    python -m state_tracking <команда> [опции]
    # или после установки:
    state-tracking <команда> [опции]

Команды: gen-data, train, analyze, sweep, ideal, report.

Коды выхода: 0 - успех, 1 - ошибка конфигурации или аргументов,
2 - ошибка данных или чекпоинта, 3 - численная ошибка обучения.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, NoReturn, Optional

from .core.config import ExperimentConfig, get_log_level_override, load_config
from .core.errors import ConfigError, DataError, NumericError
from .core.workbench import StateTrackingWorkbench
from .utils.logging import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class ArgumentParser(argparse.ArgumentParser):
    """Ошибки разбора аргументов - это ошибки конфигурации (код 1)."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="state-tracking",
        description="Обучение и анализ моделей отслеживания состояния",
    )
    parser.add_argument(
        "--config", help="YAML конфигурация (по умолчанию default_config.yaml пакета)"
    )
    parser.add_argument(
        "--output", help="Выходная директория (перекрывает OUTPUT.directory)"
    )
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")
    parser.add_argument(
        "--progress", action="store_true", help="Показывать прогресс обучения"
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=ArgumentParser
    )

    gen = commands.add_parser("gen-data", help="Сгенерировать корпус word problem")
    gen.add_argument("--group", type=int, help="Степень группы n (S_n)")
    gen.add_argument("--count", type=int, help="Количество документов")
    gen.add_argument("--length", type=int, help="Длина документа")
    gen.add_argument("--seed", type=int, help="Сид корпуса")
    gen.add_argument("--preset", help="Дополнительно записать тематический корпус")

    train = commands.add_parser("train", help="Обучить модель по curriculum")
    train.add_argument(
        "--resume", action="store_true", help="Продолжить с checkpoints/latest.ckpt"
    )
    train.add_argument("--seed", type=int, help="Сид инициализации")
    train.add_argument("--data-seed", type=int, help="Сид порядка данных")
    train.add_argument("--positional-scheme", choices=["rotary", "learned"])

    analyze = commands.add_parser("analyze", help="Батарея интерпретируемости и отчёт")
    analyze.add_argument(
        "--checkpoint", help="Путь к чекпоинту (по умолчанию checkpoints/final.ckpt)"
    )
    analyze.add_argument("--seed", type=int, help="Сид анализа")
    analyze.add_argument(
        "--emit-images",
        action="store_true",
        help="Сохранить тепловые карты (нужен matplotlib)",
    )

    sweep = commands.add_parser("sweep", help="Перебор сидов и позиционных схем")
    sweep.add_argument("--n-seeds", type=int)
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--schemes", nargs="+", choices=["rotary", "learned"])

    ideal = commands.add_parser("ideal", help="Выгрузить идеальные сигнатуры алгоритма")
    ideal.add_argument(
        "--alg",
        required=True,
        help="sequential, parallel, associative, parity-associative",
    )
    ideal.add_argument("--length", type=int, required=True)
    ideal.add_argument("--depth", type=int, required=True)
    ideal.add_argument("--parallel-depth", type=int)
    ideal.add_argument("--parity-depth", type=int)

    commands.add_parser("report", help="Проверить и напечатать report.json")
    return parser


def apply_overrides(
    config: ExperimentConfig, args: argparse.Namespace
) -> ExperimentConfig:
    """Накладывает опции командной строки на конфигурацию."""
    if args.output:
        config.output_dir = args.output
    if args.command == "gen-data":
        overrides = {
            "group_degree": args.group,
            "count": args.count,
            "length": args.length,
            "seed": args.seed,
        }
        given = {k: v for k, v in overrides.items() if v is not None}
        config.corpus = replace(config.corpus, **given)
    elif args.command == "train":
        if args.seed is not None:
            config.model = replace(config.model, seed=args.seed)
        if args.data_seed is not None:
            config.train = replace(config.train, data_seed=args.data_seed)
        if args.positional_scheme:
            config.model = replace(
                config.model, positional_scheme=args.positional_scheme
            )
    elif args.command == "analyze":
        if args.seed is not None:
            config.analysis = replace(config.analysis, seed=args.seed)
        if args.emit_images:
            config.analysis = replace(config.analysis, emit_images=True)
    elif args.command == "sweep":
        if args.schemes:
            config.sweep = replace(config.sweep, positional_schemes=list(args.schemes))
    elif args.command == "ideal":
        if args.parallel_depth is not None:
            config.analysis = replace(
                config.analysis, parallel_depth=args.parallel_depth
            )
        if args.parity_depth is not None:
            config.analysis = replace(config.analysis, parity_depth=args.parity_depth)
    config.validate()
    return config


def run(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args)
    level = args.log_level or get_log_level_override() or config.logging.level
    setup_logging(log_level=level, log_file=config.logging.log_file)
    bench = StateTrackingWorkbench(config, show_progress=args.progress)

    if args.command == "gen-data":
        result = bench.gen_data(args.preset)
    elif args.command == "train":
        path, log = bench.train(resume=args.resume)
        steps = log.records[-1].step if log.records else 0
        result = {"checkpoint": str(path), "steps": steps}
    elif args.command == "analyze":
        result = bench.analyze(Path(args.checkpoint) if args.checkpoint else None)
        result = {"verdict": result["verdict"], "cutoffs": result["cutoffs"]}
    elif args.command == "sweep":
        result = bench.sweep(args.n_seeds, args.workers)["ratios"]
    elif args.command == "ideal":
        result = bench.ideal(args.alg, args.length, args.depth)
    else:
        result = bench.report()

    print(json.dumps(result, indent=2, ensure_ascii=False, default=str))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа для CLI."""
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as e:
        logger.error(f"Ошибка конфигурации: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        logger.error(f"Численная ошибка: {e}")
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as e:
        logger.error(f"Ошибка данных: {e}")
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
