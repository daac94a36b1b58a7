"""
Главный класс StateTrackingWorkbench.

Связывает все компоненты в воспроизводимый прогон:
- генерация данных
- обучение по curriculum (с чекпоинтами и возобновлением)
- батарея анализа и отчёт с манифестом хешей
- перебор сидов (sweep) и выгрузка идеальных сигнатур

Структура выходной директории:
    <outdir>/config.resolved.yaml
    <outdir>/data/{train,analysis}.txt
    <outdir>/checkpoints/{latest,final}.ckpt
    <outdir>/logs/{training.jsonl,trace.jsonl}
    <outdir>/analysis/...
    <outdir>/report.json
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import torch

from ..algorithms.registers import Algorithm
from ..algorithms.signatures import (
    IdealSignature,
    ParityRelation,
    export_signature,
    ideal_patching_signature,
    ideal_probing_signature,
)
from ..analysis.generalization import cutoff_length, generalization_curve
from ..analysis.mechanism import (
    MechanismLabel,
    Phase,
    classify_mechanism,
    phase_detect,
    signature_match,
)
from ..datasets.corpus import (
    Corpus,
    CorpusMode,
    Vocab,
    deserialize_corpus,
    serialize_corpus,
)
from ..datasets.generators import (
    gen_uniform_corpus,
    gen_word_corpus,
    parity_targets,
    split_corpus,
)
from ..datasets.natural_language import (
    gen_natural_language_corpus,
    max_rendered_length,
    natural_language_vocab,
)
from ..datasets.topic_model import gen_topic_corpus, topic_preset
from ..interpretability.attention import attention_graph, parity_head_scores
from ..interpretability.decomposition import pca_decomposition
from ..interpretability.patching import (
    GridMode,
    Metric,
    PatchPair,
    SignatureGrid,
    make_patch_pairs,
    prefix_patch_grid,
    suffix_patch_grid,
    window_patch_grid,
)
from ..interpretability.probes import probe_by_length, probe_curves
from ..model.checkpoint import load_checkpoint, restore_trainer_state, save_checkpoint
from ..model.training import AuxParityHead, Progress, Trainer, TrainingLog
from ..model.transformer import StateTrackingTransformer, init_model
from ..utils.export import (
    build_manifest,
    read_json,
    save_heatmap,
    sha256_file,
    verify_manifest,
    write_json,
    write_matrix_csv,
    write_records_csv,
)
from ..utils.logging import setup_logging
from ..utils.tracing import TracingManager
from .config import (
    ExperimentConfig,
    ModelConfig,
    StageConfig,
    get_num_threads,
    save_config,
)
from .errors import CheckpointError, ConfigError, DataError

logger = logging.getLogger(__name__)

DEFAULT_TOPIC_PRESET = "appG1"
CUTOFF_EVAL_DOCS = 200

CutoffCallback = Callable[[int, StateTrackingTransformer], Dict[str, Any]]


class StateTrackingWorkbench:
    """
    Оркестратор экспериментов над отслеживанием состояния.

    Пример использования:
        bench = StateTrackingWorkbench(load_config("s3.yaml"))
        bench.gen_data()
        bench.train()
        report = bench.analyze()
        print(report["verdict"]["label"])
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: Optional[Path] = None,
        show_progress: bool = False,
    ) -> None:
        """
        Args:
            config: Конфигурация эксперимента
            output_dir: Выходная директория (по умолчанию config.output_dir)
            show_progress: Показывать tqdm при обучении
        """
        config.validate()
        self.config = config
        self._check_sequence_lengths()
        self.output_dir = Path(output_dir or config.output_dir)
        self.show_progress = show_progress
        self.tracer = TracingManager()

        threads = get_num_threads()
        if threads:
            torch.set_num_threads(threads)

    def _check_sequence_lengths(self) -> None:
        """Каждая стадия должна помещаться в model.max_positions."""
        limit = self.config.model.max_positions
        for index, stage in enumerate(self.config.stages):
            n_actions = stage.max_length or self.config.corpus.length
            if stage.mode == "natural-language":
                longest = max_rendered_length(n_actions)
            else:
                longest = n_actions
            if longest > limit:
                raise ConfigError(
                    f"curriculum stage {index} ({stage.mode}) produces sequences "
                    f"of up to {longest} tokens, model.max_positions is {limit}"
                )

    # пути

    @property
    def data_dir(self) -> Path:
        return self.output_dir / "data"

    @property
    def checkpoint_dir(self) -> Path:
        return self.output_dir / "checkpoints"

    @property
    def logs_dir(self) -> Path:
        return self.output_dir / "logs"

    @property
    def analysis_dir(self) -> Path:
        return self.output_dir / "analysis"

    @property
    def train_length(self) -> int:
        """Длина обучающих последовательностей последней стадии."""
        corpus_length = self.config.corpus.length
        return min(self.config.stages[-1].max_length or corpus_length, corpus_length)

    def write_resolved_config(self) -> Path:
        return save_config(self.config, self.output_dir / "config.resolved.yaml")

    def _finish(self) -> None:
        logger.debug(self.tracer.report())
        logger.info(
            f"Трасса: {len(self.tracer.events)} стадий, "
            f"{self.tracer.total_duration_ms():.0f} мс"
        )
        self.tracer.dump(self.logs_dir / "trace.jsonl")
        self.tracer.clear()

    # данные

    def vocab(self) -> Vocab:
        """Словарь модели; слова фраз добавляются, если в curriculum есть NL стадия."""
        if any(s.mode == "natural-language" for s in self.config.stages):
            return natural_language_vocab()
        return Vocab.for_group(self.config.corpus.group_degree)

    def gen_data(self, topic_preset_name: Optional[str] = None) -> Dict[str, Any]:
        """
        Генерирует корпус word problem и делит его на train/analysis.

        Args:
            topic_preset_name: Если задан, дополнительно пишется тематический корпус

        Returns:
            Сводка: пути к файлам и размеры частей
        """
        cfg = self.config.corpus
        self.write_resolved_config()
        detail = f"S{cfg.group_degree} x{cfg.count}"
        with self.tracer.span("gen_data", "Workbench", detail) as meta:
            corpus = gen_word_corpus(cfg.group_degree, cfg.count, cfg.length, cfg.seed)
            train, held_out = split_corpus(corpus, cfg.train_fraction, seed=cfg.seed)
            paths = {
                "train": serialize_corpus(train, self.data_dir / "train.txt"),
                "analysis": serialize_corpus(held_out, self.data_dir / "analysis.txt"),
            }
            if topic_preset_name:
                self._require_s3("topic")
                topic = gen_topic_corpus(
                    topic_preset(topic_preset_name), cfg.count, cfg.length, cfg.seed
                )
                paths["topic"] = serialize_corpus(
                    topic, self.data_dir / f"topic-{topic_preset_name}.txt"
                )
            meta.update(train=len(train), analysis=len(held_out))

        summary = {
            "group_degree": cfg.group_degree,
            "length": cfg.length,
            "train_documents": len(train),
            "analysis_documents": len(held_out),
            "files": {k: str(v) for k, v in paths.items()},
        }
        logger.info(
            f"Данные: S{cfg.group_degree}, длина {cfg.length}, "
            f"train {len(train)}, analysis {len(held_out)}"
        )
        self._finish()
        return summary

    def _require_s3(self, mode: str) -> None:
        if self.config.corpus.group_degree != 3:
            raise ConfigError(f"{mode} corpora are defined over S3 only")

    def _load_split(self, name: str) -> Corpus:
        path = self.data_dir / f"{name}.txt"
        if not path.exists():
            self.gen_data()
        return deserialize_corpus(path)

    def _stage_corpus(self, index: int, stage: StageConfig, base: Corpus) -> Corpus:
        cfg = self.config.corpus
        count = stage.count or len(base)
        length = stage.max_length or cfg.length
        seed = cfg.seed + index + 1
        if stage.mode == "state-prediction":
            corpus = base.subset(range(min(count, len(base))))
        elif stage.mode == "parity":
            corpus = parity_targets(base.subset(range(min(count, len(base)))))
        elif stage.mode == "topic":
            self._require_s3("topic")
            params = topic_preset(stage.preset or DEFAULT_TOPIC_PRESET)
            return gen_topic_corpus(params, count, length, seed, vocab=self.vocab())
        elif stage.mode == "uniform":
            return gen_uniform_corpus(cfg.group_degree, count, length, seed)
        else:
            self._require_s3("natural-language")
            return gen_natural_language_corpus(count, length, seed)
        if stage.max_length:
            corpus = corpus.truncate(stage.max_length)
        return corpus

    # обучение

    def _model_config(self, vocab: Vocab) -> ModelConfig:
        model_cfg = self.config.model
        if model_cfg.vocab_size == 0:
            model_cfg = replace(model_cfg, vocab_size=len(vocab))
        elif model_cfg.vocab_size < len(vocab):
            raise ConfigError(
                f"model.vocab_size {model_cfg.vocab_size} "
                f"< vocabulary size {len(vocab)}"
            )
        return model_cfg

    def _cutoff_callback(self, vocab: Vocab) -> CutoffCallback:
        a = self.config.analysis
        max_len = min(a.eval_max_len, self.config.model.max_positions)
        n_docs = min(a.n_eval, CUTOFF_EVAL_DOCS)

        def callback(step: int, model: StateTrackingTransformer) -> Dict[str, Any]:
            curve = generalization_curve(model, vocab, max_len, n_docs, a.seed)
            state, _ = cutoff_length(curve, a.cutoff_threshold, "state")
            parity, _ = cutoff_length(curve, a.cutoff_threshold, "parity")
            return {"state_cutoff": state, "parity_cutoff": parity}

        return callback

    def train(self, resume: bool = False) -> Tuple[Path, TrainingLog]:
        """
        Выполняет все стадии curriculum.

        Args:
            resume: Продолжить с checkpoints/latest.ckpt, если он есть

        Returns:
            (путь к финальному чекпоинту, полный лог обучения)

        Raises:
            NumericError: Расхождение обучения (частичный лог сохраняется)
        """
        self.write_resolved_config()
        vocab = self.vocab()
        base = self._load_split("train")
        model_cfg = self._model_config(vocab)
        model = init_model(model_cfg)
        aux_head = self._aux_head(model_cfg)
        trainer = Trainer(
            model,
            self.config.train,
            vocab,
            aux_head=aux_head,
            show_progress=self.show_progress,
        )

        log_path = self.logs_dir / "training.jsonl"
        latest = self.checkpoint_dir / "latest.ckpt"
        log = TrainingLog(loss_convention=self.config.train.loss_reduction)
        start_stage, resume_progress = 0, None
        if resume and latest.exists():
            checkpoint = load_checkpoint(latest, expected_config=model_cfg)
            model.load_state_dict(checkpoint.model.state_dict())
            if aux_head is not None and checkpoint.aux_head is not None:
                aux_head.load_state_dict(checkpoint.aux_head.state_dict())
            restore_trainer_state(trainer, checkpoint)
            resume_progress = checkpoint.progress
            start_stage = resume_progress.stage
            if log_path.exists():
                previous = TrainingLog.from_jsonl(log_path)
                log.records = [
                    r for r in previous.records if r.step <= resume_progress.step
                ]
            logger.info(
                f"Возобновление со стадии {start_stage}, шаг {resume_progress.step}"
            )

        def merged(extra: TrainingLog) -> TrainingLog:
            return TrainingLog(
                list(log.records) + list(extra.records), log.loss_convention
            )

        def on_checkpoint(progress: Progress) -> None:
            save_checkpoint(latest, model, vocab, trainer, progress)
            merged(trainer.current_log).to_jsonl(log_path)

        try:
            for index, stage in enumerate(self.config.stages):
                if index < start_stage:
                    continue
                detail = f"stage {index} ({stage.mode})"
                with self.tracer.span("train_stage", "Trainer", detail) as meta:
                    corpus = self._stage_corpus(index, stage, base)
                    callbacks = []
                    if stage.mode != "natural-language":
                        callbacks.append(self._cutoff_callback(vocab))
                    stage_log = trainer.train_stage(
                        corpus,
                        stage=index,
                        epochs=stage.epochs,
                        callbacks=callbacks,
                        on_checkpoint=on_checkpoint,
                        resume=resume_progress if index == start_stage else None,
                    )
                    log.extend(stage_log)
                    meta["steps"] = trainer.progress.step
                save_checkpoint(latest, model, vocab, trainer)
                log.to_jsonl(log_path)
        except Exception as e:
            partial = getattr(e, "partial_log", None)
            if partial is not None:
                merged(partial).to_jsonl(log_path)
            self._finish()
            raise

        final = save_checkpoint(
            self.checkpoint_dir / "final.ckpt", model, vocab, trainer
        )
        log.to_jsonl(log_path)
        logger.info(
            f"Обучение завершено: {trainer.progress.step} шагов, чекпоинт {final}"
        )
        self._finish()
        return final, log

    def _aux_head(self, model_cfg: ModelConfig) -> Optional[AuxParityHead]:
        aux = self.config.train.aux_parity
        if not aux.enabled:
            return None
        if not 0 <= aux.layer <= model_cfg.n_layers:
            raise ConfigError(
                f"aux_parity.layer {aux.layer} outside 0..{model_cfg.n_layers}"
            )
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(model_cfg.seed + 1)
            return AuxParityHead(
                model_cfg.d_model, self.config.corpus.group_degree, aux
            )

    # анализ

    def _probe_corpus(self) -> Corpus:
        a = self.config.analysis
        corpus = self._load_split("analysis")
        if corpus.mode != CorpusMode.STATE_PREDICTION:
            raise DataError("analysis split must be a state-prediction corpus")
        corpus = corpus.subset(range(min(a.probe_docs, len(corpus))))
        return corpus.truncate(self.train_length)

    def _ideals(self, relation: ParityRelation, T: int, L: int) -> List[IdealSignature]:
        a = self.config.analysis
        depths = dict(parallel_depth=a.parallel_depth, parity_depth=a.parity_depth)
        ideals = [
            ideal_patching_signature(alg, T, L, **depths)
            for alg in (Algorithm.SEQUENTIAL, Algorithm.PARALLEL, Algorithm.ASSOCIATIVE)
        ]
        ideals.append(
            ideal_patching_signature(
                Algorithm.PARITY_ASSOCIATIVE, T, L, relation, **depths
            )
        )
        return ideals

    def _relative(self, path: Path) -> str:
        try:
            return path.resolve().relative_to(self.output_dir.resolve()).as_posix()
        except ValueError:
            return str(path)

    def _write_grid(self, name: str, grid: SignatureGrid, files: List[Path]) -> None:
        stem = self.analysis_dir / "grids" / name
        files.append(write_matrix_csv(grid.values, stem.with_suffix(".csv")))
        files.append(write_json(grid.to_dict(), stem.with_suffix(".json")))
        if self.config.analysis.emit_images:
            image = save_heatmap(grid.values, stem.with_suffix(".png"), title=name)
            if image is not None:
                files.append(image)

    def _patching(
        self,
        model: StateTrackingTransformer,
        vocab: Vocab,
        pairs: List[PatchPair],
        T: int,
        files: List[Path],
    ) -> Dict[str, Any]:
        """Сетки патчинга и их сравнение с идеальными сигнатурами."""
        a = self.config.analysis
        prefix = prefix_patch_grid(model, pairs, vocab, a.include_position_zero)
        for key, grid in sorted(prefix.items()):
            self._write_grid(key.replace("/", "_"), grid, files)
        self._write_grid(
            "suffix-del_nld", suffix_patch_grid(model, pairs, vocab, "zeros"), files
        )
        self._write_grid(
            "suffix-sub_nld", suffix_patch_grid(model, pairs, vocab, "clean"), files
        )
        self._write_grid(
            f"window-del-w{a.window_width}_nld",
            window_patch_grid(model, pairs, vocab, a.window_width),
            files,
        )
        skipped = prefix[f"{GridMode.PREFIX_SUB.value}/{Metric.NLD.value}"].skipped
        logger.info(f"Пропущено вырожденных пар: {skipped}")

        matches: Dict[str, Any] = {}
        for relation, mode in (
            (ParityRelation.AVERAGED, GridMode.PREFIX_SUB),
            (ParityRelation.SAME, GridMode.PREFIX_SUB_SAME),
            (ParityRelation.OPPOSITE, GridMode.PREFIX_SUB_OPPOSITE),
        ):
            grid = prefix[f"{mode.value}/{Metric.NLD.value}"]
            ideals = self._ideals(relation, T, model.n_layers)
            try:
                matches[relation.value] = signature_match(grid, ideals).to_dict()
            except DataError as e:
                logger.warning(f"Сравнение сигнатур ({relation.value}) невозможно: {e}")
                matches[relation.value] = {"error": str(e)}
        return matches

    def _training_phase(self, train_len: int) -> Dict[str, Any]:
        """Фаза обучения по замерам отсечений в logs/training.jsonl."""
        log_path = self.logs_dir / "training.jsonl"
        if not log_path.exists():
            logger.warning(f"Журнал обучения не найден: {log_path}")
            return {"label": Phase.UNDETERMINED.value, "evaluated_records": 0}
        log = TrainingLog.from_jsonl(log_path)
        phase = phase_detect(log, train_len, self.config.analysis.tolerance)
        evaluated = len(log.evaluated_records())
        logger.info(f"Фаза обучения: {phase.value} ({evaluated} замеров)")
        return {"label": phase.value, "evaluated_records": evaluated}

    def analyze(self, checkpoint: Optional[Path] = None) -> Dict[str, Any]:
        """
        Прогоняет батарею анализа и пишет report.json.

        Args:
            checkpoint: Путь к чекпоинту (по умолчанию checkpoints/final.ckpt)

        Returns:
            Содержимое отчёта

        Raises:
            CheckpointError: Чекпоинт отсутствует или повреждён
        """
        a = self.config.analysis
        checkpoint = Path(checkpoint or self.checkpoint_dir / "final.ckpt")
        if not checkpoint.exists():
            raise CheckpointError(
                f"checkpoint not found: {checkpoint} (run 'train' first)"
            )
        self.write_resolved_config()
        loaded = load_checkpoint(checkpoint)
        model, vocab = loaded.model, loaded.vocab
        if vocab.group_degree != self.config.corpus.group_degree:
            raise ConfigError(
                f"checkpoint is trained on S{vocab.group_degree}, "
                f"config says S{self.config.corpus.group_degree}"
            )
        degree = vocab.group_degree
        T = self.train_length
        eval_len = min(a.eval_max_len, model.config.max_positions)
        files: List[Path] = []
        out = self.analysis_dir

        with self.tracer.span(
            "generalization", "Analysis", f"max_len={eval_len}"
        ) as meta:
            curve = generalization_curve(model, vocab, eval_len, a.n_eval, a.seed)
            state_cutoff, state_flag = cutoff_length(curve, a.cutoff_threshold, "state")
            parity_cutoff, parity_flag = cutoff_length(
                curve, a.cutoff_threshold, "parity"
            )
            verdict = classify_mechanism(
                state_cutoff, parity_cutoff, T, a.tolerance, a.converged_fraction
            )
            files.append(
                write_records_csv(curve.to_records(), out / "generalization.csv")
            )
            files.append(write_json(curve.to_dict(), out / "generalization.json"))
            meta.update(
                state_cutoff=state_cutoff,
                parity_cutoff=parity_cutoff,
                label=verdict.label.value,
            )

        with self.tracer.span("phase", "Analysis", "training.jsonl") as meta:
            phase = self._training_phase(T)
            meta.update(phase)

        with self.tracer.span("probes", "Analysis", f"layers=0..{model.n_layers}"):
            probe_corpus = self._probe_corpus()
            curves = probe_curves(model, probe_corpus, seed=a.seed, l2=a.probe_l2)
            files.append(write_json(curves.to_dict(), out / "probes.json"))
            step = a.probe_length_step
            lengths = list(range(step, eval_len + 1, step)) or [eval_len]
            by_length = probe_by_length(
                model, degree, lengths, a.probe_length_samples, a.seed, a.probe_l2
            )
            files.append(
                write_matrix_csv(
                    by_length, out / "probe_by_length.csv", column_label="length_index"
                )
            )
            files.append(
                write_json(
                    {"lengths": lengths, "matrix": by_length},
                    out / "probe_by_length.json",
                )
            )

        with self.tracer.span("patching", "Analysis", f"pairs={a.n_pairs}") as meta:
            pairs = make_patch_pairs(degree, T, a.n_pairs, a.seed, vocab)
            try:
                verdict.evidence["signature_match"] = self._patching(
                    model, vocab, pairs, T, files
                )
                meta["status"] = "ok"
            except DataError as e:
                # недообученная модель может дать только вырожденные пары
                logger.warning(f"Патчинг пропущен: {e}")
                verdict.evidence["signature_match"] = {"error": str(e)}
                meta["status"] = "skipped"

        with self.tracer.span(
            "attention", "Analysis", f"examples={a.head_score_examples}"
        ):
            heads = parity_head_scores(
                model,
                vocab,
                a.head_score_max_len,
                a.head_score_examples,
                a.seed,
                a.ci_factor,
            )
            files.append(write_json(heads.to_dict(), out / "head_scores.json"))
            files.append(
                write_matrix_csv(
                    heads.scores, out / "head_scores.csv", column_label="head"
                )
            )
            with torch.no_grad():
                _, trace = model(
                    torch.tensor([pairs[0].clean_tokens]), capture="resid+attn"
                )
            graph = attention_graph(
                trace.attn.numpy(),
                a.attention_threshold,
                a.k_to,
                a.k_from,
                restrict_to_final=True,
            )
            files.append(write_json(graph.to_dict(), out / "attention_graph.json"))

        with self.tracer.span("decomposition", "Analysis", f"layer={a.pca_layer}"):
            try:
                decomposition = pca_decomposition(model, probe_corpus, a.pca_layer)
                files.append(
                    write_json(decomposition.to_dict(), out / "decomposition.json")
                )
            except DataError as e:
                logger.warning(f"Разложение пропущено: {e}")

        files.append(write_json(verdict.to_dict(), out / "verdict.json"))
        report = {
            "verdict": verdict.to_dict(),
            "phase": phase,
            "cutoffs": {
                "state": {"length": state_cutoff, "flag": state_flag.value},
                "parity": {"length": parity_cutoff, "flag": parity_flag.value},
                "train_length": T,
            },
            "checkpoint": {
                "path": self._relative(checkpoint),
                "sha256": sha256_file(checkpoint),
            },
            "seeds": {
                "init": model.config.seed,
                "data_order": self.config.train.data_seed,
                "corpus": self.config.corpus.seed,
                "analysis": a.seed,
            },
            "manifest": build_manifest(self.output_dir, files),
        }
        write_json(report, self.output_dir / "report.json")
        logger.info(
            f"Вердикт: {verdict.label.value} "
            f"(state {state_cutoff}, parity {parity_cutoff}, train {T})"
        )
        self._finish()
        return report

    # sweep

    def sweep(
        self, n_seeds: Optional[int] = None, workers: Optional[int] = None
    ) -> Dict[str, Any]:
        """
        Обучает и анализирует n_seeds моделей на каждую позиционную схему.

        Returns:
            Вердикты по прогонам и таблица долей меток по схемам
        """
        sweep_cfg = self.config.sweep
        n_seeds = n_seeds or sweep_cfg.n_seeds
        workers = workers or sweep_cfg.workers
        if n_seeds < 1:
            raise ConfigError(f"n_seeds must be >= 1, got {n_seeds}")
        self.write_resolved_config()

        jobs = []
        for scheme in sweep_cfg.positional_schemes:
            for i in range(n_seeds):
                config = self.config.with_seeds(
                    self.config.model.seed + i, self.config.train.data_seed + i
                )
                config = replace(
                    config, model=replace(config.model, positional_scheme=scheme)
                )
                directory = self.output_dir / "sweep" / scheme / f"seed{i}"
                jobs.append((scheme, i, config.to_dict(), str(directory)))

        detail = f"{len(jobs)} runs, {workers} workers"
        with self.tracer.span("sweep", "Workbench", detail) as meta:
            configs = [job[2] for job in jobs]
            directories = [job[3] for job in jobs]
            if workers <= 1:
                labels = list(map(_run_sweep_member, configs, directories))
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    labels = list(pool.map(_run_sweep_member, configs, directories))
            meta["labels"] = ",".join(labels)

        runs = [
            {"scheme": scheme, "seed_index": i, "label": label}
            for (scheme, i, _, _), label in zip(jobs, labels)
        ]
        table = {}
        for scheme in sweep_cfg.positional_schemes:
            scheme_labels = [r["label"] for r in runs if r["scheme"] == scheme]
            table[scheme] = {
                label.value: scheme_labels.count(label.value) / len(scheme_labels)
                for label in MechanismLabel
            }
        summary = {"runs": runs, "ratios": table, "n_seeds": n_seeds}
        write_json(summary, self.output_dir / "sweep" / "summary.json")
        write_records_csv(
            [dict(scheme=s, **ratios) for s, ratios in table.items()],
            self.output_dir / "sweep" / "ratios.csv",
        )
        for scheme, ratios in table.items():
            shares = ", ".join(f"{k}={v:.2f}" for k, v in ratios.items())
            logger.info(f"Sweep {scheme}: {shares}")
        self._finish()
        return summary

    # идеальные сигнатуры и отчёт

    def ideal(self, algorithm: str, length: int, depth: int) -> Dict[str, str]:
        """Выгружает идеальные сигнатуры патчинга и пробинга алгоритма."""
        a = self.config.analysis
        try:
            alg = Algorithm(algorithm)
        except ValueError:
            raise ConfigError(
                f"unknown algorithm '{algorithm}', "
                f"expected one of {[x.value for x in Algorithm]}"
            ) from None
        directory = self.output_dir / "ideal"
        if alg == Algorithm.PARITY_ASSOCIATIVE:
            relations = list(ParityRelation)
        else:
            relations = [ParityRelation.AVERAGED]
        paths: Dict[str, str] = {}
        for relation in relations:
            signature = ideal_patching_signature(
                alg,
                length,
                depth,
                relation,
                parallel_depth=a.parallel_depth,
                parity_depth=a.parity_depth,
            )
            for kind, path in export_signature(signature, directory).items():
                paths[f"{relation.value}.{kind}"] = str(path)
            if a.emit_images:
                image = directory / f"ideal_{alg.value}_{relation.value}.png"
                save_heatmap(signature.grid, image, title=alg.value)
        probing = ideal_probing_signature(
            alg,
            length,
            depth,
            parallel_depth=a.parallel_depth,
            parity_depth=a.parity_depth,
            group_size=math.factorial(self.config.corpus.group_degree),
        )
        probing_path = directory / f"ideal_{alg.value}_probing.json"
        paths["probing.json"] = str(write_json(probing.to_dict(), probing_path))
        logger.info(
            f"Идеальные сигнатуры {alg.value}: T={length}, L={depth}, "
            f"{len(paths)} файлов"
        )
        return paths

    def report(self) -> Dict[str, Any]:
        """
        Читает report.json и сверяет манифест с файлами.

        Raises:
            DataError: Отчёта нет или файлы не совпадают с манифестом
        """
        path = self.output_dir / "report.json"
        if not path.exists():
            raise DataError(f"report not found: {path} (run 'analyze' first)")
        report = read_json(path)
        problems = verify_manifest(self.output_dir, report.get("manifest", {}))
        if problems:
            raise DataError("report manifest check failed: " + "; ".join(problems))
        return report


def _run_sweep_member(config_data: Dict[str, Any], output_dir: str) -> str:
    """Один прогон sweep в отдельном процессе: данные, обучение, анализ."""
    config = ExperimentConfig.from_dict(config_data)
    config.output_dir = output_dir
    setup_logging(config.logging.level)
    bench = StateTrackingWorkbench(config, Path(output_dir))
    bench.gen_data()
    bench.train()
    return bench.analyze()["verdict"]["label"]
