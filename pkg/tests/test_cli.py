"""
Тесты конфигурации и CLI.
"""

import json

import pytest
import yaml

from state_tracking import __main__ as cli
from state_tracking.core.config import (
    ExperimentConfig,
    StageConfig,
    load_config,
    save_config,
)
from state_tracking.core.errors import ConfigError, NumericError
from state_tracking.core.workbench import StateTrackingWorkbench
from state_tracking.datasets import max_rendered_length
from state_tracking.model.checkpoint import load_checkpoint
from state_tracking.model.training import TrainingLog, TrainingRecord

TINY_CONFIG = {
    "CORPUS": {
        "group_degree": 3,
        "count": 200,
        "length": 4,
        "seed": 1,
        "train_fraction": 0.75,
    },
    "MODEL": {
        "n_layers": 2,
        "d_model": 16,
        "n_heads": 2,
        "d_mlp": 32,
        "max_positions": 16,
    },
    "TRAINING": {
        "epochs": 2,
        "batch_size": 32,
        "eval_every": 5,
        "log_every": 5,
        "checkpoint_every": 4,
    },
    "CURRICULUM": [
        {"mode": "state-prediction", "epochs": 2},
        {"mode": "parity", "epochs": 1},
    ],
    "ANALYSIS": {
        "n_pairs": 10,
        "eval_max_len": 8,
        "n_eval": 50,
        "probe_docs": 50,
        "probe_length_step": 4,
        "probe_length_samples": 60,
        "head_score_max_len": 8,
        "head_score_examples": 10,
    },
    "LOGGING": {"level": "WARNING"},
}


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY_CONFIG), encoding="utf-8")
    return path


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    return code, capsys.readouterr().out


class TestConfig:
    """Тесты ExperimentConfig."""

    def test_default_config_loads(self):
        config = load_config()
        assert config.corpus.group_degree == 3
        assert config.model.positional_scheme == "rotary"
        assert [s.mode for s in config.stages] == ["state-prediction"]

    def test_save_and_load(self, tmp_path, tiny_config_file):
        config = load_config(str(tiny_config_file))
        path = save_config(config, tmp_path / "resolved.yaml")
        again = load_config(str(path))
        assert again.to_dict() == config.to_dict()
        assert again.train.betas == (0.9, 0.999)

    @pytest.mark.parametrize("data", [
        {"CORPUSES": {}},
        {"MODEL": {"layers": 3}},
        {"CURRICULUM": []},
        {"CURRICULUM": [{"mode": "reading"}]},
        {"CORPUS": {"train_fraction": 1.0}},
        {"TRAINING": {"loss_reduction": "median"}},
        {"SWEEP": {"positional_schemes": ["alibi"]}},
    ])
    def test_invalid_config(self, data):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.yaml"))

    def test_with_seeds(self):
        config = ExperimentConfig(stages=[StageConfig()]).with_seeds(3, 4)
        assert (config.model.seed, config.train.data_seed) == (3, 4)


class TestExitCodes:
    """Тесты кодов выхода main()."""

    def test_bad_argument(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["train", "--positional-scheme", "alibi"])
        assert info.value.code == cli.EXIT_CONFIG

    def test_missing_command(self):
        with pytest.raises(SystemExit) as info:
            cli.main([])
        assert info.value.code == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path, capsys):
        code, _ = run_cli(capsys, "--config", tmp_path / "absent.yaml", "report")
        assert code == cli.EXIT_CONFIG

    def test_report_without_run(self, tmp_path, capsys):
        code, _ = run_cli(capsys, "--output", tmp_path, "report")
        assert code == cli.EXIT_DATA

    def test_analyze_without_checkpoint(self, tmp_path, capsys, tiny_config_file):
        code, _ = run_cli(
            capsys, "--config", tiny_config_file, "--output", tmp_path, "analyze"
        )
        assert code == cli.EXIT_DATA

    def test_numeric_error(self, monkeypatch, tmp_path):
        def diverge(args):
            raise NumericError("loss is nan at step 3", TrainingLog())

        monkeypatch.setattr(cli, "run", diverge)
        assert cli.main(["--output", str(tmp_path), "train"]) == cli.EXIT_NUMERIC

    def test_unknown_algorithm(self, tmp_path, capsys):
        args = ["ideal", "--alg", "quantum", "--length", 8, "--depth", 3]
        code, _ = run_cli(capsys, "--output", tmp_path, *args)
        assert code == cli.EXIT_CONFIG


class TestCommands:
    """Тесты отдельных команд."""

    def test_ideal_writes_signatures(self, tmp_path, capsys):
        ideal = ["ideal", "--alg", "associative", "--length", 8, "--depth", 3]
        code, out = run_cli(capsys, "--output", tmp_path, *ideal)
        assert code == cli.EXIT_OK
        paths = json.loads(out)
        grid_path = tmp_path / "ideal" / "ideal_associative_averaged.json"
        grid = json.loads(grid_path.read_text(encoding="utf-8"))
        assert len(grid["grid"]) == 4
        assert set(paths) == {"averaged.json", "averaged.csv", "probing.json"}

    def test_ideal_parity_associative_relations(self, tmp_path, capsys):
        ideal = [
            "ideal",
            "--alg",
            "parity-associative",
            "--length",
            8,
            "--depth",
            3,
            "--parity-depth",
            1,
        ]
        code, out = run_cli(capsys, "--output", tmp_path, *ideal)
        assert code == cli.EXIT_OK
        keys = json.loads(out)
        assert {"same.json", "opposite.json", "averaged.json"} <= set(keys)

    def test_gen_data(self, tmp_path, capsys):
        args = ["gen-data", "--group", 3, "--count", 50, "--length", 4, "--seed", 0]
        code, out = run_cli(capsys, "--output", tmp_path, *args)
        assert code == cli.EXIT_OK
        summary = json.loads(out)
        assert (summary["train_documents"], summary["analysis_documents"]) == (45, 5)
        assert (tmp_path / "data" / "train.txt").exists()
        assert (tmp_path / "config.resolved.yaml").exists()

    def test_gen_data_with_topic_preset(self, tmp_path, capsys):
        args = ["gen-data", "--count", 20, "--length", 4, "--preset", "appG2"]
        code, _ = run_cli(capsys, "--output", tmp_path, *args)
        assert code == cli.EXIT_OK
        assert (tmp_path / "data" / "topic-appG2.txt").exists()

    def test_gen_data_infeasible(self, tmp_path, capsys):
        args = ["gen-data", "--count", 7, "--length", 1]
        code, _ = run_cli(capsys, "--output", tmp_path, *args)
        assert code == cli.EXIT_DATA


class TestWorkbench:
    """Тесты оркестратора без CLI."""

    NL_CONFIG = {
        "CORPUS": {"group_degree": 3, "count": 40, "length": 3, "seed": 0},
        "MODEL": {
            "n_layers": 1,
            "d_model": 16,
            "n_heads": 2,
            "d_mlp": 32,
            "max_positions": 32,
        },
        "TRAINING": {"epochs": 1, "batch_size": 8, "log_every": 1},
        "CURRICULUM": [{"mode": "natural-language", "epochs": 1, "count": 8}],
        "LOGGING": {"level": "WARNING"},
    }

    def test_natural_language_stage_trains(self, tmp_path):
        config = ExperimentConfig.from_dict(self.NL_CONFIG)
        bench = StateTrackingWorkbench(config, tmp_path)
        path, log = bench.train()
        assert path.exists()
        assert log.records and {r.stage for r in log.records} == {0}
        assert "Rotate" in load_checkpoint(path).vocab.tokens

    def test_natural_language_stage_must_fit_context(self):
        stage = StageConfig(mode="natural-language", epochs=1, count=8)
        config = ExperimentConfig(stages=[stage])
        with pytest.raises(ConfigError, match="max_positions"):
            StateTrackingWorkbench(config)

    def test_length_curriculum_stage_fits(self):
        stage = StageConfig(mode="natural-language", epochs=1, max_length=8)
        config = ExperimentConfig(stages=[stage])
        assert max_rendered_length(8) <= config.model.max_positions
        StateTrackingWorkbench(config)

    def test_word_stage_must_fit_context(self):
        config = ExperimentConfig.from_dict({"CORPUS": {"length": 80}})
        with pytest.raises(ConfigError):
            StateTrackingWorkbench(config)

    @pytest.mark.parametrize(
        "cutoffs,expected",
        [
            ([(2, 3), (4, 22), (10, 24), (24, 60)], "two-phase"),
            ([(2, 3), (8, 9), (16, 17), (24, 25)], "simultaneous"),
        ],
    )
    def test_training_phase_from_log(self, tmp_path, cutoffs, expected):
        log = TrainingLog()
        for step, (state, parity) in enumerate(cutoffs, start=1):
            record = TrainingRecord(
                step=step,
                epoch=0,
                stage=0,
                loss=1.0,
                state_cutoff=state,
                parity_cutoff=parity,
            )
            log.append(record)
        log.append(TrainingRecord(step=99, epoch=0, stage=0, loss=1.0))
        bench = StateTrackingWorkbench(ExperimentConfig(), tmp_path)
        log.to_jsonl(bench.logs_dir / "training.jsonl")
        phase = bench._training_phase(24)
        assert phase == {"label": expected, "evaluated_records": len(cutoffs)}

    def test_training_phase_without_log(self, tmp_path):
        bench = StateTrackingWorkbench(ExperimentConfig(), tmp_path)
        assert bench._training_phase(24)["label"] == "undetermined"


@pytest.mark.slow
def test_end_to_end(tmp_path, capsys, tiny_config_file):
    base = ["--config", tiny_config_file, "--output", tmp_path]

    assert run_cli(capsys, *base, "gen-data")[0] == cli.EXIT_OK
    code, out = run_cli(capsys, *base, "train")
    assert code == cli.EXIT_OK
    steps = json.loads(out)["steps"]
    assert steps > 0
    assert (tmp_path / "checkpoints" / "final.ckpt").exists()
    log = TrainingLog.from_jsonl(tmp_path / "logs" / "training.jsonl")
    assert {r.stage for r in log.records} == {0, 1}

    code, out = run_cli(capsys, *base, "analyze")
    assert code == cli.EXIT_OK
    assert json.loads(out)["verdict"]["label"] in {"AA", "PAA", "Neither"}
    assert (tmp_path / "analysis" / "generalization.csv").exists()

    code, out = run_cli(capsys, *base, "report")
    assert code == cli.EXIT_OK
    report = json.loads(out)
    assert report["seeds"]["corpus"] == 1
    assert report["phase"]["evaluated_records"] == len(log.evaluated_records())
    assert report["phase"]["label"] in {"two-phase", "simultaneous", "undetermined"}
    assert "analysis/generalization.csv" in report["manifest"]

    # завершённый прогон возобновляется без новых шагов
    code, out = run_cli(capsys, *base, "train", "--resume")
    assert code == cli.EXIT_OK
    assert json.loads(out)["steps"] == steps

    tampered = tmp_path / "analysis" / "generalization.csv"
    tampered.write_text("tampered\n", encoding="utf-8")
    assert run_cli(capsys, *base, "report")[0] == cli.EXIT_DATA
