"""
Тесты кривых обобщения, вердиктов о механизме и детектора фаз.
"""

import numpy as np
import pytest

from state_tracking.algorithms import (
    Algorithm,
    IdealSignature,
    ParityRelation,
    ideal_patching_signature,
)
from state_tracking.analysis import (
    CutoffFlag,
    GeneralizationCurve,
    MechanismLabel,
    Phase,
    classify_mechanism,
    curve_from_predictions,
    cutoff_length,
    generalization_curve,
    phase_detect,
    signature_match,
)
from state_tracking.core.errors import DataError
from state_tracking.core.permutations import group_table
from state_tracking.model.training import TrainingLog, TrainingRecord


def make_curve(state, parity=None):
    parity = state if parity is None else parity
    lengths = list(range(1, len(state) + 1))
    return GeneralizationCurve(lengths, list(state), list(parity), [100] * len(state))


class TestGeneralizationCurve:
    """Тесты кривой обобщения."""

    def test_from_predictions(self):
        table = group_table(3)
        true_states = np.array([[0, 1, 2], [3, 4, 5]])
        predicted = np.array([[0, 1, 2], [3, 0, -1]])
        curve = curve_from_predictions(predicted, true_states, 3)
        assert curve.lengths == [1, 2, 3]
        assert curve.state_accuracy == [1.0, 0.5, 0.5]
        # 4 и 0 различаются по чётности, -1 не является состоянием
        expected_parity = 1.0 if table.parities[4] == table.parities[0] else 0.5
        assert curve.parity_accuracy == [1.0, expected_parity, 0.5]
        assert curve.counts == [2, 2, 2]

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            curve_from_predictions(np.zeros((2, 3)), np.zeros((2, 4)), 3)

    def test_lengths_must_increase(self):
        with pytest.raises(DataError):
            GeneralizationCurve([1, 1], [1.0, 1.0], [1.0, 1.0], [1, 1])

    def test_records(self):
        records = make_curve([1.0, 0.5]).to_records()
        assert records[1] == {
            "length": 2,
            "state_accuracy": 0.5,
            "parity_accuracy": 0.5,
            "count": 100,
        }

    def test_model_curve(self, tiny_model, s3_vocab):
        curve = generalization_curve(tiny_model, s3_vocab, max_len=6, n_eval=20, seed=0)
        assert curve.lengths == list(range(1, 7))
        accuracies = curve.state_accuracy + curve.parity_accuracy
        assert all(0.0 <= a <= 1.0 for a in accuracies)
        assert curve.metadata["n_eval"] == 20

    def test_model_curve_too_long(self, tiny_model, s3_vocab, tiny_config):
        with pytest.raises(DataError):
            generalization_curve(
                tiny_model, s3_vocab, max_len=tiny_config.max_positions + 1
            )


class TestCutoff:
    """Тесты длины отсечения."""

    def test_dip(self):
        curve = make_curve([1.0] * 40 + [0.5] * 10)
        assert cutoff_length(curve) == (40, CutoffFlag.OK)

    def test_no_dip(self):
        assert cutoff_length(make_curve([1.0] * 12)) == (12, CutoffFlag.NO_DIP)

    def test_unconverged(self):
        assert cutoff_length(make_curve([0.3] * 12)) == (0, CutoffFlag.UNCONVERGED)

    def test_first_dip_counts(self):
        curve = make_curve([1.0, 1.0, 0.9, 1.0, 1.0])
        assert cutoff_length(curve) == (2, CutoffFlag.OK)

    def test_parity_target(self):
        curve = make_curve([1.0, 0.2, 0.2], parity=[1.0, 1.0, 1.0])
        assert cutoff_length(curve, target="parity") == (3, CutoffFlag.NO_DIP)
        with pytest.raises(DataError):
            cutoff_length(curve, target="colour")

    def test_empty_curve(self):
        with pytest.raises(DataError):
            cutoff_length(GeneralizationCurve([], [], [], []))


class TestClassifyMechanism:
    """Тесты метки AA / PAA / Neither."""

    @pytest.mark.parametrize("state,parity,expected", [
        (24, 80, MechanismLabel.PAA),
        (30, 31, MechanismLabel.AA),
        (30, 32, MechanismLabel.AA),
        (30, 33, MechanismLabel.PAA),
        (10, 80, MechanismLabel.NEITHER),
        (40, 30, MechanismLabel.NEITHER),
    ])
    def test_labels(self, state, parity, expected):
        verdict = classify_mechanism(state, parity, train_len=24)
        assert verdict.label == expected
        assert verdict.evidence["state_cutoff"] == state

    def test_unconverged_reason(self):
        verdict = classify_mechanism(21, 21, train_len=24)
        assert verdict.label == MechanismLabel.NEITHER
        assert verdict.evidence["reason"] == "unconverged"

    def test_serializable(self):
        data = classify_mechanism(24, 80, train_len=24).to_dict()
        assert data["label"] == "PAA"


class TestSignatureMatch:
    """Тесты сопоставления эмпирической сетки с идеальными."""

    @staticmethod
    def ideals(length=8, depth=3):
        return [
            ideal_patching_signature(Algorithm.SEQUENTIAL, length, depth),
            ideal_patching_signature(Algorithm.ASSOCIATIVE, length, depth),
            ideal_patching_signature(
                Algorithm.PARITY_ASSOCIATIVE,
                length,
                depth,
                ParityRelation.OPPOSITE,
                parity_depth=1,
            ),
        ]

    def test_noisy_associative(self):
        rng = np.random.default_rng(0)
        noise = 0.05 * rng.normal(size=(4, 8))
        grid = ideal_patching_signature(Algorithm.ASSOCIATIVE, 8, 3).grid + noise
        match = signature_match(grid, self.ideals())
        assert match.best == Algorithm.ASSOCIATIVE
        assert match.scores["associative"] == max(match.scores.values())
        assert "parity-associative/opposite" in match.scores

    def test_tie_goes_to_simpler(self):
        grid = ideal_patching_signature(Algorithm.ASSOCIATIVE, 8, 3).grid
        ideals = [
            IdealSignature(
                Algorithm.PARITY_ASSOCIATIVE,
                8,
                3,
                ParityRelation.SAME,
                grid=grid.copy(),
            ),
            IdealSignature(Algorithm.ASSOCIATIVE, 8, 3, grid=grid.copy()),
        ]
        match = signature_match(grid, ideals)
        assert match.best == Algorithm.ASSOCIATIVE
        assert match.tie_broken

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            signature_match(np.eye(4, 6), self.ideals())

    def test_constant_grid(self):
        with pytest.raises(DataError):
            signature_match(np.ones((4, 8)), self.ideals())

    def test_no_ideals(self):
        with pytest.raises(DataError):
            signature_match(np.eye(4, 8), [])


def log_with(cutoffs):
    log = TrainingLog()
    for step, (state, parity) in enumerate(cutoffs, start=1):
        record = TrainingRecord(
            step=step * 100,
            epoch=0,
            stage=0,
            loss=1.0,
            state_cutoff=state,
            parity_cutoff=parity,
        )
        log.append(record)
    return log


class TestPhaseDetect:
    """Тесты детектора фаз обучения."""

    def test_two_phase(self):
        log = log_with([(2, 3), (4, 22), (10, 24), (24, 60)])
        assert phase_detect(log, train_len=24) == Phase.TWO_PHASE

    def test_simultaneous(self):
        log = log_with([(2, 3), (8, 9), (16, 17), (24, 25)])
        assert phase_detect(log, train_len=24) == Phase.SIMULTANEOUS

    def test_undetermined_when_cutoffs_drift(self):
        log = log_with([(2, 3), (8, 9), (16, 21), (24, 25)])
        assert phase_detect(log, train_len=24) == Phase.UNDETERMINED

    def test_too_few_records(self):
        assert phase_detect(log_with([(24, 24)]), train_len=24) == Phase.UNDETERMINED

    def test_records_without_cutoffs_are_ignored(self):
        log = log_with([(2, 3), (8, 9)])
        log.append(TrainingRecord(step=1000, epoch=1, stage=0, loss=0.5))
        assert phase_detect(log, train_len=24) == Phase.SIMULTANEOUS
