"""
Тесты эталонных алгоритмов и идеальных сигнатур.
"""

import itertools
import json

import numpy as np
import pytest

from state_tracking.algorithms import (
    Algorithm,
    ParallelS3State,
    ParityRelation,
    export_signature,
    final_prediction,
    ideal_patching_signature,
    ideal_probing_signature,
    run_associative,
    run_parallel_s3,
    run_parity_associative,
    run_sequential,
    simulate,
)
from state_tracking.core.errors import ConfigError, DataError
from state_tracking.core.permutations import (
    Parity,
    Permutation,
    compose,
    cumulative_states,
    enumerate_group,
    parity,
    random_permutation,
    state_parities,
)


def P(text: str) -> Permutation:
    return Permutation.from_string(text)


def window_product(actions, start, stop):
    result = actions[start]
    for a in actions[start + 1 : stop + 1]:
        result = compose(result, a)
    return result


def random_actions(rng, n, length):
    return [random_permutation(rng, n) for _ in range(length)]


class TestSequential:
    """Тесты последовательного алгоритма."""

    def test_two_action_product(self):
        grid = run_sequential([P("42315"), P("12534")], 4)
        assert grid.cell(1, 1) == P("32514")
        assert grid.cell(1, 0) == P("12534")

    def test_single_action(self):
        grid = run_sequential([P("231")], 3)
        assert all(grid.cell(0, layer) == P("231") for layer in range(4))

    def test_final_row_is_states(self):
        actions = random_actions(np.random.default_rng(0), 4, 6)
        grid = run_sequential(actions, 6)
        assert grid.complete
        assert final_prediction(grid) == cumulative_states(actions)

    def test_too_shallow_is_flagged(self):
        grid = run_sequential(random_actions(np.random.default_rng(0), 3, 6), 2)
        assert not grid.complete


class TestParallel:
    """Тесты параллельного алгоритма для S_3."""

    def test_generator_a(self):
        states, forms = run_parallel_s3([P("132")])
        assert forms == [ParallelS3State(1, 0)]
        assert states == [P("132")]

    def test_two_three_cycles(self):
        states, forms = run_parallel_s3([P("231"), P("231")])
        assert forms[-1] == ParallelS3State(0, 2)
        assert states[-1] == P("312")

    def test_exhaustive_short_sequences(self):
        group = enumerate_group(3)
        for length in range(1, 5):
            for actions in itertools.product(group, repeat=length):
                states, _ = run_parallel_s3(list(actions))
                assert states == cumulative_states(list(actions))

    def test_rejects_other_degrees(self):
        with pytest.raises(DataError):
            run_parallel_s3([P("2134")])


class TestAssociative:
    """Тесты ассоциативного алгоритма."""

    def test_recurrence_examples(self):
        actions = random_actions(np.random.default_rng(1), 3, 4)
        grid = run_associative(actions, 2)
        assert grid.cell(3, 1) == compose(actions[2], actions[3])
        assert grid.cell(3, 2) == cumulative_states(actions)[3]

    @pytest.mark.parametrize("n,length,depth", [(5, 16, 4), (3, 37, 6), (4, 64, 6)])
    def test_cells_are_window_products(self, n, length, depth):
        actions = random_actions(np.random.default_rng(length), n, length)
        grid = run_associative(actions, depth)
        for t in range(length):
            for layer in range(depth + 1):
                start = max(0, t - 2 ** layer + 1)
                assert grid.cell(t, layer) == window_product(actions, start, t)

    def test_incomplete_depth(self):
        grid = run_associative(random_actions(np.random.default_rng(0), 3, 9), 3)
        assert not grid.complete


class TestParityAssociative:
    """Тесты parity-associative алгоритма."""

    def test_parity_row(self):
        actions = random_actions(np.random.default_rng(2), 5, 12)
        grid = run_parity_associative(actions, 4)
        expected = state_parities(actions)
        for layer in range(5):
            assert [cell.parity for cell in grid.layer(layer)] == expected

    def test_two_swaps(self):
        grid = run_parity_associative([P("213"), P("213")], 1)
        for layer in range(2):
            parities = [cell.parity for cell in grid.layer(layer)]
            assert parities == [Parity.ODD, Parity.EVEN]

    @pytest.mark.parametrize("n", [3, 5])
    def test_decodes_states(self, n):
        actions = random_actions(np.random.default_rng(n), n, 16)
        grid = run_parity_associative(actions, 4)
        assert final_prediction(grid) == cumulative_states(actions)

    def test_complements_are_even(self):
        actions = random_actions(np.random.default_rng(3), 3, 8)
        grid = run_parity_associative(actions, 3)
        for t in range(8):
            for layer in range(4):
                assert parity(grid.cell(t, layer).complement) == Parity.EVEN


class TestFinalAgreement:
    """Все симуляторы дают верные ответы."""

    @pytest.mark.parametrize("n", [3, 5])
    def test_agree_with_states(self, n):
        rng = np.random.default_rng(10 + n)
        depth = 4
        for _ in range(200):
            length = int(rng.integers(1, 2 ** depth + 1))
            actions = random_actions(rng, n, length)
            expected = cumulative_states(actions)
            assert simulate(Algorithm.ASSOCIATIVE, actions, depth) == expected
            assert simulate(Algorithm.PARITY_ASSOCIATIVE, actions, depth) == expected
            assert simulate(Algorithm.SEQUENTIAL, actions, length) == expected
            if n == 3:
                assert simulate(Algorithm.PARALLEL, actions, depth) == expected


class TestIdealSignatures:
    """Тесты идеальных сигнатур патчинга и пробинга."""

    def test_sequential_upper_triangular(self):
        grid = ideal_patching_signature("sequential", 4, 4).grid
        expected = np.array(
            [[1.0 if layer >= t else 0.0 for t in range(4)] for layer in range(5)]
        )
        np.testing.assert_array_equal(grid, expected)

    def test_associative_staircase(self):
        grid = ideal_patching_signature("associative", 8, 3).grid
        first_restored = [int(np.argmax(row)) for row in grid]
        assert first_restored == [7, 6, 4, 0]
        assert (np.diff(grid, axis=1) >= 0).all()
        assert (np.diff(grid, axis=0) >= 0).all()

    def test_parallel_l_shape(self):
        grid = ideal_patching_signature("parallel", 6, 4, parallel_depth=2).grid
        assert grid[:3].min() == 1.0
        assert grid[3:, :-1].max() == 0.0
        assert grid[:, -1].min() == 1.0

    def test_paa_averaged_is_mean(self):
        def grid(relation):
            return ideal_patching_signature(
                "parity-associative", 12, 4, relation, parity_depth=1
            ).grid

        same = grid(ParityRelation.SAME)
        opposite = grid(ParityRelation.OPPOSITE)
        averaged = grid(ParityRelation.AVERAGED)
        np.testing.assert_allclose(averaged, 0.5 * (same + opposite))
        associative = ideal_patching_signature("associative", 12, 4).grid
        np.testing.assert_array_equal(same, associative)

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            ideal_patching_signature("quantum", 4, 2)

    def test_probe_formula(self):
        signature = ideal_probing_signature("associative", 16, 4, chance=1 / 6)
        assert signature.probe_state[2] == pytest.approx(4 / 16 + (12 / 16) * (1 / 6))
        assert signature.probe_parity_flat is not None

    def test_parallel_probe(self):
        signature = ideal_probing_signature("parallel", 16, 4, parallel_depth=2)
        assert (signature.probe_state[2:] == 1.0).all()

    def test_paa_parity_probe_saturates(self):
        signature = ideal_probing_signature("parity-associative", 16, 5, parity_depth=2)
        assert (signature.probe_parity[2:] == 1.0).all()
        assert signature.probe_parity[1] < 1.0
        assert signature.probe_parity_flat is None

    def test_all_entries_in_unit_interval(self):
        for algorithm in Algorithm:
            sig = ideal_patching_signature(algorithm, 10, 4)
            probe = ideal_probing_signature(algorithm, 10, 4)
            for values in (sig.grid, probe.probe_state, probe.probe_parity):
                assert values.min() >= 0.0 and values.max() <= 1.0

    def test_export(self, tmp_path):
        signature = ideal_patching_signature("associative", 8, 3)
        paths = export_signature(signature, tmp_path)
        data = json.loads(paths["json"].read_text(encoding="utf-8"))
        assert data["algorithm"] == "associative"
        assert len(data["grid"]) == 4
        assert paths["csv"].exists()
