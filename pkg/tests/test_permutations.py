"""
Тесты алгебры перестановок.
"""

import itertools
from collections import Counter

import numpy as np
import pytest

from state_tracking.core.errors import ConfigError, DataError
from state_tracking.core.permutations import (
    Parity,
    Permutation,
    apply_to_labels,
    compose,
    cumulative_states,
    enumerate_group,
    group_table,
    inverse,
    parity,
    random_permutation,
    state_parities,
)


def P(text: str) -> Permutation:
    return Permutation.from_string(text)


class TestPermutation:
    """Тесты типа Permutation."""

    def test_display_roundtrip(self):
        assert str(P("42315")) == "42315"
        assert P("42315").dest == (3, 1, 2, 0, 4)

    @pytest.mark.parametrize("text", ["112", "124", "abc"])
    def test_rejects_non_bijection(self, text):
        with pytest.raises(DataError):
            P(text)

    def test_identity(self):
        assert Permutation.identity(4).is_identity()
        assert str(Permutation.identity(3)) == "123"


class TestCompose:
    """Тесты композиции."""

    @pytest.mark.parametrize("a,b,expected", [
        ("42315", "12534", "32514"),
        ("213", "213", "123"),
        ("231", "231", "312"),
    ])
    def test_examples(self, a, b, expected):
        assert compose(P(a), P(b)) == P(expected)

    def test_identity_is_neutral(self):
        identity = Permutation.identity(3)
        for p in enumerate_group(3):
            assert compose(identity, p) == p
            assert compose(p, identity) == p

    def test_degree_mismatch(self):
        with pytest.raises(DataError):
            compose(P("123"), P("1234"))

    def test_associativity_s3(self):
        group = enumerate_group(3)
        for a, b, c in itertools.product(group, repeat=3):
            assert compose(compose(a, b), c) == compose(a, compose(b, c))

    def test_associativity_s5_sampled(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            a, b, c = (random_permutation(rng, 5) for _ in range(3))
            assert compose(compose(a, b), c) == compose(a, compose(b, c))


class TestInverseAndParity:
    """Тесты обратного элемента и чётности."""

    @pytest.mark.parametrize(
        "p,expected", [("123", "123"), ("231", "312"), ("213", "213")]
    )
    def test_inverse_examples(self, p, expected):
        assert inverse(P(p)) == P(expected)

    def test_inverse_law(self):
        for p in enumerate_group(4):
            assert compose(p, inverse(p)).is_identity()

    @pytest.mark.parametrize("p,expected", [
        ("12345", Parity.EVEN),
        ("21345", Parity.ODD),
        ("12534", Parity.EVEN),
    ])
    def test_parity_examples(self, p, expected):
        assert parity(P(p)) == expected

    def test_s3_has_three_of_each_parity(self):
        counts = Counter(parity(p) for p in enumerate_group(3))
        assert counts == {Parity.EVEN: 3, Parity.ODD: 3}

    @pytest.mark.parametrize("n", [3, 5])
    def test_parity_homomorphism(self, n):
        group = enumerate_group(n)
        for a, b in itertools.product(group, repeat=2):
            assert parity(compose(a, b)) == parity(a) ^ parity(b)


class TestWordProblem:
    """Тесты cumulative_states и state_parities."""

    def test_two_action_example(self):
        assert cumulative_states([P("42315"), P("12534")]) == [P("42315"), P("32514")]

    def test_identity_sequence(self):
        identity = Permutation.identity(3)
        assert cumulative_states([identity] * 3) == [identity] * 3
        assert state_parities([identity] * 3) == [Parity.EVEN] * 3

    def test_matches_fold(self):
        rng = np.random.default_rng(1)
        actions = [random_permutation(rng, 5) for _ in range(8)]
        states = cumulative_states(actions)
        for t in range(len(actions)):
            running = list(range(5))
            for a in actions[: t + 1]:
                running = [a.dest[i] for i in running]
            # running[i] - куда объект i попал после всех действий
            assert states[t].dest == tuple(running)

    def test_two_swaps(self):
        assert state_parities([P("213"), P("213")]) == [Parity.ODD, Parity.EVEN]

    def test_parities_match_states(self):
        rng = np.random.default_rng(2)
        actions = [random_permutation(rng, 3) for _ in range(100)]
        expected = [parity(s) for s in cumulative_states(actions)]
        assert state_parities(actions) == expected

    def test_empty_sequence(self):
        with pytest.raises(DataError):
            cumulative_states([])


class TestLabelsAndEnumeration:
    """Тесты apply_to_labels, enumerate_group и random_permutation."""

    @pytest.mark.parametrize("p,labels,expected", [
        ("32514", "ABCDE", "DBAEC"),
        ("123", "ABC", "ABC"),
        ("213", "ABC", "BAC"),
    ])
    def test_apply_to_labels(self, p, labels, expected):
        assert apply_to_labels(P(p), labels) == expected

    def test_labels_length_mismatch(self):
        with pytest.raises(DataError):
            apply_to_labels(P("123"), "AB")

    def test_enumerate_s3(self):
        group = enumerate_group(3)
        assert len(group) == 6
        assert str(group[0]) == "123"
        assert str(group[-1]) == "321"

    def test_enumerate_s5(self):
        group = enumerate_group(5)
        assert len(group) == 120
        assert len(set(group)) == 120

    def test_enumerate_guard(self):
        with pytest.raises(ConfigError):
            enumerate_group(9)

    def test_random_is_deterministic(self):
        a = random_permutation(np.random.default_rng(5), 6)
        b = random_permutation(np.random.default_rng(5), 6)
        assert a == b

    def test_random_degree_one(self):
        rng = np.random.default_rng(0)
        assert all(random_permutation(rng, 1).is_identity() for _ in range(10))

    def test_random_is_uniform(self):
        rng = np.random.default_rng(3)
        draws = 60000
        counts = Counter(random_permutation(rng, 3) for _ in range(draws))
        expected = draws / 6
        sigma = np.sqrt(draws * (1 / 6) * (5 / 6))
        assert len(counts) == 6
        assert all(abs(c - expected) < 3 * sigma for c in counts.values())


class TestGroupTable:
    """Тесты таблицы умножения."""

    def test_product_matches_compose(self):
        table = group_table(3)
        for i, a in enumerate(table.elements):
            for j, b in enumerate(table.elements):
                assert table.elements[table.product[i, j]] == compose(a, b)

    def test_prefix_products(self):
        table = group_table(4)
        rng = np.random.default_rng(0)
        indices = rng.integers(0, len(table), size=(3, 10))
        states = table.prefix_products(indices)
        for row, state_row in zip(indices, states):
            expected = cumulative_states([table.elements[i] for i in row])
            assert [table.elements[s] for s in state_row] == expected
        np.testing.assert_array_equal(
            table.prefix_parities(indices), table.parities[states]
        )

    def test_degree_guard(self):
        with pytest.raises(ConfigError):
            group_table(7)
