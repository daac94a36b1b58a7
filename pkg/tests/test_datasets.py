"""
Тесты генерации и сериализации корпусов.
"""

import numpy as np
import pytest

from state_tracking.core.errors import ConfigError, DataError
from state_tracking.core.permutations import (
    Permutation,
    apply_to_labels,
    cumulative_states,
    inverse,
    random_permutation,
    state_parities,
)
from state_tracking.datasets import (
    Corpus,
    CorpusMode,
    Document,
    Vocab,
    deserialize_corpus,
    gen_natural_language_corpus,
    gen_topic_corpus,
    gen_uniform_corpus,
    gen_word_corpus,
    parity_targets,
    serialize_corpus,
    split_corpus,
    topic_preset,
)
from state_tracking.datasets.natural_language import (
    DEFAULT_PHRASES,
    natural_language_vocab,
    parse_natural_language,
    render_natural_language,
)
from state_tracking.datasets.topic_model import TopicModelParams, available_presets


def P(text: str) -> Permutation:
    return Permutation.from_string(text)


class TestVocab:
    """Тесты словаря."""

    def test_group_layout(self, s3_vocab):
        assert s3_vocab.tokens[:6] == ["123", "132", "213", "231", "312", "321"]
        assert s3_vocab.tokens[6:] == ["0", "1"]
        assert s3_vocab.state_token_ids == list(range(6))

    def test_duplicate_token(self):
        with pytest.raises(DataError):
            Vocab(tokens=["123", "123"], group_degree=3)

    def test_group_index_array(self):
        vocab = natural_language_vocab()
        mapping = vocab.group_index_array()
        assert mapping[:6].tolist() == list(range(6))
        assert (mapping[6:] == -1).all()

    def test_natural_language_vocab_extends_group_vocab(self, s3_vocab):
        vocab = natural_language_vocab()
        assert vocab.tokens[: len(s3_vocab)] == s3_vocab.tokens
        assert "Swap" in vocab and "." in vocab


class TestWordCorpus:
    """Тесты gen_word_corpus и split_corpus."""

    def test_deterministic(self, tmp_path):
        a = serialize_corpus(gen_word_corpus(3, 10, 4, seed=7), tmp_path / "a.txt")
        b = serialize_corpus(gen_word_corpus(3, 10, 4, seed=7), tmp_path / "b.txt")
        assert a.read_bytes() == b.read_bytes()

    def test_targets_are_states(self):
        corpus = gen_word_corpus(4, 200, 12, seed=1)
        for actions, doc in zip(corpus.action_sequences(), corpus):
            expected = cumulative_states(actions)
            assert [corpus.vocab.permutation_of(t) for t in doc.target_ids] == expected

    def test_unique(self):
        corpus = gen_word_corpus(3, 500, 5, seed=2)
        assert len({tuple(d.input_ids) for d in corpus}) == 500

    def test_single_action_documents(self):
        corpus = gen_word_corpus(3, 2, 1, seed=0)
        assert len(corpus) == 2
        assert corpus[0].input_ids != corpus[1].input_ids

    def test_infeasible_uniqueness(self):
        with pytest.raises(DataError):
            gen_word_corpus(3, 7, 1, seed=0)

    def test_split_sizes(self):
        corpus = gen_word_corpus(3, 100, 4, seed=0)
        train, held_out = split_corpus(corpus, 0.9, seed=0)
        assert (len(train), len(held_out)) == (90, 10)

    def test_split_is_partition(self):
        corpus = gen_word_corpus(3, 10, 4, seed=0)
        train, held_out = split_corpus(corpus, 0.5, seed=3)
        assert (len(train), len(held_out)) == (5, 5)
        union = {tuple(d.input_ids) for d in [*train, *held_out]}
        assert union == {tuple(d.input_ids) for d in corpus}

    def test_split_deterministic(self):
        corpus = gen_word_corpus(3, 50, 4, seed=0)
        a, _ = split_corpus(corpus, 0.8, seed=4)
        b, _ = split_corpus(corpus, 0.8, seed=4)
        assert [d.input_ids for d in a] == [d.input_ids for d in b]

    def test_split_empty_side(self):
        corpus = gen_word_corpus(3, 3, 4, seed=0)
        with pytest.raises(DataError):
            split_corpus(corpus, 0.1)

    def test_truncate(self):
        corpus = gen_word_corpus(3, 5, 10, seed=0).truncate(4)
        assert all(len(d) == 4 for d in corpus)
        assert corpus.metadata["max_length"] == 4


class TestOtherCorpora:
    """Тесты parity_targets, uniform, topic и natural-language корпусов."""

    def test_parity_targets_two_swaps(self, s3_vocab):
        ids = s3_vocab.encode(["213", "213"])
        corpus = Corpus(
            [Document(ids, ids, CorpusMode.STATE_PREDICTION)],
            s3_vocab,
            CorpusMode.STATE_PREDICTION,
        )
        doc = parity_targets(corpus)[0]
        assert s3_vocab.decode(doc.target_ids) == ["1", "0"]

    def test_parity_targets_random(self):
        corpus = gen_word_corpus(3, 20, 15, seed=5)
        parity = parity_targets(corpus)
        assert parity.mode == CorpusMode.PARITY
        for actions, doc in zip(corpus.action_sequences(), parity):
            expected = [str(int(p)) for p in state_parities(actions)]
            assert corpus.vocab.decode(doc.target_ids) == expected

    def test_parity_targets_wrong_mode(self):
        with pytest.raises(DataError):
            parity_targets(gen_uniform_corpus(3, 2, 4, seed=0))

    def test_uniform_frequencies(self):
        corpus = gen_uniform_corpus(3, 1000, 60, seed=1)
        tokens = np.concatenate([d.input_ids for d in corpus])
        counts = np.bincount(tokens, minlength=6)[:6]
        sigma = np.sqrt(tokens.size * (1 / 6) * (5 / 6))
        assert np.all(np.abs(counts - tokens.size / 6) < 3 * sigma)

    def test_uniform_length_one_has_no_targets(self):
        corpus = gen_uniform_corpus(3, 3, 1, seed=0)
        assert all(d.targeted_positions() == [] for d in corpus)

    def test_topic_preset_verbatim(self):
        params = topic_preset("appG1")
        assert params.token_topic.shape == (4, 6)
        weight = params.token_topic[0, params.tokens.index("321")]
        assert weight == pytest.approx(8.45e-1)
        assert set(available_presets()) == {"appG1", "appG2"}

    @pytest.mark.parametrize("name", ["appG1", "appG2"])
    def test_preset_rows_sum_to_one(self, name):
        sums = topic_preset(name).token_topic.sum(axis=1)
        assert np.all(np.abs(sums - 1) <= 1e-3)

    def test_degenerate_topic_model(self, s3_vocab):
        matrix = np.zeros((1, 6))
        matrix[0, 2] = 1.0
        params = TopicModelParams(alpha=0.3, token_topic=matrix)
        corpus = gen_topic_corpus(params, 5, 8, seed=0)
        for doc in corpus:
            assert s3_vocab.decode(doc.input_ids) == ["213"] * 8

    def test_topic_marginal(self):
        params = topic_preset("appG1")
        corpus = gen_topic_corpus(params, 2000, 25, seed=3)
        tokens = np.concatenate([d.input_ids for d in corpus])
        freq = np.bincount(tokens, minlength=6)[:6] / tokens.size
        # документы коррелированы через смесь тем, поэтому допуск шире биномиального
        assert np.allclose(freq, params.marginal(), atol=0.05)

    def test_invalid_topic_params(self):
        with pytest.raises(DataError):
            TopicModelParams(alpha=0.3, token_topic=np.full((2, 6), 0.5))

    def test_render_example(self):
        vocab = natural_language_vocab()
        doc = render_natural_language([P("132"), P("312"), P("213")])
        words = vocab.decode(doc.input_ids)
        assert " ".join(words) == (
            "Swap positions 2 and 3 . "
            "Rotate the last item to the front . "
            "Swap positions 1 and 2 ."
        )
        targets = [vocab.id_to_token(t) for t in doc.target_ids if t is not None]
        assert targets == ["132", "213", "123"]
        assert doc.targeted_positions() == [i for i, w in enumerate(words) if w == "."]

    @pytest.mark.parametrize("token,arrangement", [
        ("132", "ACB"),
        ("312", "CAB"),
        ("213", "BAC"),
        ("321", "CBA"),
        ("231", "BCA"),
        ("123", "ABC"),
    ])
    def test_phrase_matches_token(self, token, arrangement):
        # фраза описывает расстановку токена, а apply_to_labels ждёт массив назначений
        assert apply_to_labels(inverse(P(token)), "ABC") == arrangement

    def test_targets_follow_shuffled_labels(self):
        rng = np.random.default_rng(4)
        vocab = natural_language_vocab()
        for _ in range(20):
            tokens = [str(random_permutation(rng, 3)) for _ in range(6)]
            doc = render_natural_language([P(t) for t in tokens])
            targets = [vocab.id_to_token(t) for t in doc.target_ids if t is not None]
            labels = "ABC"
            for token, target in zip(tokens, targets):
                labels = "".join(labels[int(c) - 1] for c in token)
                assert "".join("ABC"[int(c) - 1] for c in target) == labels

    def test_render_single_action(self):
        vocab = natural_language_vocab()
        doc = render_natural_language([P("132")])
        assert vocab.id_to_token(doc.target_ids[-1]) == "132"

    def test_parse_roundtrip(self):
        vocab = natural_language_vocab()
        corpus = gen_natural_language_corpus(20, 6, seed=0)
        base = gen_word_corpus(3, 20, 6, seed=0)
        for doc, actions in zip(corpus, base.action_sequences()):
            assert parse_natural_language(vocab.decode(doc.input_ids)) == actions

    def test_incomplete_phrase_map(self):
        phrases = dict(DEFAULT_PHRASES)
        del phrases["123"]
        with pytest.raises(ConfigError):
            gen_natural_language_corpus(2, 3, seed=0, phrase_map=phrases)


class TestSerialization:
    """Тесты текстового формата корпуса."""

    @pytest.mark.parametrize("make", [
        lambda: gen_word_corpus(3, 20, 6, seed=0),
        lambda: gen_uniform_corpus(5, 5, 7, seed=0),
        lambda: parity_targets(gen_word_corpus(4, 5, 3, seed=0)),
        lambda: gen_natural_language_corpus(4, 3, seed=0),
    ])
    def test_roundtrip(self, tmp_path, make):
        corpus = make()
        restored = deserialize_corpus(serialize_corpus(corpus, tmp_path / "c.txt"))
        assert restored.mode == corpus.mode
        assert restored.vocab.tokens == corpus.vocab.tokens
        assert restored.vocab.group_degree == corpus.vocab.group_degree
        assert [(d.input_ids, d.target_ids) for d in restored] == [
            (d.input_ids, d.target_ids) for d in corpus
        ]

    def test_corrupted_line_reports_number(self, tmp_path):
        path = serialize_corpus(gen_word_corpus(3, 3, 4, seed=0), tmp_path / "c.txt")
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[4] = "123 999 | 0:123"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(DataError) as info:
            deserialize_corpus(path)
        assert info.value.line == 5
        assert "line 5" in str(info.value)

    def test_header_only_file(self, tmp_path, s3_vocab):
        path = tmp_path / "empty.txt"
        path.write_text(
            f"#vocab: {' '.join(s3_vocab.tokens)}\n#mode: state-prediction\n",
            encoding="utf-8",
        )
        corpus = deserialize_corpus(path)
        assert len(corpus) == 0
        assert corpus.vocab.tokens == s3_vocab.tokens

    def test_empty_file(self, tmp_path):
        path = tmp_path / "nothing.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataError):
            deserialize_corpus(path)
