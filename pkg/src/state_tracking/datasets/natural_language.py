"""
Вариант задачи на естественном языке (только S_3).

Каждое действие превращается в предложение ("Swap positions 2 and 3 ."),
токенизация - по пробелам. Цель (текущее состояние) ставится на каждую
точку; при обучении loss берётся только на этих позициях.

Токены здесь читаются как расстановка: "312" - предметы 3, 1, 2 по местам
(CAB из ABC). Это обратная перестановка к массиву назначений, с которым
работает apply_to_labels, поэтому действия обращаются перед накоплением
состояния, а состояние сообщается в той же расстановке.
"""

import logging
from typing import Dict, List, Optional, Sequence

from ..core.errors import ConfigError, DataError
from ..core.permutations import Permutation, cumulative_states, inverse
from .corpus import Corpus, CorpusMode, Document, Vocab
from .generators import gen_word_corpus

logger = logging.getLogger(__name__)

SENTENCE_END = "."

# Фразы для 132, 312 и 213 фиксированы, остальные три составлены в том же стиле
DEFAULT_PHRASES: Dict[str, str] = {
    "132": "Swap positions 2 and 3",
    "312": "Rotate the last item to the front",
    "213": "Swap positions 1 and 2",
    "321": "Swap positions 1 and 3",
    "231": "Rotate the first item to the back",
    "123": "Do nothing",
}


def arrangement_states(actions: Sequence[Permutation]) -> List[Permutation]:
    """
    Накопленные расстановки: [132, 312, 213] -> [132, 213, 123]
    (ABC -> ACB -> BAC -> ABC).
    """
    return [inverse(s) for s in cumulative_states([inverse(a) for a in actions])]


def phrase_words(phrase_map: Optional[Dict[str, str]] = None) -> List[str]:
    """Все слова фраз (отсортированы) плюс токен конца предложения."""
    phrase_map = phrase_map or DEFAULT_PHRASES
    words = sorted({w for phrase in phrase_map.values() for w in phrase.split()})
    return words + [SENTENCE_END]


def max_rendered_length(
    n_actions: int, phrase_map: Optional[Dict[str, str]] = None
) -> int:
    """Наибольшая длина в токенах документа из n_actions предложений."""
    phrase_map = phrase_map or DEFAULT_PHRASES
    longest = max(len(phrase.split()) + 1 for phrase in phrase_map.values())
    return n_actions * longest


def natural_language_vocab(phrase_map: Optional[Dict[str, str]] = None) -> Vocab:
    """Словарь S_3 с добавленными словами фраз."""
    return Vocab.for_group(3, words=phrase_words(phrase_map))


def _check_phrase_map(phrase_map: Dict[str, str]) -> None:
    phrases = list(phrase_map.values())
    if len(set(phrases)) != len(phrases):
        raise DataError("phrase map must be injective to be parsed back")


def render_natural_language(
    actions: Sequence[Permutation],
    phrase_map: Optional[Dict[str, str]] = None,
    vocab: Optional[Vocab] = None,
) -> Document:
    """
    Рендерит последовательность действий S_3 в документ на естественном языке.

    Args:
        actions: Действия (степень 3)
        phrase_map: Отображение строка перестановки -> фраза
        vocab: Словарь (по умолчанию natural_language_vocab(phrase_map))

    Returns:
        Документ; на каждой точке стоит токен текущего состояния
            (расстановки после всех действий до этой точки)

    Пример:
        [132, 312, 213] -> "Swap positions 2 and 3 . Rotate the last item to the front .
        Swap positions 1 and 2 ."
        с целью "123" на последней точке
    """
    phrase_map = phrase_map or DEFAULT_PHRASES
    _check_phrase_map(phrase_map)
    vocab = vocab or natural_language_vocab(phrase_map)

    states = arrangement_states(actions)
    input_ids: List[int] = []
    target_ids: List[Optional[int]] = []
    for action, state in zip(actions, states):
        phrase = phrase_map.get(str(action))
        if phrase is None:
            raise DataError(f"no phrase for action {action}")
        words = phrase.split() + [SENTENCE_END]
        input_ids.extend(vocab.encode(words))
        target_ids.extend([None] * (len(words) - 1))
        target_ids.append(vocab.id_of_permutation(state))

    return Document(
        input_ids=input_ids,
        target_ids=target_ids,
        mode=CorpusMode.NATURAL_LANGUAGE,
    )


def parse_natural_language(
    words: Sequence[str], phrase_map: Optional[Dict[str, str]] = None
) -> List[Permutation]:
    """Обратное отображение: слова документа -> последовательность действий."""
    phrase_map = phrase_map or DEFAULT_PHRASES
    _check_phrase_map(phrase_map)
    reverse = {
        phrase: Permutation.from_string(tok) for tok, phrase in phrase_map.items()
    }

    actions = []
    sentence: List[str] = []
    for word in words:
        if word != SENTENCE_END:
            sentence.append(word)
            continue
        phrase = " ".join(sentence)
        if phrase not in reverse:
            raise DataError(f"unknown phrase: {phrase!r}")
        actions.append(reverse[phrase])
        sentence = []
    if sentence:
        raise DataError(f"unterminated sentence: {' '.join(sentence)!r}")
    return actions


def gen_natural_language_corpus(
    count: int,
    length: int,
    seed: int,
    phrase_map: Optional[Dict[str, str]] = None,
) -> Corpus:
    """
    Корпус на естественном языке: уникальные последовательности S_3,
    отрендеренные фразами. Документы имеют разную длину в токенах.
    """
    phrase_map = phrase_map or DEFAULT_PHRASES
    if set(phrase_map) != set(DEFAULT_PHRASES):
        raise ConfigError("phrase map must cover all six S3 actions")

    vocab = natural_language_vocab(phrase_map)
    base = gen_word_corpus(3, count, length, seed)
    documents = [
        render_natural_language(actions, phrase_map, vocab)
        for actions in base.action_sequences()
    ]
    metadata = dict(base.metadata, generator="natural-language", phrases=phrase_map)
    return Corpus(
        documents=documents,
        vocab=vocab,
        mode=CorpusMode.NATURAL_LANGUAGE,
        metadata=metadata,
    )
