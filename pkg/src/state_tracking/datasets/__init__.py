"""
Модули генерации и сериализации корпусов.

Компоненты:
- Vocab, Document, Corpus, CorpusMode: представление данных
- gen_word_corpus, split_corpus, gen_uniform_corpus, parity_targets: генераторы
- TopicModelParams, gen_topic_corpus: тематическая модель
- render_natural_language: вариант на естественном языке
"""

from .corpus import (
    Corpus,
    CorpusMode,
    Document,
    Vocab,
    deserialize_corpus,
    serialize_corpus,
)
from .generators import (
    gen_uniform_corpus,
    gen_word_corpus,
    parity_targets,
    split_corpus,
)
from .natural_language import (
    DEFAULT_PHRASES,
    arrangement_states,
    gen_natural_language_corpus,
    max_rendered_length,
    natural_language_vocab,
    parse_natural_language,
    render_natural_language,
)
from .topic_model import (
    TopicModelParams,
    gen_topic_corpus,
    random_topic_params,
    topic_preset,
)

__all__ = [
    "Corpus",
    "CorpusMode",
    "Document",
    "Vocab",
    "serialize_corpus",
    "deserialize_corpus",
    "gen_word_corpus",
    "split_corpus",
    "gen_uniform_corpus",
    "parity_targets",
    "DEFAULT_PHRASES",
    "render_natural_language",
    "parse_natural_language",
    "natural_language_vocab",
    "max_rendered_length",
    "arrangement_states",
    "gen_natural_language_corpus",
    "TopicModelParams",
    "topic_preset",
    "random_topic_params",
    "gen_topic_corpus",
]
