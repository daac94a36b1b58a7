"""
Словарь, документы и корпуса, а также их текстовая сериализация.

Формат файла корпуса (UTF-8, разделитель - пробел):

    #vocab: 123 132 213 231 312 321 0 1
    #mode: state-prediction
    #meta: {"generator": "word", "seed": 1}
    132 312 213 | 0:132 1:231 2:321

Справа от "|" перечислены пары позиция:токен для позиций, где берётся loss.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import DataError
from ..core.permutations import Parity, Permutation, enumerate_group

logger = logging.getLogger(__name__)

PARITY_TOKENS = ("0", "1")
FIELD_SEPARATOR = "|"


class CorpusMode(str, Enum):
    """Режим корпуса: какие цели стоят на позициях документа."""
    STATE_PREDICTION = "state-prediction"
    NEXT_TOKEN = "next-token"
    PARITY = "parity"
    NATURAL_LANGUAGE = "natural-language"


@dataclass
class Vocab:
    """
    Упорядоченный словарь токенов.

    В групповом режиме первые n! токенов - строки перестановок в порядке
    enumerate_group(n), так что id токена состояния совпадает с индексом
    элемента группы. Затем идут токены чётности и (опционально) слова.
    """

    tokens: List[str]
    group_degree: int

    _index: Dict[str, int] = field(init=False, repr=False, compare=False)
    _group: List[Optional[Permutation]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._index = {}
        for i, tok in enumerate(self.tokens):
            if tok in self._index:
                raise DataError(f"duplicate token in vocab: {tok!r}")
            if not tok or any(ch.isspace() for ch in tok) or tok == FIELD_SEPARATOR:
                raise DataError(f"invalid token in vocab: {tok!r}")
            self._index[tok] = i
        self._group = [self._as_permutation(tok) for tok in self.tokens]

    def _as_permutation(self, tok: str) -> Optional[Permutation]:
        if len(tok) != self.group_degree or not tok.isdigit():
            return None
        try:
            return Permutation.from_string(tok)
        except DataError:
            return None

    @classmethod
    def for_group(cls, n: int, words: Sequence[str] = ()) -> "Vocab":
        """
        Словарь для S_n: n! перестановок, "0", "1" и дополнительные слова.

        Args:
            n: Степень группы (n >= 2, иначе токены чётности совпадут с
                перестановками)
            words: Слова для режима естественного языка
        """
        if n < 2:
            raise DataError(f"group vocab needs degree >= 2, got {n}")
        tokens = [str(p) for p in enumerate_group(n)] + list(PARITY_TOKENS)
        # слово "1" из фразы совпадает с токеном чётности и не дублируется
        tokens += [w for w in dict.fromkeys(words) if w not in tokens]
        return cls(tokens=tokens, group_degree=n)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def token_to_id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise DataError(f"unknown token: {token!r}") from None

    def id_to_token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise DataError(f"token id out of range: {token_id}")
        return self.tokens[token_id]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.token_to_id(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.id_to_token(i) for i in ids]

    def permutation_of(self, token_id: int) -> Optional[Permutation]:
        """Перестановка, которую обозначает токен, или None."""
        if not 0 <= token_id < len(self._group):
            return None
        return self._group[token_id]

    def id_of_permutation(self, p: Permutation) -> int:
        return self.token_to_id(str(p))

    @property
    def state_token_ids(self) -> List[int]:
        """Id токенов-перестановок (в порядке enumerate_group)."""
        return [i for i, p in enumerate(self._group) if p is not None]

    @property
    def parity_token_ids(self) -> Tuple[int, int]:
        return self.token_to_id(PARITY_TOKENS[0]), self.token_to_id(PARITY_TOKENS[1])

    def parity_token_id(self, value: Parity) -> int:
        return self.parity_token_ids[int(value)]

    def group_index_array(self) -> np.ndarray:
        """Отображение id токена -> индекс элемента группы (-1 для прочих токенов)."""
        names = (str(p) for p in enumerate_group(self.group_degree))
        group_ids = {tok: i for i, tok in enumerate(names)}
        return np.array([group_ids.get(tok, -1) for tok in self.tokens], dtype=np.int64)


@dataclass
class Document:
    """Документ: входные токены и цели по позициям (None - loss не берётся)."""

    input_ids: List[int]
    target_ids: List[Optional[int]]
    mode: CorpusMode

    def __post_init__(self) -> None:
        if len(self.input_ids) == 0:
            raise DataError("document is empty")
        if len(self.target_ids) != len(self.input_ids):
            raise DataError(
                f"targets length {len(self.target_ids)} "
                f"!= inputs length {len(self.input_ids)}"
            )
        missing = any(t is None for t in self.target_ids)
        if self.mode == CorpusMode.STATE_PREDICTION and missing:
            raise DataError(
                "state-prediction documents need a target at every position"
            )

    def __len__(self) -> int:
        return len(self.input_ids)

    def targeted_positions(self) -> List[int]:
        return [i for i, t in enumerate(self.target_ids) if t is not None]

    def truncate(self, length: int) -> "Document":
        """Префикс документа; в next-token режиме последняя позиция теряет цель."""
        length = min(length, len(self))
        targets = list(self.target_ids[:length])
        if self.mode == CorpusMode.NEXT_TOKEN:
            targets[-1] = None
        return Document(list(self.input_ids[:length]), targets, self.mode)


@dataclass
class Corpus:
    """Набор документов с общим словарём, режимом и метаданными происхождения."""

    documents: List[Document]
    vocab: Vocab
    mode: CorpusMode
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for doc in self.documents:
            if doc.mode != self.mode:
                raise DataError(
                    f"document mode {doc.mode.value} != corpus mode {self.mode.value}"
                )

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, index: int) -> Document:
        return self.documents[index]

    def subset(self, indices: Sequence[int]) -> "Corpus":
        documents = [self.documents[i] for i in indices]
        return replace(self, documents=documents, metadata=dict(self.metadata))

    def truncate(self, max_length: int) -> "Corpus":
        """Обрезает все документы до max_length (length curriculum)."""
        if max_length < 1:
            raise DataError(f"max_length must be >= 1, got {max_length}")
        meta = dict(self.metadata, max_length=max_length)
        documents = [d.truncate(max_length) for d in self.documents]
        return replace(self, documents=documents, metadata=meta)

    def action_sequences(self) -> List[List[Permutation]]:
        """Входы документов как последовательности действий (word problem корпуса)."""
        sequences = []
        for doc in self.documents:
            actions = [self.vocab.permutation_of(i) for i in doc.input_ids]
            if any(a is None for a in actions):
                raise DataError("document contains non-permutation tokens")
            sequences.append(actions)
        return sequences

    def input_matrix(self) -> np.ndarray:
        """Входы одинаковой длины как матрица (documents, length)."""
        lengths = {len(d) for d in self.documents}
        if len(lengths) != 1:
            raise DataError(f"documents have different lengths: {sorted(lengths)[:5]}")
        return np.array([d.input_ids for d in self.documents], dtype=np.int64)


def serialize_corpus(corpus: Corpus, path: Path) -> Path:
    """
    Записывает корпус в текстовый формат (см. docstring модуля).

    Args:
        corpus: Корпус
        path: Путь к файлу

    Returns:
        Путь к записанному файлу
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(corpus.metadata, group_degree=corpus.vocab.group_degree)
    vocab = corpus.vocab
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#vocab: {' '.join(vocab.tokens)}\n")
        f.write(f"#mode: {corpus.mode.value}\n")
        f.write(f"#meta: {json.dumps(meta, sort_keys=True, ensure_ascii=False)}\n")
        for doc in corpus.documents:
            inputs = " ".join(vocab.tokens[i] for i in doc.input_ids)
            targets = " ".join(
                f"{pos}:{vocab.tokens[t]}"
                for pos, t in enumerate(doc.target_ids)
                if t is not None
            )
            f.write(f"{inputs} {FIELD_SEPARATOR} {targets}".rstrip() + "\n")
    logger.info(f"Корпус записан: {path} ({len(corpus)} документов)")
    return path


def deserialize_corpus(path: Path) -> Corpus:
    """
    Читает корпус из текстового формата.

    Raises:
        DataError: Файл пуст, отсутствуют заголовки или строка повреждена
            (номер строки указывается в сообщении)
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()

    if not lines:
        raise DataError(f"corpus file is empty (no header): {path}")

    headers: Dict[str, str] = {}
    body_start = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].partition(":")
        if not sep:
            raise DataError(f"malformed header: {line!r}", line=lineno)
        headers[key.strip()] = value.strip()
        body_start = lineno

    if "vocab" not in headers or "mode" not in headers:
        raise DataError("missing #vocab or #mode header", line=body_start + 1)

    try:
        meta = json.loads(headers.get("meta", "{}"))
        mode = CorpusMode(headers["mode"])
    except (json.JSONDecodeError, ValueError) as e:
        raise DataError(f"malformed header: {e}", line=body_start) from None

    degree = int(meta.pop("group_degree", 3))
    vocab = Vocab(tokens=headers["vocab"].split(), group_degree=degree)

    documents = []
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        if not line.strip():
            continue
        documents.append(_parse_document_line(line, vocab, mode, lineno))

    logger.info(f"Корпус прочитан: {path} ({len(documents)} документов)")
    return Corpus(documents=documents, vocab=vocab, mode=mode, metadata=meta)


def _parse_document_line(
    line: str, vocab: Vocab, mode: CorpusMode, lineno: int
) -> Document:
    inputs_text, sep, targets_text = line.partition(FIELD_SEPARATOR)
    if not sep:
        raise DataError(f"missing '{FIELD_SEPARATOR}' separator", line=lineno)
    try:
        input_ids = vocab.encode(inputs_text.split())
        target_ids: List[Optional[int]] = [None] * len(input_ids)
        for pair in targets_text.split():
            pos_text, colon, token = pair.partition(":")
            if not colon or not pos_text.isdigit():
                raise DataError(f"malformed target {pair!r}")
            pos = int(pos_text)
            if pos >= len(input_ids):
                raise DataError(
                    f"target position {pos} beyond document length {len(input_ids)}"
                )
            target_ids[pos] = vocab.token_to_id(token)
        return Document(input_ids, target_ids, mode)
    except DataError as e:
        raise DataError(str(e), line=lineno) from None
