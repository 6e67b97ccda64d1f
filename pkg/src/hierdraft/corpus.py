"""Word-level vocabulary and tokenized corpus handling.

Token ids are plain non-negative ints. Ids 0..2 are reserved control
tokens (UNK, EOS, SEP); corpus words get ids 3.. in first-occurrence
order, so vocabulary construction is deterministic for a fixed input
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

UNK = 0
EOS = 1
SEP = 2
NUM_RESERVED = 3


class Vocab:
    """Bijective word <-> id table. Reserved ids never collide with words."""

    def __init__(self, words: Iterable[str]):
        self._words: list[str] = list(words)
        self._ids: dict[str, int] = {}
        for i, word in enumerate(self._words):
            if word in self._ids:
                raise ValueError(f"duplicate word in vocab: {word!r}")
            self._ids[word] = NUM_RESERVED + i

    @property
    def size(self) -> int:
        return NUM_RESERVED + len(self._words)

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def id_of(self, word: str) -> int:
        return self._ids.get(word, UNK)

    def word_of(self, token: int) -> str:
        if token < 0 or token >= self.size:
            raise ValueError(f"unknown token id: {token}")
        if token == UNK:
            return "<unk>"
        if token in (EOS, SEP):
            return ""
        return self._words[token - NUM_RESERVED]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self._words == other._words

    def save(self, path: str | Path) -> None:
        # One word per line; line number + 3 is the id. Reserved ids are
        # implicit, so the file is self-describing.
        with open(path, "w", encoding="utf-8") as fh:
            for word in self._words:
                fh.write(word + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            words = [line.rstrip("\n") for line in fh]
        return cls([w for w in words if w])


def build_vocab(texts: Iterable[str]) -> Vocab:
    """Collect whitespace-delimited word types in first-occurrence order."""
    words: list[str] = []
    seen: set[str] = set()
    for text in texts:
        for word in text.split():
            if word not in seen:
                seen.add(word)
                words.append(word)
    if not words:
        raise ValueError("empty corpus")
    return Vocab(words)


def tokenize(text: str, vocab: Vocab) -> list[int]:
    """Map words to ids; out-of-vocabulary words become UNK. No EOS appended."""
    return [vocab.id_of(w) for w in text.split()]


def detokenize(tokens: Iterable[int], vocab: Vocab) -> str:
    """Space-join the words for the given ids. UNK renders as "<unk>", EOS as ""."""
    rendered = [vocab.word_of(t) for t in tokens]
    return " ".join(w for w in rendered if w)


@dataclass
class Corpus:
    """Tokenized documents plus the vocabulary that governs them.

    Every doc ends with EOS; docs never contain SEP (SEP is inserted only
    when documents are concatenated for suffix-array indexing).
    """

    docs: list[list[int]]
    vocab: Vocab

    @property
    def n_tokens(self) -> int:
        return sum(len(d) for d in self.docs)


def _read_text(path: str | Path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValueError(f"cannot read corpus file {path}: {exc}") from exc


def load_corpus(
    paths: Iterable[str | Path],
    *,
    vocab: Vocab | None = None,
    doc_per_line: bool = True,
) -> Corpus:
    """Read UTF-8 text files into a tokenized corpus, one EOS per document.

    With ``doc_per_line`` each non-empty line is a document; otherwise each
    file is a single document. When ``vocab`` is None a fresh vocabulary is
    built from the same texts.
    """
    doc_texts: list[str] = []
    for path in paths:
        text = _read_text(path)
        if doc_per_line:
            doc_texts.extend(line for line in text.splitlines() if line.strip())
        elif text.strip():
            doc_texts.append(text)
    if vocab is None:
        vocab = build_vocab(doc_texts)
    docs = [tokenize(t, vocab) + [EOS] for t in doc_texts]
    if not docs:
        raise ValueError("empty corpus")
    return Corpus(docs=docs, vocab=vocab)


def corpus_from_texts(texts: Iterable[str], *, vocab: Vocab | None = None) -> Corpus:
    """Build a corpus directly from in-memory document strings."""
    doc_texts = [t for t in texts if t.strip()]
    if vocab is None:
        vocab = build_vocab(doc_texts)
    docs = [tokenize(t, vocab) + [EOS] for t in doc_texts]
    if not docs:
        raise ValueError("empty corpus")
    return Corpus(docs=docs, vocab=vocab)
