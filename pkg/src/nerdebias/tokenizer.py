"""Greedy longest-match subword tokenization and word-to-subword label alignment."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from .corpus import OUTSIDE, Sentence, extract_spans
from .errors import ConfigError, FormatError

UNK = "[UNK]"
CONT = "##"


@dataclass(frozen=True)
class Vocab:
    pieces: tuple
    unk_piece: str = UNK
    lowercase: bool = False
    index: Dict[str, int] = field(init=False, repr=False, compare=False)
    max_piece_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if self.unk_piece not in pieces:
            raise ConfigError(f"vocabulary lacks the unknown piece {self.unk_piece!r}")
        for p in pieces:
            if not p or p == CONT:
                raise FormatError(f"illegal vocabulary piece {p!r}")
        index = {p: i for i, p in enumerate(pieces)}
        if len(index) != len(pieces):
            raise FormatError("duplicate pieces in vocabulary")
        object.__setattr__(self, "index", index)
        longest = max(len(p[2:]) if p.startswith(CONT) else len(p) for p in pieces)
        object.__setattr__(self, "max_piece_len", longest)

    def __len__(self):
        return len(self.pieces)

    def __contains__(self, piece):
        return piece in self.index

    @property
    def unk_id(self) -> int:
        return self.index[self.unk_piece]

    def ids(self, subwords: Iterable[str]) -> List[int]:
        unk = self.unk_id
        return [self.index.get(s, unk) for s in subwords]


def load_vocab(path, unk_piece: str = UNK, lowercase: bool = False) -> Vocab:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pieces = [ln.strip() for ln in lines if ln.strip()]
    if not pieces:
        raise FormatError(f"{path}: empty vocabulary file")
    seen = set()
    for p in pieces:
        if p in seen:
            raise FormatError(f"{path}: duplicate piece {p!r}")
        seen.add(p)
    return Vocab(tuple(pieces), unk_piece=unk_piece, lowercase=lowercase)


def vocab_checksum(vocab: Vocab) -> str:
    return hashlib.sha256("\n".join(vocab.pieces).encode("utf-8")).hexdigest()


def build_vocab(subwords: Iterable[str], unk_piece: str = UNK) -> Vocab:
    """Vocab from an explicit piece list, keeping first-seen order, unk first."""
    pieces = [unk_piece]
    seen = {unk_piece}
    for s in subwords:
        if s not in seen:
            seen.add(s)
            pieces.append(s)
    return Vocab(tuple(pieces), unk_piece=unk_piece)


def tokenize_word(word: str, vocab: Vocab) -> List[str]:
    if not word:
        raise ValueError("cannot tokenize an empty word")
    if vocab.lowercase:
        word = word.lower()
    out = []
    start = 0
    n = len(word)
    while start < n:
        end = min(n, start + vocab.max_piece_len)
        match = None
        while end > start:
            piece = word[start:end] if start == 0 else CONT + word[start:end]
            if piece in vocab.index:
                match = piece
                break
            end -= 1
        if match is None:
            return [vocab.unk_piece]
        out.append(match)
        start = end
    return out


def detokenize(subwords: Sequence[str]) -> str:
    return "".join(s[2:] if s.startswith(CONT) else s for s in subwords)


@dataclass(frozen=True)
class TokenizedSentence:
    subwords: tuple
    sub_tags: tuple
    word_index: tuple
    entity_len: tuple

    def __len__(self):
        return len(self.subwords)

    @property
    def n_words(self) -> int:
        return self.word_index[-1] + 1 if self.word_index else 0

    def first_subword_mask(self) -> List[bool]:
        prev = -1
        mask = []
        for w in self.word_index:
            mask.append(w != prev)
            prev = w
        return mask


def align_labels(sentence: Sentence, vocab: Vocab, length_unit: str = "words") -> TokenizedSentence:
    """Tokenize every word and project its tag onto each of its pieces.

    A ``B-<t>`` word keeps ``B-<t>`` on its first piece and gets ``I-<t>`` on the
    rest. ``entity_len`` counts words of the containing gold span (or pieces
    when ``length_unit='subwords'``).
    """
    if length_unit not in ("words", "subwords"):
        raise ConfigError(f"length_unit must be 'words' or 'subwords', got {length_unit!r}")
    subwords, sub_tags, word_index = [], [], []
    for wi, (word, tag) in enumerate(zip(sentence.words, sentence.tags)):
        pieces = tokenize_word(word, vocab)
        for k, piece in enumerate(pieces):
            subwords.append(piece)
            word_index.append(wi)
            if k > 0 and tag.startswith("B-"):
                sub_tags.append("I-" + tag[2:])
            else:
                sub_tags.append(tag)
    entity_len = [1] * len(subwords)
    spans = extract_spans(sentence.tags)
    if spans:
        word_len = [1] * len(sentence)
        for span in spans:
            if length_unit == "words":
                size = span.length
            else:
                size = sum(1 for w in word_index if span.start <= w <= span.end)
            for i in range(span.start, span.end + 1):
                word_len[i] = size
        entity_len = [word_len[w] for w in word_index]
    return TokenizedSentence(tuple(subwords), tuple(sub_tags), tuple(word_index), tuple(entity_len))


def tokenize_dataset(dataset: Iterable[Sentence], vocab: Vocab, length_unit: str = "words") -> List[TokenizedSentence]:
    return [align_labels(s, vocab, length_unit) for s in dataset]


def word_tags_from_subwords(sub_tags: Sequence[str], word_index: Sequence[int]) -> List[str]:
    """Word tag = tag predicted on the word's first piece."""
    n = word_index[-1] + 1 if word_index else 0
    tags = [OUTSIDE] * n
    prev = -1
    for tag, w in zip(sub_tags, word_index):
        if w != prev:
            tags[w] = tag
            prev = w
    return tags
