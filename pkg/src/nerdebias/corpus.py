"""CoNLL column-format I/O, BIO validation/repair and corpus statistics.

The reader takes the first column as the word and the last column as the tag,
so two-column BioNER files and four-column CoNLL-2003 files share one path.
"""

from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from .errors import FormatError, ParseError, TagError

logger = logging.getLogger(__name__)

DOCSTART = "-DOCSTART-"
OUTSIDE = "O"

_TAG_RE = re.compile(r"^(?:O|[BI]-\S+)$")


@dataclass(frozen=True)
class Sentence:
    words: tuple
    tags: tuple

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.words) != len(self.tags):
            raise ValueError(
                f"sentence has {len(self.words)} words but {len(self.tags)} tags"
            )
        if not self.words:
            raise ValueError("empty sentence")
        for tag in self.tags:
            if not is_valid_tag(tag):
                raise TagError(f"unknown tag shape {tag!r}")

    def __len__(self):
        return len(self.words)


Dataset = List[Sentence]


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int  # inclusive
    etype: str
    surface: str = ""

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def key(self) -> tuple:
        return (self.start, self.end, self.etype)


@dataclass(frozen=True)
class CorpusStats:
    sentence_count: int
    positive_count: int
    negative_count: int
    ratio: float

    def to_tsv(self) -> str:
        ratio = "inf" if math.isinf(self.ratio) else f"{self.ratio:.6f}"
        return (
            "sentences\tpositive\tnegative\tratio\n"
            f"{self.sentence_count}\t{self.positive_count}\t{self.negative_count}\t{ratio}\n"
        )


def is_valid_tag(tag: str) -> bool:
    return bool(_TAG_RE.match(tag))


def split_tag(tag: str):
    """``'B-PER' -> ('B', 'PER')``, ``'O' -> ('O', None)``."""
    if tag == OUTSIDE:
        return OUTSIDE, None
    return tag[0], tag[2:]


# ---------------------------------------------------------------------------
# parsing / serialization


def parse_conll(text: str, path=None) -> Dataset:
    """Parse CoNLL text into sentences; tags are kept exactly as written."""
    sentences: Dataset = []
    words: list = []
    tags: list = []

    def flush():
        if words:
            sentences.append(Sentence(words, tags))
        words.clear()
        tags.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            flush()
            continue
        cols = line.split()
        if cols[0] == DOCSTART:
            flush()
            continue
        if len(cols) < 2:
            raise ParseError(
                f"expected at least 2 columns, got {len(cols)}", line=lineno, path=path
            )
        tag = cols[-1]
        if not is_valid_tag(tag):
            raise TagError(f"unknown tag shape {tag!r}", line=lineno, path=path)
        words.append(cols[0])
        tags.append(tag)
    flush()
    return sentences


def serialize_conll(dataset: Iterable[Sentence]) -> str:
    blocks = [
        "".join(f"{w} {t}\n" for w, t in zip(sent.words, sent.tags)) for sent in dataset
    ]
    return "\n".join(blocks)


def read_conll(path, repair: bool = True, max_len: Optional[int] = None) -> Dataset:
    path = Path(path)
    dataset = parse_conll(path.read_text(encoding="utf-8"), path=str(path))
    if repair:
        dataset, n_fixed = repair_dataset(dataset)
        if n_fixed:
            logger.info("%s: repaired %d dangling I- tags", path, n_fixed)
    if max_len is not None:
        dataset = split_long_sentences(dataset, max_len)
    return dataset


def write_conll(dataset: Iterable[Sentence], path) -> None:
    Path(path).write_text(serialize_conll(dataset), encoding="utf-8", newline="\n")


def dataset_checksum(dataset: Iterable[Sentence]) -> str:
    return hashlib.sha256(serialize_conll(dataset).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# BIO handling


def validate_bio(tags: Sequence[str]) -> List[int]:
    """Indices of ``I-<t>`` tags not preceded by ``B-<t>`` or ``I-<t>``."""
    violations = []
    prev = OUTSIDE
    for i, tag in enumerate(tags):
        if tag.startswith("I-") and (prev == OUTSIDE or prev[2:] != tag[2:]):
            violations.append(i)
        prev = tag
    return violations


def repair_bio(tags: Sequence[str]) -> List[str]:
    """Turn every dangling ``I-<t>`` into ``B-<t>``."""
    out = list(tags)
    prev = OUTSIDE
    for i, tag in enumerate(out):
        if tag.startswith("I-") and (prev == OUTSIDE or prev[2:] != tag[2:]):
            out[i] = "B-" + tag[2:]
        prev = out[i]
    return out


def repair_dataset(dataset: Iterable[Sentence]):
    fixed = []
    n_fixed = 0
    for sent in dataset:
        tags = repair_bio(sent.tags)
        changed = sum(a != b for a, b in zip(tags, sent.tags))
        n_fixed += changed
        fixed.append(Sentence(sent.words, tags) if changed else sent)
    return fixed, n_fixed


def extract_spans(tags: Sequence[str], words: Optional[Sequence[str]] = None) -> List[EntitySpan]:
    """Maximal B-initiated runs of one type. A dangling I- opens a span."""
    spans = []
    start = None
    etype = None

    def close(end):
        surface = " ".join(words[start : end + 1]) if words is not None else ""
        spans.append(EntitySpan(start, end, etype, surface))

    for i, tag in enumerate(tags):
        prefix, t = split_tag(tag)
        if start is not None and (prefix != "I" or t != etype):
            close(i - 1)
            start = None
        if prefix != OUTSIDE and start is None:
            start, etype = i, t
    if start is not None:
        close(len(tags) - 1)
    return spans


def sentence_spans(sent: Sentence) -> List[EntitySpan]:
    return extract_spans(sent.tags, sent.words)


def entity_lengths(tags: Sequence[str]) -> List[int]:
    """Per word: word count of the gold span containing it, 1 outside spans."""
    lengths = [1] * len(tags)
    for span in extract_spans(tags):
        for i in range(span.start, span.end + 1):
            lengths[i] = span.length
    return lengths


def split_long_sentences(dataset: Iterable[Sentence], max_len: int) -> Dataset:
    """Cut sentences longer than ``max_len`` words without bisecting entities.

    A cut that would land on an ``I-`` tag is moved left to the first word of
    the straddling entity; a window with no legal cut raises FormatError.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    out: Dataset = []
    for sent in dataset:
        start = 0
        n = len(sent)
        while n - start > max_len:
            cut = start + max_len
            while cut > start and sent.tags[cut].startswith("I-"):
                cut -= 1
            if cut == start:
                raise FormatError(
                    f"cannot split sentence of length {n}: entity longer than max_len={max_len}"
                )
            out.append(Sentence(sent.words[start:cut], sent.tags[start:cut]))
            start = cut
        out.append(Sentence(sent.words[start:], sent.tags[start:]) if start else sent)
    return out


def corpus_stats(dataset: Iterable[Sentence]) -> CorpusStats:
    n_sent = pos = neg = 0
    for sent in dataset:
        n_sent += 1
        for tag in sent.tags:
            if tag == OUTSIDE:
                neg += 1
            else:
                pos += 1
    ratio = neg / pos if pos else math.inf
    return CorpusStats(n_sent, pos, neg, ratio)


def tag_set(dataset: Iterable[Sentence]) -> List[str]:
    """Full BIO class list in canonical order: B-/I- per sorted type, then O."""
    types = sorted({split_tag(t)[1] for s in dataset for t in s.tags if t != OUTSIDE})
    classes = []
    for t in types:
        classes += [f"B-{t}", f"I-{t}"]
    return classes + [OUTSIDE]
