"""Training-dictionary partition of evaluation mentions into Mem/Unseen/Syn/Con."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from .corpus import EntitySpan, Sentence, sentence_spans
from .errors import FormatError

logger = logging.getLogger(__name__)

MEM, UNSEEN, SYN, CON = "Mem", "Unseen", "Syn", "Con"


def normalize_surface(surface: str, lowercase: bool = False) -> str:
    s = " ".join(surface.split())
    return s.lower() if lowercase else s


def load_cui_file(path, lowercase: bool = False) -> Dict[str, str]:
    """``surface<TAB>CUI`` per line; a surface listed twice must agree."""
    mapping: Dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 2 or not cells[0].strip() or not cells[1].strip():
            raise FormatError(f"{path}:{lineno}: expected 'surface<TAB>CUI'")
        surface, cui = normalize_surface(cells[0], lowercase), cells[1].strip()
        if mapping.get(surface, cui) != cui:
            raise FormatError(f"{path}:{lineno}: {surface!r} mapped to both {mapping[surface]} and {cui}")
        mapping[surface] = cui
    return mapping


@dataclass(frozen=True)
class PartitionDicts:
    entity_dict: frozenset
    concept_dict: frozenset
    cui_map: Optional[Dict[str, str]] = None
    typed: bool = True
    lowercase: bool = False

    @property
    def has_concepts(self) -> bool:
        return self.cui_map is not None

    def key(self, span: EntitySpan):
        surface = normalize_surface(span.surface, self.lowercase)
        return (surface, span.etype) if self.typed else surface


@dataclass(frozen=True)
class LabeledMention:
    sentence: int
    span: EntitySpan
    label: str


class MentionPartition(list):
    """List of LabeledMention with count helpers."""

    def counts(self) -> Counter:
        return Counter(m.label for m in self)

    def labels(self) -> List[str]:
        return [SYN, CON] if any(m.label in (SYN, CON) for m in self) else [UNSEEN]

    def by_label(self, label: str) -> List[LabeledMention]:
        if label == UNSEEN:
            return [m for m in self if m.label in (UNSEEN, SYN, CON)]
        return [m for m in self if m.label == label]


def build_dicts(train: Iterable[Sentence], cui_map: Optional[Dict[str, str]] = None,
                typed: bool = True, lowercase: bool = False) -> PartitionDicts:
    entity = set()
    concepts = set()
    missing = 0
    proto = PartitionDicts(frozenset(), frozenset(), cui_map, typed, lowercase)
    for sent in train:
        for span in sentence_spans(sent):
            entity.add(proto.key(span))
            if cui_map is not None:
                cui = cui_map.get(normalize_surface(span.surface, lowercase))
                if cui is None:
                    missing += 1
                else:
                    concepts.add(cui)
    if missing:
        logger.info("%d training mentions have no CUI", missing)
    return PartitionDicts(frozenset(entity), frozenset(concepts), cui_map, typed, lowercase)


def classify(span: EntitySpan, dicts: PartitionDicts) -> str:
    if dicts.key(span) in dicts.entity_dict:
        return MEM
    if not dicts.has_concepts:
        return UNSEEN
    cui = dicts.cui_map.get(normalize_surface(span.surface, dicts.lowercase))
    # no CUI evidence counts as concept generalization
    return SYN if cui is not None and cui in dicts.concept_dict else CON


def partition_mentions(eval_set: Iterable[Sentence], dicts: PartitionDicts) -> MentionPartition:
    out = MentionPartition()
    for i, sent in enumerate(eval_set):
        for span in sentence_spans(sent):
            out.append(LabeledMention(i, span, classify(span, dicts)))
    return out


def partition_tsv(part: MentionPartition) -> str:
    lines = ["sentence\tstart\tend\ttype\tsurface\tpartition"]
    for m in part:
        s = m.span
        lines.append(f"{m.sentence}\t{s.start}\t{s.end}\t{s.etype}\t{s.surface}\t{m.label}")
    counts = part.counts()
    summary = ["partition\tcount"] + [f"{k}\t{counts[k]}" for k in (MEM, UNSEEN, SYN, CON) if counts[k]]
    return "\n".join(lines) + "\n", "\n".join(summary) + "\n"
