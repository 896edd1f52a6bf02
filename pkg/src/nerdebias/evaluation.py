"""Entity-level scoring: micro P/R/F1, partition recall, surface forms, length buckets.

Gold and predictions are given per sentence as lists of EntitySpan; a
prediction counts only on an exact (start, end, type) match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .corpus import EntitySpan
from .partition import CON, MEM, SYN, UNSEEN, MentionPartition

MAX_BUCKET = 8


@dataclass(frozen=True)
class PRF:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def triple(self):
        return self.precision, self.recall, self.f1


def _keyset(spans: Sequence[EntitySpan]) -> set:
    return {s.key for s in spans}


def entity_prf(gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]]) -> PRF:
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        gs, ps = _keyset(g), _keyset(p)
        hit = len(gs & ps)
        tp += hit
        fp += len(ps) - hit
        fn += len(gs) - hit
    return PRF(tp, fp, fn)


def partition_recall(partition: MentionPartition, pred: Sequence[Sequence[EntitySpan]]) -> Dict[str, Optional[float]]:
    """Recall per mention set; an empty set maps to None (absent, not zero)."""
    pred_keys = [_keyset(p) for p in pred]
    hits: Dict[str, List[int]] = {k: [0, 0] for k in (MEM, UNSEEN, SYN, CON)}
    for m in partition:
        matched = m.span.key in pred_keys[m.sentence]
        labels = [m.label] if m.label in (MEM, UNSEEN) else [m.label, UNSEEN]
        for label in labels:
            hits[label][0] += matched
            hits[label][1] += 1
    return {k: (h / n if n else None) for k, (h, n) in hits.items()}


def partition_support(partition: MentionPartition) -> Dict[str, int]:
    counts = partition.counts()
    return {MEM: counts[MEM], UNSEEN: counts[UNSEEN] + counts[SYN] + counts[CON], SYN: counts[SYN], CON: counts[CON]}


def surface_form_prf(gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]]) -> PRF:
    """Set-based P/R/F1 over unique lowercased (surface, type) pairs."""
    gs = {(s.surface.lower(), s.etype) for sent in gold for s in sent}
    ps = {(s.surface.lower(), s.etype) for sent in pred for s in sent}
    hit = len(gs & ps)
    return PRF(hit, len(ps) - hit, len(gs) - hit)


def bucket_of(length: int, max_bucket: int = MAX_BUCKET) -> str:
    return f">={max_bucket}" if length >= max_bucket else str(length)


def bucket_names(max_bucket: int = MAX_BUCKET) -> List[str]:
    return [str(i) for i in range(1, max_bucket)] + [f">={max_bucket}"]


def length_bucketed_prf(gold, pred, max_bucket: int = MAX_BUCKET) -> Dict[str, PRF]:
    """Recall side bucketed by gold length, precision side by predicted length."""
    counts = {b: [0, 0, 0] for b in bucket_names(max_bucket)}  # tp, fp, fn
    for g, p in zip(gold, pred):
        gk, pk = _keyset(g), _keyset(p)
        for s in {x.key: x for x in g}.values():
            c = counts[bucket_of(s.length, max_bucket)]
            if s.key in pk:
                c[0] += 1
            else:
                c[2] += 1
        for s in {x.key: x for x in p}.values():
            if s.key not in gk:
                counts[bucket_of(s.length, max_bucket)][1] += 1
    return {b: PRF(*c) for b, c in counts.items()}


@dataclass
class EvalReport:
    total: PRF
    partition_recall: Dict[str, Optional[float]] = field(default_factory=dict)
    partition_support: Dict[str, int] = field(default_factory=dict)
    surface: Optional[PRF] = None
    length_buckets: Dict[str, PRF] = field(default_factory=dict)

    @property
    def precision(self):
        return self.total.precision

    @property
    def recall(self):
        return self.total.recall

    @property
    def f1(self):
        return self.total.f1

    def rows(self):
        """(section, key, metric, value, support) tuples in a fixed order."""
        out = []
        t = self.total
        out += [("total", "all", "precision", t.precision, t.tp + t.fp),
                ("total", "all", "recall", t.recall, t.tp + t.fn),
                ("total", "all", "f1", t.f1, t.tp + t.fn)]
        for k in (MEM, UNSEEN, SYN, CON):
            r = self.partition_recall.get(k)
            if r is not None:
                out.append(("partition", k, "recall", r, self.partition_support.get(k, 0)))
        if self.surface is not None:
            s = self.surface
            out += [("surface", "all", "precision", s.precision, s.tp + s.fp),
                    ("surface", "all", "recall", s.recall, s.tp + s.fn),
                    ("surface", "all", "f1", s.f1, s.tp + s.fn)]
        for b, prf in self.length_buckets.items():
            out += [("length", b, "precision", prf.precision, prf.tp + prf.fp),
                    ("length", b, "recall", prf.recall, prf.tp + prf.fn),
                    ("length", b, "f1", prf.f1, prf.tp + prf.fn)]
        return out

    def to_tsv(self) -> str:
        lines = ["section\tkey\tmetric\tvalue\tsupport"]
        lines += [f"{a}\t{b}\t{c}\t{v:.6f}\t{n}" for a, b, c, v, n in self.rows()]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        rows = [("section", "key", "metric", "value", "support")]
        rows += [(a, b, c, f"{100 * v:.2f}", str(n)) for a, b, c, v, n in self.rows()]
        widths = [max(len(r[i]) for r in rows) for i in range(5)]

        def fmt(r):
            return "| " + " | ".join(x.ljust(w) for x, w in zip(r, widths)) + " |"

        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        return "\n".join([fmt(rows[0]), sep] + [fmt(r) for r in rows[1:]]) + "\n"


def evaluate(gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]],
             partition: Optional[MentionPartition] = None, max_bucket: int = MAX_BUCKET) -> EvalReport:
    report = EvalReport(entity_prf(gold, pred))
    if partition is not None:
        report.partition_recall = partition_recall(partition, pred)
        report.partition_support = partition_support(partition)
    report.surface = surface_form_prf(gold, pred)
    report.length_buckets = length_bucketed_prf(gold, pred, max_bucket)
    return report
