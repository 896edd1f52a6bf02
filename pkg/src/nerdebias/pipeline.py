"""End-to-end helpers: build the bias, train a tagger, decode and score."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from . import ensemble, tagger
from .bias import DEFAULT_K, build_bias
from .corpus import Sentence, dataset_checksum, extract_spans, repair_bio, sentence_spans, tag_set
from .ensemble import EnsembleConfig
from .evaluation import EvalReport, evaluate
from .partition import PartitionDicts, build_dicts, partition_mentions
from .tagger import TaggerConfig, TaggerModel
from .tokenizer import Vocab, align_labels, tokenize_dataset, word_tags_from_subwords


@dataclass(frozen=True)
class BiasSettings:
    kind: str = "pmi"
    k: float = DEFAULT_K
    smoothing: str = "joint"
    collapse: bool = False
    alpha: float = 1.0
    seed: int = 0


@dataclass
class FitResult:
    model: TaggerModel
    logs: list
    table: object = None
    optimizer: object = None
    stats: dict = field(default_factory=dict)


def make_table(train: Sequence[Sentence], vocab: Vocab, classes, settings: BiasSettings, length_unit: str = "words"):
    tokenized = tokenize_dataset(train, vocab, length_unit)
    return build_bias(settings.kind, tokenized, train, classes, k=settings.k, smoothing=settings.smoothing,
                      seed=settings.seed, collapse=settings.collapse, alpha=settings.alpha,
                      checksum=dataset_checksum(train))


def fit(train: Sequence[Sentence], vocab: Vocab, tagger_cfg: TaggerConfig, ens: EnsembleConfig,
        bias: Optional[BiasSettings] = None, classes=None, table=None, model: Optional[TaggerModel] = None,
        start_epoch: int = 0, optimizer=None, on_epoch=None, record_time: bool = False) -> FitResult:
    classes = tuple(classes or tag_set(train))
    unit = ens.temperature.length_unit
    tokenized = tokenize_dataset(train, vocab, unit)
    if ens.mode != "none" and table is None:
        table = make_table(train, vocab, classes, bias or BiasSettings(), unit)
    stats: dict = {}
    examples = ensemble.prepare_examples(
        tokenized, vocab, classes, table if ens.mode != "none" else None, ens.temperature,
        words=[s.words for s in train], loss_positions=tagger_cfg.loss_positions, stats=stats)
    if model is None:
        model = tagger.init_model(tagger_cfg, vocab, classes)
    model, optimizer, logs = ensemble.train(model, examples, ens, start_epoch=start_epoch, optimizer=optimizer,
                                            on_epoch=on_epoch, record_time=record_time)
    return FitResult(model, logs, table, optimizer, stats)


def predict_tags(model: TaggerModel, vocab: Vocab, dataset: Sequence[Sentence], batch_size: int = 256) -> List[List[str]]:
    """Word-level BIO predictions (first-piece tag per word, then repaired)."""
    out = []
    for start in range(0, len(dataset), batch_size):
        chunk = dataset[start:start + batch_size]
        tok = [align_labels(s, vocab) for s in chunk]
        preds = tagger.predict(model, [vocab.ids(t.subwords) for t in tok])
        for t, p in zip(tok, preds):
            sub_tags = [model.classes[i] for i in p]
            out.append(repair_bio(word_tags_from_subwords(sub_tags, t.word_index)))
    return out


def score(train: Sequence[Sentence], test: Sequence[Sentence], pred_tags, cui_map=None, typed: bool = True,
          lowercase: bool = False, dicts: Optional[PartitionDicts] = None) -> EvalReport:
    dicts = dicts or build_dicts(train, cui_map, typed=typed, lowercase=lowercase)
    part = partition_mentions(test, dicts)
    gold = [sentence_spans(s) for s in test]
    pred = [extract_spans(t, s.words) for t, s in zip(pred_tags, test)]
    return evaluate(gold, pred, part)


def run_experiment(train, test, vocab, tagger_cfg, ens, bias=None, cui_map=None) -> EvalReport:
    res = fit(train, vocab, tagger_cfg, ens, bias)
    return score(train, test, predict_tags(res.model, vocab, test), cui_map)
