"""Seeded synthetic corpora for the desk-scale debiasing experiments.

``bias_injection_corpus`` builds the out-of-vocabulary trap: test-only entity
words are glued from a piece that training shows almost only as an ordinary O
word (``late``) plus a known entity suffix (``##son``). A small share of
training mentions uses the same construction, so the bias is wrong on a few
training examples. Every mention is preceded by a type trigger in both splits;
a spurious cue word follows PER mentions in training only.

``long_entity_corpus`` mixes entity lengths 1..10 whose long members carry
internal ``-`` / ``and`` / ``of`` words that are O everywhere else, and whose
heads come from their own stem pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .corpus import Sentence
from .tokenizer import UNK

FILLERS = ("the", "of", "was", "to", "for", "with", "on", "by", "from", "this",
           "that", "has", "had", "were", "been", "after", "before", "its", "a", "is",
           "are", "into", "over", "under", "while", "when", "where", "which", "who", "but")
O_STEMS = ("late", "gold", "rock", "mill", "stone", "hill", "brook", "wood",
           "field", "ash", "fair", "green", "north", "west", "long", "black")
ENTITY_STEMS = ("kal", "mor", "vex", "dun", "zar", "quil", "jor", "bex", "tav", "ruk",
                "pim", "sol", "yev", "nok", "fer", "gid", "hux", "lom", "wen", "cas")
SUFFIXES = {"PER": ("##son", "##ova", "##sky"), "LOC": ("##burg", "##ville", "##stan")}
TRIGGERS = {"PER": ("mr", "dr"), "LOC": ("near", "at")}
SPURIOUS = "said"
JOINERS = ("-", "and", "of")

# Run settings frozen with each generator; the directional acceptance checks
# use exactly these (tuned once on data seed 0).
BIAS_INJECTION_RUN = {"mode": "bias_product", "bias_kind": "pmi", "k": 2.0, "decoder": "softmax",
                      "learning_rate": 3e-3, "epochs": 5, "seeds": (1, 2, 3, 4, 5)}
LONG_ENTITY_RUN = {"mode": "bias_product", "bias_kind": "pmi", "k": 10.0, "decoder": "crf",
                   "learning_rate": 3e-3, "epochs": 5, "lam": 0.05, "seeds": (1, 2, 3, 4, 5)}
LONG_STEMS = ("pro", "ket", "lys", "gly", "ser", "thr", "val", "leu", "asp", "tyr")


@dataclass
class SyntheticCorpus:
    train: List[Sentence]
    test: List[Sentence]
    pieces: List[str]
    cui_map: Dict[str, str] = field(default_factory=dict)

    def vocab_text(self) -> str:
        return "\n".join(self.pieces) + "\n"

    def cui_text(self) -> str:
        return "".join(f"{s}\t{c}\n" for s, c in sorted(self.cui_map.items()))


@dataclass(frozen=True)
class BiasInjectionConfig:
    n_train: int = 2000
    n_test: int = 500
    seed: int = 0
    unseen_fraction: float = 0.5  # share of test mentions built as OOV traps
    trigger_prob: float = 1.0
    spurious_train_prob: float = 0.9
    spurious_test_prob: float = 0.05
    mentions_per_sentence: tuple = (1, 2)
    fillers_per_gap: tuple = (1, 4)
    o_stem_rate: float = 0.35  # chance a filler slot is an O stem
    entity_words: tuple = (1, 2)
    train_trap_rate: float = 0.0075  # rare O-stem-headed training mentions, the hard examples


def _pieces_for(word_pieces):
    return word_pieces[0] + "".join(p[2:] for p in word_pieces[1:])


def bias_injection_corpus(cfg: BiasInjectionConfig = BiasInjectionConfig()) -> SyntheticCorpus:
    rng = np.random.default_rng(cfg.seed)
    types = ("PER", "LOC")
    half = len(ENTITY_STEMS) // 2
    stems = {"PER": ENTITY_STEMS[:half], "LOC": ENTITY_STEMS[half:]}

    def entity_word(etype, trap):
        stem = rng.choice(O_STEMS) if trap else rng.choice(stems[etype])
        return str(stem) + str(rng.choice(SUFFIXES[etype]))[2:]

    def filler():
        if rng.random() < cfg.o_stem_rate:
            return str(rng.choice(O_STEMS))
        return str(rng.choice(FILLERS))

    # training lexicon of fixed surfaces, so test Mem mentions reuse them
    lexicon = {t: sorted({" ".join(entity_word(t, False) for _ in range(int(rng.integers(cfg.entity_words[0], cfg.entity_words[1] + 1))))
                          for _ in range(60)}) for t in types}
    train_surfaces = {t: set(lexicon[t]) for t in types}

    def sentence(test: bool):
        words, tags = [], []
        n_m = int(rng.integers(cfg.mentions_per_sentence[0], cfg.mentions_per_sentence[1] + 1))
        for _ in range(n_m):
            for _ in range(int(rng.integers(cfg.fillers_per_gap[0], cfg.fillers_per_gap[1] + 1))):
                words.append(filler())
                tags.append("O")
            etype = types[int(rng.integers(2))]
            if rng.random() < cfg.trigger_prob:
                words.append(str(rng.choice(TRIGGERS[etype])))
                tags.append("O")
            if test and rng.random() < cfg.unseen_fraction:
                while True:
                    n_w = int(rng.integers(cfg.entity_words[0], cfg.entity_words[1] + 1))
                    surface = " ".join(entity_word(etype, True) for _ in range(n_w))
                    if surface not in train_surfaces[etype]:
                        break
            elif not test and rng.random() < cfg.train_trap_rate:
                n_w = int(rng.integers(cfg.entity_words[0], cfg.entity_words[1] + 1))
                surface = " ".join(entity_word(etype, True) for _ in range(n_w))
                train_surfaces[etype].add(surface)
            else:
                surface = str(rng.choice(lexicon[etype]))
            for j, w in enumerate(surface.split()):
                words.append(w)
                tags.append(("B-" if j == 0 else "I-") + etype)
            p_spur = cfg.spurious_test_prob if test else cfg.spurious_train_prob
            if etype == "PER" and rng.random() < p_spur:
                words.append(SPURIOUS)
                tags.append("O")
            elif test and etype == "LOC" and rng.random() < p_spur:
                words.append(SPURIOUS)
                tags.append("O")
        for _ in range(int(rng.integers(0, 3))):
            words.append(filler())
            tags.append("O")
        return Sentence(words, tags)

    train = [sentence(False) for _ in range(cfg.n_train)]
    test = [sentence(True) for _ in range(cfg.n_test)]
    pieces = [UNK] + list(FILLERS) + list(O_STEMS) + list(ENTITY_STEMS) + [SPURIOUS]
    pieces += [t for ts in TRIGGERS.values() for t in ts]
    pieces += [s for ss in SUFFIXES.values() for s in ss]
    return SyntheticCorpus(train, test, _dedup(pieces))


@dataclass(frozen=True)
class LongEntityConfig:
    n_train: int = 2000
    n_test: int = 500
    seed: int = 0
    max_len: int = 10
    joiner_rate: float = 0.4  # chance an interior slot holds a joiner word
    trigger_prob: float = 1.0
    long_from: Optional[int] = 5  # entities this long draw heads from LONG_STEMS; None = shared pool


def long_entity_corpus(cfg: LongEntityConfig = LongEntityConfig()) -> SyntheticCorpus:
    rng = np.random.default_rng(cfg.seed)
    etype = "GENE"
    heads = ENTITY_STEMS
    suffixes = ("##ase", "##in", "##or")

    def entity(length):
        words = []
        pool = LONG_STEMS if cfg.long_from is not None and length >= cfg.long_from else heads
        for j in range(length):
            interior = 0 < j < length - 1
            if interior and words[-1] not in JOINERS and rng.random() < cfg.joiner_rate:
                words.append(str(rng.choice(JOINERS)))
            else:
                words.append(str(rng.choice(pool)) + str(rng.choice(suffixes))[2:])
        return words

    def sentence():
        words, tags = [], []
        for _ in range(int(rng.integers(1, 3))):
            for _ in range(int(rng.integers(1, 4))):
                w = str(rng.choice(FILLERS + JOINERS[1:]))
                words.append(w)
                tags.append("O")
            if rng.random() < cfg.trigger_prob:
                words.append("gene")
                tags.append("O")
            length = int(rng.integers(1, cfg.max_len + 1))
            for j, w in enumerate(entity(length)):
                words.append(w)
                tags.append(("B-" if j == 0 else "I-") + etype)
        words.append(str(rng.choice(FILLERS)))
        tags.append("O")
        return Sentence(words, tags)

    train = [sentence() for _ in range(cfg.n_train)]
    test = [sentence() for _ in range(cfg.n_test)]
    pieces = [UNK] + list(FILLERS) + list(JOINERS) + ["gene"] + list(heads) + list(LONG_STEMS) + list(suffixes)
    return SyntheticCorpus(train, test, _dedup(pieces))


def _dedup(xs):
    seen = set()
    out = []
    for x in xs:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out
