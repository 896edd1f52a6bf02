"""Bias-only models: subword/class PMI with add-K smoothing, plus baselines.

Every table maps a key (a subword piece, or a whole word for the word-frequency
baseline) to a row of class scores. A lookup turns the row into a probability
vector with a temperature-scaled softmax; unknown keys get the uniform vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .corpus import OUTSIDE, Sentence, split_tag
from .errors import ConfigError, FormatError
from .tokenizer import TokenizedSentence

DEFAULT_K = 100.0
KINDS = ("pmi", "word_freq", "uniform", "random")


@dataclass(frozen=True)
class TemperatureConfig:
    lam: float = 0.0
    length_unit: str = "words"

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be a finite number >= 0, got {self.lam}")
        if self.length_unit not in ("words", "subwords"):
            raise ConfigError(f"length_unit must be 'words' or 'subwords', got {self.length_unit!r}")


def collapse_class(tag: str) -> str:
    return split_tag(tag)[0]


class _Keyed:
    """Shared row-lookup plumbing for the table types."""

    keys: tuple
    classes: tuple

    def _build_index(self):
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(self.keys)})

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self._index

    @property
    def num_classes(self) -> int:
        return len(self.classes)


@dataclass(frozen=True, eq=False)
class CountTable(_Keyed):
    classes: tuple
    keys: tuple
    counts: np.ndarray  # S x C int64
    checksum: str = ""
    collapsed: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (len(self.keys), len(self.classes)):
            raise FormatError(f"count matrix shape {counts.shape} does not match table")
        if (counts < 0).any():
            raise FormatError("negative co-occurrence count")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        self._build_index()

    @property
    def joint(self) -> Dict[str, np.ndarray]:
        return {k: self.counts[i] for i, k in enumerate(self.keys)}

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row(self, key):
        return self.counts[self._index[key]]


@dataclass(frozen=True, eq=False)
class PmiTable(_Keyed):
    classes: tuple
    keys: tuple
    values: np.ndarray  # S x C natural-log PMI
    smoothing_k: float
    smoothing: str = "joint"
    counts: Optional[CountTable] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        self._build_index()

    @property
    def key_unit(self) -> str:
        return "subword"

    def scores(self, key) -> Optional[np.ndarray]:
        i = self._index.get(key)
        return None if i is None else self.values[i]

    def expand_to(self, classes: Sequence[str]) -> "PmiTable":
        """Map a collapsed B/I/O table onto full tags (each tag takes its prefix column)."""
        col = {c: i for i, c in enumerate(self.classes)}
        try:
            idx = [col[collapse_class(c)] for c in classes]
        except KeyError as exc:
            raise ConfigError(f"collapsed table has no column for {exc.args[0]!r}") from None
        return PmiTable(tuple(classes), self.keys, self.values[:, idx], self.smoothing_k, self.smoothing, self.counts)

    def to_bias_table(self) -> "BiasTable":
        dist = np.vstack([normalize(r, 1.0) for r in self.values]) if len(self) else np.zeros((0, self.num_classes))
        return BiasTable(self.classes, self.keys, dist, kind="pmi")


@dataclass(frozen=True, eq=False)
class BiasTable(_Keyed):
    classes: tuple
    keys: tuple
    dist: np.ndarray  # S x C probability rows
    kind: str = "pmi"
    key_unit: str = "subword"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown bias kind {self.kind!r}")
        dist = np.asarray(self.dist, dtype=np.float64).reshape(len(self.keys), len(self.classes))
        dist.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        self._build_index()

    def scores(self, key) -> Optional[np.ndarray]:
        # log-probabilities: softmax(log(d)/T) == softmax(PMI/T) for PMI-derived rows
        i = self._index.get(key)
        if i is None:
            return None
        with np.errstate(divide="ignore"):
            return np.log(self.dist[i])


# ---------------------------------------------------------------------------
# counting and PMI


def count_cooccurrence(
    corpus: Sequence[TokenizedSentence],
    classes: Optional[Sequence[str]] = None,
    collapse: bool = False,
    checksum: str = "",
) -> CountTable:
    """n(s, c): number of subword positions with piece s and tag c."""
    if not corpus:
        raise ValueError("cannot count co-occurrences over an empty corpus")
    if classes is None:
        seen = sorted({t for ts in corpus for t in ts.sub_tags})
        if collapse:
            classes = [c for c in ("B", "I", "O") if c in {collapse_class(t) for t in seen}]
        else:
            types = sorted({split_tag(t)[1] for t in seen if t != OUTSIDE})
            classes = [p + t for t in types for p in ("B-", "I-")] + [OUTSIDE]
    classes = tuple(classes)
    cidx = {c: i for i, c in enumerate(classes)}
    kidx: Dict[str, int] = {}
    rows: List[np.ndarray] = []
    for ts in corpus:
        for piece, tag in zip(ts.subwords, ts.sub_tags):
            c = collapse_class(tag) if collapse else tag
            if c not in cidx:
                raise ConfigError(f"tag {c!r} is not in the class list {classes}")
            i = kidx.get(piece)
            if i is None:
                i = kidx[piece] = len(rows)
                rows.append(np.zeros(len(classes), dtype=np.int64))
            rows[i][cidx[c]] += 1
    counts = np.vstack(rows)
    return CountTable(classes, tuple(kidx), counts, checksum=checksum, collapsed=collapse)


def compute_pmi(counts: CountTable, k: float = DEFAULT_K, smoothing: str = "joint") -> PmiTable:
    """PMI(s, c) = log P(s,c) / (P(s) P(c)) over add-K smoothed counts.

    ``smoothing='joint'`` adds K to every cell n(s, c); the marginals are sums
    of the smoothed joint. ``smoothing='marginal'`` adds K to each subword
    frequency n(s), spread over classes by the empirical class prior.
    """
    if not k > 0:
        raise ConfigError(f"smoothing constant K must be > 0, got {k}")
    n = counts.counts.astype(np.float64)
    if smoothing == "joint":
        smoothed = n + k
    elif smoothing == "marginal":
        prior = n.sum(axis=0) / n.sum()
        smoothed = n + k * prior[None, :]
    else:
        raise ConfigError(f"unknown smoothing mode {smoothing!r}")
    p_joint = smoothed / smoothed.sum()
    p_sub = p_joint.sum(axis=1)
    p_cls = p_joint.sum(axis=0)
    with np.errstate(divide="ignore"):
        values = np.log(p_joint / (p_sub[:, None] * p_cls[None, :]))
    return PmiTable(counts.classes, counts.keys, values, float(k), smoothing, counts)


# ---------------------------------------------------------------------------
# normalization and lookup


def normalize(scores, temperature: float = 1.0) -> np.ndarray:
    """Softmax of ``scores / temperature`` (max-subtracted)."""
    if temperature < 1.0:
        raise ValueError(f"temperature must be >= 1, got {temperature}")
    z = np.asarray(scores, dtype=np.float64) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def temperature_for(entity_len: int, cfg: TemperatureConfig) -> float:
    if entity_len < 1:
        raise ValueError(f"entity length must be >= 1, got {entity_len}")
    return 1.0 + cfg.lam * entity_len if entity_len > 1 else 1.0


def lookup_bias(table, key: str, entity_len: int = 1, cfg: Optional[TemperatureConfig] = None) -> np.ndarray:
    cfg = cfg or TemperatureConfig()
    scores = table.scores(key)
    if scores is None:
        return np.full(table.num_classes, 1.0 / table.num_classes)
    return normalize(scores, temperature_for(entity_len, cfg))


def bias_matrix(
    table,
    tsent: TokenizedSentence,
    cfg: Optional[TemperatureConfig] = None,
    words: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """N x C bias vectors for one aligned sentence using gold entity lengths."""
    if table.key_unit == "word":
        if words is None:
            raise ValueError("a word-keyed bias table needs the source words")
        keys = [words[w] for w in tsent.word_index]
    else:
        keys = tsent.subwords
    return np.vstack([lookup_bias(table, k, L, cfg) for k, L in zip(keys, tsent.entity_len)])


def entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


# ---------------------------------------------------------------------------
# baselines


def word_frequency_bias(dataset: Iterable[Sentence], classes: Sequence[str], alpha: float = 1.0) -> BiasTable:
    """dist(w) = (n(w,c) + alpha) / (n(w) + alpha C), counted per word."""
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    classes = tuple(classes)
    cidx = {c: i for i, c in enumerate(classes)}
    kidx: Dict[str, int] = {}
    rows: List[np.ndarray] = []
    for sent in dataset:
        for word, tag in zip(sent.words, sent.tags):
            i = kidx.get(word)
            if i is None:
                i = kidx[word] = len(rows)
                rows.append(np.zeros(len(classes)))
            rows[i][cidx[tag]] += 1
    if rows:
        n = np.vstack(rows)
        dist = (n + alpha) / (n.sum(axis=1, keepdims=True) + alpha * len(classes))
    else:
        dist = np.zeros((0, len(classes)))
    return BiasTable(classes, tuple(kidx), dist, kind="word_freq", key_unit="word")


def uniform_bias(classes: Sequence[str]) -> BiasTable:
    classes = tuple(classes)
    return BiasTable(classes, (), np.zeros((0, len(classes))), kind="uniform")


def random_bias(keys: Sequence[str], classes: Sequence[str], seed: int = 0) -> BiasTable:
    """One Dirichlet(1) draw per key from a fixed seed."""
    classes = tuple(classes)
    rng = np.random.default_rng(seed)
    dist = rng.dirichlet(np.ones(len(classes)), size=len(keys))
    return BiasTable(classes, tuple(keys), dist, kind="random")


def build_bias(kind: str, tokenized, dataset, classes, k: float = DEFAULT_K, smoothing: str = "joint", seed: int = 0, collapse: bool = False, alpha: float = 1.0, checksum: str = ""):
    """Construct the bias table named by ``kind`` from a training split."""
    if kind == "pmi":
        counts = count_cooccurrence(tokenized, classes=None if collapse else classes, collapse=collapse, checksum=checksum)
        table = compute_pmi(counts, k, smoothing)
        return table.expand_to(classes) if collapse else table
    if kind == "word_freq":
        return word_frequency_bias(dataset, classes, alpha)
    if kind == "uniform":
        return uniform_bias(classes)
    if kind == "random":
        keys = []
        seen = set()
        for ts in tokenized:
            for s in ts.subwords:
                if s not in seen:
                    seen.add(s)
                    keys.append(s)
        return random_bias(keys, classes, seed)
    raise ConfigError(f"unknown bias kind {kind!r}")


# ---------------------------------------------------------------------------
# TSV export / import

_HEADER_KEY = "subword"


def _fmt12(x: float) -> str:
    return f"{x:.12g}"


def _counts_path(path: Path) -> Path:
    return path.with_name(path.stem + ".counts" + path.suffix)


def export_table(table, path, temperature: Optional[TemperatureConfig] = None) -> None:
    """Write a table as TSV. A PMI table also writes its counts next to it."""
    path = Path(path)
    meta = {}
    if isinstance(table, CountTable):
        meta["kind"] = "counts"
        meta["collapsed"] = str(table.collapsed).lower()
        meta["checksum"] = table.checksum
        body = table.counts
        fmt = str
    elif isinstance(table, PmiTable):
        meta["kind"] = "pmi"
        meta["K"] = repr(table.smoothing_k)
        meta["smoothing"] = table.smoothing
        meta["log"] = "natural"
        if table.counts is not None:
            meta["checksum"] = table.counts.checksum
            meta["counts_file"] = _counts_path(path).name
        body = table.values
        fmt = _fmt12
    elif isinstance(table, BiasTable):
        meta["kind"] = "bias"
        meta["bias_kind"] = table.kind
        meta["key_unit"] = table.key_unit
        body = table.dist
        fmt = _fmt12
    else:
        raise TypeError(f"cannot export {type(table).__name__}")
    if temperature is not None:
        meta["lambda"] = repr(temperature.lam)
        meta["length_unit"] = temperature.length_unit
    meta["classes"] = ",".join(table.classes)
    lines = [f"# {k} = {v}" for k, v in meta.items()]
    lines.append("\t".join((_HEADER_KEY,) + tuple(table.classes)))
    for key, row in zip(table.keys, body):
        lines.append("\t".join([key] + [fmt(x) for x in row]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    if isinstance(table, PmiTable) and table.counts is not None:
        export_table(table.counts, _counts_path(path))


def _read_tsv(path: Path):
    meta = {}
    lines = path.read_text(encoding="utf-8").splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        key, sep, value = lines[i][2:].partition(" = ")
        if not sep:
            raise FormatError(f"{path}:{i + 1}: malformed comment line")
        meta[key.strip()] = value.strip()
        i += 1
    if i >= len(lines):
        raise FormatError(f"{path}: missing header row")
    header = lines[i].split("\t")
    classes = tuple(meta.get("classes", "").split(",")) if meta.get("classes") else ()
    if header[0] != _HEADER_KEY or tuple(header[1:]) != classes:
        raise FormatError(f"{path}:{i + 1}: header does not match class order {classes}")
    keys, rows = [], []
    for lineno in range(i + 1, len(lines)):
        if not lines[lineno]:
            continue
        cells = lines[lineno].split("\t")
        if len(cells) != len(classes) + 1:
            raise FormatError(f"{path}:{lineno + 1}: expected {len(classes) + 1} cells, got {len(cells)}")
        keys.append(cells[0])
        rows.append(cells[1:])
    return meta, classes, keys, rows, i + 2


def _parse_cells(rows, conv, path, first_line):
    out = []
    for r, row in enumerate(rows):
        try:
            out.append([conv(c) for c in row])
        except ValueError:
            raise FormatError(f"{path}:{first_line + r}: non-numeric cell in {row}") from None
    return out


def import_table(path):
    path = Path(path)
    meta, classes, keys, rows, first = _read_tsv(path)
    kind = meta.get("kind")
    n_cls = len(classes)
    if kind == "counts":
        counts = np.array(_parse_cells(rows, int, path, first), dtype=np.int64).reshape(len(keys), n_cls)
        return CountTable(classes, tuple(keys), counts, meta.get("checksum", ""), meta.get("collapsed") == "true")
    if kind == "pmi":
        values = np.array(_parse_cells(rows, float, path, first), dtype=np.float64).reshape(len(keys), n_cls)
        try:
            k = float(meta["K"])
        except (KeyError, ValueError):
            raise FormatError(f"{path}: missing or invalid K") from None
        smoothing = meta.get("smoothing", "joint")
        if "counts_file" in meta:
            counts = import_table(path.with_name(meta["counts_file"]))
            if counts.classes != classes or counts.keys != tuple(keys):
                raise FormatError(f"{path}: counts file does not match the PMI table")
            table = compute_pmi(counts, k, smoothing)
            if not np.allclose(table.values, values, rtol=1e-10, atol=1e-11):
                raise FormatError(f"{path}: PMI values disagree with the stored counts")
            return table
        return PmiTable(classes, tuple(keys), values, k, smoothing, None)
    if kind == "bias":
        dist = np.array(_parse_cells(rows, float, path, first), dtype=np.float64).reshape(len(keys), n_cls)
        return BiasTable(classes, tuple(keys), dist, kind=meta.get("bias_kind", "pmi"), key_unit=meta.get("key_unit", "subword"))
    raise FormatError(f"{path}: unknown table kind {kind!r}")
