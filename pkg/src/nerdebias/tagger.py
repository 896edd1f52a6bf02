"""Window-MLP sequence tagger with softmax or linear-chain CRF decoding.

Position i sees the embeddings of the ``context_window`` pieces centred on it
(out-of-sentence slots use a dedicated boundary row):

    h_i      = tanh(W1 @ concat(window embeddings) + b1)
    logits_i = W2 @ h_i + b2

All gradients are written out by hand so they can be checked exactly against
finite differences.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, FormatError, TrainingError
from .tokenizer import vocab_checksum

CHECKPOINT_MAGIC = "nerdebias-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TaggerConfig:
    num_classes: int
    embed_dim: int = 16
    hidden_dim: int = 32
    context_window: int = 3
    decoder: str = "softmax"
    seed: int = 1
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_positions: str = "all"

    def __post_init__(self):
        for name in ("num_classes", "embed_dim", "hidden_dim", "context_window", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.context_window % 2 != 1:
            raise ConfigError(f"context_window must be odd, got {self.context_window}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.decoder not in ("softmax", "crf"):
            raise ConfigError(f"decoder must be 'softmax' or 'crf', got {self.decoder!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.loss_positions not in ("all", "first"):
            raise ConfigError(f"loss_positions must be 'all' or 'first', got {self.loss_positions!r}")
        if self.decoder == "crf" and self.loss_positions != "all":
            raise ConfigError("the CRF decoder scores whole sequences; use loss_positions=all")

    @classmethod
    def from_dict(cls, d: dict) -> "TaggerConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in types:
                continue
            t = types[k]
            kw[k] = int(v) if t == "int" else float(v) if t == "float" else str(v)
        return cls(**kw)


class TaggerModel:
    """Parameters (an ordered name -> array map) plus the label/vocab context."""

    def __init__(self, cfg: TaggerConfig, classes: Sequence[str], vocab_size: int, params=None, vocab_checksum: str = ""):
        if len(classes) != cfg.num_classes:
            raise ConfigError(f"config expects {cfg.num_classes} classes, got {len(classes)}")
        self.cfg = cfg
        self.classes = tuple(classes)
        self.vocab_size = vocab_size
        self.vocab_checksum = vocab_checksum
        self.params: "OrderedDict[str, np.ndarray]" = OrderedDict(params or {})

    @property
    def boundary_id(self) -> int:
        return self.vocab_size

    @property
    def has_crf(self) -> bool:
        return "trans" in self.params

    def copy(self) -> "TaggerModel":
        return TaggerModel(self.cfg, self.classes, self.vocab_size,
                           OrderedDict((k, v.copy()) for k, v in self.params.items()), self.vocab_checksum)


def init_model(cfg: TaggerConfig, vocab, classes: Sequence[str]) -> TaggerModel:
    """Seeded init: U(-a, a) with a = 1/sqrt(fan_in); embeddings have fan_in 1."""
    rng = np.random.default_rng(cfg.seed)
    v = len(vocab)
    d_in = cfg.context_window * cfg.embed_dim

    def uniform(shape, fan_in):
        a = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-a, a, size=shape)

    params = OrderedDict()
    params["embed"] = uniform((v + 1, cfg.embed_dim), 1)
    params["W1"] = uniform((cfg.hidden_dim, d_in), d_in)
    params["b1"] = np.zeros(cfg.hidden_dim)
    params["W2"] = uniform((cfg.num_classes, cfg.hidden_dim), cfg.hidden_dim)
    params["b2"] = np.zeros(cfg.num_classes)
    if cfg.decoder == "crf":
        params["trans"] = np.zeros((cfg.num_classes, cfg.num_classes))
        params["start"] = np.zeros(cfg.num_classes)
        params["stop"] = np.zeros(cfg.num_classes)
    checksum = vocab_checksum(vocab) if hasattr(vocab, "pieces") else ""
    return TaggerModel(cfg, classes, v, params, checksum)


# ---------------------------------------------------------------------------
# forward / backward


@dataclass
class ForwardResult:
    logits: np.ndarray  # N x C
    probs: np.ndarray  # N x C
    hidden: np.ndarray  # N x H


@dataclass
class BatchCache:
    windows: np.ndarray  # Ntot x W piece ids
    inputs: np.ndarray  # Ntot x (W*D)
    hidden: np.ndarray  # Ntot x H
    logits: np.ndarray  # Ntot x C
    offsets: np.ndarray  # B + 1 sentence boundaries into the rows

    def sentence(self, b: int) -> slice:
        return slice(int(self.offsets[b]), int(self.offsets[b + 1]))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _windows(ids: Sequence[int], k: int, boundary: int) -> np.ndarray:
    n = len(ids)
    padded = np.concatenate([np.full(k, boundary), np.asarray(ids, dtype=np.int64), np.full(k, boundary)])
    return np.lib.stride_tricks.sliding_window_view(padded, 2 * k + 1)[:n]


def forward_batch(model: TaggerModel, batch_ids: Sequence[Sequence[int]]) -> BatchCache:
    p = model.params
    k = model.cfg.context_window // 2
    wins = [_windows(ids, k, model.boundary_id) for ids in batch_ids]
    offsets = np.zeros(len(wins) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(w) for w in wins])
    windows = np.ascontiguousarray(np.concatenate(wins, axis=0))
    inputs = p["embed"][windows].reshape(len(windows), -1)
    hidden = np.tanh(inputs @ p["W1"].T + p["b1"])
    logits = hidden @ p["W2"].T + p["b2"]
    return BatchCache(windows, inputs, hidden, logits, offsets)


def forward(model: TaggerModel, ids: Sequence[int]) -> ForwardResult:
    cache = forward_batch(model, [ids])
    return ForwardResult(cache.logits, softmax(cache.logits), cache.hidden)


def zero_grads(model: TaggerModel) -> Dict[str, np.ndarray]:
    return OrderedDict((k, np.zeros_like(v)) for k, v in model.params.items())


def backward(model: TaggerModel, cache: BatchCache, d_logits: np.ndarray, grads: Dict[str, np.ndarray], d_hidden: Optional[np.ndarray] = None):
    """Accumulate parameter gradients given dL/dlogits (and optional extra dL/dh)."""
    p = model.params
    h = cache.hidden
    grads["W2"] += d_logits.T @ h
    grads["b2"] += d_logits.sum(axis=0)
    dh = d_logits @ p["W2"]
    if d_hidden is not None:
        dh = dh + d_hidden
    dpre = dh * (1.0 - h * h)
    grads["W1"] += dpre.T @ cache.inputs
    grads["b1"] += dpre.sum(axis=0)
    d_inputs = (dpre @ p["W1"]).reshape(-1, model.cfg.embed_dim)
    kernels.scatter_add_rows(grads["embed"], cache.windows.reshape(-1), d_inputs)
    return grads


# ---------------------------------------------------------------------------
# CRF


def _crf_params(model_or_trans, start=None, stop=None):
    if isinstance(model_or_trans, TaggerModel):
        p = model_or_trans.params
        return p["trans"], p["start"], p["stop"]
    c = model_or_trans.shape[0]
    return (model_or_trans,
            np.zeros(c) if start is None else start,
            np.zeros(c) if stop is None else stop)


def path_score(emissions, trans, tags, start=None, stop=None) -> float:
    trans, start, stop = _crf_params(trans, start, stop)
    tags = np.asarray(tags)
    s = start[tags[0]] + stop[tags[-1]] + emissions[np.arange(len(tags)), tags].sum()
    s += trans[tags[:-1], tags[1:]].sum()
    return float(s)


def crf_log_partition(emissions, trans, start=None, stop=None) -> float:
    trans, start, stop = _crf_params(trans, start, stop)
    return kernels.crf_log_partition(emissions, trans, start, stop)


def crf_nll(emissions, trans, tags, start=None, stop=None) -> float:
    trans, start, stop = _crf_params(trans, start, stop)
    return crf_log_partition(emissions, trans, start, stop) - path_score(emissions, trans, tags, start, stop)


def viterbi_decode(emissions, trans, start=None, stop=None) -> np.ndarray:
    trans, start, stop = _crf_params(trans, start, stop)
    path, _ = kernels.viterbi(emissions, trans, start, stop)
    return path


def predict(model: TaggerModel, batch_ids: Sequence[Sequence[int]]) -> List[np.ndarray]:
    """Class-index predictions per sentence; no bias is involved at inference."""
    cache = forward_batch(model, batch_ids)
    out = []
    for b in range(len(batch_ids)):
        logits = cache.logits[cache.sentence(b)]
        if model.has_crf:
            out.append(viterbi_decode(logits, *_crf_params(model)))
        else:
            out.append(logits.argmax(axis=1))
    return out


# ---------------------------------------------------------------------------
# optimizers


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
        self.v = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self):
        out = OrderedDict()
        for k in self.m:
            out[f"adam.m.{k}"] = self.m[k]
            out[f"adam.v.{k}"] = self.v[k]
        return out

    def load_state(self, tensors, t):
        self.t = t
        for k in self.m:
            self.m[k] = tensors[f"adam.m.{k}"].copy()
            self.v[k] = tensors[f"adam.v.{k}"].copy()


class SGD:
    def __init__(self, params, lr=1e-3):
        self.lr = lr
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for name, g in grads.items():
            params[name] -= self.lr * g

    def state(self):
        return OrderedDict()

    def load_state(self, tensors, t):
        self.t = t


def make_optimizer(cfg: TaggerConfig, params):
    if cfg.optimizer == "adam":
        return Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    return SGD(params, cfg.learning_rate)


def check_finite(grads, batch_index: int):
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for {name!r} in batch {batch_index}")


# ---------------------------------------------------------------------------
# checkpoint I/O


def _fmt17(x: float) -> str:
    return "%.17g" % x


def save_checkpoint(path, model: TaggerModel, meta: Optional[dict] = None, extra: Optional[dict] = None) -> None:
    """Versioned text checkpoint: header lines, then ``name shape values...``."""
    header = OrderedDict()
    header["classes"] = ",".join(model.classes)
    header["vocab_size"] = str(model.vocab_size)
    header["vocab_checksum"] = model.vocab_checksum
    for k, v in asdict(model.cfg).items():
        header[f"config.{k}"] = repr(v) if isinstance(v, float) else str(v)
    for k, v in (meta or {}).items():
        header[k] = str(v)
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}"]
    lines += [f"# {k} = {v}" for k, v in header.items()]
    tensors = OrderedDict(model.params)
    tensors.update(extra or {})
    for name, arr in tensors.items():
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(" ".join([name, shape] + [_fmt17(x) for x in arr.ravel()]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_checkpoint(path):
    """Return (header dict, ordered tensor dict)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split() != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise FormatError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    header = OrderedDict()
    tensors = OrderedDict()
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("# "):
            key, _, value = line[2:].partition(" = ")
            header[key] = value
            continue
        parts = line.split(" ")
        if len(parts) < 2:
            raise FormatError(f"{path}:{lineno}: malformed tensor line")
        name, shape_s = parts[0], parts[1]
        try:
            shape = tuple(int(s) for s in shape_s.split(",")) if shape_s else ()
            values = np.array([float(x) for x in parts[2:]], dtype=np.float64)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric tensor data") from None
        if values.size != int(np.prod(shape)):
            raise FormatError(f"{path}:{lineno}: {name} has {values.size} values for shape {shape}")
        tensors[name] = values.reshape(shape)
    return header, tensors


def load_checkpoint(path):
    """Return (model, header, optimizer tensors)."""
    header, tensors = read_checkpoint(path)
    cfg_dict = {k[len("config."):]: v for k, v in header.items() if k.startswith("config.")}
    cfg = TaggerConfig.from_dict(cfg_dict)
    classes = tuple(header["classes"].split(","))
    params = OrderedDict((k, v) for k, v in tensors.items() if not k.startswith("adam."))
    opt = OrderedDict((k, v) for k, v in tensors.items() if k.startswith("adam."))
    model = TaggerModel(cfg, classes, int(header["vocab_size"]), params, header.get("vocab_checksum", ""))
    return model, header, opt
