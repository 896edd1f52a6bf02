"""Debiasing objectives that combine the tagger with a fixed bias-only model.

Combined scores per position (a = log b, the bias log-probability):

    none             u = logits
    bias_product     u = logits + a
    learned_mixin    u = logits + g * a,   g = softplus(w . h)
    learned_mixin_h  as learned_mixin, plus  w_H * H(softmax(g * a))

The loss is the NLL of the gold tag under softmax(u) (or under the CRF with
``u`` as emissions), averaged over loss positions. The bias enters only as a
constant input, and only while training.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels, tagger
from .bias import TemperatureConfig, bias_matrix
from .errors import ConfigError
from .tagger import ForwardResult, TaggerModel, log_softmax, softmax

logger = logging.getLogger(__name__)

MODES = ("none", "bias_product", "learned_mixin", "learned_mixin_h")
CLAMP = 1e-12
HEAD = "mixin_w"


@dataclass(frozen=True)
class EnsembleConfig:
    mode: str = "none"
    entropy_weight: float = 0.2
    temperature: TemperatureConfig = field(default_factory=TemperatureConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"ensemble mode must be one of {MODES}, got {self.mode!r}")
        if self.entropy_weight < 0:
            raise ConfigError("entropy_weight must be >= 0")
        if self.mode == "learned_mixin_h":
            logger.debug("learned_mixin_h is experimental")

    @property
    def uses_head(self) -> bool:
        return self.mode in ("learned_mixin", "learned_mixin_h")


@dataclass
class MixinHead:
    w: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "MixinHead":
        return cls(np.zeros(hidden_dim))

    def gate(self, hidden: np.ndarray) -> np.ndarray:
        return softplus(hidden @ self.w)


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def safe_log(b, stats: Optional[dict] = None):
    b = np.asarray(b, dtype=np.float64)
    low = b < CLAMP
    if low.any():
        if stats is not None:
            stats["clamped"] = stats.get("clamped", 0) + int(low.sum())
        b = np.maximum(b, CLAMP)
    return np.log(b)


def bias_product_logprobs(p, b, stats: Optional[dict] = None) -> np.ndarray:
    """softmax(log p + log b); entries below 1e-12 are clamped and counted."""
    return softmax(safe_log(p, stats) + safe_log(b, stats))


def entropy_rows(z_logits: np.ndarray) -> np.ndarray:
    lz = log_softmax(z_logits)
    return -(np.exp(lz) * lz).sum(axis=-1)


# ---------------------------------------------------------------------------
# loss kernels shared by the public functions and the trainer


@dataclass
class LossTerms:
    loss: float
    d_logits: np.ndarray
    d_hidden: Optional[np.ndarray] = None
    d_head: Optional[np.ndarray] = None
    d_crf: Optional[Dict[str, np.ndarray]] = None
    penalty: float = 0.0


def combine(logits, hidden, log_bias, mode, head_w=None):
    """Return (combined scores u, gate g or None, pre-gate s or None)."""
    if mode == "none":
        return logits, None, None
    if mode == "bias_product":
        return logits + log_bias, None, None
    s = hidden @ head_w
    g = softplus(s)
    return logits + g[:, None] * log_bias, g, s


def loss_terms(
    logits: np.ndarray,
    hidden: np.ndarray,
    log_bias: Optional[np.ndarray],
    gold: np.ndarray,
    mode: str,
    mask: Optional[np.ndarray] = None,
    head_w: Optional[np.ndarray] = None,
    entropy_weight: float = 0.0,
    n_norm: Optional[float] = None,
    crf: Optional[tuple] = None,
    offsets: Optional[np.ndarray] = None,
) -> LossTerms:
    """Loss and gradients for rows of one or more sentences.

    ``crf=(trans, start, stop)`` switches to sequence-level NLL; ``offsets``
    then marks sentence boundaries in the rows.
    """
    n = len(gold)
    mask = np.ones(n) if mask is None else np.asarray(mask, dtype=np.float64)
    if n_norm is None:
        n_norm = mask.sum()
    if mode != "none" and log_bias is None:
        raise ValueError(f"mode {mode!r} needs bias vectors")
    u, g, s = combine(logits, hidden, log_bias, mode, head_w)
    rows = np.arange(n)
    d_crf = None
    if crf is None:
        lp = log_softmax(u)
        loss = -(lp[rows, gold] * mask).sum() / n_norm
        du = np.exp(lp)
        du[rows, gold] -= 1.0
        du *= (mask / n_norm)[:, None]
    else:
        trans, start, stop = crf
        if offsets is None:
            offsets = np.array([0, n])
        du = np.zeros_like(u)
        d_crf = {"trans": np.zeros_like(trans), "start": np.zeros_like(start), "stop": np.zeros_like(stop)}
        total = 0.0
        for b in range(len(offsets) - 1):
            sl = slice(int(offsets[b]), int(offsets[b + 1]))
            e, y = u[sl], gold[sl]
            log_z, marg, pair = kernels.crf_forward_backward(e, trans, start, stop)
            total += log_z - tagger.path_score(e, trans, y, start, stop)
            marg[np.arange(len(y)), y] -= 1.0
            du[sl] = marg
            np.add.at(pair, (y[:-1], y[1:]), -1.0)
            d_crf["trans"] += pair
            d_crf["start"] += marg[0]
            d_crf["stop"] += marg[-1]
        loss = total / n_norm
        du /= n_norm
        for v in d_crf.values():
            v /= n_norm
    terms = LossTerms(float(loss), du, d_crf=d_crf)
    if g is not None:
        dg = (du * log_bias).sum(axis=1)
        if mode == "learned_mixin_h" and entropy_weight > 0:
            za = g[:, None] * log_bias
            z = softmax(za)
            ent = entropy_rows(za)
            terms.penalty = float(entropy_weight * (ent * mask).sum() / n_norm)
            terms.loss += terms.penalty
            mean_a = (z * log_bias).sum(axis=1)
            var_a = (z * log_bias * log_bias).sum(axis=1) - mean_a * mean_a
            dg += entropy_weight * mask * (-g * var_a) / n_norm
        ds = dg * sigmoid(s)
        terms.d_head = ds @ hidden
        terms.d_hidden = ds[:, None] * head_w[None, :]
    return terms


def _gold_array(gold) -> np.ndarray:
    return np.asarray(gold, dtype=np.int64)


def bias_product_loss(fwd: ForwardResult, bias, gold) -> float:
    return loss_terms(fwd.logits, fwd.hidden, safe_log(bias), _gold_array(gold), "bias_product").loss


def learned_mixin_loss(fwd: ForwardResult, bias, gold, head: MixinHead) -> float:
    return loss_terms(fwd.logits, fwd.hidden, safe_log(bias), _gold_array(gold), "learned_mixin", head_w=head.w).loss


def learned_mixin_h_loss(fwd: ForwardResult, bias, gold, head: MixinHead, entropy_weight: float = 0.2) -> float:
    return loss_terms(fwd.logits, fwd.hidden, safe_log(bias), _gold_array(gold), "learned_mixin_h",
                      head_w=head.w, entropy_weight=entropy_weight).loss


def combined_probs(fwd: ForwardResult, bias, mode: str, head: Optional[MixinHead] = None) -> np.ndarray:
    u, _, _ = combine(fwd.logits, fwd.hidden, safe_log(bias), mode, None if head is None else head.w)
    return softmax(u)


# ---------------------------------------------------------------------------
# training


@dataclass
class Example:
    ids: np.ndarray
    gold: np.ndarray
    log_bias: Optional[np.ndarray]
    mask: np.ndarray


def prepare_examples(tokenized, vocab, classes, table=None, temperature: Optional[TemperatureConfig] = None,
                     words=None, loss_positions: str = "all", stats: Optional[dict] = None) -> List[Example]:
    """Piece ids, gold class ids and (gold-length tempered) log-bias per sentence."""
    cidx = {c: i for i, c in enumerate(classes)}
    if table is not None and tuple(table.classes) != tuple(classes):
        raise ConfigError(f"bias table classes {tuple(table.classes)} do not match tagger classes {tuple(classes)}")
    out = []
    for j, ts in enumerate(tokenized):
        try:
            gold = np.array([cidx[t] for t in ts.sub_tags], dtype=np.int64)
        except KeyError as exc:
            raise ConfigError(f"tag {exc.args[0]!r} is not a tagger class") from None
        if loss_positions == "first":
            mask = np.array(ts.first_subword_mask(), dtype=np.float64)
        else:
            mask = np.ones(len(ts))
        log_b = None
        if table is not None:
            log_b = safe_log(bias_matrix(table, ts, temperature, words[j] if words is not None else None), stats)
        out.append(Example(np.array(vocab.ids(ts.subwords), dtype=np.int64), gold, log_b, mask))
    return out


def batch_loss_and_grads(model: TaggerModel, batch: Sequence[Example], ens: EnsembleConfig):
    attach_head(model, ens)
    cache = tagger.forward_batch(model, [ex.ids for ex in batch])
    gold = np.concatenate([ex.gold for ex in batch])
    mask = np.concatenate([ex.mask for ex in batch])
    log_bias = None
    if ens.mode != "none":
        log_bias = np.concatenate([ex.log_bias for ex in batch])
    crf = (model.params["trans"], model.params["start"], model.params["stop"]) if model.has_crf else None
    terms = loss_terms(cache.logits, cache.hidden, log_bias, gold, ens.mode, mask,
                       model.params.get(HEAD), ens.entropy_weight, None, crf, cache.offsets)
    grads = tagger.zero_grads(model)
    tagger.backward(model, cache, terms.d_logits, grads, terms.d_hidden)
    if terms.d_crf is not None:
        for k, v in terms.d_crf.items():
            grads[k] += v
    if terms.d_head is not None:
        grads[HEAD] += terms.d_head
    return terms.loss, grads, cache


def attach_head(model: TaggerModel, ens: EnsembleConfig) -> TaggerModel:
    if ens.uses_head and HEAD not in model.params:
        model.params[HEAD] = MixinHead.zeros(model.cfg.hidden_dim).w
    return model


def config_hash(items: dict) -> str:
    blob = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    token_accuracy: float
    wall_time: Optional[float] = None

    def row(self) -> str:
        wall = "NA" if self.wall_time is None else f"{self.wall_time:.3f}"
        return f"{self.epoch}\t{self.mean_loss:.17g}\t{self.token_accuracy:.17g}\t{wall}"


LOG_HEADER = "epoch\tmean_loss\ttoken_accuracy\twall_time"


def format_log(entries: Sequence[EpochLog], cfg_hash: str = "") -> str:
    lines = [f"# config_hash = {cfg_hash}", LOG_HEADER] + [e.row() for e in entries]
    return "\n".join(lines) + "\n"


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(model: TaggerModel, examples: Sequence[Example], ens: EnsembleConfig, epochs: Optional[int] = None,
          start_epoch: int = 0, optimizer=None, record_time: bool = False, on_epoch=None):
    """Optimise ``model`` in place; returns (model, optimizer, epoch logs).

    Epoch e visits sentences in ``epoch_order(seed, e)``, so a run resumed at
    ``start_epoch`` with the saved optimizer continues bit-identically.
    """
    cfg = model.cfg
    epochs = cfg.epochs if epochs is None else epochs
    attach_head(model, ens)
    if optimizer is None:
        optimizer = tagger.make_optimizer(cfg, model.params)
    logs = []
    for epoch in range(start_epoch, epochs):
        t0 = time.perf_counter()
        order = epoch_order(cfg.seed, epoch, len(examples))
        loss_sum = 0.0
        pos_sum = 0.0
        correct = 0
        total = 0
        for bi, startb in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [examples[j] for j in order[startb:startb + cfg.batch_size]]
            loss, grads, cache = batch_loss_and_grads(model, batch, ens)
            tagger.check_finite(grads, bi)
            weight = sum(ex.mask.sum() for ex in batch)
            loss_sum += loss * weight
            pos_sum += weight
            for b, ex in enumerate(batch):
                logits = cache.logits[cache.sentence(b)]
                if model.has_crf:
                    pred = tagger.viterbi_decode(logits, *tagger._crf_params(model))
                else:
                    pred = logits.argmax(axis=1)
                correct += int((pred == ex.gold).sum())
                total += len(ex.gold)
            optimizer.step(model.params, grads)
        entry = EpochLog(epoch + 1, loss_sum / max(pos_sum, 1.0), correct / max(total, 1),
                         time.perf_counter() - t0 if record_time else None)
        logs.append(entry)
        logger.info("epoch %d loss %.5f acc %.4f", entry.epoch, entry.mean_loss, entry.token_accuracy)
        if on_epoch is not None:
            on_epoch(entry, model, optimizer)
    return model, optimizer, logs
