"""Tiny-model builders and the finite-difference check shared by several test files."""

import numpy as np

from nerdebias import ensemble
from nerdebias.ensemble import EnsembleConfig, Example
from nerdebias.tagger import TaggerConfig, init_model
from nerdebias.tokenizer import Vocab

from oracles import central_diff, max_rel_error


def tiny_vocab(n_pieces):
    return Vocab(("[UNK]",) + tuple(f"p{i}" for i in range(n_pieces - 1)))


def random_model(rng, n_classes=4, hidden=6, embed=3, window=3, vocab_size=7, decoder="softmax", seed=None):
    cfg = TaggerConfig(num_classes=n_classes, embed_dim=embed, hidden_dim=hidden, context_window=window,
                       decoder=decoder, seed=int(rng.integers(1 << 30)) if seed is None else seed)
    model = init_model(cfg, tiny_vocab(vocab_size), [f"c{i}" for i in range(n_classes)])
    if decoder == "crf":
        for k in ("trans", "start", "stop"):
            model.params[k] = rng.normal(0, 0.5, size=model.params[k].shape)
    model.params["b1"] = rng.normal(0, 0.3, size=model.params["b1"].shape)
    model.params["b2"] = rng.normal(0, 0.3, size=model.params["b2"].shape)
    return model


def random_examples(rng, model, n_sent=2, max_len=6, with_bias=True):
    out = []
    c = model.cfg.num_classes
    for _ in range(n_sent):
        n = int(rng.integers(1, max_len + 1))
        ids = rng.integers(0, model.vocab_size, size=n)
        gold = rng.integers(0, c, size=n)
        log_b = np.log(rng.dirichlet(np.ones(c), size=n)) if with_bias else None
        out.append(Example(ids, gold, log_b, np.ones(n)))
    return out


def gradient_check(model, batch, ens: EnsembleConfig, eps=1e-4):
    """Max relative error over all parameters between analytic and central-difference gradients."""
    ensemble.attach_head(model, ens)
    if ensemble.HEAD in model.params:
        model.params[ensemble.HEAD] = np.random.default_rng(7).normal(0, 0.5, size=model.cfg.hidden_dim)
    _, grads, _ = ensemble.batch_loss_and_grads(model, batch, ens)
    worst = 0.0
    for name, value in model.params.items():
        num = central_diff(lambda: ensemble.batch_loss_and_grads(model, batch, ens)[0], value, eps)
        worst = max(worst, max_rel_error(grads[name], num))
    return worst
