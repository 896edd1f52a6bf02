"""``nerdebias`` command line: stats, partition, train, eval, report, synth.

Exit codes: 0 success, 1 internal or data error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
import traceback
from dataclasses import asdict, fields, replace
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import synthetic
from .bias import export_table
from .config import FLAG, RunConfig, load_config_file, resolve, write_resolved
from .corpus import (Sentence, corpus_stats, dataset_checksum, extract_spans, read_conll, sentence_spans, tag_set,
                     write_conll)
from .ensemble import config_hash, format_log
from .errors import ConfigError, FormatError, NerDebiasError
from .evaluation import EvalReport, evaluate
from .partition import CON, MEM, SYN, UNSEEN, build_dicts, load_cui_file, partition_mentions, partition_tsv
from .pipeline import BiasSettings, fit, make_table, predict_tags, score
from .tagger import TaggerModel, load_checkpoint, make_optimizer, save_checkpoint
from .tokenizer import Vocab, load_vocab, vocab_checksum

logger = logging.getLogger("nerdebias")

HELP = {
    "train": "training CoNLL file",
    "dev": "development CoNLL file (stats only)",
    "test": "evaluation CoNLL file",
    "vocab": "subword vocabulary, one piece per line",
    "cui_file": "surface<TAB>CUI side file; enables the Syn/Con split",
    "output_dir": "directory for all artifacts",
    "max_len": "split sentences longer than this many words (0 = never)",
    "vocab_lowercase": "lowercase words before subword lookup",
    "bias_kind": "pmi | word_freq | uniform | random",
    "k": "add-K smoothing constant",
    "smoothing": "joint | marginal",
    "lam": "temperature slope: T = 1 + lam * L for entities longer than one unit",
    "length_unit": "words | subwords",
    "class_collapse": "merge B-X/I-X into X when counting",
    "word_freq_alpha": "add-alpha smoothing for the word_freq bias",
    "bias_seed": "seed of the random bias baseline",
    "embed_dim": "embedding width",
    "hidden_dim": "hidden layer width",
    "context_window": "odd window of pieces fed to the tagger",
    "decoder": "softmax | crf",
    "learning_rate": "optimizer step size",
    "epochs": "total training epochs",
    "batch_size": "sentences per step",
    "optimizer": "adam | sgd",
    "loss_positions": "all | first (first piece of each word)",
    "mode": "none | bias_product | learned_mixin | learned_mixin_h",
    "entropy_weight": "entropy penalty weight for learned_mixin_h",
    "typed_partition": "partition keys include the entity type",
    "lowercase_partition": "lowercase surfaces before dictionary lookup",
    "seeds": "comma-separated tagger seeds, one run each",
    "record_time": "write wall-clock seconds into the training log",
    "checkpoint_every": "also save epoch_<n>.ckpt every n epochs (0 = final only)",
}


# ---------------------------------------------------------------------------
# shared helpers


def _out_dir(cfg: RunConfig) -> Path:
    cfg.require("output_dir")
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--output-dir: cannot create {out}: {exc.strerror}") from None
    return out


def _read(cfg: RunConfig, key: str) -> List[Sentence]:
    return read_conll(getattr(cfg, key), repair=True, max_len=cfg.max_len or None)


def _vocab(cfg: RunConfig) -> Vocab:
    cfg.require("vocab")
    return load_vocab(cfg.vocab, lowercase=cfg.vocab_lowercase)


def _bias_settings(cfg: RunConfig) -> BiasSettings:
    return BiasSettings(cfg.bias_kind, cfg.k, cfg.smoothing, cfg.class_collapse, cfg.word_freq_alpha, cfg.bias_seed)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _seed_dir(out: Path, seed: int) -> Path:
    d = out / f"seed_{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


# keys that shape a training run; paths only enter through checksums
_RUN_KEYS = ("max_len", "vocab_lowercase", "bias_kind", "k", "smoothing", "lam", "length_unit", "class_collapse",
             "word_freq_alpha", "bias_seed", "mode", "entropy_weight")


def _run_meta(cfg: RunConfig, train_sum: str, vocab: Vocab, seed: int) -> Dict[str, str]:
    meta = {key: str(getattr(cfg, key)) for key in _RUN_KEYS}
    meta["train_checksum"] = train_sum
    meta["vocab_checksum"] = vocab_checksum(vocab)
    meta["seed"] = str(seed)
    return meta


# ---------------------------------------------------------------------------
# commands


def cmd_stats(cfg: RunConfig) -> int:
    cfg.require("train", "vocab")
    out = _out_dir(cfg)
    train = _read(cfg, "train")
    vocab = _vocab(cfg)
    rows = ["split\tsentences\tpositive\tnegative\tratio"]
    for key in ("train", "dev", "test"):
        if key != "train" and not cfg.optional_file(key):
            continue
        data = train if key == "train" else _read(cfg, key)
        rows.append(key + "\t" + corpus_stats(data).to_tsv().splitlines()[1])
    _write(out / "stats.tsv", "\n".join(rows) + "\n")
    table = make_table(train, vocab, tag_set(train), _bias_settings(cfg), cfg.length_unit)
    export_table(table, out / "bias.tsv", cfg.temperature())
    write_resolved(cfg, out)
    return 0


def cmd_partition(cfg: RunConfig) -> int:
    cfg.require("train", "test")
    out = _out_dir(cfg)
    cui_path = cfg.optional_file("cui_file")
    cui = load_cui_file(cui_path, cfg.lowercase_partition) if cui_path else None
    dicts = build_dicts(_read(cfg, "train"), cui, cfg.typed_partition, cfg.lowercase_partition)
    detail, summary = partition_tsv(partition_mentions(_read(cfg, "test"), dicts))
    _write(out / "partition.tsv", detail)
    _write(out / "partition_summary.tsv", summary)
    write_resolved(cfg, out)
    return 0


def _check_resume(header: dict, model: TaggerModel, meta: Dict[str, str], cfg: RunConfig, classes) -> None:
    bad = [k for k, v in meta.items() if header.get(k) != v]
    want = asdict(cfg.tagger_config(model.cfg.seed, len(classes)))
    have = asdict(model.cfg)
    bad += [f"config.{k}" for k in want if k != "epochs" and want[k] != have[k]]
    if tuple(model.classes) != tuple(classes):
        bad.append("classes")
    if bad:
        raise ConfigError("--resume: checkpoint does not match the current config: " + ", ".join(sorted(bad)))


def _train_one(cfg: RunConfig, train, vocab, classes, table, seed: int, out: Path, resume: Optional[str] = None) -> None:
    seed_dir = _seed_dir(out, seed)
    meta = _run_meta(cfg, dataset_checksum(train), vocab, seed)
    chash = config_hash({**meta, **{f"config.{k}": v for k, v in asdict(cfg.tagger_config(seed, len(classes))).items()}})
    tcfg = cfg.tagger_config(seed, len(classes))
    model = optimizer = None
    start = 0
    rows: List[str] = []
    if resume:
        model, header, opt_state = load_checkpoint(resume)
        _check_resume(header, model, meta, cfg, classes)
        model.cfg = replace(model.cfg, epochs=cfg.epochs)
        start = int(header["epoch"])
        rows = [header[f"log.{i}"] for i in range(1, start + 1)]
        optimizer = make_optimizer(model.cfg, model.params)
        optimizer.load_state(opt_state, int(header["optimizer_t"]))

    def save(path: Path, epoch: int, model, optimizer) -> None:
        extra_meta = dict(meta, epoch=epoch, optimizer_t=optimizer.t, config_hash=chash)
        extra_meta.update({f"log.{i + 1}": r for i, r in enumerate(rows)})
        save_checkpoint(path, model, extra_meta, optimizer.state())

    def on_epoch(entry, model, optimizer):
        rows.append(entry.row())
        if cfg.checkpoint_every and entry.epoch % cfg.checkpoint_every == 0:
            save(seed_dir / f"epoch_{entry.epoch}.ckpt", entry.epoch, model, optimizer)

    res = fit(train, vocab, tcfg, cfg.ensemble_config(), _bias_settings(cfg), classes, table, model, start,
              optimizer, on_epoch, cfg.record_time)
    save(seed_dir / "model.ckpt", cfg.epochs, res.model, res.optimizer)
    if res.stats.get("clamped"):
        logger.warning("seed %d: %d bias probabilities clamped before the log", seed, res.stats["clamped"])
    log_lines = format_log([], chash).splitlines() + rows
    _write(seed_dir / "train_log.tsv", "\n".join(log_lines) + "\n")


def cmd_train(cfg: RunConfig, resume: Optional[str] = None) -> int:
    cfg.require("train", "vocab")
    out = _out_dir(cfg)
    train = _read(cfg, "train")
    vocab = _vocab(cfg)
    classes = tuple(tag_set(train))
    table = None
    if cfg.mode != "none":
        table = make_table(train, vocab, classes, _bias_settings(cfg), cfg.length_unit)
        export_table(table, out / "bias.tsv", cfg.temperature())
    seeds = cfg.seeds
    if resume:
        if not Path(resume).is_file():
            raise ConfigError(f"--resume: no such file: {resume}")
        seed = int(load_checkpoint(resume)[1].get("seed", cfg.seeds[0]))
        seeds = (seed,)
    for seed in seeds:
        _train_one(cfg, train, vocab, classes, table, seed, out, resume)
    write_resolved(cfg, out)
    return 0


def _load_pred(path: str, test: Sequence[Sentence]) -> List[List[str]]:
    pred = read_conll(path, repair=True)
    if len(pred) != len(test):
        raise FormatError(f"{path}: {len(pred)} sentences, but the test set has {len(test)}")
    for i, (p, g) in enumerate(zip(pred, test)):
        if p.words != g.words:
            raise FormatError(f"{path}: sentence {i + 1} words differ from the test set")
    return [list(p.tags) for p in pred]


def _write_report(report: EvalReport, target: Path) -> None:
    _write(target / "eval.tsv", report.to_tsv())
    _write(target / "eval.md", report.to_markdown())


def cmd_eval(cfg: RunConfig, checkpoint: Optional[str] = None, pred: Optional[str] = None) -> int:
    cfg.require("test")
    out = _out_dir(cfg)
    test = _read(cfg, "test")
    train = _read(cfg, "train") if cfg.optional_file("train") else None
    cui_path = cfg.optional_file("cui_file")
    cui = load_cui_file(cui_path, cfg.lowercase_partition) if cui_path else None
    dicts = build_dicts(train, cui, cfg.typed_partition, cfg.lowercase_partition) if train is not None else None

    def report_for(tags) -> EvalReport:
        if dicts is None:
            gold = [sentence_spans(s) for s in test]
            return evaluate(gold, [extract_spans(t, s.words) for t, s in zip(tags, test)])
        return score(train, test, tags, dicts=dicts)

    if pred is not None:
        if not Path(pred).is_file():
            raise ConfigError(f"--pred: no such file: {pred}")
        _write_report(report_for(_load_pred(pred, test)), out)
        write_resolved(cfg, out)
        return 0
    if checkpoint is not None:
        targets = [(Path(checkpoint), out)]
    else:
        found = sorted(out.glob("seed_*/model.ckpt"), key=lambda p: _seed_number(p.parent))
        if not found:
            raise ConfigError(f"nothing to evaluate: pass --checkpoint or --pred, or train into {out} first")
        targets = [(p, p.parent) for p in found]
    vocab = _vocab(cfg)
    for ckpt, target in targets:
        if not ckpt.is_file():
            raise ConfigError(f"--checkpoint: no such file: {ckpt}")
        model, header, _ = load_checkpoint(ckpt)
        if model.vocab_checksum and model.vocab_checksum != vocab_checksum(vocab):
            raise ConfigError(f"--vocab does not match the vocabulary {ckpt} was trained with")
        tags = predict_tags(model, vocab, test)
        write_conll([Sentence(s.words, t) for s, t in zip(test, tags)], target / "predictions.conll")
        _write_report(report_for(tags), target)
    write_resolved(cfg, out)
    return 0


def _seed_number(path: Path) -> int:
    m = re.fullmatch(r"seed_(\d+)", path.name)
    return int(m.group(1)) if m else -1


def _read_eval(path: Path) -> Dict[tuple, float]:
    values = {}
    lines = path.read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != 5:
            raise FormatError(f"{path}:{lineno}: expected 5 columns")
        values[(cells[0], cells[1], cells[2])] = float(cells[3])
    return values


def aggregate(evals: Dict[str, Dict[tuple, float]]):
    """(columns, rows) for the multi-seed table; the last row is the mean."""
    has_concepts = any(("partition", SYN, "recall") in v or ("partition", CON, "recall") in v for v in evals.values())
    parts = [MEM, SYN, CON] if has_concepts else [MEM, UNSEEN]
    keys = [("partition", p, "recall") for p in parts]
    keys += [("total", "all", m) for m in ("precision", "recall", "f1")]
    columns = [f"{p}_R" for p in parts] + ["Total_P", "Total_R", "Total_F"]
    rows = []
    for name, vals in evals.items():
        rows.append((name, [vals.get(k) for k in keys]))
    means = []
    for j in range(len(keys)):
        col = [r[1][j] for r in rows if r[1][j] is not None]
        means.append(sum(col) / len(col) if col else None)
    rows.append(("mean", means))
    return columns, rows


def _pct(x) -> str:
    return "NA" if x is None else f"{100 * x:.2f}"


def cmd_report(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    found = sorted(out.glob("seed_*/eval.tsv"), key=lambda p: _seed_number(p.parent))
    if not found:
        raise ConfigError(f"no seed_*/eval.tsv under {out}; run eval first")
    evals = {p.parent.name.split("_", 1)[1]: _read_eval(p) for p in found}
    columns, rows = aggregate(evals)
    tsv = ["seed\t" + "\t".join(columns)]
    tsv += [name + "\t" + "\t".join("NA" if v is None else f"{v:.6f}" for v in vals) for name, vals in rows]
    _write(out / "report.tsv", "\n".join(tsv) + "\n")
    n_part = len(columns) - 3
    head = ["seed"] + [f"{c[:-2]} (R)" for c in columns[:n_part]] + ["Total (P/R/F)"]
    md = [head]
    for name, vals in rows:
        md.append([name] + [_pct(v) for v in vals[:n_part]] + [" / ".join(_pct(v) for v in vals[n_part:])])
    widths = [max(len(r[i]) for r in md) for i in range(len(head))]
    fmt = lambda r: "| " + " | ".join(x.ljust(w) for x, w in zip(r, widths)) + " |"  # noqa: E731
    lines = [fmt(md[0]), "|" + "|".join("-" * (w + 2) for w in widths) + "|"] + [fmt(r) for r in md[1:]]
    _write(out / "report.md", "\n".join(lines) + "\n")
    return 0


def _run_cfg_text(settings: dict, files: Dict[str, str]) -> str:
    lines = [f"{k} = {v}" for k, v in files.items()]
    for k, v in settings.items():
        v = ",".join(str(x) for x in v) if isinstance(v, tuple) else v
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def cmd_synth(cfg: RunConfig, kind: str, data_seed: int = 0) -> int:
    out = _out_dir(cfg)
    if kind == "tiny":
        for src, dst in (("tiny_train.conll", "train.conll"), ("tiny_test.conll", "test.conll"),
                         ("tiny_vocab.txt", "vocab.txt"), ("tiny_cui.tsv", "cui.tsv")):
            _write(out / dst, resources.files("nerdebias").joinpath("data", src).read_text(encoding="utf-8"))
        files = {"train": "train.conll", "test": "test.conll", "vocab": "vocab.txt", "cui_file": "cui.tsv"}
        _write(out / "run.cfg", _run_cfg_text({}, files))
        return 0
    if kind == "bias_injection":
        corp = synthetic.bias_injection_corpus(synthetic.BiasInjectionConfig(seed=data_seed))
        settings = synthetic.BIAS_INJECTION_RUN
    elif kind == "long_entity":
        corp = synthetic.long_entity_corpus(synthetic.LongEntityConfig(seed=data_seed))
        settings = synthetic.LONG_ENTITY_RUN
    else:
        raise ConfigError(f"--kind must be tiny, bias_injection or long_entity, got {kind!r}")
    write_conll(corp.train, out / "train.conll")
    write_conll(corp.test, out / "test.conll")
    _write(out / "vocab.txt", corp.vocab_text())
    files = {"train": "train.conll", "test": "test.conll", "vocab": "vocab.txt"}
    if corp.cui_map:
        _write(out / "cui.tsv", corp.cui_text())
        files["cui_file"] = "cui.tsv"
    _write(out / "run.cfg", _run_cfg_text(settings, files))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run config (each overrides the --config file)")
    g.add_argument("--config", metavar="FILE", help="flat 'key = value' config file; relative paths resolve against it")
    for f in fields(RunConfig):
        g.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar="V", default=None, help=HELP.get(f.name))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nerdebias", description="PMI bias-only debiasing toolkit for NER taggers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--debug", action="store_true", help="print tracebacks for internal errors")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _config_parent()
    sub.add_parser("stats", parents=[parent], help="corpus statistics and the bias table")
    sub.add_parser("partition", parents=[parent], help="Mem/Unseen or Mem/Syn/Con assignment of test mentions")
    t = sub.add_parser("train", parents=[parent], help="train one tagger per seed")
    t.add_argument("--resume", metavar="CKPT", help="continue the run saved in this checkpoint")
    e = sub.add_parser("eval", parents=[parent], help="score a checkpoint, a prediction file or every seed_* run")
    src = e.add_mutually_exclusive_group()
    src.add_argument("--checkpoint", metavar="CKPT", help="model to decode the test set with")
    src.add_argument("--pred", metavar="CONLL", help="score these predicted tags instead of a model")
    sub.add_parser("report", parents=[parent], help="aggregate seed_*/eval.tsv into a mean-over-seeds table")
    s = sub.add_parser("synth", parents=[parent], help="write a bundled or synthetic corpus plus its run config")
    s.add_argument("--kind", default="tiny", help="tiny | bias_injection | long_entity")
    s.add_argument("--data-seed", type=int, default=0, help="generator seed")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = {}
    if args.config:
        file_values = load_config_file(args.config)
        base = Path(args.config).parent
        for key in FLAG:
            v = file_values.get(key)
            if v and not Path(v).is_absolute():
                file_values[key] = str(base / v)
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    return resolve(file_values, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "partition":
            return cmd_partition(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.resume)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.pred)
        if args.command == "report":
            return cmd_report(cfg)
        return cmd_synth(cfg, args.kind, args.data_seed)
    except ConfigError as exc:
        print(f"nerdebias: error: {exc}", file=sys.stderr)
        return 2
    except NerDebiasError as exc:
        print(f"nerdebias: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        if args.debug:
            traceback.print_exc()
        print(f"nerdebias: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
