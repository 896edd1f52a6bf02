"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--lengths 8,32,128] [--classes 5,9]

Prints one row per (kernel, N, C) with microseconds per call for each
available backend and the speedup of the compiled one. Also times one
training epoch on a synthetic corpus per backend.
"""

import argparse
import timeit

import numpy as np

from nerdebias import kernels
from nerdebias.ensemble import EnsembleConfig
from nerdebias.pipeline import fit
from nerdebias.synthetic import LongEntityConfig, long_entity_corpus
from nerdebias.tagger import TaggerConfig
from nerdebias.tokenizer import Vocab


def kernel_calls(n, c, rng):
    e, t = rng.normal(size=(n, c)), rng.normal(size=(c, c))
    s, f = rng.normal(size=c), rng.normal(size=c)
    index = rng.integers(0, 200, size=n * 3)
    values = rng.normal(size=(n * 3, 16))
    target = np.zeros((200, 16))
    return {
        "crf_log_partition": lambda: kernels.crf_log_partition(e, t, s, f),
        "crf_forward_backward": lambda: kernels.crf_forward_backward(e, t, s, f),
        "viterbi": lambda: kernels.viterbi(e, t, s, f),
        "scatter_add_rows": lambda: kernels.scatter_add_rows(target, index, values),
    }


def time_call(fn, repeat):
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat * 1e6


def bench_kernels(lengths, classes, repeat):
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    header = f"{'kernel':<22}{'N':>5}{'C':>4}" + "".join(f"{b + ' us':>14}" for b in backends)
    if "cython" in backends:
        header += f"{'speedup':>10}"
    print(header)
    for name in ("crf_log_partition", "crf_forward_backward", "viterbi", "scatter_add_rows"):
        for n in lengths:
            for c in classes:
                calls = kernel_calls(n, c, rng)
                times = {}
                for b in backends:
                    previous = kernels.use_backend(b)
                    times[b] = time_call(calls[name], repeat)
                    kernels.use_backend(previous)
                row = f"{name:<22}{n:>5}{c:>4}" + "".join(f"{times[b]:>14.1f}" for b in backends)
                if "cython" in times:
                    row += f"{times['python'] / times['cython']:>9.1f}x"
                print(row)


def bench_epoch(decoder, n_train):
    corp = long_entity_corpus(LongEntityConfig(n_train=n_train, n_test=10))
    vocab = Vocab(tuple(corp.pieces))
    cfg = TaggerConfig(num_classes=3, epochs=1, decoder=decoder)
    print(f"\none training epoch, {n_train} sentences, decoder={decoder}")
    for b in kernels.available_backends():
        previous = kernels.use_backend(b)
        t = min(timeit.repeat(lambda: fit(corp.train, vocab, cfg, EnsembleConfig("bias_product")), number=1, repeat=2))
        kernels.use_backend(previous)
        print(f"  {b:<8}{t:8.2f} s")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=200, help="calls per timing sample")
    p.add_argument("--lengths", default="8,32,128", help="comma-separated sequence lengths")
    p.add_argument("--classes", default="5,9", help="comma-separated class counts")
    p.add_argument("--epoch-sentences", type=int, default=500, help="corpus size for the epoch timing (0 skips it)")
    args = p.parse_args(argv)
    print(f"backends: {', '.join(kernels.available_backends())} (active: {kernels.backend_name()})\n")
    bench_kernels([int(x) for x in args.lengths.split(",")], [int(x) for x in args.classes.split(",")], args.repeat)
    if args.epoch_sentences:
        for decoder in ("softmax", "crf"):
            bench_epoch(decoder, args.epoch_sentences)


if __name__ == "__main__":
    main()
