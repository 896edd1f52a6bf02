"""Brute-force reference implementations used as test oracles.

Written independently of the package: plain loops and ``math`` only, no
shared helpers, so agreement is evidence rather than tautology.
"""

import itertools
import math

import numpy as np


def pmi_oracle(counts, k):
    """Smoothed joint -> marginals -> log-ratio, one cell at a time."""
    n_s, n_c = len(counts), len(counts[0])
    smoothed = [[float(counts[s][c]) + k for c in range(n_c)] for s in range(n_s)]
    total = 0.0
    for row in smoothed:
        for x in row:
            total += x
    joint = [[x / total for x in row] for row in smoothed]
    p_s = [sum(row) for row in joint]
    p_c = [sum(joint[s][c] for s in range(n_s)) for c in range(n_c)]
    return [[math.log(joint[s][c] / (p_s[s] * p_c[c])) for c in range(n_c)] for s in range(n_s)]


def path_score_oracle(emissions, trans, start, stop, path):
    score = start[path[0]] + emissions[0][path[0]]
    for i in range(1, len(path)):
        score += trans[path[i - 1]][path[i]] + emissions[i][path[i]]
    return score + stop[path[-1]]


def all_paths(n, c):
    return itertools.product(range(c), repeat=n)


def crf_logz_oracle(emissions, trans, start, stop):
    n, c = len(emissions), len(emissions[0])
    scores = [path_score_oracle(emissions, trans, start, stop, p) for p in all_paths(n, c)]
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))


def viterbi_oracle(emissions, trans, start, stop):
    """Best path by enumeration; lexicographic order breaks ties toward low indices."""
    n, c = len(emissions), len(emissions[0])
    best, best_path = -math.inf, None
    for p in all_paths(n, c):
        s = path_score_oracle(emissions, trans, start, stop, p)
        if s > best:
            best, best_path = s, p
    return list(best_path), best


def spans_oracle(tags):
    """(start, end, type) triples by scanning for B or dangling I, then extending."""
    out = []
    i = 0
    while i < len(tags):
        t = tags[i]
        if t == "O":
            i += 1
            continue
        etype = t[2:]
        j = i + 1
        while j < len(tags) and tags[j] == "I-" + etype:
            j += 1
        out.append((i, j - 1, etype))
        i = j
    return out


def prf_oracle(gold_sets, pred_sets):
    tp = fp = fn = 0
    for g, p in zip(gold_sets, pred_sets):
        for x in p:
            if x in g:
                tp += 1
            else:
                fp += 1
        for x in g:
            if x not in p:
                fn += 1
    return tp, fp, fn


def central_diff(f, x, eps=1e-4):
    """Numerical gradient of scalar f at array x (x is perturbed in place and restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + eps
        fp = f()
        x[idx] = old - eps
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * eps)
    return g


def max_rel_error(analytic, numeric, floor=1e-8):
    den = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / den))


def random_tags(rng, n, types=("PER", "LOC"), bio_valid=True):
    tags = []
    for _ in range(n):
        r = rng.random()
        if r < 0.5:
            tags.append("O")
        else:
            t = types[int(rng.integers(len(types)))]
            prefix = "B" if r < 0.75 else "I"
            tags.append(f"{prefix}-{t}")
    if bio_valid:
        prev = "O"
        for i, t in enumerate(tags):
            if t.startswith("I-") and (prev == "O" or prev[2:] != t[2:]):
                tags[i] = "B-" + t[2:]
            prev = tags[i]
    return tags
