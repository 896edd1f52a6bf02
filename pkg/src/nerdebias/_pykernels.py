"""Pure numpy implementations of the hot loops (fallback backend).

Path score of tags y over emissions E (N x C):
    start[y0] + sum_i E[i, y_i] + sum_i trans[y_{i-1}, y_i] + stop[y_{N-1}]
"""

import numpy as np


def _lse(x, axis):
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def crf_log_partition(emissions, trans, start, stop):
    alpha = start + emissions[0]
    for i in range(1, emissions.shape[0]):
        alpha = _lse(alpha[:, None] + trans, 0) + emissions[i]
    return float(_lse(alpha + stop, 0))


def crf_forward_backward(emissions, trans, start, stop):
    """Return (logZ, unary marginals N x C, summed pairwise marginals C x C)."""
    n, c = emissions.shape
    alpha = np.empty((n, c))
    beta = np.empty((n, c))
    alpha[0] = start + emissions[0]
    for i in range(1, n):
        alpha[i] = _lse(alpha[i - 1][:, None] + trans, 0) + emissions[i]
    beta[n - 1] = stop
    for i in range(n - 2, -1, -1):
        beta[i] = _lse(trans + (emissions[i + 1] + beta[i + 1])[None, :], 1)
    log_z = float(_lse(alpha[n - 1] + stop, 0))
    marg = np.exp(alpha + beta - log_z)
    pair = np.zeros((c, c))
    for i in range(1, n):
        pair += np.exp(alpha[i - 1][:, None] + trans + (emissions[i] + beta[i])[None, :] - log_z)
    return log_z, marg, pair


def viterbi(emissions, trans, start, stop):
    """Best path and its score; ties go to the lowest class index."""
    n, c = emissions.shape
    back = np.zeros((n, c), dtype=np.int64)
    delta = start + emissions[0]
    for i in range(1, n):
        cand = delta[:, None] + trans
        back[i] = cand.argmax(axis=0)
        delta = cand[back[i], np.arange(c)] + emissions[i]
    final = delta + stop
    best = int(final.argmax())
    score = float(final[best])
    path = np.empty(n, dtype=np.int64)
    path[n - 1] = best
    for i in range(n - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, score


def scatter_add_rows(target, index, values):
    """target[index[r]] += values[r], rows visited in order."""
    np.add.at(target, index, values)
