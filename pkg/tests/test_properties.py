"""Property-based checks of the module invariants."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nerdebias.bias import CountTable, compute_pmi, entropy, normalize
from nerdebias.corpus import Sentence, extract_spans, parse_conll, repair_bio, serialize_conll, validate_bio
from nerdebias.ensemble import EnsembleConfig, batch_loss_and_grads, bias_product_logprobs
from nerdebias.evaluation import entity_prf
from nerdebias.partition import MEM, UNSEEN, build_dicts, partition_mentions
from nerdebias.tagger import crf_log_partition, path_score
from nerdebias.tokenizer import Vocab, align_labels, detokenize

from helpers import random_examples, random_model
from oracles import pmi_oracle

TAGS = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC"]
tag_lists = st.lists(st.sampled_from(TAGS), min_size=1, max_size=15)
words = st.text(alphabet="abcdeXYZ", min_size=1, max_size=6)
finite = st.floats(-20, 20, allow_nan=False, allow_infinity=False)
temperatures = st.floats(1.0, 1e6, allow_nan=False)
FAST = settings(max_examples=60, deadline=None)


@st.composite
def sentences(draw):
    tags = draw(tag_lists)
    ws = draw(st.lists(words, min_size=len(tags), max_size=len(tags)))
    return Sentence(ws, tags)


@st.composite
def rows(draw, max_c=9):
    c = draw(st.integers(2, max_c))
    return np.array(draw(st.lists(finite, min_size=c, max_size=c)))


class TestCorpusProperties:
    @FAST
    @given(st.lists(sentences(), max_size=6))
    def test_round_trip(self, data):
        data = [Sentence(s.words, repair_bio(s.tags)) for s in data]
        assert parse_conll(serialize_conll(data)) == data

    @FAST
    @given(tag_lists)
    def test_span_lengths_count_entity_tags(self, tags):
        fixed = repair_bio(tags)
        assert sum(s.length for s in extract_spans(fixed)) == sum(t != "O" for t in fixed)

    @FAST
    @given(tag_lists)
    def test_repair_idempotent(self, tags):
        fixed = repair_bio(tags)
        assert validate_bio(fixed) == [] and repair_bio(fixed) == fixed


VOCAB = Vocab(("[UNK]", "a", "b", "ab", "X", "##a", "##b", "##c", "##d", "##e", "Y", "Z"))


class TestTokenizerProperties:
    @FAST
    @given(sentences())
    def test_alignment(self, sent):
        ts = align_labels(sent, VOCAB)
        for w, word in enumerate(sent.words):
            pieces = [p for p, wi in zip(ts.subwords, ts.word_index) if wi == w]
            assert pieces == ["[UNK]"] or detokenize(pieces) == word
        projected = [(ts.word_index[s.start], ts.word_index[s.end], s.etype) for s in extract_spans(ts.sub_tags)]
        assert projected == [s.key for s in extract_spans(sent.tags)]
        lengths = {i: s.length for s in extract_spans(sent.tags) for i in range(s.start, s.end + 1)}
        assert list(ts.entity_len) == [lengths.get(w, 1) for w in ts.word_index]


class TestBiasProperties:
    @FAST
    @given(rows(), temperatures)
    def test_normalized_is_distribution(self, row, t):
        p = normalize(row, t)
        assert abs(p.sum() - 1.0) < 1e-9
        assert ((p > 0) & (p < 1)).all()

    @FAST
    @given(rows(), st.lists(temperatures, min_size=2, max_size=6))
    def test_entropy_monotone_and_argmax_stable(self, row, ts):
        ts = sorted(ts)
        ents = [entropy(normalize(row, t)) for t in ts]
        assert all(b >= a - 1e-12 for a, b in zip(ents, ents[1:]))
        # argmax can only move when the gap is lost to rounding
        top = np.sort(row)[-2:]
        assume(top[1] - top[0] > 1e-9 * max(ts))
        assert all(int(np.argmax(normalize(row, t))) == int(np.argmax(row)) for t in ts)

    @FAST
    @given(hnp.arrays(np.int64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=9), elements=st.integers(0, 50)),
           st.floats(0.01, 200))
    def test_pmi_oracle_and_marginal_consistency(self, counts, k):
        table = CountTable(tuple(f"c{j}" for j in range(counts.shape[1])),
                           tuple(f"s{i}" for i in range(counts.shape[0])), counts)
        pmi = compute_pmi(table, k)
        np.testing.assert_allclose(pmi.values, pmi_oracle(counts.tolist(), k), rtol=0, atol=1e-12)
        n = counts + k
        joint = n / n.sum()
        p_s, p_c = joint.sum(axis=1), joint.sum(axis=0)
        recon = (p_c[None, :] * np.exp(pmi.values) * p_s[:, None]).sum(axis=1)
        np.testing.assert_allclose(recon, p_s, rtol=0, atol=1e-12)


class TestEnsembleProperties:
    @FAST
    @given(st.integers(2, 6), st.integers(0, 2 ** 31))
    def test_product_is_distribution_and_keeps_shared_argmax(self, c, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(c))
        b = rng.dirichlet(np.ones(c))
        out = bias_product_logprobs(p, b)
        assert abs(out.sum() - 1.0) < 1e-9 and (out > 0).all()
        if np.argmax(p) == np.argmax(b):
            assert np.argmax(out) == np.argmax(p)

    @FAST
    @given(st.sampled_from(["bias_product", "learned_mixin", "learned_mixin_h"]), st.integers(0, 2 ** 31))
    def test_bias_gets_no_gradient(self, mode, seed):
        # the bias is an input of each example, never a parameter
        rng = np.random.default_rng(seed)
        m = random_model(rng)
        batch = random_examples(rng, m, n_sent=2)
        before = [ex.log_bias.copy() for ex in batch]
        _, grads, _ = batch_loss_and_grads(m, batch, EnsembleConfig(mode))
        assert set(grads) == set(m.params)
        for ex, b in zip(batch, before):
            np.testing.assert_array_equal(ex.log_bias, b)


class TestTaggerProperties:
    @FAST
    @given(st.integers(1, 6), st.integers(2, 4), st.integers(0, 2 ** 31))
    def test_logz_dominates_paths(self, n, c, seed):
        rng = np.random.default_rng(seed)
        e, t, s, f = rng.normal(size=(n, c)), rng.normal(size=(c, c)), rng.normal(size=c), rng.normal(size=c)
        log_z = crf_log_partition(e, t, s, f)
        for _ in range(5):
            assert log_z >= path_score(e, t, rng.integers(0, c, size=n), s, f) - 1e-12


class TestEvaluationProperties:
    @FAST
    @given(st.lists(st.tuples(tag_lists, tag_lists), min_size=1, max_size=6), st.randoms())
    def test_permutation_and_duplicates(self, pairs, rnd):
        gold = [extract_spans(g) for g, _ in pairs]
        pred = [extract_spans(p) for _, p in pairs]
        base = entity_prf(gold, pred)
        order = list(range(len(pairs)))
        rnd.shuffle(order)
        assert entity_prf([gold[i] for i in order], [pred[i] for i in order]) == base
        assert entity_prf(gold, [p + p for p in pred]) == base
        pr, rc = base.precision, base.recall
        if pr + rc:
            assert abs(base.f1 - 2 * pr * rc / (pr + rc)) <= 1e-12


class TestPartitionProperties:
    @FAST
    @given(st.lists(sentences(), min_size=1, max_size=5), st.lists(sentences(), min_size=1, max_size=5))
    def test_exhaustive_and_idempotent(self, train, test):
        train = [Sentence(s.words, repair_bio(s.tags)) for s in train]
        test = [Sentence(s.words, repair_bio(s.tags)) for s in test]
        dicts = build_dicts(train)
        part = partition_mentions(test, dicts)
        assert len(part) == sum(len(extract_spans(s.tags)) for s in test)
        assert set(part.counts()) <= {MEM, UNSEEN}
        assert partition_mentions(test, dicts) == part
        again = partition_mentions(test[::-1], dicts)
        assert sorted((m.span.surface, m.span.etype, m.label) for m in again) == sorted(
            (m.span.surface, m.span.etype, m.label) for m in part)
