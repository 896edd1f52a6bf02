import pytest

from nerdebias.corpus import Sentence, extract_spans
from nerdebias.errors import ConfigError, FormatError
from nerdebias.tokenizer import (
    Vocab,
    align_labels,
    build_vocab,
    detokenize,
    load_vocab,
    tokenize_word,
    word_tags_from_subwords,
)

from oracles import random_tags


def vocab(*pieces):
    return Vocab(("[UNK]",) + pieces)


class TestLoadVocab:
    def test_three_lines(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("[UNK]\nLate\n##nt\n")
        assert len(load_vocab(p)) == 3

    def test_missing_unk(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("Late\n##nt\n")
        with pytest.raises(ConfigError):
            load_vocab(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("\n\n")
        with pytest.raises(FormatError):
            load_vocab(p)

    def test_duplicate(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("[UNK]\nLate\nLate\n")
        with pytest.raises(FormatError):
            load_vocab(p)

    def test_bare_continuation_marker(self):
        with pytest.raises(FormatError):
            vocab("##")

    def test_custom_unk(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("<unk>\na\n")
        assert load_vocab(p, unk_piece="<unk>").unk_id == 0


class TestTokenizeWord:
    def test_latent(self):
        assert tokenize_word("Latent", vocab("Late", "##nt")) == ["Late", "##nt"]

    def test_whole_word(self):
        assert tokenize_word("Late", vocab("Late", "##nt")) == ["Late"]

    def test_unknown_prefix(self):
        assert tokenize_word("Xq9", vocab("Late", "##nt")) == ["[UNK]"]

    def test_partial_match_falls_back_to_unk(self):
        # "Lat" matches a prefix but "##ex" is missing
        assert tokenize_word("Latex", vocab("Lat", "##e")) == ["[UNK]"]

    def test_greedy_longest_first(self):
        v = vocab("un", "unaff", "##able", "##aff", "##ord")
        assert tokenize_word("unaffable", v) == ["unaff", "##able"]

    def test_greedy_is_not_backtracking(self):
        # longest-first picks "ab", after which "##c" is missing; no retry with "a"
        v = vocab("a", "ab", "##bc")
        assert tokenize_word("abc", v) == ["[UNK]"]

    def test_lowercase_flag(self):
        v = Vocab(("[UNK]", "late"), lowercase=True)
        assert tokenize_word("LATE", v) == ["late"]

    def test_case_sensitive_default(self):
        assert tokenize_word("LATE", vocab("late")) == ["[UNK]"]

    def test_detokenize(self):
        assert detokenize(["Late", "##nt"]) == "Latent"


class TestAlign:
    def setup_method(self):
        self.v = vocab("Late", "##nt", "cells", "a", "##b", "##c", "foot", "-", "and", "mouth")

    def test_b_word_split(self):
        ts = align_labels(Sentence(["Latent", "cells"], ["B-DNA", "O"]), self.v)
        assert ts.sub_tags == ("B-DNA", "I-DNA", "O")
        assert ts.word_index == (0, 0, 1)

    def test_outside_word_split(self):
        ts = align_labels(Sentence(["abc"], ["O"]), self.v)
        assert ts.sub_tags == ("O", "O", "O")

    def test_entity_len_words(self):
        words = ["foot", "-", "and", "-", "mouth"]
        ts = align_labels(Sentence(words, ["B-DIS"] + ["I-DIS"] * 4), self.v)
        assert ts.entity_len == (5,) * 5

    def test_entity_len_subwords(self):
        ts = align_labels(Sentence(["Latent", "cells", "a"], ["B-X", "I-X", "O"]), self.v, "subwords")
        assert ts.entity_len == (3, 3, 3, 1)

    def test_first_subword_mask(self):
        ts = align_labels(Sentence(["Latent", "abc"], ["O", "O"]), self.v)
        assert ts.first_subword_mask() == [True, False, True, False, False]

    def test_bad_length_unit(self):
        with pytest.raises(ConfigError):
            align_labels(Sentence(["a"], ["O"]), self.v, "chars")

    def test_invariants_on_random_sentences(self, rng):
        words_pool = ["Latent", "cells", "abc", "ab", "foot", "zzz", "mouth"]
        for _ in range(200):
            n = int(rng.integers(1, 10))
            tags = random_tags(rng, n)
            words = [words_pool[int(rng.integers(len(words_pool)))] for _ in range(n)]
            ts = align_labels(Sentence(words, tags), self.v)
            assert len(ts.subwords) == len(ts.sub_tags) == len(ts.word_index) == len(ts.entity_len)
            assert sorted(set(ts.word_index)) == list(range(n))
            assert list(ts.word_index) == sorted(ts.word_index)
            # spans projected back to words are unchanged
            projected = [(ts.word_index[s.start], ts.word_index[s.end], s.etype) for s in extract_spans(ts.sub_tags)]
            assert projected == [s.key for s in extract_spans(tags)]
            lengths = {i: s.length for s in extract_spans(tags) for i in range(s.start, s.end + 1)}
            assert list(ts.entity_len) == [lengths.get(w, 1) for w in ts.word_index]
            for w, word in enumerate(words):
                pieces = [p for p, wi in zip(ts.subwords, ts.word_index) if wi == w]
                if pieces != ["[UNK]"]:
                    assert detokenize(pieces) == word
            assert word_tags_from_subwords(ts.sub_tags, ts.word_index) == list(tags)


class TestBuildVocab:
    def test_unk_first_and_dedup(self):
        v = build_vocab(["a", "b", "a"])
        assert v.pieces == ("[UNK]", "a", "b")
