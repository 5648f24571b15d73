import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctrlgen import metrics
from ctrlgen.vocab import build_vocabulary, strip_eos

tokens = st.integers(min_value=0, max_value=2)
short_seqs = st.lists(tokens, max_size=12)


def oracle_fragments(x, y):
    """Greedy maximal-shared-fragment extraction, written from the definition
    with brute-force substring search instead of the production scan."""
    x, y = list(x), list(y)
    frags = []
    i = 0
    while i < len(y):
        best_k, best_j = 0, None
        # longest k such that y[i:i+k] occurs in x; earliest occurrence wins
        for k in range(len(y) - i, 0, -1):
            needle = y[i : i + k]
            for j in range(len(x) - k + 1):
                if x[j : j + k] == needle:
                    best_k, best_j = k, j
                    break
            if best_k:
                break
        if best_k:
            frags.append((i, best_j, best_k))
            i += best_k
        else:
            i += 1
    return frags


class TestRepeatRatio:
    def test_alternating_pair(self):
        # 3-grams: aba, bab, aba, bab -> last two already seen
        assert metrics.repeat_ratio([7, 8, 7, 8, 7, 8], 3) == 0.5

    def test_constant_run(self):
        assert metrics.repeat_ratio([5, 5, 5, 5, 5], 3) == pytest.approx(2 / 3)

    def test_too_short_is_zero(self):
        assert metrics.repeat_ratio([1, 2], 3) == 0.0
        assert metrics.repeat_ratio([], 3) == 0.0

    def test_all_distinct(self):
        assert metrics.repeat_ratio([1, 2, 3, 4, 5], 3) == 0.0

    def test_bad_n(self):
        with pytest.raises(ValueError):
            metrics.repeat_ratio([1, 2, 3], 0)

    @given(st.lists(tokens, max_size=20), st.integers(min_value=1, max_value=4))
    def test_bounded(self, y, n):
        assert 0.0 <= metrics.repeat_ratio(y, n) <= 1.0

    @given(st.lists(tokens, min_size=1, max_size=6), st.integers(min_value=2, max_value=5))
    def test_tiling_repeats(self, block, reps):
        # a sequence tiled from one block repeats every n-gram after the
        # first period once n fits inside the block
        y = block * reps
        n = len(block)
        ratio = metrics.repeat_ratio(y, n)
        expected = (len(y) - n + 1 - len(set(tuple(y[i:i+n]) for i in range(len(y) - n + 1))))
        assert ratio == pytest.approx(expected / (len(y) - n + 1))


class TestFragments:
    def test_known_decomposition(self):
        x = [1, 2, 3, 9, 4, 5, 9]
        y = [1, 2, 3, 4, 5, 7]
        fs = metrics.extractive_fragments(x, y)
        assert fs.lengths() == [3, 2]
        assert fs.density() == pytest.approx((9 + 4) / 6)

    def test_earliest_doc_start_on_tie(self):
        x = [4, 4, 4]
        y = [4]
        fs = metrics.extractive_fragments(x, y)
        assert fs.fragments[0].doc_start == 0

    def test_no_overlap(self):
        fs = metrics.extractive_fragments([1, 2], [3, 3, 3])
        assert fs.fragments == ()
        assert fs.density() == 0.0

    def test_full_copy(self):
        x = [1, 2, 3, 4]
        assert metrics.extractive_density(x, x) == pytest.approx(4.0)

    def test_empty_summary_rejected(self):
        with pytest.raises(ValueError):
            metrics.extractive_density([1, 2], [])

    def test_empty_document(self):
        assert metrics.extractive_density([], [1, 2]) == 0.0

    @settings(max_examples=200)
    @given(short_seqs, st.lists(tokens, min_size=1, max_size=10))
    def test_matches_oracle(self, x, y):
        got = [(f.summary_start, f.doc_start, f.length)
               for f in metrics.extractive_fragments(x, y).fragments]
        assert got == oracle_fragments(x, y)

    @given(short_seqs, st.lists(tokens, min_size=1, max_size=10))
    def test_fragments_are_real_matches(self, x, y):
        fs = metrics.extractive_fragments(x, y)
        prev_end = 0
        for f in fs.fragments:
            assert f.summary_start >= prev_end  # disjoint, in order
            prev_end = f.summary_start + f.length
            assert y[f.summary_start : prev_end] == x[f.doc_start : f.doc_start + f.length]

    @given(short_seqs, st.lists(tokens, min_size=1, max_size=10))
    def test_density_bounds(self, x, y):
        d = metrics.extractive_density(x, y)
        assert 0.0 <= d <= len(y)


class TestAbstractivenessBin:
    @pytest.mark.parametrize(
        "density,expected",
        [(5.0, 1), (3.31, 1), (3.3, 2), (2.0, 2), (1.31, 2), (1.3, 3), (0.5, 3), (0.0, 3)],
    )
    def test_edges(self, density, expected):
        assert metrics.abstractiveness_bin(density) == expected

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            metrics.abstractiveness_bin(-0.1)

    @given(st.floats(min_value=0.0, max_value=20.0, allow_nan=False))
    def test_monotone(self, d):
        # higher density can only move toward bin 1
        assert metrics.abstractiveness_bin(d + 0.5) <= metrics.abstractiveness_bin(d)


class TestSentences:
    T = 99

    def test_split_keeps_terminator(self):
        seq = [1, 2, self.T, 3, self.T]
        assert metrics.split_sentences(seq, self.T) == [[1, 2, self.T], [3, self.T]]

    def test_trailing_run_counts(self):
        assert metrics.split_sentences([1, 2, 3], self.T) == [[1, 2, 3]]

    def test_empty(self):
        assert metrics.split_sentences([], self.T) == []

    def test_entity_repetition(self):
        e, T = 7, self.T
        y = [e, 5, e, T, 6, T]
        assert metrics.entity_repetition_fraction(y, [e], T) == 0.5
        assert metrics.entity_repetition_fraction(y, [8], T) == 0.0
        assert metrics.entity_repetition_fraction([], [e], T) == 0.0

    def test_entity_repetition_needs_same_entity_twice(self):
        e1, e2, T = 7, 8, self.T
        # two different requested entities in one sentence is not repetition
        assert metrics.entity_repetition_fraction([e1, e2, T], [e1, e2], T) == 0.0


class TestConjunction:
    def test_cases(self):
        but = 2
        assert metrics.conjunction_indicator([1, but, 3], [4, 5], but) == 1
        assert metrics.conjunction_indicator([1, but, 3], [4, but], but) == 0
        assert metrics.conjunction_indicator([1, 3], [4, 5], but) == 0
        assert metrics.conjunction_indicator([1, 3], [but], but) == 0


class TestAppear:
    def test_fraction(self):
        assert metrics.appear_pct([1, 2, 3], {1, 9}) == 0.5
        assert metrics.appear_pct([1, 2], {1, 2}) == 1.0
        assert metrics.appear_pct([], {1}) == 0.0

    def test_empty_request_rejected(self):
        with pytest.raises(ValueError):
            metrics.appear_pct([1, 2], set())


class TestLcs:
    def test_length(self):
        assert metrics.lcs_length([1, 2, 3, 4], [2, 4]) == 2
        assert metrics.lcs_length([1, 2], [3, 4]) == 0
        assert metrics.lcs_length([], [1]) == 0

    def test_f1_known(self):
        assert metrics.lcs_f1([1, 2, 3], [2, 3, 4]) == pytest.approx(2 / 3)

    def test_f1_empty(self):
        assert metrics.lcs_f1([], [1]) == 0.0
        assert metrics.lcs_f1([1], []) == 0.0

    def test_recall(self):
        assert metrics.lcs_recall([1, 2], [1, 2, 3, 4]) == pytest.approx(0.5)

    @given(st.lists(tokens, min_size=1, max_size=10))
    def test_identity(self, y):
        assert metrics.lcs_f1(y, y) == pytest.approx(1.0)

    @given(short_seqs, short_seqs)
    def test_symmetric_length(self, a, b):
        assert metrics.lcs_length(a, b) == metrics.lcs_length(b, a)

    @given(short_seqs, short_seqs)
    def test_f1_bounds(self, a, b):
        assert 0.0 <= metrics.lcs_f1(a, b) <= 1.0


class TestStripEos:
    def test_strip(self):
        assert strip_eos([1, 2, 0], 0) == [1, 2]
        assert strip_eos([1, 2], 0) == [1, 2]
        assert strip_eos([0], 0) == []
        # only one trailing marker is dropped
        assert strip_eos([1, 0, 0], 0) == [1, 0]


def test_vocabulary_layout():
    v = build_vocabulary()
    assert len(v) == 169
    assert v.token(v.eos) == "</s>"
    assert [v.token(t) for t in v.terminators] == [f".{k}" for k in range(1, 11)]
    assert v.token(v.but) == "but"
    assert len(v.length_controls) == 10
    assert len(v.abs_controls) == 3
    assert v.encode("w00 v00 ent00 .4") == [
        v.content_words[0], v.synonyms[0], v.entities[0], v.terminators[3],
    ]
    assert v.decode(v.encode("w01 .1")) == "w01 .1"
    assert v.synonym_map()[v.content_words[3]] == v.synonyms[3]


def test_vocabulary_round_trip():
    v = build_vocabulary(n_entities=4, n_content=8)
    assert build_vocabulary(4, 8) == v
    import json

    again = type(v).from_dict(json.loads(json.dumps(v.to_dict())))
    assert again == v
