import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldforge.errors import DataError
from fieldforge.exact import EnumerableSpace, probabilities
from fieldforge.model import (
    EmpiricalDistribution,
    FieldModel,
    RingSet,
    f_sharp,
    feature_vector,
    log_score,
    match_count,
    tilt,
)
from fieldforge.patterns import pattern

HAMILTON = "Hamiltonianism"


class TestMatchCount:
    @pytest.mark.parametrize(
        "pat, word, expected",
        [
            ("[a-z]", "The", 2),
            ("e", "eee", 3),
            ("ism<*>", HAMILTON, 1),
            ("[a-z]<1>", "a", 1),
            ("<*>ism", HAMILTON, 0),
            ("<7+>[A-Z]", HAMILTON, 1),
            ("<7+>[A-Z]", "The", 0),
            ("<3>T", "The", 1),
            ("<*>", "", 1),
            ("a", "", 0),
            ("aa", "a", 0),
            ("ab", "ba", 0),  # no wrap through the length vertex
            ("[punct]", "a-b.", 2),
            ("[0-9][0-9]", "1999", 3),
        ],
    )
    def test_examples(self, pat, word, expected):
        assert match_count(pattern(pat), word) == expected

    def test_longer_than_ring_is_zero(self):
        assert match_count(pattern("abc<*>"), "ab") == 0

    def test_ringset_agrees(self):
        words = ["The", "eee", HAMILTON, "a", "", "1999"]
        ring = RingSet.from_words(words, np.ones(len(words)))
        for text in ["[a-z]", "e", "ism<*>", "<*>", "[0-9][0-9]", "<7+>[A-Z]", "an"]:
            g = pattern(text)
            counts = ring.counts(g)
            for l, (codes, _) in ring.groups.items():
                got = list(counts[l])
                want = [match_count(g, w) for w in words if len(w) == l]
                assert got == want, text


class TestFeatureVector:
    def test_empty_model(self):
        m = FieldModel.uniform([0, 1.0])
        assert feature_vector(m, "a").shape == (0,)
        assert f_sharp(m, "a") == 0
        assert log_score(m, "a") == 0.0

    def test_the(self):
        m = FieldModel((pattern("[a-z]"), pattern("e")), [0, 0], [0, 0, 0, 1.0])
        assert list(feature_vector(m, "the")) == [3, 1]
        assert f_sharp(m, "the") == 4

    def test_capitalised(self):
        m = FieldModel((pattern("[a-z]"),), [0], [0, 0, 0, 1.0])
        assert f_sharp(m, "The") == 2

    def test_ism_and_ian(self):
        m = FieldModel((pattern("ism<*>"), pattern("ian")), [0, 0], np.full(15, 1 / 15))
        assert list(feature_vector(m, HAMILTON)) == [1, 1]


class TestLogScore:
    def test_triple_e(self):
        m = FieldModel((pattern("e"),), [math.log(3.47)], [0, 0, 0, 1.0])
        assert log_score(m, "eee") == pytest.approx(3 * math.log(3.47), rel=1e-15)

    def test_three_word_features(self):
        feats = (pattern("<7+>[A-Z]"), pattern("ian"), pattern("ism<*>"))
        w = [0.4, 1.3, 2.2]
        m = FieldModel(feats, w, np.full(15, 1 / 15))
        assert log_score(m, HAMILTON) == pytest.approx(sum(w))

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-5, 5), min_size=2, max_size=2),
           st.text(alphabet="abe", max_size=6))
    def test_linear_in_weights(self, w1, w2, word):
        feats = (pattern("a"), pattern("be"))
        ld = np.full(7, 1 / 7)
        s1 = log_score(FieldModel(feats, w1, ld), word)
        s2 = log_score(FieldModel(feats, w2, ld), word)
        s12 = log_score(FieldModel(feats, np.add(w1, w2), ld), word)
        assert s12 == pytest.approx(s1 + s2, abs=1e-9)


class TestTilt:
    def test_appends_new_feature(self):
        m = tilt(FieldModel.uniform([0, 1.0]), pattern("[a-z]"), math.log(6.99))
        assert m.features == (pattern("[a-z]"),)
        assert m.weight(pattern("[a-z]")) == pytest.approx(math.log(6.99))

    def test_adds_to_existing(self):
        g = pattern("a")
        m = tilt(tilt(FieldModel.uniform([0, 1.0]), g, 0.5), g, 0.25)
        assert len(m.features) == 1
        assert m.weight(g) == 0.75

    def test_zero_tilt_keeps_distribution(self):
        space = EnumerableSpace("ab", 3)
        m = FieldModel((pattern("ab"),), [0.7], [0.1, 0.2, 0.3, 0.4], "ab")
        before = probabilities(m, space)
        after = probabilities(tilt(m, pattern("b<*>"), 0.0), space)
        assert max(abs(before[w] - after[w]) for w in before) <= 1e-12

    def test_rejects_infinite(self):
        with pytest.raises(ValueError):
            tilt(FieldModel.uniform([1.0]), pattern("a"), -math.inf)


class TestFieldModel:
    def test_readonly_arrays(self):
        m = FieldModel((pattern("a"),), [1.0], [1.0])
        with pytest.raises(ValueError):
            m.weights[0] = 2.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(weights=[math.inf]),
            dict(weights=[math.nan]),
            dict(length_dist=[0.5, 0.4]),
            dict(length_dist=[-0.1, 1.1]),
            dict(alphabet="aa"),
            dict(alphabet="a b"),
        ],
    )
    def test_invalid(self, kwargs):
        args = dict(features=(pattern("a"),), weights=[0.0], length_dist=[0.5, 0.5], alphabet="ab")
        args.update(kwargs)
        with pytest.raises(ValueError):
            FieldModel(**args)

    def test_duplicate_features(self):
        with pytest.raises(ValueError):
            FieldModel((pattern("a"), pattern("a")), [0, 0], [1.0])

    def test_fingerprint_tracks_weights(self):
        m = FieldModel((pattern("a"),), [1.0], [0.5, 0.5])
        assert m.fingerprint() == FieldModel((pattern("a"),), [1.0], [0.5, 0.5]).fingerprint()
        assert m.fingerprint() != m.with_weights([1.0 + 1e-15]).fingerprint()


class TestEmpirical:
    def test_probabilities_are_count_ratios(self):
        p = EmpiricalDistribution({"a": 3, "bb": 1})
        assert p.probability("a") == 0.75
        assert p.probability("bb") == 0.25
        assert p.probability("c") == 0.0
        assert list(p.length_distribution()) == [0.0, 0.75, 0.25]

    def test_from_words_counts(self):
        p = EmpiricalDistribution.from_words(["x", "y", "x", "x"])
        assert p.counts == {"x": 3, "y": 1}
        assert p.total == 4

    @pytest.mark.parametrize("counts", [{}, {"a": 0}, {"a": -1}, {"a": 1.5}, {"a b": 1}, {"\t": 1}])
    def test_invalid(self, counts):
        with pytest.raises(DataError):
            EmpiricalDistribution(counts)

    def test_expectation(self):
        p = EmpiricalDistribution({"The": 1, "eee": 1})
        assert p.expectation(pattern("[a-z]")) == 2.5


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="ab", max_size=7), st.integers(0, 6), st.sampled_from(["a", "ab", "b<*>", "<*>a", "[a-z]", "aa"]))
def test_count_is_rotation_invariant(word, shift, text):
    # rotating the characters among themselves (keeping the length vertex) preserves
    # counts of patterns that avoid the length vertex when read on the full ring
    g = pattern(text)
    if "<" in text:
        return
    n = len(word) + 1
    ring = word + "\0"
    rotated = [ring[(i + shift) % n] for i in range(n)]
    # count windows on the rotated ring directly
    m = len(g)
    masks = g.masks(len(word))
    from fieldforge.patterns import LENGTH_CODE, char_code

    codes = [LENGTH_CODE if c == "\0" else char_code(c) for c in rotated]
    count = sum(1 for p in range(n) if m <= n and all(masks[k][codes[(p + k) % n]] for k in range(m)))
    assert count == match_count(g, word)
