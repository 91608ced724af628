import math

import numpy as np
import pytest

from fieldforge import exact
from fieldforge.errors import PreconditionError
from fieldforge.gibbs import (
    SampleBatch,
    annealed_samples,
    annealing_schedule,
    conditional_distribution,
    derive_seed,
    estimate_histogram,
    estimate_iis_coefficients,
    sample_batch,
)
from fieldforge.model import EmpiricalDistribution, FieldModel, RingSet
from fieldforge.patterns import PRINTABLE, pattern


def batch_of(words):
    ring = RingSet.from_words(words, np.full(len(words), 1 / len(words)))
    order = {l: np.array([i for i, w in enumerate(words) if len(w) == l]) for l in ring.groups}
    return SampleBatch(ring, 0, 0, "", order)


class TestConditional:
    def test_uniform_without_features(self):
        m = FieldModel.uniform([0, 0, 1.0], "abc")
        assert np.allclose(conditional_distribution(m, "ab", 1), 1 / 3)

    def test_single_feature(self):
        m = FieldModel((pattern("a"),), [math.log(2)], [0, 0, 0, 1.0], "ab")
        for site in range(3):
            assert np.allclose(conditional_distribution(m, "bab", site), [2 / 3, 1 / 3])

    def test_pair_feature_raises_left_neighbour(self):
        lam = 1.3
        m = FieldModel((pattern("ab"),), [lam], [0, 0, 1.0], "ab")
        p = conditional_distribution(m, "bb", 0)
        assert p[0] / p[1] == pytest.approx(math.exp(lam))

    def test_matches_enumeration(self):
        m = FieldModel((pattern("ab"), pattern("<*>a"), pattern("b<*>")), [0.4, -0.9, 1.1], [0, 0, 0, 1.0], "ab")
        space = exact.EnumerableSpace("ab", 3)
        probs = exact.probabilities(m, space)
        for word in ["aab", "bba", "aba"]:
            for site in range(3):
                joint = np.array([probs[word[:site] + c + word[site + 1:]] for c in "ab"])
                assert np.allclose(conditional_distribution(m, word, site), joint / joint.sum(), atol=1e-12)

    def test_sums_to_one(self):
        m = FieldModel((pattern("ab"), pattern("a")), [0.4, 2.0], [0, 0, 0, 1.0], "ab")
        p = conditional_distribution(m, "bab", 1)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_length_vertex_rejected(self):
        m = FieldModel.uniform([0, 0, 1.0], "ab")
        with pytest.raises(PreconditionError):
            conditional_distribution(m, "ab", 2)

    def test_foreign_character_rejected(self):
        with pytest.raises(PreconditionError):
            conditional_distribution(FieldModel.uniform([0, 0, 1.0], "ab"), "ac", 0)


class TestBatch:
    def test_deterministic(self):
        m = FieldModel((pattern("ab"),), [0.8], [0.1, 0.3, 0.3, 0.3], "abc")
        a = sample_batch(m, 500, 5, seed=11)
        b = sample_batch(m, 500, 5, seed=11)
        assert a.configs == b.configs
        assert a.configs != sample_batch(m, 500, 5, seed=12).configs

    def test_lengths_follow_length_dist(self):
        m = FieldModel.uniform([0.0, 0.5, 0.0, 0.5], "ab")
        lens = {len(w) for w in sample_batch(m, 300, 1, seed=3).configs}
        assert lens == {1, 3}

    def test_uniform_marginals(self):
        m = FieldModel.uniform([0, 0, 0, 1.0])
        words = sample_batch(m, 10_000, 1, seed=4).configs
        for site in range(3):
            counts = np.bincount([ord(w[site]) - 0x21 for w in words], minlength=94)
            p = 1 / 94
            sigma = math.sqrt(10_000 * p * (1 - p))
            assert np.all(np.abs(counts - 10_000 * p) <= 4.5 * sigma)

    def test_lowercase_share_under_single_class_feature(self):
        beta = 6.99
        m = FieldModel((pattern("[a-z]"),), [math.log(beta)], [0, 0, 0, 0, 1.0], PRINTABLE)
        words = sample_batch(m, 10_000, 3, seed=5).configs
        want = beta * 26 / (beta * 26 + 68)
        sigma = math.sqrt(want * (1 - want) / 10_000)
        for site in range(4):
            share = np.mean([w[site].islower() for w in words])
            assert abs(share - want) <= 3 * sigma

    def test_configs_keep_draw_order(self):
        m = FieldModel.uniform([0.0, 0.5, 0.5], "ab")
        b = sample_batch(m, 50, 1, seed=9)
        lens = np.random.default_rng(derive_seed(9, 0)).choice(3, size=50, p=m.length_dist)
        assert [len(w) for w in b.configs] == list(lens)

    def test_rejects_empty(self):
        with pytest.raises(PreconditionError):
            sample_batch(FieldModel.uniform([1.0]), 0)


class TestEstimators:
    def test_histogram_direct(self):
        h = estimate_histogram(batch_of(["ab", "a"]), pattern("[a-z]"))
        assert list(h) == [0.0, 0.5, 0.5]

    def test_histogram_no_match(self):
        assert list(estimate_histogram(batch_of(["ab", "a"]), pattern("z"))) == [1.0]

    def test_coefficients_single_word(self):
        m = FieldModel((pattern("a"),), [0.0], [0, 1.0], "ab")
        p = EmpiricalDistribution({"a": 1, "b": 1})
        a = estimate_iis_coefficients(batch_of(["a"]), m, p)
        assert a[0, 0] == -0.5
        assert a[1, 0] == 1.0

    def test_histogram_mean_near_exact(self):
        m = FieldModel((pattern("ab"), pattern("b<*>")), [0.6, -0.4], [0, 0.2, 0.3, 0.5], "ab")
        space = exact.EnumerableSpace("ab", 3)
        g = pattern("a")
        b = sample_batch(m, 10_000, 20, seed=1)
        h = estimate_histogram(b, g)
        est = h @ np.arange(len(h))
        mean = exact.expectation(m, space, g)
        eh = exact.exact_histogram(m, space, g)
        var = eh @ np.arange(len(eh)) ** 2 - mean**2
        assert abs(est - mean) <= 4 * math.sqrt(var / 10_000)


class TestAnnealing:
    def test_schedule_geometric(self):
        s = annealing_schedule(5)
        assert s[0] == pytest.approx(2.0) and s[-1] == pytest.approx(0.8)
        assert np.allclose(np.diff(np.log(s)), np.log(0.4) / 4)

    def test_constant_schedule_is_plain_gibbs(self):
        m = FieldModel((pattern("ab"),), [0.8], [0, 0, 0.5, 0.5], "abc")
        a = annealed_samples(m, 200, [1.0] * 4, seed=2)
        assert a.configs == sample_batch(m, 200, 4, seed=2).configs

    def test_hot_chains_look_uniform(self):
        m = FieldModel((pattern("a"),), [5.0], [0, 0, 1.0], "ab")
        words = annealed_samples(m, 4000, [1e6] * 3, seed=3).configs
        share = np.mean([c == "a" for w in words for c in w])
        assert abs(share - 0.5) < 0.03

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(PreconditionError):
            annealed_samples(FieldModel.uniform([1.0]), 3, [1.0, 0.0])
