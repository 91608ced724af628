"""Word spellings: corpus files, atomic features and word probabilities."""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import CorpusError, DataError, EnumerationRefused
from .exact import ENUMERATION_BUDGET, EnumerableSpace, log_partition
from .gibbs import derive_seed, sample_fixed_length
from .model import EmpiricalDistribution, RingSet, log_score
from .patterns import (
    BOUNDARY,
    CLASS_NAMES,
    LONG,
    MAX_EXPLICIT_LENGTH,
    PRINTABLE,
    ExtendedSymbol,
    FeaturePattern,
    is_printable,
    length_label,
    literal,
)

MAX_WORD_LENGTH = 32
BUILTIN_CORPUS = "english_top1000.tsv"

EXACT = "exact"
APPROXIMATE = "approximate"
OUTSIDE_SUPPORT = "length-outside-support"
OUTSIDE_ALPHABET = "outside-alphabet"


@dataclass
class Corpus:
    counts: Counter = field(default_factory=Counter)
    skipped: list = field(default_factory=list)

    @property
    def total(self):
        return sum(self.counts.values())

    def distribution(self):
        if not self.counts:
            raise DataError("corpus is empty")
        return EmpiricalDistribution(self.counts)


def parse_corpus(lines, max_length=MAX_WORD_LENGTH, source="<corpus>"):
    """Parse ``word<TAB>count`` / ``word`` records into a ``Corpus``.

    Blank lines and lines starting with ``#`` are ignored; repeated words have
    their counts added.  Words longer than ``max_length`` are skipped with a
    warning.
    """
    corpus = Corpus()
    for n, raw in enumerate(lines, 1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"{source}: invalid UTF-8 ({exc.reason})", n) from None
        line = raw.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) > 2:
            raise CorpusError(f"{source}: expected 'word<TAB>count', found {len(parts) - 1} tabs", n)
        word = parts[0]
        bad = [c for c in word if not is_printable(c)]
        if bad:
            raise CorpusError(f"{source}: word {word!r} contains non-printable or non-ASCII character {bad[0]!r}", n)
        count = 1
        if len(parts) == 2:
            try:
                count = int(parts[1].strip())
            except ValueError:
                raise CorpusError(f"{source}: count {parts[1]!r} is not an integer", n) from None
            if count <= 0:
                raise CorpusError(f"{source}: count must be positive, got {count}", n)
        if len(word) > max_length:
            warnings.warn(f"{source}:{n}: skipping word of length {len(word)} (cap {max_length})", stacklevel=2)
            corpus.skipped.append((n, word))
            continue
        corpus.counts[word] += count
    return corpus


def read_corpus(path, max_length=MAX_WORD_LENGTH):
    with open(path, "rb") as fh:
        return parse_corpus(fh, max_length, str(path))


def ingest(path, max_length=MAX_WORD_LENGTH):
    """Empirical spelling distribution and its length marginal from a corpus file."""
    p = read_corpus(path, max_length).distribution()
    return p, p.length_distribution()


def load_builtin_corpus():
    """The bundled top-1000 English token list."""
    text = resources.files("fieldforge.data").joinpath(BUILTIN_CORPUS).read_bytes()
    return parse_corpus(text.splitlines(keepends=True), source=BUILTIN_CORPUS).distribution()


def serialize_corpus(p):
    return "".join(f"{w}\t{c}\n" for w, c in p.counts.items())


def atomic_features(alphabet=PRINTABLE):
    """Single-symbol patterns: each character, the four classes and the length tokens."""
    atoms = [literal(c) for c in sorted(alphabet)]
    atoms += [ExtendedSymbol("class", name) for name in CLASS_NAMES]
    atoms += [length_label(n) for n in range(1, MAX_EXPLICIT_LENGTH + 1)]
    atoms += [LONG, BOUNDARY]
    return [FeaturePattern.of(a) for a in atoms]


@dataclass(frozen=True)
class WordScore:
    word: str
    log_prob: float
    status: str


class PartitionEstimator:
    """``log Z_l`` per length, exact where enumeration fits the budget.

    Otherwise ``log Z_l`` is estimated by thermodynamic integration:
    ``log Z_l(lambda) = l log A + int_0^1 E_t[lambda . f] dt`` where ``E_t``
    is the expectation under weights ``t * lambda``, each estimated from Gibbs
    chains and integrated with the trapezoid rule.
    """

    def __init__(self, model, budget=ENUMERATION_BUDGET, samples=2000, burn_in=20, points=11, seed=0):
        self.model = model
        self.budget = budget
        self.samples = samples
        self.burn_in = burn_in
        self.points = points
        self.seed = seed
        self._cache = {}

    def __call__(self, l):
        if l not in self._cache:
            self._cache[l] = self._compute(l)
        return self._cache[l]

    def _compute(self, l):
        A = len(self.model.alphabet)
        if not self.model.features:
            return l * math.log(A), EXACT
        try:
            space = EnumerableSpace(self.model.alphabet, l, self.budget)
        except EnumerationRefused:
            pass
        else:
            return log_partition(_restricted(self.model, l), space, l), EXACT
        ts = np.linspace(0.0, 1.0, self.points)
        means = []
        for k, t in enumerate(ts):
            codes = sample_fixed_length(self.model.scaled(t), l, self.samples, self.burn_in,
                                        derive_seed(self.seed, l, k))
            ring = RingSet({l: (codes, np.full(codes.shape[0], 1.0 / codes.shape[0]))})
            F = ring.feature_matrix(self.model.features)[l]
            means.append(float(np.mean(F @ self.model.weights)))
        return l * math.log(A) + float(np.trapezoid(means, ts)), APPROXIMATE


def _restricted(model, l):
    # same field with all length mass on l, so the enumeration stays within 0..l
    dist = np.zeros(l + 1)
    dist[l] = 1.0
    return type(model)(model.features, model.weights, dist, model.alphabet)


def spelling_log_prob(model, word, length_dist=None, partition=None):
    """``(log p(word), status)`` with ``p(w) = p_l(|w|) exp(lambda . f(w)) / Z_|w|``."""
    ld = model.length_dist if length_dist is None else np.asarray(length_dist, dtype=float)
    l = len(word)
    if l >= len(ld) or ld[l] == 0:
        return -math.inf, OUTSIDE_SUPPORT
    if any(c not in model.alphabet for c in word):
        return -math.inf, OUTSIDE_ALPHABET
    partition = partition or PartitionEstimator(model)
    log_z, status = partition(l)
    return math.log(ld[l]) + log_score(model, word) - log_z, status


def score_words(model, words, length_dist=None, **estimator):
    """Scores for many words, sharing partition function work across equal lengths."""
    partition = PartitionEstimator(model, **estimator)
    out = []
    for w in words:
        bad = [c for c in w if not is_printable(c)]
        if bad:
            raise DataError(f"word {w!r} contains non-printable character {bad[0]!r}")
        lp, status = spelling_log_prob(model, w, length_dist, partition)
        out.append(WordScore(w, lp, status))
    return out
