"""Field models, empirical distributions and vectorised ring matching.

Configurations are plain ``str`` objects (printable ASCII, possibly empty).
Their ring is implicit: characters ``0..l-1`` followed by the length vertex.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, PatternError
from .patterns import LENGTH_CODE, PRINTABLE, FeaturePattern, char_code, is_printable

WEIGHT_CLAMP = -50.0  # stands in for a weight of -inf


def ring_codes(words, length):
    """Encode equal-length words as a ``(len(words), length + 1)`` code array."""
    out = np.full((len(words), length + 1), LENGTH_CODE, dtype=np.uint8)
    if length and len(words):
        raw = np.frombuffer("".join(words).encode("ascii"), dtype=np.uint8)
        out[:, :length] = raw.reshape(len(words), length) - 0x21
    return out


def decode_ring(codes):
    """Inverse of ``ring_codes`` for a 2-d code array; drops the length column."""
    if codes.shape[1] <= 1:
        return [""] * codes.shape[0]
    chars = (codes[:, :-1] + 0x21).astype(np.uint8)
    return [row.tobytes().decode("ascii") for row in chars]


class RingSet:
    """A weighted multiset of configurations, grouped by length.

    ``groups`` maps a word length ``l`` to ``(codes, weights)`` where
    ``codes`` has shape ``(B, l + 1)``.  Used for the empirical distribution,
    Gibbs sample batches and exact enumerations alike, so all statistics
    (expectations, occurrence histograms, feature matrices) share one code path.

    Position-match arrays of single symbols are memoised; longer patterns are
    memoised only on request, which keeps candidate scoring cheap when many
    candidates extend the same active features.
    """

    def __init__(self, groups):
        self.groups = {int(l): (np.asarray(c), np.asarray(w, dtype=float)) for l, (c, w) in sorted(groups.items())}
        self._positions = {}

    @classmethod
    def from_words(cls, words, weights):
        by_len = {}
        for w, p in zip(words, weights):
            by_len.setdefault(len(w), ([], []))
            by_len[len(w)][0].append(w)
            by_len[len(w)][1].append(p)
        return cls({l: (ring_codes(ws, l), np.array(ps, dtype=float)) for l, (ws, ps) in by_len.items()})

    @property
    def size(self):
        return sum(len(w) for _, w in self.groups.values())

    @property
    def total_weight(self):
        return float(sum(w.sum() for _, w in self.groups.values()))

    def positions(self, pattern, cache=False):
        """Per-length boolean arrays: ``[b, p]`` is True if ``pattern`` matches at ring position ``p``."""
        hit = self._positions.get(pattern)
        if hit is not None:
            return hit
        m = len(pattern)
        if m == 1:
            sym = pattern.symbols[0]
            out = {l: sym.mask(l)[codes] for l, (codes, _) in self.groups.items()}
            self._positions[pattern] = out
            return out
        head = FeaturePattern(pattern.symbols[:1])
        rest = FeaturePattern(pattern.symbols[1:])
        init = FeaturePattern(pattern.symbols[:-1])
        last = FeaturePattern(pattern.symbols[-1:])
        if rest in self._positions or init not in self._positions:
            a, b, shift = self.positions(head), self.positions(rest), 1
        else:
            a, b, shift = self.positions(init), self.positions(last), m - 1
        out = {}
        for l, (codes, _) in self.groups.items():
            if m > l + 1:
                out[l] = np.zeros(codes.shape, dtype=bool)
            else:
                out[l] = a[l] & np.roll(b[l], -shift, axis=1)
        if cache:
            self._positions[pattern] = out
        return out

    def counts(self, pattern, cache=False):
        return {l: pos.sum(axis=1) for l, pos in self.positions(pattern, cache).items()}

    def expectation(self, pattern, cache=False):
        counts = self.counts(pattern, cache)
        return float(sum(np.dot(counts[l], w) for l, (_, w) in self.groups.items()))

    def histogram(self, pattern, cache=False):
        """Weighted distribution of the occurrence count, indexed by count."""
        counts = self.counts(pattern, cache)
        ks = np.concatenate([counts[l] for l in self.groups])
        ws = np.concatenate([w for _, w in self.groups.values()])
        hist = np.bincount(ks, weights=ws)
        return hist / hist.sum()

    def feature_matrix(self, features, cache=True):
        """Per-length integer arrays of shape ``(B, len(features))``."""
        out = {}
        per_feature = [self.counts(f, cache) for f in features]
        for l, (codes, _) in self.groups.items():
            if per_feature:
                out[l] = np.stack([c[l] for c in per_feature], axis=1).astype(np.int64)
            else:
                out[l] = np.zeros((codes.shape[0], 0), dtype=np.int64)
        return out


def _as_readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FieldModel:
    """Length distribution times a per-length exponential field.

    ``p(w) = length_dist[len(w)] * exp(weights . f(w)) / Z_len(w)`` where
    ``f`` are the occurrence counts of ``features``.  The field is normalised
    separately for every length, so the length distribution is exactly
    ``length_dist``.  ``alphabet`` is the set of characters a vertex may take.
    """

    features: tuple
    weights: np.ndarray
    length_dist: np.ndarray
    alphabet: str = PRINTABLE
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        features = tuple(self.features)
        weights = _as_readonly(self.weights).reshape(-1)
        length_dist = _as_readonly(self.length_dist).reshape(-1)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "length_dist", length_dist)
        if len(features) != len(weights):
            raise ValueError("features and weights differ in length")
        if not all(isinstance(f, FeaturePattern) for f in features):
            raise PatternError("features must be FeaturePattern instances")
        index = {f: i for i, f in enumerate(features)}
        if len(index) != len(features):
            raise ValueError("duplicate feature in model")
        object.__setattr__(self, "_index", index)
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite (use WEIGHT_CLAMP for -inf)")
        if length_dist.size == 0 or np.any(length_dist < 0) or abs(length_dist.sum() - 1.0) > 1e-12:
            raise ValueError("length_dist must be a probability vector")
        if not self.alphabet or len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet must be a nonempty string of distinct characters")
        if not all(is_printable(c) for c in self.alphabet):
            raise ValueError("alphabet must be printable ASCII")

    @classmethod
    def uniform(cls, length_dist, alphabet=PRINTABLE):
        """The zero-feature field: uniform spelling for each length."""
        return cls((), np.zeros(0), length_dist, alphabet)

    @property
    def max_length(self):
        return len(self.length_dist) - 1

    @property
    def alphabet_codes(self):
        return np.array([char_code(c) for c in self.alphabet], dtype=np.uint8)

    @property
    def lengths(self):
        """Lengths with positive probability."""
        return [int(l) for l in np.flatnonzero(self.length_dist > 0)]

    def index(self, g):
        return self._index.get(g)

    def weight(self, g):
        i = self._index.get(g)
        return 0.0 if i is None else float(self.weights[i])

    def with_weights(self, weights):
        return FieldModel(self.features, weights, self.length_dist, self.alphabet)

    def with_features(self, features, weights):
        return FieldModel(tuple(features), weights, self.length_dist, self.alphabet)

    def scaled(self, factor):
        return self.with_weights(self.weights * factor)

    def fingerprint(self):
        """Stable text digest of the model, for batch provenance."""
        import hashlib

        h = hashlib.sha256()
        h.update(self.alphabet.encode())
        h.update(np.ascontiguousarray(self.length_dist).tobytes())
        for f, w in zip(self.features, self.weights):
            h.update(f.text.encode() + b"\0" + format(float(w), ".17g").encode() + b"\0")
        return h.hexdigest()[:16]


def match_count(pattern, config):
    """Number of ring positions of ``config`` where ``pattern`` matches."""
    n = len(config) + 1
    m = len(pattern)
    if m > n:
        return 0
    codes = [char_code(c) for c in config] + [LENGTH_CODE]
    masks = pattern.masks(len(config))
    return sum(1 for p in range(n) if all(masks[k][codes[(p + k) % n]] for k in range(m)))


def feature_vector(model, config):
    return np.array([match_count(f, config) for f in model.features], dtype=np.int64)


def f_sharp(model, config):
    return int(feature_vector(model, config).sum())


def log_score(model, config):
    """Unnormalised log weight ``lambda . f(config)``."""
    if not model.features:
        return 0.0
    return float(np.dot(model.weights, feature_vector(model, config)))


def tilt(model, g, alpha):
    """The model tilted by ``alpha * g``: adds to g's weight, appending g if new."""
    if not np.isfinite(alpha):
        raise ValueError("tilt needs a finite alpha")
    i = model.index(g)
    if i is None:
        return model.with_features(model.features + (g,), np.append(model.weights, alpha))
    w = model.weights.copy()
    w[i] += alpha
    return model.with_weights(w)


class EmpiricalDistribution:
    """Normalised configuration counts ``c(w) / N``."""

    def __init__(self, counts):
        counts = dict(counts)
        if not counts:
            raise DataError("empirical distribution needs at least one configuration")
        for w, c in counts.items():
            if not isinstance(w, str) or not all(is_printable(ch) for ch in w):
                raise DataError(f"configuration {w!r} is not printable ASCII")
            if int(c) != c or c <= 0:
                raise DataError(f"count for {w!r} must be a positive integer, got {c!r}")
        self.counts = {w: int(c) for w, c in sorted(counts.items())}
        self.total = sum(self.counts.values())
        self._ring = None

    @classmethod
    def from_words(cls, words):
        return cls(Counter(words))

    @property
    def entries(self):
        return {w: c / self.total for w, c in self.counts.items()}

    def probability(self, config):
        return self.counts.get(config, 0) / self.total

    @property
    def max_length(self):
        return max(len(w) for w in self.counts)

    def length_distribution(self, max_length=None):
        L = self.max_length if max_length is None else max_length
        dist = np.zeros(L + 1)
        for w, c in self.counts.items():
            dist[len(w)] += c
        return dist / dist.sum()

    @property
    def ring(self):
        if self._ring is None:
            words = list(self.counts)
            self._ring = RingSet.from_words(words, [self.counts[w] / self.total for w in words])
        return self._ring

    def expectation(self, g):
        return self.ring.expectation(g)

    def expectations(self, features):
        return np.array([self.ring.expectation(f, cache=True) for f in features])

    def __len__(self):
        return len(self.counts)
