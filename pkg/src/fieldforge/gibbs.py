"""Single-site Gibbs sampling of spellings and Monte Carlo statistics.

Each sample is its own chain: draw a length from the model's length
distribution, fill the characters uniformly at random, then run a number of
left-to-right sweeps, resampling one character at a time from its exact
conditional.  Chains of equal length are advanced together as rows of one
code array, so a sweep costs a handful of numpy operations per site.

Randomness: the master seed is turned into a ``numpy.random.SeedSequence``.
Lengths are drawn from the stream with spawn key ``(0,)`` and the chains of
length ``l`` from the stream with spawn key ``(1, l)``; both are stable across
platforms because ``SeedSequence`` hashing is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .model import RingSet, decode_ring, ring_codes
from .patterns import LENGTH_CODE

DEFAULT_BURN_IN = 20
DEFAULT_SAMPLES = 10_000


def derive_seed(seed, *keys):
    """Child ``SeedSequence`` of ``seed`` (an int or a ``SeedSequence``) at ``keys``."""
    keys = tuple(int(k) for k in keys)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + keys)
    return np.random.SeedSequence(int(seed), spawn_key=keys)


def annealing_schedule(sweeps, start=2.0, end=0.8):
    """Geometric temperature schedule from ``start`` to ``end`` over ``sweeps`` sweeps."""
    if sweeps <= 0:
        return []
    if sweeps == 1:
        return [end]
    return list(np.geomspace(start, end, sweeps))


class _SiteTerms:
    """Per-site bookkeeping of every (feature, offset) window that covers the site.

    For a word of length ``l`` and a character site ``v``, a window of feature
    ``i`` with the site at offset ``j`` contributes ``weights[i]`` to the
    score of character ``c`` exactly when all the other symbols of the window
    match and symbol ``j`` matches ``c``.  ``constant`` collects the windows
    with no other symbols (single-symbol features); ``others`` lists, for the
    remaining windows, the (position, mask) pairs that must match.
    """

    def __init__(self, model, l):
        ac = model.alphabet_codes
        n = l + 1
        self.sites = []
        for v in range(l):
            const_idx, const_cols = [], []
            idx, cols, others = [], [], []
            for i, f in enumerate(model.features):
                m = len(f)
                if m > n:
                    continue
                masks = f.masks(l)
                for j in range(m):
                    col = masks[j][ac]
                    if not col.any():
                        continue
                    start = v - j
                    req = []
                    possible = True
                    for k in range(m):
                        if k == j:
                            continue
                        pos = (start + k) % n
                        mk = masks[k]
                        if pos == l:
                            if not mk[LENGTH_CODE]:
                                possible = False
                                break
                            continue  # length vertex is fixed and matches
                        if not mk[ac].any():
                            possible = False
                            break
                        req.append((pos, mk))
                    if not possible:
                        continue
                    if req:
                        idx.append(i)
                        cols.append(col)
                        others.append(req)
                    else:
                        const_idx.append(i)
                        const_cols.append(col)
            self.sites.append(
                (
                    np.array(const_idx, dtype=int),
                    np.array(const_cols, dtype=float).reshape(len(const_idx), len(ac)),
                    np.array(idx, dtype=int),
                    np.array(cols, dtype=float).reshape(len(idx), len(ac)),
                    others,
                )
            )

    def logits(self, codes, v, weights):
        const_idx, const_cols, idx, cols, others = self.sites[v]
        B = codes.shape[0]
        A = const_cols.shape[1]
        out = np.zeros((B, A))
        if len(const_idx):
            out += weights[const_idx] @ const_cols
        if len(idx):
            ok = np.ones((B, len(idx)))
            for t, req in enumerate(others):
                hit = req[0][1][codes[:, req[0][0]]]
                for pos, mk in req[1:]:
                    hit &= mk[codes[:, pos]]
                ok[:, t] = hit
            out += ok @ (weights[idx][:, None] * cols)
        return out


def _run_chains(model, l, B, temperatures, rng):
    """Advance ``B`` fresh chains of length ``l``; returns their ring codes."""
    ac = model.alphabet_codes
    A = len(ac)
    codes = np.full((B, l + 1), LENGTH_CODE, dtype=np.uint8)
    if l == 0 or B == 0:
        return codes
    codes[:, :l] = ac[rng.integers(0, A, size=(B, l))]
    if not model.features:
        return codes
    terms = _SiteTerms(model, l)
    for T in temperatures:
        w = model.weights / T
        for v in range(l):
            logits = terms.logits(codes, v, w)
            logits -= logits.max(axis=1, keepdims=True)
            cdf = np.cumsum(np.exp(logits), axis=1)
            u = rng.random(B) * cdf[:, -1]
            pick = np.minimum((cdf < u[:, None]).sum(axis=1), A - 1)
            codes[:, v] = ac[pick]
    return codes


def conditional_distribution(model, config, site):
    """Probability of each alphabet character at ``site`` given the rest of ``config``."""
    l = len(config)
    if not 0 <= site < l:
        raise PreconditionError(f"site {site} is not a character vertex of a length-{l} word (length vertex is {l})")
    if any(c not in model.alphabet for c in config):
        raise PreconditionError(f"config {config!r} uses characters outside the model alphabet")
    codes = ring_codes([config], l)
    logits = _SiteTerms(model, l).logits(codes, site, model.weights)[0]
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """An immutable set of sampled spellings shared by all estimators."""

    ring: RingSet
    seed: object
    sweeps: int
    fingerprint: str
    order: dict = field(repr=False)

    @property
    def n(self):
        return self.ring.size

    @property
    def configs(self):
        """Sampled spellings in draw order."""
        out = [None] * self.n
        for l, (codes, _) in self.ring.groups.items():
            for i, w in zip(self.order[l], decode_ring(codes)):
                out[i] = w
        return out

    def histogram(self, g, cache=False):
        return self.ring.histogram(g, cache)

    def expectation(self, g, cache=False):
        return self.ring.expectation(g, cache)


def annealed_samples(model, n, temperatures, seed=0):
    """Draw ``n`` spellings, sweeping once per entry of ``temperatures``.

    Weights are divided by the temperature of each sweep; a schedule of all
    ones is plain Gibbs sampling.
    """
    if n < 1:
        raise PreconditionError("need at least one sample")
    temperatures = [float(t) for t in temperatures]
    if any(not t > 0 for t in temperatures):
        raise PreconditionError("temperatures must be positive")
    lengths = np.random.default_rng(derive_seed(seed, 0)).choice(len(model.length_dist), size=n, p=model.length_dist)
    groups, order = {}, {}
    for l in np.unique(lengths):
        l = int(l)
        where = np.flatnonzero(lengths == l)
        rng = np.random.default_rng(derive_seed(seed, 1, l))
        codes = _run_chains(model, l, len(where), temperatures, rng)
        codes.setflags(write=False)
        groups[l] = (codes, np.full(len(where), 1.0 / n))
        order[l] = where
    return SampleBatch(RingSet(groups), seed, len(temperatures), model.fingerprint(), order)


def sample_batch(model, n=DEFAULT_SAMPLES, burn_in=DEFAULT_BURN_IN, seed=0):
    """``n`` independent Gibbs chains, each run for ``burn_in`` sweeps at temperature 1."""
    return annealed_samples(model, n, [1.0] * burn_in, seed)


def sample_fixed_length(model, l, n, burn_in=DEFAULT_BURN_IN, seed=0):
    """Ring codes of ``n`` chains all of length ``l``."""
    rng = np.random.default_rng(derive_seed(seed, 1, l))
    return _run_chains(model, l, n, [1.0] * burn_in, rng)


def estimate_histogram(batch, g):
    """Monte Carlo occurrence histogram ``g_k`` of pattern ``g``."""
    return batch.histogram(g)


def length_reweighting(model, p):
    """Per-length factor ``p(l) / p_model(l)`` that moves sample averages onto
    the fitting distribution (all ones when the length distributions agree)."""
    from .exact import length_weights

    lw = length_weights(model, p)
    out = np.zeros_like(lw)
    np.divide(lw, model.length_dist, out=out, where=model.length_dist > 0)
    return out


def estimate_iis_coefficients(batch, model, p):
    """Monte Carlo coefficients ``a[m, i]`` of the iterative scaling polynomials.

    ``a[0, i] = -p[f_i]``; for ``m >= 1``, ``a[m, i]`` is the sample average
    of ``f_i(w) [f#(w) = m]``.
    """
    from .exact import _coefficients

    factor = length_reweighting(model, p)
    ring = RingSet({l: (codes, w * factor[l]) for l, (codes, w) in batch.ring.groups.items()})
    fm = batch.ring.feature_matrix(model.features)
    return _coefficients(ring, fm, p.expectations(model.features))
