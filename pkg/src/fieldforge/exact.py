"""Brute-force evaluation of fields on small alphabets.

Every quantity here is computed by enumerating all strings of each length, so
it is exact up to floating point.  These functions are the reference that the
Monte Carlo estimators and the iterative solvers are tested against.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .errors import AbsoluteContinuityError, ConvergenceError, EnumerationRefused
from .model import WEIGHT_CLAMP, RingSet
from .patterns import LENGTH_CODE, char_code

ENUMERATION_BUDGET = 10**7


class EnumerableSpace:
    """All strings of length ``0..max_length`` over ``alphabet``."""

    def __init__(self, alphabet, max_length, budget=ENUMERATION_BUDGET):
        self.alphabet = str(alphabet)
        self.max_length = int(max_length)
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ValueError("alphabet must be nonempty with distinct characters")
        A = len(self.alphabet)
        self.size = sum(A**l for l in range(self.max_length + 1))
        if self.size > budget:
            raise EnumerationRefused(
                f"{self.size} configurations over alphabet of size {A} up to length {self.max_length} "
                f"exceeds the enumeration budget of {budget}"
            )
        self._codes = {}

    def codes(self, l):
        """``(A**l, l + 1)`` ring codes of every string of length ``l``, in lexicographic alphabet order."""
        if l not in self._codes:
            if not 0 <= l <= self.max_length:
                raise ValueError(f"length {l} outside 0..{self.max_length}")
            ac = np.array([char_code(c) for c in self.alphabet], dtype=np.uint8)
            A = len(ac)
            out = np.full((A**l, l + 1), LENGTH_CODE, dtype=np.uint8)
            if l:
                idx = np.indices((A,) * l).reshape(l, -1).T
                out[:, :l] = ac[idx]
            out.setflags(write=False)
            self._codes[l] = out
        return self._codes[l]

    def words(self, l):
        codes = self.codes(l)
        if l == 0:
            return [""]
        return [bytes(row + 0x21).decode("ascii") for row in codes[:, :l]]

    def check_model(self, model):
        if set(model.alphabet) != set(self.alphabet):
            raise ValueError("model alphabet differs from the enumerated alphabet")
        if model.lengths and max(model.lengths) > self.max_length:
            raise ValueError("model puts mass on lengths beyond the enumerated space")


class _Enumeration:
    """Feature matrices for a fixed feature list, reused across weight vectors."""

    def __init__(self, space, features, lengths):
        self.space = space
        self.lengths = list(lengths)
        ring = RingSet({l: (space.codes(l), np.ones(space.codes(l).shape[0])) for l in self.lengths})
        self.F = ring.feature_matrix(features)

    def log_conditionals(self, weights, base=None):
        """Per length: ``log q(w | l)`` for every enumerated w, and ``log Z_l``."""
        out = {}
        for l in self.lengths:
            s = self.F[l] @ weights if len(weights) else np.zeros(self.F[l].shape[0])
            if base is not None:
                s = s + base[l]
            lz = logsumexp(s)
            out[l] = (s - lz, lz)
        return out


def _log_partition_single(model, space, l):
    space.check_model(model)
    enum = _Enumeration(space, model.features, [l])
    return enum.log_conditionals(model.weights)[l][1]


def log_partition(model, space, l):
    return float(_log_partition_single(model, space, l))


def partition(model, space, l):
    """``Z_l``: sum of ``exp(lambda . f)`` over all strings of length ``l``."""
    return float(np.exp(_log_partition_single(model, space, l)))


def distribution(model, space):
    """The model as an exact weighted ``RingSet`` (weights are ``q(w)``)."""
    space.check_model(model)
    enum = _Enumeration(space, model.features, model.lengths)
    cond = enum.log_conditionals(model.weights)
    groups = {}
    for l in model.lengths:
        groups[l] = (space.codes(l), model.length_dist[l] * np.exp(cond[l][0]))
    return RingSet(groups)


def probabilities(model, space):
    """``{word: q(word)}`` over the support lengths."""
    ring = distribution(model, space)
    out = {}
    for l, (_, w) in ring.groups.items():
        out.update(zip(space.words(l), w))
    return out


def expectation(model, space, g):
    """Exact ``q[g]`` including the length mixture."""
    return distribution(model, space).expectation(g)


def exact_histogram(model, space, g):
    """Exact occurrence histogram ``g_k = q(g = k)``."""
    return distribution(model, space).histogram(g)


def _log_q_of(model, space, words):
    """``log q(w)`` for specific words, raising if any has zero probability."""
    space.check_model(model)
    lengths = sorted({len(w) for w in words})
    for w in words:
        if len(w) > model.max_length or model.length_dist[len(w)] == 0:
            raise AbsoluteContinuityError(f"model gives zero probability to length {len(w)} (word {w!r})")
        if any(c not in model.alphabet for c in w):
            raise AbsoluteContinuityError(f"word {w!r} uses characters outside the model alphabet")
    if max(lengths) > space.max_length:
        raise ValueError("word longer than the enumerated space")
    enum = _Enumeration(space, model.features, lengths)
    log_z = {l: v[1] for l, v in enum.log_conditionals(model.weights).items()}
    ring = RingSet.from_words(words, np.ones(len(words)))
    fm = ring.feature_matrix(model.features)
    out = {}
    for l, (codes, _) in ring.groups.items():
        s = fm[l] @ model.weights if model.features else np.zeros(codes.shape[0])
        lq = np.log(model.length_dist[l]) + s - log_z[l]
        for w, v in zip([w for w in words if len(w) == l], lq):
            out[w] = v
    return out


def kl_divergence(p, model, space):
    """Exact ``D(p || q)`` for an empirical distribution ``p``."""
    words = list(p.counts)
    log_q = _log_q_of(model, space, words)
    total = 0.0
    for w, pw in p.entries.items():
        total += pw * (np.log(pw) - log_q[w])
    return max(float(total), 0.0)


def model_divergence(p_model, q_model, space):
    """Exact ``D(p || q)`` between two models on the same space."""
    space.check_model(p_model)
    space.check_model(q_model)
    lengths = p_model.lengths
    for l in lengths:
        if l > q_model.max_length or q_model.length_dist[l] == 0:
            raise AbsoluteContinuityError(f"second model gives zero probability to length {l}")
    ep = _Enumeration(space, p_model.features, lengths).log_conditionals(p_model.weights)
    eq = _Enumeration(space, q_model.features, lengths).log_conditionals(q_model.weights)
    total = 0.0
    for l in lengths:
        lp = np.log(p_model.length_dist[l]) + ep[l][0]
        lq = np.log(q_model.length_dist[l]) + eq[l][0]
        total += float(np.sum(np.exp(lp) * (lp - lq)))
    return max(total, 0.0)


def length_weights(model, p):
    """``p(l)`` over the model's length grid; the weighting used when fitting."""
    lw = p.length_distribution(max(model.max_length, p.max_length))
    if len(lw) > len(model.length_dist):
        if np.any(lw[len(model.length_dist):] > 0):
            raise AbsoluteContinuityError("reference distribution has words longer than the model allows")
    lw = lw[: len(model.length_dist)]
    if np.any((lw > 0) & (model.length_dist == 0)):
        raise AbsoluteContinuityError("reference distribution puts mass on a length the model excludes")
    return lw


def fitting_distribution(model, p, space):
    """``p(l) q(w | l)`` as a ring: the distribution whose feature expectations
    the maximum-likelihood fit must match.  Equal to ``q`` itself whenever the
    model's length distribution is the empirical one."""
    space.check_model(model)
    lw = length_weights(model, p)
    lengths = [int(l) for l in np.flatnonzero(lw > 0)]
    enum = _Enumeration(space, model.features, lengths)
    cond = enum.log_conditionals(model.weights)
    return RingSet({l: (space.codes(l), lw[l] * np.exp(cond[l][0])) for l in lengths})


def exact_iis_coefficients(model, p, space):
    """Exact polynomial coefficients ``a[m, i]`` for one iterative scaling step.

    ``a[0, i] = -p[f_i]`` and ``a[m, i] = sum_w q(w) f_i(w) [f#(w) = m]``.
    """
    ring = fitting_distribution(model, p, space)
    fm = ring.feature_matrix(model.features)
    return _coefficients(ring, fm, p.expectations(model.features))


def _coefficients(ring, fm, p_expect):
    nfeat = len(p_expect)
    M = max((int(fm[l].sum(axis=1).max()) for l in ring.groups if fm[l].size), default=0)
    a = np.zeros((M + 1, nfeat))
    a[0] = -p_expect
    for l, (_, w) in ring.groups.items():
        F = fm[l]
        fs = F.sum(axis=1)
        for m in np.unique(fs):
            if m == 0:
                continue
            sel = fs == m
            a[m] += w[sel] @ F[sel]
    return a


def ml_oracle(features, p, space, q0, tol=1e-9, max_iter=500):
    """Maximum-likelihood weights for ``features`` on top of ``q0``, by damped Newton.

    Minimises ``D(p || (lambda . f) o q0)`` over ``lambda`` with the exact
    gradient ``q[f] - p[f]`` and the exact Hessian, using a backtracking line
    search.  Features never seen in ``p`` are sent to the weight clamp, which
    represents the boundary point where they have zero probability.
    """
    space.check_model(q0)
    features = list(features)
    lw = length_weights(q0, p)
    lengths = [int(l) for l in np.flatnonzero(lw > 0)]
    base_enum = _Enumeration(space, q0.features, lengths)
    base = {l: (base_enum.F[l] @ q0.weights if q0.features else np.zeros(space.codes(l).shape[0])) for l in lengths}
    enum = _Enumeration(space, features, lengths)
    target = p.expectations(features)

    free = target > 0
    lam = np.where(free, 0.0, WEIGHT_CLAMP)

    def evaluate(lam_free):
        full = lam.copy()
        full[free] = lam_free
        cond = enum.log_conditionals(full, base)
        obj = sum(lw[l] * cond[l][1] for l in lengths) - full @ target
        mean = np.zeros(len(features))
        hess = np.zeros((len(features), len(features)))
        for l in lengths:
            q = np.exp(cond[l][0])
            F = enum.F[l].astype(float)
            m = q @ F
            mean += lw[l] * m
            hess += lw[l] * ((F * q[:, None]).T @ F - np.outer(m, m))
        return obj, (mean - target)[free], hess[np.ix_(free, free)]

    x = lam[free]
    obj, grad, hess = evaluate(x)
    for _ in range(max_iter):
        if not np.any(free) or np.linalg.norm(grad) <= tol:
            break
        step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = grad @ step
        if not slope < 0:
            step, slope = -grad, -(grad @ grad)
        t = 1.0
        while True:
            cand = x + t * step
            c_obj, c_grad, c_hess = evaluate(cand)
            if c_obj <= obj + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        x, obj, grad, hess = cand, c_obj, c_grad, c_hess
    else:
        if np.linalg.norm(grad) > tol:
            raise ConvergenceError(f"ml_oracle: gradient norm {np.linalg.norm(grad):.3e} after {max_iter} iterations")
    lam[free] = x

    out = q0
    for g, w in zip(features, lam):
        i = out.index(g)
        if i is None:
            out = out.with_features(out.features + (g,), np.append(out.weights, w))
        else:
            ws = out.weights.copy()
            ws[i] = WEIGHT_CLAMP if w == WEIGHT_CLAMP else ws[i] + w
            out = out.with_weights(ws)
    return out


def log_likelihood(p, model, space):
    """``L(q) = -D(p || q)``."""
    return -kl_divergence(p, model, space)


def residual(model, p, space):
    """``max_i |q[f_i] - p[f_i]|`` under the fitting distribution."""
    if not model.features:
        return 0.0
    ring = fitting_distribution(model, p, space)
    fm = ring.feature_matrix(model.features)
    q = sum(w @ fm[l] for l, (_, w) in ring.groups.items())
    return float(np.max(np.abs(q - p.expectations(model.features))))
