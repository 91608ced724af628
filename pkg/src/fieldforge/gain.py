"""Gain of a candidate feature and its optimal one-parameter tilt.

With all other weights held fixed, tilting the model ``q`` by ``alpha * g``
improves the log-likelihood by

    G(alpha) = alpha * p[g] - log sum_k g_k exp(alpha * k)

where ``g_k`` is the probability under ``q`` that ``g`` occurs ``k`` times.
``G`` is concave; its maximiser solves ``p[g] = E_alpha[k]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, PreconditionError

# largest |alpha| the solver will return; equals the weight clamp magnitude
ALPHA_BOUND = 50.0
NEWTON_MAX_ITER = 100
STATIONARITY_TOL = 1e-10

CLOSED_FORM = "closed-form"
NEWTON = "newton-converged"
BOUNDARY = "no-solution-boundary"
ZERO_SUPPORT = "excluded-zero-support"
CONSTANT = "excluded-constant"


@dataclass(frozen=True)
class GainReport:
    candidate: object
    alpha_hat: float
    gain: float
    status: str
    p_expect: float = math.nan
    iterations: int = 0
    residual: float = 0.0

    @property
    def excluded(self):
        return self.status in (ZERO_SUPPORT, CONSTANT)


def _log_hist(hist):
    hist = np.asarray(hist, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(hist)


def gain_curve(p_g, hist, alpha):
    """``alpha * p_g - log sum_k hist[k] exp(alpha k)``."""
    lh = _log_hist(hist)
    k = np.arange(len(lh))
    return float(alpha * p_g - logsumexp(lh + alpha * k))


def tilted_mean(hist, alpha):
    """Mean occurrence count after tilting the histogram by ``exp(alpha k)``."""
    lh = _log_hist(hist)
    k = np.arange(len(lh))
    z = lh + alpha * k
    w = np.exp(z - logsumexp(z))
    return float(w @ k)


def _tilted_moments(lh, k, t):
    z = lh + t * k
    w = np.exp(z - logsumexp(z))
    mean = w @ k
    return mean, w @ (k - mean) ** 2


def binary_gain(p_g, q_g, candidate=None):
    """Closed-form optimum for a 0/1 feature with model expectation ``q_g``.

    ``alpha = log(p (1 - q) / (q (1 - p)))`` and the gain is the divergence
    between Bernoulli(p) and Bernoulli(q).
    """
    if not 0.0 < q_g < 1.0:
        raise PreconditionError(f"model expectation must lie strictly in (0, 1), got {q_g}")
    if not 0.0 <= p_g <= 1.0:
        raise PreconditionError(f"reference expectation must lie in [0, 1], got {p_g}")
    if p_g == 0.0:
        return GainReport(candidate, -math.inf, -math.log1p(-q_g), ZERO_SUPPORT, p_g)
    if p_g == 1.0:
        return GainReport(candidate, math.inf, -math.log(q_g), ZERO_SUPPORT, p_g)
    alpha = math.log(p_g * (1 - q_g) / (q_g * (1 - p_g)))
    gain = p_g * math.log(p_g / q_g) + (1 - p_g) * math.log((1 - p_g) / (1 - q_g))
    return GainReport(candidate, alpha, max(gain, 0.0), CLOSED_FORM, p_g)


def integer_gain(p_g, hist, candidate=None):
    """Optimal tilt for a count-valued feature from its occurrence histogram.

    Solves ``p_g = sum k g_k b^k / sum g_k b^k`` for ``t = log b`` by Newton's
    method, falling back to bisection whenever a step leaves the bracket.
    """
    hist = np.asarray(hist, dtype=float)
    if p_g < 0:
        raise PreconditionError("reference expectation must be nonnegative")
    if hist.ndim != 1 or hist.size == 0 or np.any(hist < 0) or abs(hist.sum() - 1.0) > 1e-9:
        raise PreconditionError("histogram must be a probability vector")
    support = np.flatnonzero(hist > 0)
    k_min, k_max = int(support[0]), int(support[-1])
    lh = _log_hist(hist)
    k = np.arange(len(hist), dtype=float)

    if p_g == 0.0:
        gain = -lh[0] if hist[0] > 0 else math.inf
        return GainReport(candidate, -math.inf, float(gain), ZERO_SUPPORT, p_g)
    if k_min == k_max and k_max > 0:
        return GainReport(candidate, 0.0, 0.0, CONSTANT, p_g)
    if p_g >= k_max or p_g <= k_min:
        alpha = ALPHA_BOUND if p_g >= k_max else -ALPHA_BOUND
        return GainReport(candidate, alpha, max(gain_curve(p_g, hist, alpha), 0.0), BOUNDARY, p_g)

    lo, hi = -ALPHA_BOUND, ALPHA_BOUND
    if _tilted_moments(lh, k, hi)[0] < p_g or _tilted_moments(lh, k, lo)[0] > p_g:
        # the root lies beyond the bound: report the clamped end
        alpha = hi if _tilted_moments(lh, k, hi)[0] < p_g else lo
        return GainReport(candidate, alpha, max(gain_curve(p_g, hist, alpha), 0.0), BOUNDARY, p_g)

    t = 0.0
    for it in range(1, NEWTON_MAX_ITER + 1):
        mean, var = _tilted_moments(lh, k, t)
        r = mean - p_g
        if r > 0:
            hi = t
        else:
            lo = t
        if abs(r) <= 1e-14 * max(1.0, p_g) or hi - lo <= 1e-15 * max(1.0, abs(t)):
            break
        step = t - r / var if var > 0 else math.nan
        t = step if lo < step < hi else 0.5 * (lo + hi)
    mean, _ = _tilted_moments(lh, k, t)
    res = abs(mean - p_g)
    if res > STATIONARITY_TOL:
        raise ConvergenceError(f"integer_gain: stationarity residual {res:.3e} after {it} iterations")
    return GainReport(candidate, t, max(gain_curve(p_g, hist, t), 0.0), NEWTON, p_g, it, res)


def rank_candidates(candidates, stats, p, tie_tol=1e-12, allow_boundary=True):
    """Gain reports for all usable candidates, best first.

    ``stats`` is anything with a ``histogram(g, cache)`` method describing
    the current model: a Gibbs ``SampleBatch`` or an exact distribution.
    Reference expectations come exactly from ``p``.  Candidates the
    reference never exhibits, and constant candidates, are dropped.  With
    ``allow_boundary=False`` candidates whose optimum lies at the clamp are
    dropped too: on a sample their gain mostly reflects the clamp value.
    Gains within ``tie_tol`` of each other are ordered by pattern text.
    """
    reports = []
    for g in candidates:
        pg = p.ring.expectation(g)
        if pg == 0.0:
            continue
        rep = integer_gain(pg, stats.histogram(g), g)
        if rep.excluded or (rep.status == BOUNDARY and not allow_boundary):
            continue
        reports.append(rep)
    reports.sort(key=lambda r: (-r.gain, r.candidate.text))
    out = []
    i = 0
    while i < len(reports):
        j = i + 1
        while j < len(reports) and reports[i].gain - reports[j].gain <= tie_tol:
            j += 1
        out.extend(sorted(reports[i:j], key=lambda r: r.candidate.text))
        i = j
    return out
