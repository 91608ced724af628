"""Improved Iterative Scaling.

Each iteration solves, independently for every feature ``i``,

    sum_w q(w) f_i(w) exp(gamma_i f#(w)) = p[f_i]

and then applies all the ``gamma_i`` at once.  Written as a polynomial in
``beta = exp(gamma)`` the left side has nonnegative coefficients, so the root
is unique and Newton's method finds it reliably.

Two modes share the update: ``exact`` enumerates the configuration space and
tracks the true divergence; ``mc`` estimates the coefficients from a fresh
Gibbs batch every iteration.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import exact
from .errors import AbsoluteContinuityError, ConvergenceError, InvariantViolation, PreconditionError
from .gibbs import (
    DEFAULT_BURN_IN,
    DEFAULT_SAMPLES,
    derive_seed,
    estimate_iis_coefficients,
    length_reweighting,
    sample_batch,
)
from .model import WEIGHT_CLAMP

log = logging.getLogger(__name__)

EXACT_TOL = 1e-9
MC_TOL = 1e-3
MAX_ITER = 500
MC_PATIENCE = 3
MONOTONE_SLACK = 1e-10


def newton_update(coeffs, max_iter=100):
    """Log of the positive root of ``sum_m coeffs[m] beta**m``.

    Requires ``coeffs[0] <= 0`` and ``coeffs[m] >= 0`` otherwise.  Returns
    ``-inf`` when the root is at zero or when no root exists (all
    ``coeffs[m >= 1]`` vanish).  Newton runs on ``t = log beta`` applied to
    ``log sum_m a_m e^{m t} - log(-a_0)``, which is convex and increasing, so
    the iteration converges from any start.
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise PreconditionError("coefficients must be a nonempty vector")
    if a[0] > 0:
        raise PreconditionError(f"constant coefficient must be <= 0, got {a[0]}")
    if np.any(a[1:] < 0):
        raise PreconditionError("coefficients of positive powers must be nonnegative")
    m = np.flatnonzero(a[1:] > 0) + 1
    if m.size == 0 or a[0] == 0:
        return -math.inf
    la = np.log(a[m])
    target = math.log(-a[0])
    mf = m.astype(float)
    t = 0.0
    for _ in range(max_iter):
        z = la + mf * t
        lz = logsumexp(z)
        phi = lz - target
        slope = float(np.exp(z - lz) @ mf)
        step = phi / slope
        t -= step
        if abs(phi) <= 1e-15 or abs(step) <= 1e-15 * max(1.0, abs(t)):
            return float(t)
    raise ConvergenceError(f"newton_update did not converge (last step {step:.3e})")


def polynomial_value(coeffs, beta):
    a = np.asarray(coeffs, dtype=float)
    return float(np.polynomial.polynomial.polyval(beta, a))


class _ExactEvaluator:
    """Cached enumeration of one feature list for exact-mode training."""

    def __init__(self, model, p, space):
        space.check_model(model)
        self.space = space
        self.p = p
        self.lw = exact.length_weights(model, p)
        self.lengths = [int(l) for l in np.flatnonzero(self.lw > 0)]
        self.enum = exact._Enumeration(space, model.features, self.lengths)
        self.target = p.expectations(model.features)
        self.length_dist = model.length_dist
        # feature values of the training words, for the divergence
        self.p_fm = p.ring.feature_matrix(model.features)
        self.p_groups = p.ring.groups
        self.p_entropy = float(sum(w @ np.log(w) for _, w in p.ring.groups.values()))

    def fitting(self, weights):
        cond = self.enum.log_conditionals(weights)
        return {l: (self.lw[l] * np.exp(cond[l][0]), cond[l][1]) for l in self.lengths}

    def coefficients(self, weights):
        fit = self.fitting(weights)
        ring = exact.RingSet({l: (self.space.codes(l), fit[l][0]) for l in self.lengths})
        return exact._coefficients(ring, self.enum.F, self.target)

    def divergence(self, weights):
        fit = self.fitting(weights)
        total = self.p_entropy
        for l, (_, w) in self.p_groups.items():
            if self.length_dist[l] == 0:
                raise AbsoluteContinuityError(f"model gives zero probability to length {l}")
            s = self.p_fm[l] @ weights if len(weights) else 0.0
            total -= float(w @ (np.log(self.length_dist[l]) + s - fit[l][1]))
        return max(total, 0.0)

    def residual(self, weights):
        if not len(weights):
            return 0.0
        fit = self.fitting(weights)
        q = sum(fit[l][0] @ self.enum.F[l] for l in self.lengths)
        return float(np.max(np.abs(q - self.target)))


@dataclass(frozen=True, eq=False)
class IISState:
    """Model and history of an iterative scaling run.

    ``history`` holds the exact divergence after each iteration in exact mode
    (entry 0 is the starting point) and the estimated cumulative
    log-likelihood gain in Monte Carlo mode.
    """

    model: object
    p: object
    mode: str
    iteration: int = 0
    history: tuple = ()
    gammas: tuple = ()
    unobserved: tuple = ()
    evaluator: object = field(default=None, repr=False)

    @classmethod
    def start(cls, model, p, space=None):
        """Initial state; exact mode when ``space`` is given."""
        exact.length_weights(model, p)  # absolute continuity on lengths
        for w in p.counts:
            if any(c not in model.alphabet for c in w):
                raise AbsoluteContinuityError(f"training word {w!r} uses characters outside the model alphabet")
        if space is None:
            return cls(model, p, "mc", history=(0.0,))
        ev = _ExactEvaluator(model, p, space)
        return cls(model, p, "exact", history=(ev.divergence(model.weights),), evaluator=ev)

    @property
    def divergence(self):
        return self.history[-1] if self.mode == "exact" else None


def _apply(weights, gammas):
    out = weights.copy()
    for i, g in enumerate(gammas):
        if g == -math.inf:
            out[i] = WEIGHT_CLAMP
        else:
            out[i] += g
    return out


def iis_step(state, coeffs):
    """One simultaneous update of every weight from the coefficient matrix."""
    coeffs = np.asarray(coeffs, dtype=float)
    nfeat = len(state.model.features)
    if coeffs.shape[1] != nfeat:
        raise PreconditionError("coefficient matrix does not match the feature count")
    gammas = np.zeros(nfeat)
    unobserved = []
    for i in range(nfeat):
        col = coeffs[:, i]
        if state.mode == "mc" and col[0] < 0 and not np.any(col[1:] > 0):
            # the batch never shows this feature: no information this round
            unobserved.append(i)
            continue
        gammas[i] = newton_update(col)
    weights = _apply(state.model.weights, gammas)
    model = state.model.with_weights(weights)
    history = state.history
    if state.mode == "exact":
        d = state.evaluator.divergence(weights)
        if d > history[-1] + MONOTONE_SLACK:
            raise InvariantViolation(f"divergence increased from {history[-1]!r} to {d!r} at iteration {state.iteration + 1}")
        history = history + (d,)
    return replace(
        state,
        model=model,
        iteration=state.iteration + 1,
        history=history,
        gammas=state.gammas + (gammas,),
        unobserved=state.unobserved + (tuple(unobserved),),
    )


def estimate_likelihood_gain(batch, model, p, delta):
    """Monte Carlo estimate of ``L(delta o q) - L(q)`` from a batch drawn from ``q``."""
    factor = length_reweighting(model, p)
    fm = batch.ring.feature_matrix(model.features)
    target = p.expectations(model.features)
    gain = float(delta @ target)
    total = 0.0
    for l, (codes, _) in batch.ring.groups.items():
        if factor[l] == 0:
            continue
        s = fm[l] @ delta if len(delta) else np.zeros(codes.shape[0])
        gain -= factor[l] * model.length_dist[l] * (logsumexp(s) - math.log(len(s)))
        total += factor[l] * model.length_dist[l]
    if total > 0 and abs(total - 1.0) > 1e-12:
        # lengths missing from the batch: spread their weight over the rest
        gain = float(delta @ target) - (float(delta @ target) - gain) / total
    return gain


def _max_gamma(gammas, weights, skip):
    vals = [abs(g) for i, g in enumerate(gammas) if i not in skip and not (g == -math.inf and weights[i] == WEIGHT_CLAMP)]
    return max(vals, default=0.0)


def fit(model, p, mode="exact", space=None, tol=None, max_iter=MAX_ITER, samples=DEFAULT_SAMPLES,
        burn_in=DEFAULT_BURN_IN, seed=0, callback=None):
    """Run iterative scaling from ``model`` and return the final ``IISState``.

    Exact mode stops when the relative divergence decrease or the largest
    constraint violation drops below ``tol``.  Monte Carlo mode stops once the
    largest weight update stays below ``tol`` for three iterations running.
    Hitting ``max_iter`` returns the current state with a ``RuntimeWarning``.
    """
    if mode not in ("exact", "mc"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" and space is None:
        raise ValueError("exact mode needs an enumerable space")
    tol = (EXACT_TOL if mode == "exact" else MC_TOL) if tol is None else tol
    state = IISState.start(model, p, space if mode == "exact" else None)
    if not model.features:
        return state
    t0 = time.perf_counter()

    if mode == "exact":
        ev = state.evaluator
        if ev.residual(state.model.weights) < tol:
            return state
        for _ in range(max_iter):
            prev = state.history[-1]
            state = iis_step(state, ev.coefficients(state.model.weights))
            if callback:
                callback(state, time.perf_counter() - t0)
            cur = state.history[-1]
            rel = (prev - cur) / prev if prev > 0 else 0.0
            if rel < tol or ev.residual(state.model.weights) < tol:
                return state
    else:
        streak = 0
        for k in range(max_iter):
            batch = sample_batch(state.model, samples, burn_in, derive_seed(seed, k))
            coeffs = estimate_iis_coefficients(batch, state.model, p)
            before = state.model
            state = iis_step(state, coeffs)
            delta = state.model.weights - before.weights
            est = estimate_likelihood_gain(batch, before, p, delta)
            state = replace(state, history=state.history + (state.history[-1] + est,))
            if callback:
                callback(state, time.perf_counter() - t0)
            size = _max_gamma(state.gammas[-1], before.weights, set(state.unobserved[-1]))
            streak = streak + 1 if size < tol else 0
            if streak >= MC_PATIENCE:
                return state
    warnings.warn(f"iterative scaling stopped at max_iter={max_iter} before converging", RuntimeWarning, stacklevel=2)
    return state


def train(model, p, mode="exact", space=None, tol=None, max_iter=MAX_ITER, samples=DEFAULT_SAMPLES,
          burn_in=DEFAULT_BURN_IN, seed=0, callback=None):
    """Iterative scaling to the maximum-likelihood weights; returns the model."""
    return fit(model, p, mode, space, tol, max_iter, samples, burn_in, seed, callback).model


def auxiliary_value(gamma, model, p, space):
    """The lower bound ``A(gamma, q)`` on the log-likelihood gain of ``gamma``.

    ``A = gamma . p[f] - sum_w q(w) sum_i (f_i(w) / f#(w)) (exp(gamma_i f#(w)) - 1)``
    with ``q`` the fitting distribution; configurations with ``f# = 0`` add
    nothing.  This equals ``1 + gamma . p[f] - sum_w q(w) sum_i ...`` once the
    ``f# = 0`` configurations are counted with ``exp(0) = 1``, and is exactly
    zero at ``gamma = 0``.  Components of ``gamma`` may be ``-inf``.
    """
    gamma = np.asarray(gamma, dtype=float)
    target = p.expectations(model.features)
    with np.errstate(invalid="ignore"):
        lin = np.where(target == 0, 0.0, gamma * target)
    ring = exact.fitting_distribution(model, p, space)
    fm = ring.feature_matrix(model.features)
    total = 0.0
    for l, (_, w) in ring.groups.items():
        F = fm[l].astype(float)
        fs = F.sum(axis=1)
        nz = fs > 0
        if not np.any(nz):
            continue
        ratio = F[nz] / fs[nz, None]
        with np.errstate(invalid="ignore", over="ignore"):
            e = np.expm1(np.outer(fs[nz], gamma))
        e = np.where(ratio == 0, 0.0, e)
        total += float(w[nz] @ (ratio * e).sum(axis=1))
    return float(lin.sum() - total)


def log_likelihood_change(gamma, model, p, space):
    """Exact ``L(gamma o q) - L(q)`` (``-inf`` components map to the weight clamp)."""
    gamma = np.asarray(gamma, dtype=float)
    new = model.with_weights(_apply(model.weights, gamma))
    return exact.kl_divergence(p, model, space) - exact.kl_divergence(p, new, space)
