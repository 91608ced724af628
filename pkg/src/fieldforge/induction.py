"""Greedy feature induction.

Starting from the uniform field, each outer iteration draws one batch from
the current model, scores every candidate (atoms, and atoms attached to
either end of an active feature) by its gain, adds the best one at its
optimal weight and refits all weights by iterative scaling.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

from scipy.special import logsumexp

from . import exact, iis
from .errors import DataError
from .gain import rank_candidates
from .gibbs import DEFAULT_BURN_IN, DEFAULT_SAMPLES, derive_seed, length_reweighting, sample_batch
from .model import FieldModel, tilt
from .patterns import PRINTABLE, FeaturePattern

GAIN_THRESHOLD = 1e-4
MC_IIS_MAX_ITER = 25
TIE_BREAK = "lexicographic"


class InductionComplete(Exception):
    """No candidate improves the model by more than the gain threshold."""


@dataclass(frozen=True)
class InductionConfig:
    max_features: int
    samples: int = DEFAULT_SAMPLES
    burn_in: int = DEFAULT_BURN_IN
    iis_tol: float | None = None
    iis_max_iter: int | None = None
    iis_samples: int | None = None
    alphabet: str = PRINTABLE
    atoms: tuple | None = None
    seed: int = 0
    tie_break: str = TIE_BREAK
    gain_threshold: float = GAIN_THRESHOLD
    space: object = None

    def __post_init__(self):
        if int(self.max_features) != self.max_features or self.max_features < 1:
            raise ValueError(f"max_features must be a positive integer, got {self.max_features!r}")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.tie_break != TIE_BREAK:
            raise ValueError(f"unsupported tie-break policy {self.tie_break!r}")

    @property
    def mode(self):
        return "mc" if self.space is None else "exact"

    def atom_patterns(self):
        if self.atoms is not None:
            return [a if isinstance(a, FeaturePattern) else FeaturePattern.of(a) for a in self.atoms]
        from .spelling import atomic_features

        return atomic_features(self.alphabet)


@dataclass(frozen=True)
class InductionRecord:
    iteration: int
    feature: FeaturePattern
    alpha_hat: float
    gain: float
    divergence: float
    candidates: int
    weight: float
    iis_iterations: int
    iis_converged: bool
    seconds: float = field(default=0.0, compare=False)

    FIELDS = ("iteration", "feature", "alpha_hat", "gain", "divergence", "candidates", "weight",
              "iis_iterations", "iis_converged")

    def row(self, timing=False):
        vals = [str(self.iteration), self.feature.text, _num(self.alpha_hat), _num(self.gain),
                _num(self.divergence), str(self.candidates), _num(self.weight), str(self.iis_iterations),
                "yes" if self.iis_converged else "no"]
        if timing:
            vals.append(f"{self.seconds:.3f}")
        return vals


def _num(x):
    return format(float(x), ".17g")


@dataclass
class InductionLog:
    records: list = field(default_factory=list)
    initial_divergence: float = math.nan
    complete: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def features(self):
        return [r.feature for r in self.records]

    def to_tsv(self, timing=False):
        head = list(InductionRecord.FIELDS) + (["seconds"] if timing else [])
        lines = ["\t".join(head)] + ["\t".join(r.row(timing)) for r in self.records]
        return "\n".join(lines) + "\n"


def candidate_set(active, atoms):
    """Atoms plus every atom attached to either end of an active feature.

    With no active features this is just the atoms.  Invalid concatenations
    and already active patterns are dropped; order is first appearance.
    """
    atoms = [a if isinstance(a, FeaturePattern) else FeaturePattern.of(a) for a in atoms]
    active = list(active)
    seen = set(active)
    out = []

    def add(g):
        if g is not None and g not in seen:
            seen.add(g)
            out.append(g)

    for a in atoms:
        add(a)
    for s in active:
        for a in atoms:
            add(a.concat(s))
            add(s.concat(a))
    return out


def uniform_divergence(p, length_dist, alphabet_size):
    """Exact ``D(p || uniform field)`` with the given length distribution."""
    total = 0.0
    for w, pw in p.entries.items():
        total += pw * (math.log(pw) - math.log(length_dist[len(w)]) + len(w) * math.log(alphabet_size))
    return max(total, 0.0)


def _tilt_gain_estimate(ring, model, p, g, alpha, p_g):
    """Sample estimate of the log-likelihood gain of ``alpha * g`` for a per-length field."""
    factor = length_reweighting(model, p)
    counts = ring.counts(g)
    est = alpha * p_g
    for l in counts:
        if factor[l] > 0:
            est -= factor[l] * model.length_dist[l] * (logsumexp(alpha * counts[l]) - math.log(len(counts[l])))
    return float(est)


def _warm(ring, features):
    for f in features:
        ring.positions(f, cache=True)


def induction_step(model, p, config, iteration=0, divergence=math.nan):
    """Add one feature and refit; returns ``(model, record)``.

    Raises ``InductionComplete`` when the best gain is not above the threshold.
    """
    t0 = time.perf_counter()
    step_seed = derive_seed(config.seed, iteration)
    atoms = config.atom_patterns()
    candidates = candidate_set(model.features, atoms)
    _warm(p.ring, model.features)
    if config.mode == "exact":
        stats = exact.distribution(model, config.space)
    else:
        stats = sample_batch(model, config.samples, config.burn_in, derive_seed(step_seed, 0))
        stats = stats.ring
    _warm(stats, model.features)
    ranked = rank_candidates(candidates, stats, p, allow_boundary=config.mode == "exact")
    if not ranked or not ranked[0].gain > config.gain_threshold:
        raise InductionComplete(f"best gain {ranked[0].gain if ranked else 0.0:.3g} at or below threshold")
    best = ranked[0]
    g = best.candidate
    tilted = tilt(model, g, best.alpha_hat)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        state = iis.fit(
            tilted,
            p,
            mode=config.mode,
            space=config.space,
            tol=config.iis_tol,
            max_iter=config.iis_max_iter or (iis.MAX_ITER if config.mode == "exact" else MC_IIS_MAX_ITER),
            samples=config.iis_samples or config.samples,
            burn_in=config.burn_in,
            seed=derive_seed(step_seed, 1),
        )
    converged = not any("max_iter" in str(w.message) for w in caught)

    if config.mode == "exact":
        div = state.history[-1]
    else:
        div = divergence - _tilt_gain_estimate(stats, model, p, g, best.alpha_hat, best.p_expect) - state.history[-1]
    new = state.model
    record = InductionRecord(
        iteration=iteration + 1,
        feature=g,
        alpha_hat=best.alpha_hat,
        gain=best.gain,
        divergence=div,
        candidates=len(ranked),
        weight=new.weight(g),
        iis_iterations=state.iteration,
        iis_converged=converged,
        seconds=time.perf_counter() - t0,
    )
    return new, record


def run(p, config, on_step=None):
    """Induce up to ``config.max_features`` features from the uniform field.

    ``on_step(model, record)`` is called after every accepted feature.
    """
    if p is None or len(p) == 0:
        raise DataError("cannot induce features from an empty corpus")
    length_dist = p.length_distribution()
    model = FieldModel.uniform(length_dist, config.alphabet)
    for w in p.counts:
        if any(c not in config.alphabet for c in w):
            raise DataError(f"corpus word {w!r} uses characters outside the alphabet")
    log = InductionLog()
    if config.mode == "exact":
        log.initial_divergence = exact.kl_divergence(p, model, config.space)
    else:
        log.initial_divergence = uniform_divergence(p, length_dist, len(config.alphabet))
    div = log.initial_divergence
    for k in range(config.max_features):
        try:
            model, record = induction_step(model, p, config, k, div)
        except InductionComplete:
            log.complete = True
            break
        div = record.divergence
        log.records.append(record)
        if on_step is not None:
            on_step(model, record)
    return model, log
