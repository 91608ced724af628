"""Random field models of strings with greedy feature induction."""

from .errors import (
    AbsoluteContinuityError,
    ConvergenceError,
    CorpusError,
    DataError,
    EnumerationRefused,
    FieldForgeError,
    InvariantViolation,
    ModelFileError,
    ModelVersionError,
    PatternError,
    PreconditionError,
)
from .exact import EnumerableSpace
from .gain import binary_gain, integer_gain, rank_candidates
from .gibbs import sample_batch
from .iis import newton_update, train
from .induction import InductionConfig, candidate_set, run
from .io import load_model, save_model
from .model import EmpiricalDistribution, FieldModel, match_count, tilt
from .patterns import ExtendedSymbol, FeaturePattern, pattern
from .spelling import atomic_features, ingest, spelling_log_prob

__version__ = "0.1.0"
