"""Exception hierarchy.

``DataError`` subclasses signal bad input (corpus, model files, patterns) and
map to exit status 2 in the CLI; the rest are numerical or internal failures.
"""


class FieldForgeError(Exception):
    pass


class DataError(FieldForgeError):
    pass


class PatternError(DataError):
    pass


class CorpusError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModelFileError(DataError):
    def __init__(self, message, line=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{':'.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.path = path


class ModelVersionError(ModelFileError):
    pass


class EnumerationRefused(DataError):
    """The requested configuration space exceeds the enumeration budget."""


class AbsoluteContinuityError(FieldForgeError):
    """The reference distribution puts mass where the model has none (D = inf)."""


class ConvergenceError(FieldForgeError):
    pass


class PreconditionError(FieldForgeError, ValueError):
    pass


class InvariantViolation(FieldForgeError):
    """An internal guarantee failed; indicates a solver bug rather than bad input."""
