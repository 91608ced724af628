"""Plain-text model files.

::

    fieldforge-model v1
    LEN <length> <probability>      one line per length 0..L
    FEAT <pattern> <weight>         one line per feature, in index order

Numbers are written with 17 significant digits so weights survive a round
trip bit for bit; the format never depends on the locale.
"""

from __future__ import annotations

import math

from .errors import DataError, ModelFileError, ModelVersionError
from .model import FieldModel
from .patterns import PRINTABLE, FeaturePattern

MAGIC = "fieldforge-model"
VERSION = "v1"
HEADER = f"{MAGIC} {VERSION}"


def fmt(x):
    return format(float(x), ".17g")


def dumps_model(model):
    lines = [HEADER]
    lines += [f"LEN {l} {fmt(p)}" for l, p in enumerate(model.length_dist)]
    lines += [f"FEAT {f.text} {fmt(w)}" for f, w in zip(model.features, model.weights)]
    return "\n".join(lines) + "\n"


def save_model(model, path):
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(dumps_model(model))
    except OSError as exc:
        raise ModelFileError(f"cannot write model: {exc.strerror}", path=path) from None


def _number(text, n, path):
    try:
        x = float(text)
    except ValueError:
        raise ModelFileError(f"bad number {text!r}", n, path) from None
    if not math.isfinite(x):
        raise ModelFileError(f"non-finite number {text!r}", n, path)
    return x


def loads_model(text, alphabet=PRINTABLE, path=None):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ModelFileError("empty model file", 1, path)
    head = lines[0].rstrip("\r")
    if head != HEADER:
        if head.startswith(MAGIC + " "):
            raise ModelVersionError(f"unsupported model version {head[len(MAGIC) + 1:]!r} (expected {VERSION})", 1, path)
        raise ModelFileError(f"missing header {HEADER!r}", 1, path)
    lengths, features, weights = [], [], []
    for n, raw in enumerate(lines[1:], 2):
        line = raw.rstrip("\r")
        parts = line.split(" ")
        if len(parts) != 3 or parts[0] not in ("LEN", "FEAT"):
            raise ModelFileError(f"malformed record {line!r}", n, path)
        kind, a, b = parts
        if kind == "LEN":
            if features:
                raise ModelFileError("LEN record after FEAT records", n, path)
            if not a.isdigit() or int(a) != len(lengths):
                raise ModelFileError(f"expected LEN {len(lengths)}, found LEN {a}", n, path)
            lengths.append(_number(b, n, path))
        else:
            try:
                g = FeaturePattern.parse(a)
            except DataError as exc:
                raise ModelFileError(f"invalid feature: {exc}", n, path) from None
            if g in features:
                raise ModelFileError(f"duplicate feature {a!r}", n, path)
            features.append(g)
            weights.append(_number(b, n, path))
    if not lengths:
        raise ModelFileError("no LEN records (truncated file?)", len(lines), path)
    try:
        return FieldModel(tuple(features), weights, lengths, alphabet)
    except ValueError as exc:
        raise ModelFileError(str(exc), len(lines), path) from None


def load_model(path, alphabet=PRINTABLE):
    """Read a model file; the alphabet is not stored and must be supplied."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ModelFileError(f"cannot read model: {exc.strerror}", path=path) from None
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise ModelFileError("model file is not ASCII", path=path) from None
    return loads_model(text, alphabet, path)
