"""Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on bad input data.
All randomness derives from ``--seed``; outputs contain no timestamps unless
``--timing`` is given, so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings

import numpy as np

from . import exact, iis
from .errors import AbsoluteContinuityError, DataError, EnumerationRefused
from .gain import rank_candidates
from .gibbs import DEFAULT_BURN_IN, DEFAULT_SAMPLES, annealing_schedule, annealed_samples, sample_batch
from .induction import GAIN_THRESHOLD, InductionConfig, candidate_set, run
from .io import fmt, load_model, save_model
from .model import FieldModel
from .patterns import PRINTABLE, FeaturePattern, is_printable
from .spelling import atomic_features, load_builtin_corpus, read_corpus, score_words

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonnegative(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return v


def load_alphabet(source):
    """``builtin`` (all printable ASCII) or a file whose non-whitespace characters form the alphabet."""
    if source in (None, "builtin"):
        return PRINTABLE
    try:
        with open(source, encoding="ascii") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read alphabet file {source!r}: {exc}") from None
    chars = []
    for c in text:
        if c.isspace():
            continue
        if not is_printable(c):
            raise DataError(f"alphabet file {source!r} contains non-printable character {c!r}")
        if c not in chars:
            chars.append(c)
    if not chars:
        raise DataError(f"alphabet file {source!r} is empty")
    return "".join(chars)


def _corpus(path):
    if path in (None, "builtin"):
        return load_builtin_corpus()
    return read_corpus(path).distribution()


def _space(alphabet, p):
    return exact.EnumerableSpace(alphabet, p.max_length)


def _write_tsv(out, header, rows):
    out.write("\t".join(header) + "\n")
    for row in rows:
        out.write("\t".join(str(x) for x in row) + "\n")


def _open_log(path):
    return open(path, "w", encoding="ascii", newline="\n")


def _num(x):
    return format(float(x), ".12g")


# subcommands


def cmd_ingest(args, out):
    p = _corpus(args.corpus)
    L = p.length_distribution()
    out.write(f"words\t{len(p)}\n")
    out.write(f"tokens\t{p.total}\n")
    out.write(f"max_length\t{p.max_length}\n")
    out.write(f"mean_length\t{_num(np.arange(len(L)) @ L)}\n")
    _write_tsv(out, ["length", "probability"], [(l, fmt(v)) for l, v in enumerate(L)])


def cmd_induce(args, out):
    alphabet = load_alphabet(args.alphabet)
    p = _corpus(args.corpus)
    space = _space(alphabet, p) if args.mode == "exact" else None
    config = InductionConfig(
        max_features=args.max_features,
        samples=args.samples,
        burn_in=args.burn_in,
        iis_tol=args.tol,
        iis_max_iter=args.max_iter,
        alphabet=alphabet,
        seed=args.seed,
        gain_threshold=args.gain_threshold,
        space=space,
    )
    model, log = run(p, config)
    if args.log:
        with _open_log(args.log) as fh:
            fh.write(log.to_tsv(args.timing))
    if args.out:
        save_model(model, args.out)
    _write_tsv(out, ["feature", "weight", "beta"],
               [(f.text, fmt(w), _num(math.exp(w))) for f, w in zip(model.features, model.weights)])
    if log.complete:
        out.write("# induction complete: no candidate above the gain threshold\n")


def _read_features(path):
    feats = []
    with open(path, encoding="ascii") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                feats.append(FeaturePattern.parse(line))
            except DataError as exc:
                raise DataError(f"{path}: line {n}: {exc}") from None
    return feats


def cmd_train(args, out):
    alphabet = load_alphabet(args.alphabet)
    p = _corpus(args.corpus)
    L = p.length_distribution()
    if args.model:
        start = load_model(args.model, alphabet)
        if len(start.length_dist) < len(L):
            raise DataError("corpus has words longer than the model's length distribution allows")
        model = FieldModel(start.features, start.weights, np.pad(L, (0, len(start.length_dist) - len(L))), alphabet)
    else:
        feats = _read_features(args.features)
        model = FieldModel(tuple(dict.fromkeys(feats)), np.zeros(len(set(feats))), L, alphabet)
    space = _space(alphabet, p) if args.mode == "exact" else None
    rows = []

    def record(state, _elapsed):
        g = state.gammas[-1]
        finite = [abs(x) for x in g if math.isfinite(x)]
        row = [state.iteration, _num(state.history[-1]), _num(max(finite, default=0.0))]
        if args.timing:
            row.append(f"{_elapsed:.3f}")
        rows.append(row)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        state = iis.fit(model, p, args.mode, space, args.tol, args.max_iter, args.samples, args.burn_in,
                        args.seed, record)
    if args.log:
        second = "divergence" if args.mode == "exact" else "loglik_gain_estimate"
        with _open_log(args.log) as fh:
            _write_tsv(fh, ["iteration", second, "max_abs_gamma"] + (["seconds"] if args.timing else []), rows)
    if args.out:
        save_model(state.model, args.out)
    _write_tsv(out, ["feature", "weight", "beta"],
               [(f.text, fmt(w), _num(math.exp(w))) for f, w in zip(state.model.features, state.model.weights)])


def _model_or_uniform(args, alphabet):
    if args.model:
        return load_model(args.model, alphabet)
    return FieldModel.uniform(load_builtin_corpus().length_distribution(), alphabet)


def cmd_sample(args, out):
    alphabet = load_alphabet(args.alphabet)
    model = _model_or_uniform(args, alphabet)
    if args.anneal:
        batch = annealed_samples(model, args.n, annealing_schedule(args.burn_in), args.seed)
    else:
        batch = sample_batch(model, args.n, args.burn_in, args.seed)
    for w in batch.configs:
        out.write(w + "\n")


def cmd_score(args, out):
    alphabet = load_alphabet(args.alphabet)
    model = load_model(args.model, alphabet)
    if args.words:
        words = list(args.words)
    else:
        src = open(args.input, encoding="ascii", newline="") if args.input else sys.stdin
        try:
            words = [line.rstrip("\n").rstrip("\r") for line in src]
        except UnicodeDecodeError:
            raise DataError("input is not ASCII") from None
        finally:
            if args.input:
                src.close()
    scores = score_words(model, words, samples=args.samples, burn_in=args.burn_in, seed=args.seed)
    _write_tsv(out, ["word", "log_prob", "status"], [(s.word, _num(s.log_prob), s.status) for s in scores])


def cmd_inspect(args, out):
    alphabet = load_alphabet(args.alphabet)
    model = load_model(args.model, alphabet)
    out.write(f"# features\t{len(model.features)}\n")
    out.write(f"# max_length\t{model.max_length}\n")
    _write_tsv(out, ["index", "feature", "weight", "beta"],
               [(i, f.text, fmt(w), _num(math.exp(w))) for i, (f, w) in enumerate(zip(model.features, model.weights))])
    if args.gains:
        p = _corpus(args.corpus)
        stats = sample_batch(model, args.samples, args.burn_in, args.seed).ring
        cands = candidate_set(model.features, atomic_features(alphabet))
        ranked = rank_candidates(cands, stats, p, allow_boundary=False)
        out.write("\n")
        _write_tsv(out, ["rank", "pattern", "p_expect", "alpha_hat", "gain", "status"],
                   [(k, r.candidate.text, _num(r.p_expect), _num(r.alpha_hat), _num(r.gain), r.status)
                    for k, r in enumerate(ranked[: args.top], 1)])


def build_parser():
    parser = _Parser(prog="fieldforge", description="Induce and use random field models of word spellings.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(sp, seed=True):
        sp.add_argument("--alphabet", default="builtin", help="'builtin' or a file listing the characters")
        if seed:
            sp.add_argument("--seed", type=_seed, default=0)

    sp = sub.add_parser("ingest", help="summarise a corpus file")
    sp.add_argument("corpus", nargs="?", default="builtin")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("induce", help="greedy feature induction")
    sp.add_argument("--corpus", default="builtin")
    sp.add_argument("--max-features", type=_positive, default=10)
    sp.add_argument("--samples", type=_positive, default=DEFAULT_SAMPLES)
    sp.add_argument("--burn-in", type=_nonnegative, default=DEFAULT_BURN_IN)
    sp.add_argument("--gain-threshold", type=float, default=GAIN_THRESHOLD)
    sp.add_argument("--tol", type=float, default=None, help="iterative scaling tolerance")
    sp.add_argument("--max-iter", type=_positive, default=None, help="iterative scaling iterations per feature")
    sp.add_argument("--mode", choices=("exact", "mc"), default="mc")
    sp.add_argument("--log")
    sp.add_argument("--out", help="write the final model here")
    sp.add_argument("--timing", action="store_true", help="add wall-clock seconds to the log")
    common(sp)
    sp.set_defaults(func=cmd_induce)

    sp = sub.add_parser("train", help="iterative scaling on a fixed feature set")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="start from this model file")
    src.add_argument("--features", help="file with one pattern per line (weights start at 0)")
    sp.add_argument("--corpus", default="builtin")
    sp.add_argument("--mode", choices=("exact", "mc"), default="mc")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iter", type=_positive, default=iis.MAX_ITER)
    sp.add_argument("--samples", type=_positive, default=DEFAULT_SAMPLES)
    sp.add_argument("--burn-in", type=_nonnegative, default=DEFAULT_BURN_IN)
    sp.add_argument("--log")
    sp.add_argument("--out")
    sp.add_argument("--timing", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sample", help="draw spellings from a model")
    sp.add_argument("--model", help="model file (default: uniform field with the builtin length distribution)")
    sp.add_argument("--n", type=_positive, default=10)
    sp.add_argument("--burn-in", type=_nonnegative, default=DEFAULT_BURN_IN)
    sp.add_argument("--anneal", action="store_true", help="cool from temperature 2 to 0.8 during burn-in")
    common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("score", help="log-probabilities of words (TSV)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", help="file with one word per line (default: the arguments, else stdin)")
    sp.add_argument("words", nargs="*")
    sp.add_argument("--samples", type=_positive, default=2000, help="chains per point when Z is estimated")
    sp.add_argument("--burn-in", type=_nonnegative, default=DEFAULT_BURN_IN)
    common(sp)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("inspect", help="print a model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--gains", action="store_true", help="also rank candidate features")
    sp.add_argument("--corpus", default="builtin")
    sp.add_argument("--samples", type=_positive, default=DEFAULT_SAMPLES)
    sp.add_argument("--burn-in", type=_nonnegative, default=DEFAULT_BURN_IN)
    sp.add_argument("--top", type=_positive, default=20)
    common(sp)
    sp.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        args.func(args, out)
    except EnumerationRefused as exc:
        print(f"fieldforge: {exc} (use --mode mc)", file=sys.stderr)
        return EXIT_DATA
    except (DataError, AbsoluteContinuityError, OSError, UnicodeDecodeError) as exc:
        print(f"fieldforge: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
