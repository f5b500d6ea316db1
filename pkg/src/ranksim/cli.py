"""Command-line interface: ``rsf fit|predict|transform|eval|inspect|discriminability|profile``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 model error
(corrupt file or model/data dimension mismatch).  Outputs are written
atomically, so a failed command never leaves a partial file behind.
"""

import argparse
import io
import json
import sys
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .classifiers import (RankSimilarityClassifier, RankSimilarityProbabilisticClassifier, RSCModel, RSPCModel,
                          predict, predict_proba, rsc_fit, rspc_fit)
from .confusion import discriminability_matrix, feature_distributions, feature_profiles
from .data import label_matrix, load_csv, load_idx, load_svmlight
from .errors import ConfigError, DataFormatError, DimensionMismatchError, InvalidInputError, ModelFormatError
from .evaluation import LinearProbe, TransformProbe, kfold_cv
from .filters import DEFAULT_K, DEFAULT_SEED, FilterBank, TrainConfig, fit
from .modelfile import atomic_write, load_model, save_model
from .transform import transform

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MODEL = 4


# ---------------------------------------------------------------- input

def _format(path, fmt):
    if fmt != "auto":
        return fmt
    name = path.lower().removesuffix(".gz")
    if name.endswith((".svm", ".svmlight", ".libsvm")):
        return "svmlight"
    if "idx" in name.rsplit("/", 1)[-1] or name.endswith("-ubyte"):
        return "idx"
    return "csv"


def _load_label_file(path):
    if _format(path, "auto") == "idx":
        y = load_idx(path)
    else:
        y, _ = load_csv(path)
        if y.shape[1] != 1:
            raise DataFormatError(f"{path}: label file must have one column")
        y = y[:, 0]
        if np.all(y == np.round(y)):
            y = y.astype(np.int64)
    if y.ndim != 1:
        raise DataFormatError(f"{path}: labels must be a vector")
    return y


def load_data(args, need_labels):
    """Feature matrix and labels (vector, indicator matrix or None) for a command."""
    fmt = _format(args.data, args.format)
    labels = None
    if fmt == "svmlight":
        X, label_sets = load_svmlight(args.data)
        if need_labels:
            if all(len(s) == 1 for s in label_sets):
                labels = np.array([s[0] for s in label_sets])
            else:
                labels, _ = label_matrix(label_sets)
    elif fmt == "idx":
        X = load_idx(args.data)
        if X.ndim != 2:
            X = X.reshape(X.shape[0], -1).astype(np.float64)
        X = np.asarray(X, dtype=np.float64)
    else:
        column = args.label_column
        if column is None and need_labels and args.labels is None:
            column = -1
        X, labels = load_csv(args.data, args.has_header, column)
    if args.labels is not None:
        labels = _load_label_file(args.labels)
    if need_labels and labels is None:
        raise DataFormatError("labels are required: use --labels or --label-column")
    if labels is not None and labels.shape[0] != X.shape[0]:
        raise DataFormatError(f"{labels.shape[0]} labels for {X.shape[0]} samples")
    return X, labels


# ---------------------------------------------------------------- output

def _emit_text(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text.encode())


def _csv_text(rows):
    buf = io.StringIO()
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _floats(M):
    return [[repr(float(v)) for v in row] for row in np.asarray(M)]


def _label_text(v):
    return str(v.item() if isinstance(v, np.generic) else v)


# ---------------------------------------------------------------- commands

def _config(args):
    n_filters = "auto" if args.n_filters == "auto" else _positive_int(args.n_filters, "--n-filters")
    return TrainConfig(n_filters=n_filters, distribution=args.distribution, tol=args.tol,
                       max_iter=args.max_iter, seed=args.seed, k=args.k)


def _positive_int(text, flag):
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"{flag} must be 'auto' or an integer, got {text!r}") from None
    if v < 1:
        raise ConfigError(f"{flag} must be positive")
    return v


def cmd_fit(args):
    config = _config(args)
    X, y = load_data(args, need_labels=args.mode != "transform")
    if args.mode == "transform":
        model = fit(X, config)
    elif args.mode == "rsc":
        if y.ndim != 1:
            raise DataFormatError("rsc needs one label per sample; use --mode rspc for multilabel data")
        model = rsc_fit(X, y, config)
    else:
        model = rspc_fit(X, y, config)
    save_model(model, args.out)
    print(f"wrote {args.out}: {model.n_filters} filters over {X.shape[1]} features", file=sys.stderr)


def cmd_predict(args):
    model = load_model(args.model)
    if isinstance(model, FilterBank):
        raise ConfigError("transform-only models cannot predict; use `rsf transform`")
    X, _ = load_data(args, need_labels=False)
    if args.proba:
        P = predict_proba(model, X, args.k)
        header = [",".join(_label_text(c) for c in model.class_ids)]
        _emit_text("\n".join(header) + "\n" + _csv_text(_floats(P)), args.out)
    else:
        y = predict(model, X, args.k)
        _emit_text("".join(_label_text(v) + "\n" for v in y), args.out)


def cmd_transform(args):
    model = load_model(args.model)
    bank = model.bank if isinstance(model, RSPCModel) else model
    if isinstance(model, RSCModel):
        raise ConfigError("rsc models hold one bank per class; fit with --mode transform or rspc")
    X, _ = load_data(args, need_labels=False)
    A = transform(X, bank, args.k, args.binary_scaling).activations
    if args.out is not None and args.out.endswith(".npy"):
        buf = io.BytesIO()
        np.save(buf, A)
        atomic_write(args.out, buf.getvalue())
    else:
        _emit_text(_csv_text(_floats(A)), args.out)


def cmd_eval(args):
    config = _config(args)
    X, y = load_data(args, need_labels=True)
    if y.ndim != 1:
        raise DataFormatError("eval needs one label per sample")
    n_filters = config.n_filters
    builders = {
        "rsc": lambda: RankSimilarityClassifier(n_filters, config.distribution, config.k, config.tol,
                                                config.max_iter, config.seed),
        "rspc": lambda: RankSimilarityProbabilisticClassifier(n_filters, config.distribution, config.k,
                                                              config.tol, config.max_iter, config.seed),
        "probe": lambda: LinearProbe(),
        "rst-probe": lambda: TransformProbe(n_filters, config.distribution, config.k, config.seed),
    }
    report = kfold_cv(X, y, builders[args.mode], args.folds, args.seed, with_proba=args.mode in ("rsc", "rspc"))
    out = {"mode": args.mode, "folds": args.folds, "seed": args.seed, **report.to_dict()}
    _emit_text(json.dumps(out, indent=2) + "\n", args.out)


def _bank_summary(bank):
    return {"n_filters": bank.n_filters, "distribution": "rank" if bank.distribution is None else "map",
            "seed": bank.seed}


def cmd_inspect(args):
    model = load_model(args.model)
    if isinstance(model, FilterBank):
        info = {"mode": "transform", "n_filters": model.n_filters, "n_features": model.n_features,
                "k_default": model.k_default, "seed": model.seed,
                "distribution": "rank" if model.distribution is None else "map"}
        W = model.weights
    else:
        L = model.labels
        labeled = L.sum(axis=1) > 0
        info = {"mode": "rsc" if isinstance(model, RSCModel) else "rspc",
                "n_filters": model.n_filters, "n_features": model.n_features, "n_classes": model.n_classes,
                "k_default": model.k_default, "classes": [_label_text(c) for c in model.class_ids],
                "filters_per_class": np.bincount(np.argmax(L[labeled], axis=1), minlength=L.shape[1]).tolist(),
                "unlabeled_filters": int(np.count_nonzero(~labeled))}
        if isinstance(model, RSCModel):
            info["banks"] = [_bank_summary(b) for b in model.banks]
        else:
            info.update(_bank_summary(model.bank))
        W = model.weights
    if args.weights_csv:
        atomic_write(args.weights_csv, _csv_text(_floats(W)).encode())
    _emit_text(json.dumps(info, indent=2) + "\n", args.out)


def cmd_discriminability(args):
    X, _ = load_data(args, need_labels=False)
    features, order = feature_distributions(X)
    D_sorted = discriminability_matrix(features)
    # back to the original feature order
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    D = D_sorted[np.ix_(inv, inv)]
    _emit_text(_csv_text(_floats(D)), args.out)


def cmd_profile(args):
    X, _ = load_data(args, need_labels=False)
    prof = feature_profiles(X)
    rows = [["position", "mean", "rank", "confusion"]]
    rows += [[str(i), repr(float(a)), repr(float(b)), repr(float(c))]
             for i, (a, b, c) in enumerate(zip(prof["mean"], prof["rank"], prof["confusion"]))]
    _emit_text(_csv_text(rows), args.out)


# ---------------------------------------------------------------- parser

def _add_data(p):
    p.add_argument("data", help="input data file (csv, svmlight or idx)")
    p.add_argument("--format", choices=["auto", "csv", "svmlight", "idx"], default="auto")
    p.add_argument("--labels", help="separate label file (idx or single-column csv)")
    p.add_argument("--label-column", type=int, help="csv column holding labels (negative counts from the end)")
    p.add_argument("--has-header", action="store_true", help="skip the first csv line")


def _add_train(p):
    p.add_argument("--n-filters", default="auto", help="'auto' or a filter count (for rsc: total over classes)")
    p.add_argument("--distribution", choices=["rank", "confusion"], default="rank")
    p.add_argument("--tol", type=int, default=None, help="stop when at most this many samples move")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="informative filters per sample")


def build_parser():
    parser = argparse.ArgumentParser(prog="rsf", description="Rank similarity filters")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=int, default=0, help="worker thread cap, 0 = all cores")
    common.add_argument("--out", help="output path (default stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="train a model file")
    _add_data(p)
    _add_train(p)
    p.add_argument("--mode", choices=["rsc", "rspc", "transform"], default="rsc")
    p.set_defaults(func=cmd_fit, need_out=True)

    p = sub.add_parser("predict", parents=[common], help="predict labels or probabilities")
    p.add_argument("model")
    _add_data(p)
    p.add_argument("--k", type=int, default=None, help="override the model's k")
    p.add_argument("--proba", action="store_true", help="emit class probabilities")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("transform", parents=[common], help="rank similarity transform to csv or .npy")
    p.add_argument("model")
    _add_data(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--binary-scaling", action="store_true", help="1 for every informative filter")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("eval", parents=[common], help="k-fold cross-validation report as JSON")
    _add_data(p)
    _add_train(p)
    p.add_argument("--mode", choices=["rsc", "rspc", "probe", "rst-probe"], default="rsc")
    p.add_argument("--folds", type=int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", parents=[common], help="model metadata as JSON")
    p.add_argument("model")
    p.add_argument("--weights-csv", help="also dump filter weights to this csv")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("discriminability", parents=[common], help="pairwise feature discriminability csv")
    _add_data(p)
    p.set_defaults(func=cmd_discriminability)

    p = sub.add_parser("profile", parents=[common], help="sorted mean, rank and confusion profiles csv")
    _add_data(p)
    p.set_defaults(func=cmd_profile)
    return parser


def _exit_code(exc):
    if isinstance(exc, (ModelFormatError, DimensionMismatchError)):
        return EXIT_MODEL
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataFormatError, InvalidInputError, OSError)):
        return EXIT_DATA
    return None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "need_out", False) and not args.out:
        parser.error("--out is required")
    if args.threads < 0:
        parser.error("--threads must be non-negative")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            with threadpool_limits(limits=args.threads or None):
                args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        print(f"rsf {args.command}: error: {exc}", file=sys.stderr)
        return code
    return 0


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"rsf: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
