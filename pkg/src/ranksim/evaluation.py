"""Metrics, cross-validation and a linear baseline.

Accuracy is the unweighted (macro) mean of per-class F1 scores; cost is
process CPU time.
"""

from dataclasses import asdict, dataclass, field
import time
import warnings

import numpy as np
import scipy.sparse as sp

from .data import as_matrix
from .errors import ConfigError, InvalidInputError
from .transform import RankSimilarityTransform


def per_class_f1(y_true, y_pred, classes=None):
    """F1 per class; classes default to those seen in either vector.

    Returns ``(classes, scores)``.  A class with no true and no predicted
    samples scores 0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise InvalidInputError("y_true and y_pred must be vectors of equal length")
    if y_true.size == 0:
        raise InvalidInputError("cannot score empty predictions")
    if classes is None:
        classes = np.union1d(y_true, y_pred)
    classes = np.asarray(classes)
    scores = np.empty(classes.size)
    for i, c in enumerate(classes):
        tp = np.count_nonzero((y_pred == c) & (y_true == c))
        fp = np.count_nonzero((y_pred == c) & (y_true != c))
        fn = np.count_nonzero((y_pred != c) & (y_true == c))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores[i] = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return classes, scores


def macro_f1(y_true, y_pred, classes=None):
    """Unweighted mean of per-class F1 scores."""
    return float(np.mean(per_class_f1(y_true, y_pred, classes)[1]))


def log_loss(y_true, proba, epsilon=1e-15):
    """Mean cross-entropy of probability rows against label rows.

    ``y_true`` is an N x c indicator (or weight) matrix.
    """
    Y = np.asarray(y_true, dtype=np.float64)
    P = np.asarray(proba, dtype=np.float64)
    if Y.shape != P.shape:
        raise InvalidInputError(f"label matrix {Y.shape} and probabilities {P.shape} differ in shape")
    P = np.clip(P, epsilon, 1.0 - epsilon)
    return float(-np.mean(np.sum(Y * np.log(P), axis=1)))


def kfold_indices(y, k_folds=10, seed=42):
    """Fold number for every sample, stratified by class where possible.

    Each class is shuffled and dealt round-robin over the folds, continuing
    where the previous class stopped so fold sizes stay balanced.  If some
    class has fewer samples than folds, plain shuffled folds are used.
    """
    y = np.asarray(y)
    N = y.shape[0]
    if not 2 <= k_folds <= N:
        raise ConfigError(f"k_folds must be between 2 and {N}")
    rng = np.random.default_rng(seed)
    folds = np.empty(N, dtype=np.int64)
    classes, counts = np.unique(y, return_counts=True) if y.ndim == 1 else (None, None)
    if classes is None or counts.min() < k_folds:
        if classes is not None:
            warnings.warn("a class has fewer samples than folds; using unstratified folds", UserWarning, stacklevel=2)
        folds[rng.permutation(N)] = np.arange(N) % k_folds
        return folds
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in classes])
    folds[order] = np.arange(N) % k_folds
    return folds


@dataclass
class EvalReport:
    macro_f1: float
    per_class_f1: list
    classes: list
    macro_f1_std: float = 0.0
    log_loss: float = None
    fit_seconds: float = 0.0
    predict_seconds: float = 0.0
    fold_results: list = field(default_factory=list)

    def to_dict(self):
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def kfold_cv(X, y, model_builder, k_folds=10, seed=42, with_proba=False):
    """K-fold cross-validation of a classifier.

    ``model_builder()`` must return a fresh object with ``fit(X, y)`` and
    ``predict(X)``; with ``with_proba`` it also needs ``predict_proba``
    and ``classes_``.  Classes missing from a fold's test labels count
    only if the model predicted them (as F1 = 0).
    """
    X = as_matrix(X)
    y = np.asarray(y)
    folds = kfold_indices(y, k_folds, seed)
    results = []
    for f in range(k_folds):
        test = np.flatnonzero(folds == f)
        train = np.flatnonzero(folds != f)
        model = model_builder()
        fit_time = timeit(lambda: model.fit(X[train], y[train]))
        pred_time = timeit(lambda: model.predict(X[test]))
        classes, scores = per_class_f1(y[test], pred_time.result)
        loss = None
        if with_proba:
            P = model.predict_proba(X[test])
            Y = (y[test][:, None] == np.asarray(model.classes_)[None, :]).astype(np.float64)
            loss = log_loss(Y, P)
        results.append(EvalReport(float(np.mean(scores)), scores.tolist(), classes.tolist(),
                                  log_loss=loss, fit_seconds=fit_time.seconds,
                                  predict_seconds=pred_time.seconds))
    all_classes = sorted({c for r in results for c in r.classes})
    per_class = [float(np.mean([r.per_class_f1[r.classes.index(c)] for r in results if c in r.classes]))
                 for c in all_classes]
    fold_f1 = np.array([r.macro_f1 for r in results])
    losses = [r.log_loss for r in results if r.log_loss is not None]
    return EvalReport(
        macro_f1=float(fold_f1.mean()),
        per_class_f1=per_class,
        classes=all_classes,
        macro_f1_std=float(fold_f1.std()),
        log_loss=float(np.mean(losses)) if losses else None,
        fit_seconds=float(sum(r.fit_seconds for r in results)),
        predict_seconds=float(sum(r.predict_seconds for r in results)),
        fold_results=results,
    )


def _dense(X):
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)


class LinearProbe:
    """One-vs-rest ridge regression on one-hot targets, argmax decision.

    The intercept is left unpenalized by centering.  The dual form is
    used when there are more features than samples.
    """

    def __init__(self, alpha=1e-3):
        self.alpha = alpha

    def fit(self, X, y):
        X = _dense(X)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        Y = (y[:, None] == self.classes_[None, :]).astype(np.float64)
        x_mean = X.mean(axis=0)
        y_mean = Y.mean(axis=0)
        Xc = X - x_mean
        Yc = Y - y_mean
        N, n = Xc.shape
        if n <= N:
            self.coef_ = np.linalg.solve(Xc.T @ Xc + self.alpha * np.eye(n), Xc.T @ Yc)
        else:
            self.coef_ = Xc.T @ np.linalg.solve(Xc @ Xc.T + self.alpha * np.eye(N), Yc)
        self.intercept_ = y_mean - x_mean @ self.coef_
        return self

    def decision_function(self, X):
        return _dense(X) @ self.coef_ + self.intercept_

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def linear_probe(X_train, y_train, X_test, alpha=1e-3):
    """Fit a :class:`LinearProbe` and predict ``X_test``."""
    return LinearProbe(alpha).fit(X_train, y_train).predict(X_test)


@dataclass
class Timing:
    seconds: float
    std: float
    samples: list
    result: object = None


def timeit(op, repeat=1):
    """Process CPU time of ``op()``; mean and spread over ``repeat`` calls."""
    samples = []
    result = None
    for _ in range(max(1, repeat)):
        t0 = time.process_time()
        result = op()
        samples.append(max(0.0, time.process_time() - t0))
    return Timing(float(np.mean(samples)), float(np.std(samples)), samples, result)


class TransformProbe:
    """Rank similarity transform followed by a :class:`LinearProbe`."""

    def __init__(self, n_filters="auto", distribution="rank", k=25, seed=42, alpha=1e-3, binary=False):
        self.n_filters = n_filters
        self.distribution = distribution
        self.k = k
        self.seed = seed
        self.alpha = alpha
        self.binary = binary

    def fit(self, X, y):
        self.transform_ = RankSimilarityTransform(self.n_filters, self.distribution, self.k, seed=self.seed,
                                                  binary=self.binary).fit(X)
        self.probe_ = LinearProbe(self.alpha).fit(self.transform_.transform(X), y)
        return self

    @property
    def classes_(self):
        return self.probe_.classes_

    def predict(self, X):
        return self.probe_.predict(self.transform_.transform(X))
