"""Rank similarity classifiers.

RSC trains one filter bank per class and predicts the class owning the
most activated filter.  RSPC trains a single bank on all data and gives
each filter a probabilistic label: the normalized sum of the label rows
of the samples assigned to it.  Both produce class probabilities from the
rank similarity transform, taking for each class the largest
label-weighted scaled activation.
"""

from dataclasses import dataclass, replace
from functools import cached_property
import warnings

import numpy as np

from .data import as_matrix
from .errors import ConfigError, DimensionMismatchError, InvalidInputError
from .filters import (DEFAULT_SEED, FilterBank, TrainConfig, _row_chunks, activations, assign, auto_n_filters,
                      fit, member_sums)
from .transform import effective_k, scale_rows


@dataclass(eq=False)
class RSCModel:
    banks: list
    class_ids: np.ndarray

    @property
    def n_classes(self):
        return len(self.class_ids)

    @cached_property
    def filter_class(self):
        return np.concatenate([np.full(b.n_filters, i) for i, b in enumerate(self.banks)])

    @property
    def n_filters(self):
        return int(sum(b.n_filters for b in self.banks))

    @property
    def n_features(self):
        return self.banks[0].n_features

    @property
    def k_default(self):
        return self.banks[0].k_default

    @cached_property
    def labels(self):
        """One-hot label row per filter."""
        L = np.zeros((self.n_filters, self.n_classes))
        L[np.arange(self.n_filters), self.filter_class] = 1.0
        return L

    @cached_property
    def _image(self):
        return np.vstack([b.image for b in self.banks])

    @cached_property
    def _row_sums(self):
        return np.concatenate([b.row_sums for b in self.banks])

    @cached_property
    def weights(self):
        return np.vstack([b.weights for b in self.banks])

    def activations(self, X):
        return activations(X, self._image, self._row_sums)


@dataclass(eq=False)
class RSPCModel:
    bank: FilterBank
    labels: np.ndarray
    class_ids: np.ndarray

    def __post_init__(self):
        if self.labels.shape[0] != self.bank.n_filters:
            raise InvalidInputError("label matrix must have one row per filter")

    @property
    def n_classes(self):
        return len(self.class_ids)

    @property
    def n_filters(self):
        return self.bank.n_filters

    @property
    def n_features(self):
        return self.bank.n_features

    @property
    def k_default(self):
        return self.bank.k_default

    @property
    def weights(self):
        return self.bank.weights

    def activations(self, X):
        return self.bank.activations(X)


def class_filter_counts(counts, n_filters="auto"):
    """Split a filter budget over classes in proportion to their sizes.

    ``"auto"`` takes the budget from the total sample count.  Shares are
    allotted by largest remainder, then clipped to ``[1, class size]``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    N = int(counts.sum())
    total = auto_n_filters(N) if n_filters == "auto" else int(n_filters)
    share = total * counts / N
    m = np.floor(share).astype(np.int64)
    short = total - int(m.sum())
    if short > 0:
        m[np.argsort(-(share - m), kind="stable")[:short]] += 1
    clipped = np.clip(m, 1, counts)
    if np.any(clipped < m):
        warnings.warn("some classes have fewer samples than their filter share; using one filter per sample",
                      UserWarning, stacklevel=2)
    return clipped


def rsc_fit(X, y, config=None):
    """One filter bank per class, trained on that class's samples.

    The filter budget (``config.n_filters``, or the automatic count for
    the whole training set) is shared between classes by size.  The bank
    of the ``i``-th class (in sorted class order) is trained with seed
    ``config.seed + i``.
    """
    config = config or TrainConfig()
    X = as_matrix(X)
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise InvalidInputError("y must be a label vector with one entry per sample")
    class_ids, counts = np.unique(y, return_counts=True)
    per_class = class_filter_counts(counts, config.n_filters)
    banks = []
    for i, c in enumerate(class_ids):
        rows = np.flatnonzero(y == c)
        banks.append(fit(X[rows], replace(config, seed=config.seed + i, n_filters=int(per_class[i]))))
    return RSCModel(banks, class_ids)


def rsc_predict(model, X):
    """Class of the most activated filter across all classes' banks."""
    X = as_matrix(X)
    _check_features(model, X)
    out = np.empty(X.shape[0], dtype=np.int64)
    for start, stop in _row_chunks(X.shape[0], model.n_filters):
        out[start:stop] = model.filter_class[np.argmax(model.activations(X[start:stop]), axis=1)]
    return model.class_ids[out]


def as_label_matrix(y, class_ids=None):
    """Accept a label vector or an N x c indicator matrix; return ``(Y, class_ids)``."""
    y = np.asarray(y)
    if y.ndim == 1:
        ids = np.unique(y) if class_ids is None else np.asarray(class_ids)
        Y = (y[:, None] == ids[None, :]).astype(np.float64)
        return Y, ids
    Y = np.asarray(y, dtype=np.float64)
    ids = np.arange(Y.shape[1]) if class_ids is None else np.asarray(class_ids)
    return Y, ids


def set_labels(X, Y, bank):
    """Probabilistic filter labels from the label rows of each filter's samples.

    Filters that attract no sample get an all-zero row.
    """
    I = assign(X, bank)
    sums, counts = member_sums(np.asarray(Y, dtype=np.float64), I, bank.n_filters)
    used = counts > 0
    L = np.zeros_like(sums)
    totals = sums.sum(axis=1)
    live = totals > 0
    L[live] = sums[live] / totals[live, None]
    if not used.all():
        warnings.warn(f"{int((~used).sum())} filters attracted no samples and carry no label",
                      RuntimeWarning, stacklevel=2)
    return L


def rspc_fit(X, Y, config=None, class_ids=None):
    """Single filter bank on all data plus a probabilistic label per filter."""
    config = config or TrainConfig()
    X = as_matrix(X)
    Y, ids = as_label_matrix(Y, class_ids)
    if Y.size == 0 or Y.shape[0] != X.shape[0]:
        raise InvalidInputError("label matrix must have one non-empty row per sample")
    if np.any(Y < 0) or np.any(Y.max(axis=1) <= 0):
        raise InvalidInputError("every label row must be non-negative with a positive entry")
    bank = fit(X, config)
    return RSPCModel(bank, set_labels(X, Y, bank), ids)


def _check_features(model, X):
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(f"data has {X.shape[1]} features, model expects {model.n_features}")


def _label_max(scaled, L, k):
    """Per class, the largest label-weighted scaled activation of each row."""
    N, m = scaled.shape
    P = np.empty((N, L.shape[1]))
    # non-zero entries of a non-degenerate row lie within its top k
    top = np.argpartition(-scaled, k - 1, axis=1)[:, :k] if k < m else np.broadcast_to(np.arange(m), (N, m))
    vals = np.take_along_axis(scaled, top, axis=1)
    P[:] = np.max(L[top] * vals[:, :, None], axis=1)
    crowded = np.count_nonzero(scaled, axis=1) > k
    for r in np.flatnonzero(crowded):
        P[r] = np.max(L * scaled[r][:, None], axis=0)
    return P


def predict_proba(model, X, k=None, binary=False, return_flags=False):
    """Class probabilities from the rank similarity transform.

    For each class, the largest product of a filter's label weight for
    that class and its scaled activation, normalized over classes.  A row
    where every class scores 0 becomes uniform and is flagged.
    """
    X = as_matrix(X)
    _check_features(model, X)
    L = model.labels
    k = effective_k(model.k_default if k is None else k, model.n_filters)
    P = np.empty((X.shape[0], L.shape[1]))
    for start, stop in _row_chunks(X.shape[0], model.n_filters):
        scaled = scale_rows(model.activations(X[start:stop]), k, binary)
        P[start:stop] = _label_max(scaled, L, k)
    totals = P.sum(axis=1)
    flags = totals <= 0
    P[~flags] /= totals[~flags, None]
    P[flags] = 1.0 / L.shape[1]
    return (P, flags) if return_flags else P


def predict(model, X, k=None):
    """Predicted class ids: most activated filter for RSC, most probable class for RSPC."""
    if isinstance(model, RSCModel):
        return rsc_predict(model, X)
    return model.class_ids[np.argmax(predict_proba(model, X, k), axis=1)]


class _Classifier:
    def __init__(self, n_filters="auto", distribution="rank", k=25, tol=None, max_iter=100, seed=DEFAULT_SEED):
        self.n_filters = n_filters
        self.distribution = distribution
        self.k = k
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def _config(self):
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        return TrainConfig(self.n_filters, self.distribution, self.tol, self.max_iter, self.seed, self.k)

    @property
    def classes_(self):
        return self.model_.class_ids

    def predict(self, X):
        return predict(self.model_, X, self.k)

    def predict_proba(self, X):
        return predict_proba(self.model_, X, self.k)


class RankSimilarityClassifier(_Classifier):
    """Estimator-style RSC: per-class filter banks."""

    def fit(self, X, y):
        self.model_ = rsc_fit(X, y, self._config())
        return self


class RankSimilarityProbabilisticClassifier(_Classifier):
    """Estimator-style RSPC: shared bank with probabilistic labels; accepts indicator matrices."""

    def fit(self, X, y):
        self.model_ = rspc_fit(X, y, self._config())
        return self
