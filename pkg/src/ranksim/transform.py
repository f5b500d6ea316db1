"""Rank similarity transform: samples to filter-activation space.

Only the ``k`` most activated filters of each sample carry information;
activations at or below the ``k``-th largest are set to zero and the rest
are rescaled so the top filter gets 1.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .data import as_matrix
from .errors import ConfigError
from .filters import DEFAULT_SEED, TrainConfig, _row_chunks, fit


@dataclass
class TransformOutput:
    activations: np.ndarray
    k: int


def raw_similarity(X, bank):
    """Dot product of every sample with every L1-normalized filter (N x m)."""
    return bank.activations(as_matrix(X))


def effective_k(k, m):
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > m:
        warnings.warn(f"k={k} exceeds the {m} available filters; using k={m}", UserWarning, stacklevel=3)
        return m
    return k


def scale_rows(S, k, binary=False):
    """Keep each row's top-``k`` activations, rescaled to [0, 1].

    Graded scaling maps the ``k``-th largest activation to 0 and the
    maximum to 1.  ``binary=True`` marks every activation at or above the
    ``k``-th largest with 1.  Rows whose maximum equals their ``k``-th
    largest value get 1 at the maximal positions and 0 elsewhere.
    """
    S = np.asarray(S, dtype=np.float64)
    m = S.shape[1]
    s_max = S.max(axis=1, keepdims=True)
    s_kth = np.partition(S, m - k, axis=1)[:, m - k][:, None]
    if binary:
        return (S >= s_kth).astype(np.float64)
    span = s_max - s_kth
    flat = span[:, 0] == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.clip((S - s_kth) / span, 0.0, 1.0)
    if np.any(flat):
        out[flat] = (S[flat] == s_max[flat]).astype(np.float64)
    return out


def transform_activations(S, k, binary=False):
    """Scale a precomputed activation matrix, clamping ``k`` to its width."""
    k = effective_k(k, S.shape[1])
    return TransformOutput(scale_rows(S, k, binary), k)


def transform(X, bank, k=None, binary=False):
    """Rank similarity transform of ``X`` with a fitted bank."""
    X = as_matrix(X)
    k = effective_k(bank.k_default if k is None else k, bank.n_filters)
    out = np.empty((X.shape[0], bank.n_filters))
    for start, stop in _row_chunks(X.shape[0], bank.n_filters):
        out[start:stop] = scale_rows(bank.activations(X[start:stop]), k, binary)
    return TransformOutput(out, k)


class RankSimilarityTransform:
    """Estimator-style wrapper: ``fit`` learns filters, ``transform`` maps data."""

    def __init__(self, n_filters="auto", distribution="rank", k=25, tol=None, max_iter=100,
                 seed=DEFAULT_SEED, binary=False):
        self.n_filters = n_filters
        self.distribution = distribution
        self.k = k
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.binary = binary

    def fit(self, X, y=None):
        config = TrainConfig(self.n_filters, self.distribution, self.tol, self.max_iter, self.seed, self.k)
        self.bank_ = fit(X, config)
        return self

    def transform(self, X):
        return transform(X, self.bank_, self.k, self.binary).activations

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
