"""Rank and normalization primitives.

Ranks are ordinal and 1-based: the smallest entry gets rank 1, the
largest rank ``n``, and equal entries are ordered by position.  Keeping
ranks 1-based means no feature is ever zeroed by the rank step itself.
"""

import numpy as np

from .errors import DegenerateFilterError, InvalidInputError


def numeric_rank(x):
    """Ordinal 1-based ranks of a vector, ties broken by index.

    Examples
    --------
    >>> numeric_rank([3.2, 1.1, 5.0]).tolist()
    [2, 1, 3]
    >>> numeric_rank([7, 7, 7]).tolist()
    [1, 2, 3]
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("numeric_rank expects a non-empty 1-D vector")
    return rank_rows(x[None, :])[0]


def rank_rows(A):
    """Row-wise :func:`numeric_rank` of a dense 2-D array.

    A stable argsort of an argsort gives ordinal ranks with the
    lower-index-first tie rule.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError("rank_rows expects a 2-D array")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("cannot rank non-finite values")
    order = np.argsort(A, axis=1, kind="stable")
    ranks = np.empty(A.shape, dtype=np.int64)
    rows = np.arange(A.shape[0])[:, None]
    ranks[rows, order] = np.arange(1, A.shape[1] + 1)
    return ranks


def l1_normalize(x):
    """Scale a non-negative vector (or each row of a matrix) to unit sum."""
    x = np.asarray(x, dtype=np.float64)
    total = x.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise DegenerateFilterError("cannot L1-normalize a vector with zero sum")
    return x / total


def apply_distribution(ranks, distribution=None):
    """Map ranks through a sorted distribution map.

    Without a map the ranks themselves are the weights.  With one, rank
    ``r`` is replaced by ``distribution[r - 1]``.  Works on a single rank
    vector or a matrix of rank rows.
    """
    ranks = np.asarray(ranks)
    if distribution is None:
        return ranks.astype(np.float64)
    distribution = np.asarray(distribution, dtype=np.float64)
    if distribution.ndim != 1 or distribution.shape[0] != ranks.shape[-1]:
        raise InvalidInputError(
            f"distribution length {distribution.shape} does not match "
            f"rank length {ranks.shape[-1]}"
        )
    return distribution[ranks - 1]
