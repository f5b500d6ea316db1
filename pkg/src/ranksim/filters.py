"""Unsupervised training of rank similarity filters.

A filter bank is a set of ``m`` rank vectors over the ``n`` features.
Each filter's weights are its ranks mapped through an optional
distribution map and then L1-normalized.  Training draws ``m`` samples
as initial filters and then alternates between assigning every sample to
its most activated filter and re-ranking each filter from the mean of
its members, until at most ``tol`` samples change filter.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
import math
import warnings

import numpy as np
import scipy.sparse as sp

from .confusion import build_confusion_map, check_distribution_map
from .data import as_matrix, dense_rows
from .errors import ConfigError, DimensionMismatchError, InvalidInputError
from .ranking import apply_distribution, l1_normalize, rank_rows

M_MIN = 1000
M_MAX = 10000
DEFAULT_K = 25
DEFAULT_SEED = 42
MIN_FEATURES = 2
PRACTICAL_FEATURES = 9
# activation matrix values held in memory at once
_CHUNK_VALUES = 1 << 22


@dataclass(frozen=True)
class TrainConfig:
    """Training parameters.

    ``distribution`` is ``"rank"``, ``"confusion"`` or an explicit sorted
    map of length ``n``.  ``tol=None`` selects 0 for up to 10**4 samples
    and ``ceil(N / 1000)`` above that.
    """

    n_filters: object = "auto"
    distribution: object = "rank"
    tol: int = None
    max_iter: int = 100
    seed: int = DEFAULT_SEED
    k: int = DEFAULT_K
    reseed_empty: bool = False
    strict_features: bool = False

    def __post_init__(self):
        if not (self.n_filters == "auto" or (isinstance(self.n_filters, (int, np.integer)) and self.n_filters >= 1)):
            raise ConfigError(f"n_filters must be 'auto' or a positive integer, got {self.n_filters!r}")
        if isinstance(self.distribution, str) and self.distribution not in ("rank", "confusion"):
            raise ConfigError(f"unknown distribution mode {self.distribution!r}")
        if self.tol is not None and self.tol < 0:
            raise ConfigError("tol must be non-negative")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if self.k < 2:
            raise ConfigError("k must be at least 2")

    @property
    def distribution_mode(self):
        return self.distribution if isinstance(self.distribution, str) else "user"


@dataclass(eq=False)
class FilterBank:
    """A trained (or initialized) set of rank similarity filters.

    ``ranks`` holds one 1-based rank vector per filter.  ``weights`` are
    the L1-normalized images of those ranks under ``distribution``.
    """

    ranks: np.ndarray
    distribution: np.ndarray = None
    k_default: int = DEFAULT_K
    seed: int = DEFAULT_SEED
    converged_iter: int = 0
    converged: bool = True
    mode: str = "rank"
    extra: dict = field(default_factory=dict)

    @property
    def n_filters(self):
        return self.ranks.shape[0]

    @property
    def n_features(self):
        return self.ranks.shape[1]

    @cached_property
    def image(self):
        """Unnormalized weights: ranks mapped through the distribution."""
        return apply_distribution(self.ranks, self.distribution)

    @cached_property
    def row_sums(self):
        return self.image.sum(axis=1)

    @cached_property
    def weights(self):
        return l1_normalize(self.image)

    def activations(self, X):
        return activations(X, self.image, self.row_sums)

    def same_as(self, other):
        """True when both banks hold identical filters and distribution."""
        same_map = (self.distribution is None and other.distribution is None) or (
            self.distribution is not None and other.distribution is not None
            and np.array_equal(self.distribution, other.distribution)
        )
        return same_map and np.array_equal(self.ranks, other.ranks)


def activations(X, image, row_sums):
    """Filter activations ``F . x`` for every sample (N x m).

    Products are taken with the unnormalized weights and divided by the
    row sums afterwards.  With integer data in rank mode every product
    and sum is exact, so dense and sparse inputs give identical results.
    """
    if X.shape[1] != image.shape[1]:
        raise DimensionMismatchError(f"data has {X.shape[1]} features, filters have {image.shape[1]}")
    out = X @ image.T
    if sp.issparse(out):
        out = out.toarray()
    return np.asarray(out) / row_sums


def _row_chunks(N, m):
    step = max(1, _CHUNK_VALUES // max(m, 1))
    for start in range(0, N, step):
        yield start, min(start + step, N)


def auto_n_filters(N):
    """Default filter count for ``N`` training samples.

    ``N`` below 1000 uses one filter per sample, below 10**4 uses 1000,
    below 10**5 uses ``N // 10`` and anything larger is capped at 10**4.
    """
    if N < 1:
        raise InvalidInputError("N must be positive")
    if N < M_MIN:
        return N
    if N < M_MIN * 10:
        return M_MIN
    if N < M_MAX * 10:
        return N // 10
    return M_MAX


def default_tol(N):
    return 0 if N <= 10_000 else math.ceil(N / 1000)


def assign(X, bank):
    """Index of the most activated filter for every sample; ties go to the lowest index."""
    X = as_matrix(X)
    out = np.empty(X.shape[0], dtype=np.int64)
    for start, stop in _row_chunks(X.shape[0], bank.n_filters):
        out[start:stop] = np.argmax(bank.activations(X[start:stop]), axis=1)
    return out


def _resolve_distribution(X, distribution):
    if distribution is None or (isinstance(distribution, str) and distribution == "rank"):
        return None, "rank"
    if isinstance(distribution, str) and distribution == "confusion":
        return build_confusion_map(X), "confusion"
    return check_distribution_map(distribution, X.shape[1]).copy(), "user"


def initialize_filters(X, distribution, n_filters, seed=DEFAULT_SEED):
    """Seed a bank with the ranks of ``n_filters`` distinct random samples."""
    X = as_matrix(X)
    N = X.shape[0]
    if n_filters > N:
        raise ConfigError(f"cannot draw {n_filters} filters from {N} samples")
    if distribution is not None:
        distribution = check_distribution_map(distribution, X.shape[1])
    rng = np.random.default_rng(seed)
    picks = rng.choice(N, size=n_filters, replace=False)
    ranks = rank_rows(dense_rows(X, picks))
    return FilterBank(ranks, distribution, seed=seed, extra={"init_rows": picks})


def member_sums(X, labels, m):
    """Per-filter sums of the assigned rows (accumulated in sample order) and member counts."""
    N = X.shape[0]
    counts = np.bincount(labels, minlength=m)
    indicator = sp.csr_matrix((np.ones(N), (labels, np.arange(N))), shape=(m, N))
    sums = indicator @ X
    if sp.issparse(sums):
        sums = sums.toarray()
    return np.asarray(sums, dtype=np.float64), counts


def spread_filters(X, bank, tol=0, max_iter=100, reseed_empty=False, seed=DEFAULT_SEED):
    """Spread filters through the data until at most ``tol`` samples move.

    Each pass assigns every sample to its most activated filter; if the
    assignment differs from the previous pass in more than ``tol``
    samples, each filter with members is replaced by the ranks of its
    members' mean.  Filters without members keep their weights unless
    ``reseed_empty`` is set, in which case they restart from random
    samples.  Returns a new bank; ``converged_iter`` counts update passes
    and ``converged`` is False when ``max_iter`` ran out first.
    """
    X = as_matrix(X)
    if X.shape[1] != bank.n_features:
        raise DimensionMismatchError("data and filter bank disagree on feature count")
    ranks = bank.ranks.copy()
    m = ranks.shape[0]
    rng = np.random.default_rng(seed)
    previous = None
    passes = 0
    converged = False
    while True:
        current = FilterBank(ranks, bank.distribution)
        labels = assign(X, current)
        if previous is not None and np.count_nonzero(labels != previous) <= tol:
            converged = True
            break
        if passes >= max_iter:
            break
        sums, counts = member_sums(X, labels, m)
        used = counts > 0
        ranks = ranks.copy()
        ranks[used] = rank_rows(sums[used] / counts[used, None])
        if reseed_empty and not used.all():
            empty = np.flatnonzero(~used)
            picks = rng.choice(X.shape[0], size=empty.size, replace=False)
            ranks[empty] = rank_rows(dense_rows(X, picks))
        passes += 1
        previous = labels
    return replace(bank, ranks=ranks, converged_iter=passes, converged=converged, extra=dict(bank.extra))


def fit(X, config=None, **overrides):
    """Train a filter bank on ``X``.

    Builds the distribution map (confusion mode only), seeds the filters
    from random samples, spreads them, and records the seed, mode and
    number of update passes on the returned bank.
    """
    config = replace(config or TrainConfig(), **overrides) if overrides else (config or TrainConfig())
    X = as_matrix(X)
    N, n = X.shape
    if N < 1:
        raise InvalidInputError("cannot fit on an empty dataset")
    if n < MIN_FEATURES:
        raise InvalidInputError(f"need at least {MIN_FEATURES} features, got {n}")
    if n < PRACTICAL_FEATURES:
        msg = f"only {n} features; rank filters need at least {PRACTICAL_FEATURES} to be practical"
        if config.strict_features:
            raise InvalidInputError(msg)
        warnings.warn(msg, UserWarning, stacklevel=2)
    m = auto_n_filters(N) if config.n_filters == "auto" else int(config.n_filters)
    if m > N:
        raise ConfigError(f"n_filters={m} exceeds the {N} training samples")
    tol = default_tol(N) if config.tol is None else config.tol
    if tol >= N:
        raise ConfigError(f"tol={tol} must be below the sample count {N}")
    distribution, mode = _resolve_distribution(X, config.distribution)
    bank = initialize_filters(X, distribution, m, config.seed)
    bank = spread_filters(X, bank, tol, config.max_iter, config.reseed_empty, config.seed)
    if not bank.converged:
        warnings.warn(f"filters did not converge within {config.max_iter} passes", RuntimeWarning, stacklevel=2)
    return replace(bank, k_default=config.k, seed=config.seed, mode=mode)
