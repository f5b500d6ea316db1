"""Confusion and discriminability between one-dimensional distributions.

Confusion between densities ``f`` and ``g`` is the integral of
``f g / (f + g)``; it lies in [0, 0.5], reaching 0.5 when the densities
coincide and 0 when their supports are disjoint.  Discriminability is
``1 - confusion``.  These values feed the confusion-adjusted distribution
map that can replace plain ranks as filter weights.

Gaussian pairs are integrated with a composite trapezoid rule on a fixed
grid of ``GRID_POINTS`` nodes spanning the intersection of the two
``mean +/- 10 std`` windows.  The integrand is bounded by ``min(f, g)``
so nothing outside either window contributes measurably.  Pairs of
histograms are integrated exactly piece by piece.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.special import ndtr

from .data import column_moments, value_range
from .errors import IntegrationError, InvalidInputError, UndefinedPointError

GRID_POINTS = 10_001
SUPPORT_SIGMAS = 10.0
STD_FLOOR = 1e-6
# max disagreement between the full and the half-resolution trapezoid
CONVERGENCE_TOL = 1e-6

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Feature1D:
    """A gaussian or a piecewise-constant (histogram) density."""

    kind: str
    mean: float = 0.0
    std: float = 1.0
    bin_edges: np.ndarray = None
    densities: np.ndarray = None

    @classmethod
    def gaussian(cls, mean, std):
        if not std > 0:
            raise InvalidInputError(f"gaussian std must be positive, got {std}")
        return cls("gaussian", float(mean), float(std))

    @classmethod
    def empirical(cls, bin_edges, densities):
        edges = np.asarray(bin_edges, dtype=np.float64)
        dens = np.asarray(densities, dtype=np.float64)
        if edges.ndim != 1 or dens.shape != (edges.size - 1,):
            raise InvalidInputError("need len(bin_edges) == len(densities) + 1")
        if np.any(np.diff(edges) <= 0):
            raise InvalidInputError("bin edges must be strictly increasing")
        if np.any(dens < 0):
            raise InvalidInputError("densities must be non-negative")
        mass = float(np.sum(dens * np.diff(edges)))
        if abs(mass - 1.0) > 1e-6:
            raise InvalidInputError(f"histogram integrates to {mass}, not 1")
        widths = np.diff(edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        mean = float(np.sum(dens * widths * centers))
        # uniform within each bin: E[x^2] per bin is (a^2 + ab + b^2) / 3
        second = float(np.sum(dens * widths * (edges[:-1] ** 2 + edges[:-1] * edges[1:] + edges[1:] ** 2) / 3.0))
        std = math.sqrt(max(second - mean * mean, 0.0))
        return cls("empirical", mean, std, edges, dens)

    @classmethod
    def from_samples(cls, samples, bins=50):
        """Histogram density estimate of a sample."""
        dens, edges = np.histogram(np.asarray(samples, dtype=np.float64), bins=bins, density=True)
        return cls.empirical(edges, dens)

    @property
    def support(self):
        if self.kind == "gaussian":
            return (self.mean - SUPPORT_SIGMAS * self.std, self.mean + SUPPORT_SIGMAS * self.std)
        return (float(self.bin_edges[0]), float(self.bin_edges[-1]))

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "gaussian":
            return _gauss_pdf(x, self.mean, self.std)
        idx = np.searchsorted(self.bin_edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.densities.size)
        # the right edge belongs to the last bin
        idx = np.where(x == self.bin_edges[-1], self.densities.size - 1, idx)
        inside |= x == self.bin_edges[-1]
        return np.where(inside, self.densities[np.clip(idx, 0, self.densities.size - 1)], 0.0)

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "gaussian":
            z = (x - self.mean) / self.std
            return -0.5 * z * z - math.log(self.std) - _LOG_SQRT_2PI
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "gaussian":
            return ndtr((x - self.mean) / self.std)
        cum = np.concatenate([[0.0], np.cumsum(self.densities * np.diff(self.bin_edges))])
        return np.interp(x, self.bin_edges, cum, left=0.0, right=1.0)


def _gauss_pdf(x, mean, std):
    z = (x - mean) / std
    return np.exp(-0.5 * z * z) / (std * math.sqrt(2.0 * math.pi))


def membership_probability(f, g, x):
    """Probability that an observed value ``x`` was drawn from ``f`` rather than ``g``."""
    fx = float(f.pdf(x))
    gx = float(g.pdf(x))
    if fx + gx <= 0:
        raise UndefinedPointError(f"both densities are zero at x={x}")
    return fx / (fx + gx)


def _overlap_integrand(fx, gx):
    total = fx + gx
    with np.errstate(invalid="ignore", divide="ignore"):
        out = fx * gx / total
    return np.where(total > 0, out, 0.0)


def _gaussian_confusions(mu1, s1, mu2, s2):
    """Confusion for arrays of gaussian pairs, one fixed-size grid per pair."""
    mu1, s1, mu2, s2 = (np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (mu1, s1, mu2, s2))
    lo = np.maximum(mu1 - SUPPORT_SIGMAS * s1, mu2 - SUPPORT_SIGMAS * s2)
    hi = np.minimum(mu1 + SUPPORT_SIGMAS * s1, mu2 + SUPPORT_SIGMAS * s2)
    out = np.zeros(mu1.shape)
    live = np.flatnonzero(hi > lo)
    unit = np.linspace(0.0, 1.0, GRID_POINTS)
    # bounded memory: about 2**22 grid values per block
    block = max(1, (1 << 22) // GRID_POINTS)
    for start in range(0, live.size, block):
        sel = live[start:start + block]
        width = (hi[sel] - lo[sel])[:, None]
        x = lo[sel][:, None] + width * unit
        y = _overlap_integrand(
            _gauss_pdf(x, mu1[sel][:, None], s1[sel][:, None]),
            _gauss_pdf(x, mu2[sel][:, None], s2[sel][:, None]),
        )
        full = np.trapezoid(y, x, axis=1)
        half = np.trapezoid(y[:, ::2], x[:, ::2], axis=1)
        bad = ~np.isfinite(full) | (np.abs(full - half) > CONVERGENCE_TOL)
        if np.any(bad):
            i = sel[np.argmax(bad)]
            raise IntegrationError(
                "confusion integral did not converge",
                {"mean_f": mu1[i], "std_f": s1[i], "mean_g": mu2[i], "std_g": s2[i],
                 "interval": (lo[i], hi[i]), "points": GRID_POINTS},
            )
        out[sel] = full
    return out


def _merged_edges(f, g, lo, hi):
    pts = [lo, hi]
    for h in (f, g):
        if h.kind == "empirical":
            pts.extend(h.bin_edges[(h.bin_edges > lo) & (h.bin_edges < hi)])
    return np.unique(np.asarray(pts, dtype=np.float64))


def _grid(lo, hi):
    return np.linspace(lo, hi, GRID_POINTS)


def confusion(f, g):
    """Expected probability of assigning a value to the wrong one of ``f``, ``g``."""
    if f.kind == "gaussian" and g.kind == "gaussian":
        return float(_gaussian_confusions(f.mean, f.std, g.mean, g.std)[0])
    lo = max(f.support[0], g.support[0])
    hi = min(f.support[1], g.support[1])
    if hi <= lo:
        return 0.0
    if f.kind == "empirical" and g.kind == "empirical":
        edges = _merged_edges(f, g, lo, hi)
        mid = 0.5 * (edges[:-1] + edges[1:])
        return float(np.sum(_overlap_integrand(f.pdf(mid), g.pdf(mid)) * np.diff(edges)))
    x = _grid(lo, hi)
    y = _overlap_integrand(f.pdf(x), g.pdf(x))
    full = float(np.trapezoid(y, x))
    half = float(np.trapezoid(y[::2], x[::2]))
    # histogram jumps converge at first order only
    if not math.isfinite(full) or abs(full - half) > 1e-3:
        raise IntegrationError("confusion integral did not converge",
                               {"interval": (lo, hi), "full": full, "half": half})
    return full


def discriminability(f, g):
    """Expected probability of assigning a value to the right one of ``f``, ``g``."""
    return 1.0 - confusion(f, g)


def kl_divergence(f, g):
    """Kullback-Leibler divergence of ``g`` from ``f``; ``inf`` if ``f`` is not covered by ``g``."""
    if f.kind == "gaussian" and g.kind == "gaussian":
        return ((f.mean - g.mean) ** 2 + f.std ** 2 - g.std ** 2) / (2.0 * g.std ** 2) + math.log(g.std / f.std)
    if f.kind == "empirical" and g.kind == "empirical":
        lo, hi = f.support
        edges = _merged_edges(f, g, lo, hi)
        mid = 0.5 * (edges[:-1] + edges[1:])
        fv, gv = f.pdf(mid), g.pdf(mid)
        used = fv > 0
        if np.any(gv[used] == 0):
            return math.inf
        w = np.diff(edges)[used]
        return float(np.sum(fv[used] * np.log(fv[used] / gv[used]) * w))
    x = _grid(*f.support)
    fv = f.pdf(x)
    used = fv > 0
    lg = g.logpdf(x)
    if np.any(np.isneginf(lg[used])):
        return math.inf
    y = np.where(used, fv * (np.log(np.where(used, fv, 1.0)) - np.where(used, lg, 0.0)), 0.0)
    return float(np.trapezoid(y, x))


def wasserstein_1d(f, g):
    """First Wasserstein distance, the integral of ``|F - G|`` over the line."""
    if f.kind == "gaussian" and g.kind == "gaussian" and f.std == g.std:
        return abs(f.mean - g.mean)
    lo = min(f.support[0], g.support[0])
    hi = max(f.support[1], g.support[1])
    if f.kind == "empirical" and g.kind == "empirical":
        # both CDFs are linear between merged edges, integrate |d| exactly
        edges = _merged_edges(f, g, lo, hi)
        d = f.cdf(edges) - g.cdf(edges)
        d0, d1, w = d[:-1], d[1:], np.diff(edges)
        same = d0 * d1 >= 0
        a0, a1 = np.abs(d0), np.abs(d1)
        with np.errstate(invalid="ignore", divide="ignore"):
            crossing = (d0 ** 2 + d1 ** 2) / (2.0 * (a0 + a1))
        return float(np.sum(np.where(same, 0.5 * (a0 + a1), crossing) * w))
    x = _grid(lo, hi)
    return float(np.trapezoid(np.abs(f.cdf(x) - g.cdf(x)), x))


def _check_sorted(features):
    if len(features) < 2:
        raise InvalidInputError("need at least two features")
    means = np.array([h.mean for h in features])
    if np.any(np.diff(means) < 0):
        raise InvalidInputError("features must be sorted by mean, ascending")


def _discriminability_pairs(features, left, right):
    left = np.asarray(left)
    right = np.asarray(right)
    if all(h.kind == "gaussian" for h in features):
        mu = np.array([h.mean for h in features])
        sd = np.array([h.std for h in features])
        return 1.0 - _gaussian_confusions(mu[left], sd[left], mu[right], sd[right])
    return np.array([discriminability(features[a], features[b]) for a, b in zip(left, right)])


def consecutive_map(features):
    """Gap sizes between consecutive mean-sorted features.

    Each gap averages three discriminability terms: between the two
    neighbours, and the change in discriminability from the lowest and
    from the highest feature when stepping from one neighbour to the next.
    Returns ``n - 1`` values.
    """
    _check_sorted(features)
    n = len(features)
    idx = np.arange(n)
    d_next = _discriminability_pairs(features, idx[:-1], idx[1:])
    d_first = _discriminability_pairs(features, np.zeros(n, dtype=np.int64), idx)
    d_last = _discriminability_pairs(features, np.full(n, n - 1), idx)
    return (d_next + (d_first[:-1] - d_first[1:]) + (d_last[:-1] - d_last[1:])) / 3.0


def discriminability_matrix(features):
    """Pairwise discriminability between every pair of features (n x n)."""
    n = len(features)
    a, b = np.triu_indices(n)
    vals = _discriminability_pairs(features, a, b)
    out = np.empty((n, n))
    out[a, b] = vals
    out[b, a] = vals
    return out


def feature_distributions(X):
    """Gaussian model of each column of ``X`` plus the mean-sorting order.

    Standard deviations below ``1e-6`` times the global value range are
    raised to that floor.
    """
    N, n = X.shape
    mean, var = column_moments(X)
    std = np.sqrt(var)
    span = value_range(X)
    if span <= 0:
        warnings.warn("constant dataset: every feature has the same distribution", RuntimeWarning)
        span = 1.0
    std = np.maximum(std, STD_FLOOR * span)
    order = np.argsort(mean, kind="stable")
    features = [Feature1D.gaussian(mean[j], std[j]) for j in order]
    return features, order


def cumulative_map(gaps):
    """Sorted, non-negative, sum-normalized cumulative map from gap sizes.

    The lowest feature is anchored at 0.  Negative gaps are kept; the
    cumulative vector is shifted by its minimum and then sorted so the
    result stays a valid (non-decreasing) distribution map.
    """
    values = np.concatenate([[0.0], np.cumsum(gaps)])
    values = np.sort(values - values.min())
    total = values.sum()
    if not total > 0:
        raise InvalidInputError("degenerate distribution map: all values equal")
    return values / total


def build_confusion_map(X):
    """Confusion-adjusted distribution map of length ``n`` for a dataset."""
    N, n = X.shape
    if N < 2 or n < 2:
        raise InvalidInputError("build_confusion_map needs at least 2 samples and 2 features")
    features, _ = feature_distributions(X)
    return cumulative_map(consecutive_map(features))


def rank_map(n):
    """Plain ranks ``1..n`` normalized to sum to one."""
    r = np.arange(1, n + 1, dtype=np.float64)
    return r / r.sum()


def check_distribution_map(D, n=None):
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 1 or (n is not None and D.size != n):
        raise InvalidInputError(f"distribution map must be a vector of length {n}")
    if np.any(~np.isfinite(D)) or np.any(D < 0) or np.any(np.diff(D) < 0):
        raise InvalidInputError("distribution map must be finite, non-negative and non-decreasing")
    if not D.sum() > 0:
        raise InvalidInputError("distribution map must have positive sum")
    return D


def feature_profiles(X):
    """Sorted-feature diagnostics: normalized mean, rank and confusion profiles.

    Each profile is indexed by the mean-sorted feature position and sums
    to one, so the three curves can be compared directly.
    """
    mean, _ = column_moments(X)
    sorted_mean = np.sort(mean)
    shifted = sorted_mean - min(sorted_mean[0], 0.0)
    total = shifted.sum()
    return {
        "mean": shifted / total if total > 0 else np.full(mean.size, 1.0 / mean.size),
        "rank": rank_map(mean.size),
        "confusion": build_confusion_map(X),
    }


def pearson_r(a, b):
    return float(np.corrcoef(np.asarray(a, float), np.asarray(b, float))[0, 1])
