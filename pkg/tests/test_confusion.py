import math
import sys

import numpy as np
import pytest
from scipy import integrate, stats

import ranksim.confusion  # noqa: F401
from ranksim.confusion import (
    Feature1D,
    build_confusion_map,
    confusion,
    consecutive_map,
    cumulative_map,
    discriminability,
    discriminability_matrix,
    feature_distributions,
    feature_profiles,
    kl_divergence,
    membership_probability,
    wasserstein_1d,
)
from ranksim.errors import IntegrationError, InvalidInputError, UndefinedPointError

G = Feature1D.gaussian

# reference values from 30-digit adaptive quadrature over the whole line
FROZEN = [
    ((0, 1, 1, 1), 0.39797286718324984),
    ((0, 1, 2, 1), 0.22479975460333641),
    ((0, 1, 4, 1), 0.034298704395369407),
    ((0, 1, 0, 2), 0.42000887678468138),
    ((1, 0.5, 3, 2), 0.21019623379245662),
    ((0, 1, 8, 1), 4.9109342009099259e-5),
]


def quad_confusion(f, g):
    def h(x):
        a, b = float(f.pdf(x)), float(g.pdf(x))
        return a * b / (a + b) if a + b > 0 else 0.0
    pts = sorted({f.mean, g.mean, 0.5 * (f.mean + g.mean)})
    lo = min(f.mean - 12 * f.std, g.mean - 12 * g.std)
    hi = max(f.mean + 12 * f.std, g.mean + 12 * g.std)
    return integrate.quad(h, lo, hi, points=pts, limit=200, epsabs=1e-13)[0]


@pytest.mark.parametrize("params,expected", FROZEN)
def test_gaussian_confusion_frozen(params, expected):
    m1, s1, m2, s2 = params
    assert confusion(G(m1, s1), G(m2, s2)) == pytest.approx(expected, abs=1e-12)


def test_gaussian_confusion_matches_quad():
    rng = np.random.default_rng(3)
    for _ in range(25):
        f = G(rng.normal(0, 3), rng.uniform(0.2, 3))
        g = G(rng.normal(0, 3), rng.uniform(0.2, 3))
        assert confusion(f, g) == pytest.approx(quad_confusion(f, g), abs=1e-9)


def test_confusion_symmetric_and_self():
    f, g = G(0.3, 1.2), G(2.0, 0.7)
    assert confusion(f, g) == pytest.approx(confusion(g, f), abs=1e-15)
    assert confusion(f, f) == pytest.approx(0.5, abs=1e-12)
    assert discriminability(f, g) == pytest.approx(1 - confusion(f, g))


def test_histogram_confusion_exact():
    f = Feature1D.empirical([0.0, 2.0], [0.5])
    g = Feature1D.empirical([1.0, 2.0], [1.0])
    assert confusion(f, g) == pytest.approx(1 / 3, abs=1e-15)
    assert confusion(f, f) == pytest.approx(0.5, abs=1e-15)


def test_disjoint_supports():
    f = Feature1D.empirical([0.0, 1.0], [1.0])
    g = Feature1D.empirical([2.0, 3.0], [1.0])
    assert confusion(f, g) == 0.0
    assert confusion(G(0, 1), G(100, 1)) == 0.0


def test_mixed_pair_matches_quad():
    f = Feature1D.empirical([-1.0, 0.0, 1.0, 3.0], [0.3, 0.5, 0.1])
    g = G(0.5, 1.0)
    ref = quad_confusion(f, g)
    assert confusion(f, g) == pytest.approx(ref, abs=1e-4)


def test_integration_error_reports_diagnostics(monkeypatch):
    monkeypatch.setattr(sys.modules["ranksim.confusion"], "GRID_POINTS", 5)
    with pytest.raises(IntegrationError) as info:
        confusion(G(0, 1), G(1, 1))
    assert info.value.diagnostics["points"] == 5


def test_membership_probability():
    f, g = G(0, 1), G(2, 1)
    assert membership_probability(f, g, 1.0) == pytest.approx(0.5)
    assert membership_probability(f, g, -3.0) > 0.99
    u = Feature1D.empirical([0.0, 1.0], [1.0])
    with pytest.raises(UndefinedPointError):
        membership_probability(u, u, 5.0)


def test_kl_divergence():
    assert kl_divergence(G(0, 1), G(3, 1)) == pytest.approx(4.5, abs=1e-12)
    assert kl_divergence(G(0, 1), G(0, 2)) == pytest.approx(math.log(2) + 1 / 8 - 0.5, abs=1e-12)
    f = Feature1D.empirical([0.0, 1.0, 2.0], [0.5, 0.5])
    g = Feature1D.empirical([0.0, 1.0, 2.0], [0.25, 0.75])
    expected = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
    assert kl_divergence(f, g) == pytest.approx(expected, abs=1e-15)
    narrow = Feature1D.empirical([0.0, 1.0], [1.0])
    assert kl_divergence(f, narrow) == math.inf


def test_wasserstein():
    assert wasserstein_1d(G(0, 1), G(3, 1)) == 3.0
    f = Feature1D.empirical([0.0, 1.0], [1.0])
    g = Feature1D.empirical([0.5, 1.5], [1.0])
    assert wasserstein_1d(f, g) == pytest.approx(0.5, abs=1e-15)
    # crossing CDFs: uniform on [0, 2] against uniform on [0.5, 1.5]
    f = Feature1D.empirical([0.0, 2.0], [0.5])
    g = Feature1D.empirical([0.5, 1.5], [1.0])
    ref = integrate.quad(lambda x: abs(float(f.cdf(x)) - float(g.cdf(x))), 0, 2, points=[0.5, 1, 1.5])[0]
    assert wasserstein_1d(f, g) == pytest.approx(ref, abs=1e-12)
    ref = stats.wasserstein_distance(stats.norm(0, 1).ppf(np.linspace(0.0005, 0.9995, 1000)),
                                     stats.norm(1, 2).ppf(np.linspace(0.0005, 0.9995, 1000)))
    assert wasserstein_1d(G(0, 1), G(1, 2)) == pytest.approx(ref, abs=1e-2)


def test_empirical_validation():
    with pytest.raises(InvalidInputError):
        Feature1D.empirical([0.0, 1.0], [0.5])
    with pytest.raises(InvalidInputError):
        Feature1D.empirical([1.0, 0.0], [1.0])
    with pytest.raises(InvalidInputError):
        G(0, 0)
    h = Feature1D.empirical([0.0, 2.0], [0.5])
    assert h.mean == pytest.approx(1.0)
    assert h.std == pytest.approx(2 / math.sqrt(12))


def loop_map(features):
    n = len(features)
    d = [[1 - quad_confusion(features[i], features[j]) for j in range(n)] for i in range(n)]
    return [(d[i][i + 1] + (d[0][i] - d[0][i + 1]) + (d[n - 1][i] - d[n - 1][i + 1])) / 3 for i in range(n - 1)]


def test_consecutive_map_matches_loop_oracle():
    feats = [G(0, 1), G(0.5, 0.8), G(2, 1), G(2.2, 1.5), G(6, 1)]
    assert np.allclose(consecutive_map(feats), loop_map(feats), atol=1e-9)
    with pytest.raises(InvalidInputError):
        consecutive_map(feats[::-1])


def test_discriminability_matrix():
    feats = [G(0, 1), G(1, 1), G(3, 2)]
    D = discriminability_matrix(feats)
    assert np.allclose(D, D.T)
    assert np.allclose(np.diag(D), 0.5)
    assert D[0, 1] == pytest.approx(discriminability(feats[0], feats[1]))


def test_cumulative_map():
    D = cumulative_map(np.array([0.2, 0.3, 0.5]))
    assert D[0] == 0.0
    assert np.all(np.diff(D) >= 0)
    assert D.sum() == pytest.approx(1.0)
    assert np.allclose(D, np.array([0.0, 0.2, 0.5, 1.0]) / 1.7)
    D = cumulative_map(np.array([0.2, -0.5, 0.1]))
    assert np.all(np.diff(D) >= 0) and D.min() == 0.0 and D.sum() == pytest.approx(1.0)


def test_build_confusion_map_against_oracle():
    rng = np.random.default_rng(4)
    X = rng.normal(np.array([1.0, 4.0, 2.0, 9.0, 3.0]), 1.0, size=(300, 5))
    D = build_confusion_map(X)
    mean, std = X.mean(axis=0), X.std(axis=0)
    order = np.argsort(mean)
    gaps = loop_map([G(mean[j], std[j]) for j in order])
    ref = np.concatenate([[0.0], np.cumsum(gaps)])
    ref = np.sort(ref - ref.min())
    assert np.allclose(D, ref / ref.sum(), atol=1e-9)


def test_confusion_map_scale_invariant():
    rng = np.random.default_rng(8)
    X = rng.poisson(np.linspace(1, 20, 10), size=(200, 10)).astype(float)
    assert np.allclose(build_confusion_map(X), build_confusion_map(3.0 * X), atol=1e-9)


def test_std_floor():
    X = np.column_stack([np.full(10, 2.0), np.arange(10.0)])
    feats, order = feature_distributions(X)
    assert order.tolist() == [0, 1]
    assert feats[0].std == pytest.approx(1e-6 * 9.0)


def test_feature_profiles():
    rng = np.random.default_rng(0)
    X = rng.poisson(np.arange(1, 13), size=(100, 12)).astype(float)
    prof = feature_profiles(X)
    for key in ("mean", "rank", "confusion"):
        assert prof[key].shape == (12,)
        assert prof[key].sum() == pytest.approx(1.0)
