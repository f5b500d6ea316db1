import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from ranksim.errors import ConfigError, DimensionMismatchError, InvalidInputError
from ranksim.filters import (
    FilterBank,
    TrainConfig,
    assign,
    auto_n_filters,
    default_tol,
    fit,
    initialize_filters,
    member_sums,
    spread_filters,
)

from . import oracle


@pytest.mark.parametrize("N,m", [(1, 1), (999, 999), (1000, 1000), (9999, 1000), (10_000, 1000),
                                 (60_000, 6000), (99_999, 9999), (100_000, 10_000), (10**7, 10_000)])
def test_auto_n_filters(N, m):
    assert auto_n_filters(N) == m


def test_default_tol():
    assert default_tol(10_000) == 0
    assert default_tol(10_001) == 11
    assert default_tol(60_000) == 60


def test_config_validation():
    for bad in (dict(n_filters=0), dict(n_filters="many"), dict(distribution="zipf"), dict(tol=-1),
                dict(max_iter=0), dict(k=1)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


def test_fit_matches_oracle(int_data):
    bank = fit(int_data, n_filters=5, seed=3)
    ref, passes = oracle.train(int_data, 5, 3)
    assert bank.ranks.tolist() == ref
    assert bank.converged_iter == passes
    assert bank.converged


def test_fit_with_user_map_matches_oracle(int_data):
    # dyadic map values keep every product exact
    D = np.arange(10) / 8.0
    bank = fit(int_data, n_filters=4, seed=0, distribution=D)
    ref, _ = oracle.train(int_data, 4, 0, D=list(D))
    assert bank.ranks.tolist() == ref
    assert bank.mode == "user"


def test_weights_are_normalized_ranks(clusters):
    X, _ = clusters
    for mode in ("rank", "confusion"):
        bank = fit(X, n_filters=10, distribution=mode)
        assert np.allclose(bank.weights.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.sort(bank.ranks, axis=1) == np.arange(1, 13))
        # weights ordered like ranks
        for w, r in zip(bank.weights, bank.ranks):
            assert np.all(np.diff(w[np.argsort(r)]) >= 0)


def test_assign_picks_most_activated(clusters):
    X, _ = clusters
    bank = fit(X, n_filters=6)
    labels = assign(X, bank)
    S = X @ bank.weights.T
    assert np.array_equal(labels, np.argmax(S, axis=1))


def test_dense_sparse_identical(int_data):
    a = fit(int_data, n_filters=6, seed=2)
    b = fit(sp.csr_matrix(int_data), n_filters=6, seed=2)
    assert a.same_as(b)
    assert np.array_equal(a.activations(int_data), b.activations(sp.csr_matrix(int_data)))


def test_spread_stops_at_fixed_point(clusters):
    X, _ = clusters
    bank = fit(X, n_filters=8)
    again = spread_filters(X, bank, tol=0)
    assert again.converged_iter == 1
    assert np.array_equal(again.ranks, bank.ranks)


@pytest.mark.parametrize("slack", [0, 1])
def test_tol_semantics(int_data, slack):
    # tol >= N - 1 lets the second assignment stop the loop after one update
    bank = initialize_filters(int_data, None, 5, seed=1)
    out = spread_filters(int_data, bank, tol=int_data.shape[0] - slack)
    assert out.converged_iter == 1


def test_max_iter_warns(int_data):
    with pytest.warns(RuntimeWarning, match="did not converge"):
        bank = fit(int_data, n_filters=20, max_iter=1, seed=0)
    assert not bank.converged
    assert bank.converged_iter == 1


def test_empty_filters_keep_or_reseed():
    # two identical filters: the second never wins
    X = np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0], [1.0, 3.0, 2.0]])
    bank = FilterBank(np.array([[1, 2, 3], [1, 2, 3], [3, 2, 1]]))
    kept = spread_filters(X, bank, tol=0)
    assert kept.ranks[1].tolist() == [1, 2, 3]
    reseeded = spread_filters(X, bank, tol=0, max_iter=1, reseed_empty=True, seed=0)
    assert sorted(reseeded.ranks[1].tolist()) == [1, 2, 3]


def test_member_sums():
    X = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    sums, counts = member_sums(X, np.array([1, 1, 0]), 3)
    assert sums.tolist() == [[5.0, 6.0], [4.0, 6.0], [0.0, 0.0]]
    assert counts.tolist() == [1, 2, 0]


def test_fit_errors(clusters):
    X, _ = clusters
    with pytest.raises(ConfigError):
        fit(X, n_filters=X.shape[0] + 1)
    with pytest.raises(ConfigError):
        fit(X, tol=X.shape[0])
    with pytest.raises(InvalidInputError):
        fit(X[:, :1])
    with pytest.raises(InvalidInputError):
        fit(np.array([[1.0, np.nan, 2.0]] * 3))
    with pytest.raises(DimensionMismatchError):
        assign(X[:, :5], fit(X, n_filters=3))


def test_few_features_warn_or_raise():
    X = np.random.default_rng(0).random((20, 4))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(UserWarning):
            fit(X, n_filters=3)
    with pytest.raises(InvalidInputError):
        fit(X, n_filters=3, strict_features=True)


def test_fit_records_metadata(clusters):
    X, _ = clusters
    bank = fit(X, TrainConfig(n_filters=5, seed=9, k=7, distribution="confusion"))
    assert (bank.seed, bank.k_default, bank.mode) == (9, 7, "confusion")
    assert bank.distribution.shape == (12,)
    assert bank.extra["init_rows"].shape == (5,)


def test_seed_determinism(clusters):
    X, _ = clusters
    assert fit(X, n_filters=7, seed=5).same_as(fit(X, n_filters=7, seed=5))
    assert not fit(X, n_filters=7, seed=5).same_as(fit(X, n_filters=7, seed=6))
