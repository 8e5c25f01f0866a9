import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balse.dataset import RatingDataset, TagMatrix
from balse.lasso import (
    LassoHyperParams, LassoModel, clamp_tau, kkt_residual, lasso_objective, load_lasso,
    predict_lasso, save_lasso, soft_threshold, train_lasso, train_user_lasso, _fit,
)

from lasso_oracle import objective as oracle_objective, projected_gradient

TIGHT = LassoHyperParams(alpha=0.01, max_passes=100000, tol=1e-12)


def test_single_tag_soft_threshold():
    T = np.ones((4, 1))
    ratings = [(0, 0.5), (1, 1.5), (2, 1.0), (3, 1.0)]  # mean 1.0
    p = train_user_lasso(ratings, T, LassoHyperParams(alpha=0.01))
    assert p[0] == pytest.approx(0.99, abs=1e-12)


def test_large_alpha_full_shrinkage(rng):
    T = rng.random((10, 4))
    y = rng.normal(size=10)
    g0 = np.abs(T.T @ y / 10).max()
    p = train_user_lasso(list(enumerate(y)), T, LassoHyperParams(alpha=g0))
    np.testing.assert_array_equal(p, 0.0)


def test_identity_exact_interpolation():
    p = train_user_lasso([(0, 2.0), (1, -2.0)], np.eye(2), LassoHyperParams(alpha=0.0, tol=1e-12))
    np.testing.assert_allclose(p, [2.0, -2.0], atol=1e-10)


def test_no_ratings_zero_row():
    np.testing.assert_array_equal(train_user_lasso([], np.eye(3)), 0.0)


def test_disjoint_users_are_independent(rng):
    T = TagMatrix(rng.random((6, 3)), ("a", "b", "c"))
    ds = RatingDataset.from_arrays([0, 0, 0, 1, 1, 1], [0, 1, 2, 3, 4, 5], rng.normal(size=6))
    model = train_lasso(ds, T, TIGHT)
    for u in (0, 1):
        sel = ds.users == u
        row = train_user_lasso(list(zip(ds.items[sel], ds.values[sel])), T, TIGHT)
        np.testing.assert_array_equal(model.P[u], row)


def test_posterless_items_give_zero_row():
    T = TagMatrix(np.array([[0.0, 0.0], [0.0, 0.0], [0.3, 0.9]]), ("a", "b"))
    ds = RatingDataset.from_arrays([0, 0, 1], [0, 1, 2], [2.0, -2.0, 1.0], n=3)
    model = train_lasso(ds, T)
    np.testing.assert_array_equal(model.P[0], 0.0)
    np.testing.assert_array_equal(model.P[2], 0.0)
    assert model.user_mask.tolist() == [True, True, False]


def test_matches_projected_gradient_oracle(rng):
    X = rng.random((12, 5))
    y = rng.normal(0, 1.5, 12)
    p, _, _ = _fit(X, y, TIGHT)
    ref = projected_gradient(X, y, 0.01)
    assert abs(lasso_objective(p, X, y, 0.01) - oracle_objective(ref, X, y, 0.01)) <= 1e-6


@pytest.mark.parametrize("x", [3.0, -5.0, 1.5, 2.0, -2.0, 0.0])
def test_clamp_tau(x):
    assert clamp_tau(x) == max(min(x, 2.0), -2.0)


def test_predict_lasso():
    T = TagMatrix(np.array([[0.9, 0.4], [1.0, 0.0]]), ("a", "b"))
    model = LassoModel(np.array([[0.0, 0.0], [1.0, 1.0], [4.0, 0.0]]), np.ones(3, bool))
    assert predict_lasso(model, T, 0, 0) == 0.0
    assert predict_lasso(model, T, 1, 0) == pytest.approx(1.3)
    assert predict_lasso(model, T, 2, 1) == 2.0
    with pytest.raises(IndexError):
        predict_lasso(model, T, 3, 0)


def test_objective_non_increasing_between_passes(rng):
    X = rng.random((20, 8))
    y = rng.normal(0, 2, 20)
    prev = lasso_objective(np.zeros(8), X, y, 0.01)
    for passes in range(1, 30):
        p, done, _ = _fit(X, y, LassoHyperParams(0.01, passes, 0.0))
        cur = lasso_objective(p, X, y, 0.01)
        assert cur <= prev + 1e-10 * abs(prev)
        prev = cur


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 25), st.integers(1, 10))
def test_kkt_certificate(seed, N, t):
    r = np.random.default_rng(seed)
    X = r.random((N, t)) * (r.random((N, t)) < 0.7)
    y = r.normal(0, 2, N)
    hyper = LassoHyperParams(alpha=0.01)
    p, _, reported = _fit(X, y, hyper)
    assert kkt_residual(p, X, y, 0.01) <= 1e-6
    assert reported <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_l1_norm_monotone_in_alpha(seed, a1, a2):
    a1, a2 = sorted((a1, a2))
    r = np.random.default_rng(seed)
    X = r.random((15, 6))
    y = r.normal(0, 2, 15)
    p1 = _fit(X, y, LassoHyperParams(a1, 100000, 1e-12))[0]
    p2 = _fit(X, y, LassoHyperParams(a2, 100000, 1e-12))[0]
    assert np.abs(p1).sum() >= np.abs(p2).sum() - 1e-8


def test_sparse_planted_preferences_recover_zeros():
    from balse.synth import SynthConfig, generate
    ds, tags, truth = generate(SynthConfig(seed=3))
    model = train_lasso(ds, tags)
    trained = model.user_mask
    assert np.all((model.P[trained] == 0).any(axis=1))
    preds = model.predict(tags, ds.users, ds.items)
    assert preds.min() >= -2.0 and preds.max() <= 2.0


def test_save_load_round_trip(tmp_path, synth_fixture):
    ds, tags, _ = synth_fixture
    model = train_lasso(ds, tags)
    save_lasso(model, tmp_path / "lasso.model")
    back = load_lasso(tmp_path / "lasso.model")
    np.testing.assert_array_equal(back.P, model.P)
    np.testing.assert_array_equal(back.user_mask, model.user_mask)
    assert back.alpha == model.alpha


def test_soft_threshold_values():
    np.testing.assert_allclose(soft_threshold(np.array([1.0, -1.0, 0.005]), 0.01), [0.99, -0.99, 0.0])
