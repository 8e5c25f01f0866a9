import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balse.als import AlsHyperParams
from balse.dataset import RatingDataset, TagMatrix
from balse.errors import DataError, NumericError
from balse.evaluation import (
    COHORTS, MODELS, ExperimentConfig, cohorts, item_counts, make_split, rmse, run_experiment,
)
from balse.gate import GateFit, GateParams, blend
from balse.synth import SynthConfig, generate


def test_split_ten_triples():
    plan = make_split(10, k=5, seed=1)
    folds = [set(plan.test_idx(f)) for f in range(5)]
    assert all(len(f) == 2 for f in folds)
    assert set().union(*folds) == set(range(10))
    assert sum(len(f) for f in folds) == 10


def test_split_hundred_proportions():
    plan = make_split(100, seed=3)
    for f in range(5):
        assert (len(plan.train_idx(f)), len(plan.valid_idx(f)), len(plan.test_idx(f))) == (56, 24, 20)


def test_split_deterministic():
    a, b = make_split(57, seed=11), make_split(57, seed=11)
    np.testing.assert_array_equal(a.fold, b.fold)
    np.testing.assert_array_equal(a.valid, b.valid)
    assert not np.array_equal(make_split(57, seed=12).fold, a.fold)


def test_split_too_few():
    with pytest.raises(DataError):
        make_split(4, k=5)


@settings(max_examples=200, deadline=None)
@given(st.integers(10, 5000), st.integers(0, 2**31))
def test_split_partition_and_proportions(n, seed):
    plan = make_split(n, seed=seed)
    for f in range(5):
        tr, va, te = plan.train_idx(f), plan.valid_idx(f), plan.test_idx(f)
        assert len(np.intersect1d(tr, va)) == 0 and len(np.intersect1d(va, te)) == 0
        assert len(tr) + len(va) + len(te) == n
        assert abs(len(tr) - 0.56 * n) <= 1
        assert abs(len(va) - 0.24 * n) <= 1
        assert abs(len(te) - 0.20 * n) <= 1


def test_item_counts_train_only():
    train = RatingDataset.from_arrays([0, 1, 2], [1, 1, 1], [1.0, 1.0, 1.0], n=5, m=3)
    np.testing.assert_array_equal(item_counts(train), [0, 3, 0])
    empty = RatingDataset.from_arrays([], [], [], n=2, m=3)
    np.testing.assert_array_equal(item_counts(empty), [0, 0, 0])


def test_cohort_boundaries():
    test = RatingDataset.from_arrays([0, 0, 0, 0], [0, 1, 2, 3], [1.0] * 4, n=1, m=4)
    whole, little, cold = cohorts(test, np.array([0, 2, 3, 10]))
    assert whole.tolist() == [True] * 4
    assert little.tolist() == [True, True, False, False]
    assert cold.tolist() == [True, False, False, False]


@pytest.mark.parametrize("pred, truth, expected", [
    ([1.0, 2.0], [1.0, 2.0], 0.0),
    ([1.0, 2.0, 3.0], [0.0, 1.0, 4.0], 1.0),
    ([3.0, 4.0], [0.0, 0.0], math.sqrt(12.5)),
])
def test_rmse(pred, truth, expected):
    assert rmse(pred, truth) == pytest.approx(expected, abs=1e-12)


def test_rmse_empty_is_absent():
    assert rmse([], []) is None


def test_stubbed_single_fold_plumbing():
    rng = np.random.default_rng(0)
    users = np.repeat(np.arange(6), 5)
    items = np.tile(np.arange(5), 6)
    ds = RatingDataset.from_arrays(users, items, rng.normal(size=30))
    tags = TagMatrix.empty(ds.m)
    config = ExperimentConfig(k=5, seed=4, folds=(2,))
    gate = GateFit(GateParams(0.0, 1.0), 0, 0.0, 0.0)
    report = run_experiment(
        ds, tags, config,
        fit_als=lambda train: (lambda u, i: np.full(len(u), 1.0)),
        fit_lasso=lambda train: (lambda u, i: np.full(len(u), -1.0)),
        fit_gate=lambda data: gate,
    )
    plan = make_split(30, 5, 0.3, 4)
    truth = ds.values[plan.test_idx(2)]
    fold = report.folds[0]
    assert fold.rmse["ALS", "whole"] == pytest.approx(math.sqrt(sum((1 - y) ** 2 for y in truth) / len(truth)))
    assert fold.rmse["LASSO", "whole"] == pytest.approx(math.sqrt(sum((-1 - y) ** 2 for y in truth) / len(truth)))
    assert fold.rmse["BALSE", "whole"] == pytest.approx(math.sqrt(sum(y * y for y in truth) / len(truth)))
    assert fold.sizes["whole"] == 6


def test_nan_prediction_aborts():
    ds = RatingDataset.from_arrays(np.repeat(np.arange(4), 5), np.tile(np.arange(5), 4), np.ones(20))
    with pytest.raises(NumericError):
        run_experiment(ds, TagMatrix.empty(ds.m), ExperimentConfig(folds=(0,)),
                       fit_als=lambda t: (lambda u, i: np.full(len(u), np.nan)),
                       fit_lasso=lambda t: (lambda u, i: np.zeros(len(u))))


@pytest.fixture(scope="module")
def small_report():
    ds, tags, _ = generate(SynthConfig(n=80, m=120, t=10, density=0.15, seed=5))
    config = ExperimentConfig(als=AlsHyperParams(rank=5), gate_iters=1500, seed=5)
    return ds, tags, config, run_experiment(ds, tags, config)


def test_report_shape_and_nesting(small_report):
    ds, tags, config, report = small_report
    assert len(report.folds) == 5
    for f in report.folds:
        assert f.sizes["cold"] <= f.sizes["little_known"] <= f.sizes["whole"]
        for model in MODELS:
            for cohort in COHORTS:
                value = f.rmse[model, cohort]
                assert value is None or value >= 0


def test_balse_between_vanilla_predictions(small_report):
    ds, tags, config, report = small_report
    from balse.als import train_als
    from balse.lasso import train_lasso
    plan = make_split(len(ds), config.k, config.valid_fraction, config.seed)
    f = 0
    tv = ds.subset(np.concatenate([plan.train_idx(f), plan.valid_idx(f)]))
    test = ds.subset(plan.test_idx(f))
    a = train_als(tv, config.als).predict(test.users, test.items)
    s = train_lasso(tv, tags, config.lasso).predict(tags, test.users, test.items)
    counts = ds.subset(plan.train_idx(f)).item_counts()[test.items]
    b = blend(a, s, counts, report.folds[f].gate.params)
    assert np.all(b >= np.minimum(a, s)) and np.all(b <= np.maximum(a, s))
    assert rmse(b, test.values) == pytest.approx(report.folds[f].rmse["BALSE", "whole"], rel=1e-12)


def test_report_deterministic(small_report):
    ds, tags, config, report = small_report
    again = run_experiment(ds, tags, config)
    assert again.to_csv() == report.to_csv()


def test_report_formats(small_report):
    report = small_report[3]
    lines = report.to_csv().splitlines()
    assert lines[0] == "model,cohort,fold,rmse,size"
    assert len(lines) == 1 + 3 * 3 * (5 + 2)
    table = report.to_table()
    assert "Cold-start items" in table and "BALSE" in table and "±" in table
    assert report.gate_csv().startswith("fold,beta,gamma")


def test_noise_tags_push_gate_toward_als():
    ds, _, _ = generate(SynthConfig(n=120, m=150, t=10, rank=3, density=0.2, cold_fraction=0.0,
                                    tag_signal=0.0, noise_sd=0.1, seed=8))
    noise = TagMatrix(np.random.default_rng(99).random((ds.m, 10)), tuple(f"n{k}" for k in range(10)))
    config = ExperimentConfig(als=AlsHyperParams(rank=3), gate_iters=3000, seed=8, folds=(0, 1))
    report = run_experiment(ds, noise, config)
    plan = make_split(len(ds), seed=8)
    for fold in report.folds:
        counts = ds.subset(plan.train_idx(fold.fold)).item_counts()
        w = 1 / (1 + np.exp(-fold.gate.params.beta * (np.median(counts) - fold.gate.params.gamma)))
        assert w > 0.5
