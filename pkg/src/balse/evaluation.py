"""Cross-validated evaluation of ALS, LASSO and the blended model.

Each fold uses 1/k of the triples as test set; a fraction of the rest is
held out as validation.  The blocks feeding the gate are trained on the
train part only, the gate on validation, and the reported ALS/LASSO models
on train+validation.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .als import AlsHyperParams, train_als
from .dataset import RatingDataset, TagMatrix
from .errors import DataError, NumericError
from .gate import DEFAULT_ITERS, BlendSet, GateFit, blend, default_init, gate_weight, train_gate
from .lasso import LassoHyperParams, train_lasso

logger = logging.getLogger(__name__)

MODELS = ("ALS", "LASSO", "BALSE")
COHORTS = ("whole", "little_known", "cold")

# fit(train_dataset) -> predict(users, items)
Fitter = Callable[[RatingDataset], Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class SplitPlan:
    fold: np.ndarray   # test fold of each triple
    valid: np.ndarray  # (k, N) validation mask within each fold's complement
    seed: int

    @property
    def k(self) -> int:
        return self.valid.shape[0]

    def test_idx(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold == f)

    def valid_idx(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.valid[f])

    def train_idx(self, f: int) -> np.ndarray:
        return np.flatnonzero((self.fold != f) & ~self.valid[f])


def make_split(n_triples: int, k: int = 5, valid_fraction: float = 0.30, seed: int = 0) -> SplitPlan:
    """Random k-fold partition plus a per-fold validation subset.

    The validation size is nudged from valid_fraction * |complement| so that
    train, validation and test each land within one triple of their share
    of the whole dataset.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if not 0.0 <= valid_fraction < 1.0:
        raise ValueError("valid_fraction must lie in [0, 1)")
    if n_triples < k:
        raise DataError(f"need at least {k} triples for {k}-fold split, got {n_triples}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_triples)
    fold = np.empty(n_triples, dtype=np.int64)
    for f, part in enumerate(np.array_split(perm, k)):
        fold[part] = f
    ideal_train = (1 - 1 / k) * (1 - valid_fraction) * n_triples
    ideal_valid = (1 - 1 / k) * valid_fraction * n_triples
    valid = np.zeros((k, n_triples), dtype=bool)
    for f in range(k):
        rest = np.flatnonzero(fold != f)
        slack = len(rest) - ideal_train - ideal_valid
        n_train = min(max(int(math.floor(ideal_train + slack / 2 + 0.5)), 0), len(rest))
        chosen = rng.permutation(rest)[: len(rest) - n_train]
        valid[f, chosen] = True
    return SplitPlan(fold, valid, seed)


def item_counts(train: RatingDataset) -> np.ndarray:
    return train.item_counts()


def cohorts(test: RatingDataset, counts: np.ndarray, threshold: int = 3):
    """Boolean masks over test triples: whole, little-known (count < threshold), cold (count 0)."""
    c = np.asarray(counts)[test.items]
    return np.ones(len(test), dtype=bool), c < threshold, c == 0


def rmse(predictions, truths) -> float | None:
    """Root mean squared error, or None for an empty cohort."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ValueError("predictions and truths differ in length")
    if predictions.size == 0:
        return None
    err = predictions - truths
    return float(np.sqrt(np.mean(err * err)))


@dataclass
class ExperimentConfig:
    als: AlsHyperParams = field(default_factory=AlsHyperParams)
    lasso: LassoHyperParams = field(default_factory=LassoHyperParams)
    gate_iters: int = DEFAULT_ITERS
    lr_start: float = 0.9
    lr_decay: float = 0.997
    lr_every: int = 20
    k: int = 5
    valid_fraction: float = 0.30
    seed: int = 0
    cohort_threshold: int = 3
    threads: int = 1
    folds: tuple[int, ...] | None = None


@dataclass
class FoldResult:
    fold: int
    rmse: dict            # (model, cohort) -> float | None
    sizes: dict           # cohort -> int
    gate: GateFit
    n_train: int
    n_valid: int
    n_test: int


@dataclass
class CohortReport:
    folds: list[FoldResult]

    def values(self, model: str, cohort: str) -> list[float]:
        return [f.rmse[model, cohort] for f in self.folds if f.rmse[model, cohort] is not None]

    def mean(self, model: str, cohort: str) -> float | None:
        v = self.values(model, cohort)
        return float(np.mean(v)) if v else None

    def std(self, model: str, cohort: str) -> float | None:
        v = self.values(model, cohort)
        return float(np.std(v, ddof=1)) if len(v) > 1 else None

    def to_csv(self) -> str:
        """Machine-readable report: one row per fold, then mean/std summary rows.

        Empty cohorts leave the rmse field blank.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "cohort", "fold", "rmse", "size"])
        fmt = lambda x: "" if x is None else repr(x)  # noqa: E731
        for model in MODELS:
            for cohort in COHORTS:
                for f in self.folds:
                    w.writerow([model, cohort, f.fold, fmt(f.rmse[model, cohort]), f.sizes[cohort]])
                total = sum(f.sizes[cohort] for f in self.folds)
                w.writerow([model, cohort, "mean", fmt(self.mean(model, cohort)), total])
                w.writerow([model, cohort, "std", fmt(self.std(model, cohort)), total])
        return buf.getvalue()

    def gate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "beta", "gamma", "initial_loss", "final_loss", "n_train", "n_valid", "n_test"])
        for f in self.folds:
            p = f.gate.params
            w.writerow([f.fold, repr(p.beta), repr(p.gamma), repr(f.gate.initial_loss),
                        repr(f.gate.final_loss), f.n_train, f.n_valid, f.n_test])
        return buf.getvalue()

    def to_table(self) -> str:
        def cell(model, cohort):
            mu, sd = self.mean(model, cohort), self.std(model, cohort)
            if mu is None:
                return "n/a"
            return f"{mu:.5f} ± {sd:.3f}" if sd is not None else f"{mu:.5f}"

        header = ["RMSE", "Whole test set", "Little-known items", "Cold-start items"]
        rows = [[m] + [cell(m, c) for c in COHORTS] for m in MODELS]
        sizes = ["test triples"] + [str(sum(f.sizes[c] for f in self.folds)) for c in COHORTS]
        widths = [max(len(r[i]) for r in [header, sizes] + rows) for i in range(4)]
        line = lambda r: "  ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip()  # noqa: E731
        out = [line(header), line(["-" * w for w in widths])] + [line(r) for r in rows]
        out += [line(sizes), ""]
        for f in self.folds:
            p = f.gate.params
            out.append(f"fold {f.fold}: beta={p.beta:.5f} gamma={p.gamma:.5f} "
                       f"(gate loss {f.gate.initial_loss:.4g} -> {f.gate.final_loss:.4g})")
            if p.beta < 0:
                out.append(f"  warning: negative beta on fold {f.fold}, gate favours LASSO on popular items")
        return "\n".join(out) + "\n"


def als_fitter(config: ExperimentConfig) -> Fitter:
    def fit(train):
        model = train_als(train, config.als, threads=config.threads)
        return model.predict
    return fit


def lasso_fitter(tags: TagMatrix, config: ExperimentConfig) -> Fitter:
    def fit(train):
        model = train_lasso(train, tags, config.lasso, threads=config.threads)
        return lambda users, items: model.predict(tags, users, items)
    return fit


def _check(name, pred, fold):
    if not np.all(np.isfinite(pred)):
        bad = int(np.sum(~np.isfinite(pred)))
        raise NumericError(f"fold {fold}: {bad} non-finite {name} predictions")
    return pred


def run_fold(dataset: RatingDataset, plan: SplitPlan, f: int, config: ExperimentConfig,
             fit_als: Fitter, fit_lasso: Fitter, fit_gate=None) -> FoldResult:
    train = dataset.subset(plan.train_idx(f))
    valid = dataset.subset(plan.valid_idx(f))
    test = dataset.subset(plan.test_idx(f))
    tv = dataset.subset(np.concatenate([plan.train_idx(f), plan.valid_idx(f)]))

    gate_counts = item_counts(train)
    als_train = fit_als(train)
    lasso_train = fit_lasso(train)
    blend_set = BlendSet(
        _check("ALS", als_train(valid.users, valid.items), f),
        _check("LASSO", lasso_train(valid.users, valid.items), f),
        gate_counts[valid.items],
        valid.values,
    )
    if fit_gate is None:
        gate = train_gate(blend_set, default_init(blend_set), config.gate_iters,
                          config.lr_start, config.lr_decay, config.lr_every)
    else:
        gate = fit_gate(blend_set)

    als_tv = fit_als(tv)
    lasso_tv = fit_lasso(tv)
    preds = {
        "ALS": _check("ALS", als_tv(test.users, test.items), f),
        "LASSO": _check("LASSO", lasso_tv(test.users, test.items), f),
    }
    preds["BALSE"] = blend(preds["ALS"], preds["LASSO"], gate_counts[test.items], gate.params)

    masks = dict(zip(COHORTS, cohorts(test, item_counts(tv), config.cohort_threshold)))
    scores = {
        (model, cohort): rmse(preds[model][mask], test.values[mask])
        for model in MODELS for cohort, mask in masks.items()
    }
    sizes = {cohort: int(mask.sum()) for cohort, mask in masks.items()}
    logger.info("fold %d: beta=%.4g gamma=%.4g BALSE whole=%s", f,
                gate.params.beta, gate.params.gamma, scores["BALSE", "whole"])
    return FoldResult(f, scores, sizes, gate, len(train), len(valid), len(test))


def run_experiment(dataset: RatingDataset, tags: TagMatrix, config: ExperimentConfig = ExperimentConfig(),
                   fit_als: Fitter | None = None, fit_lasso: Fitter | None = None,
                   fit_gate=None) -> CohortReport:
    """Run the cross-validated protocol; the fitters can be swapped for stubs."""
    if tags.m != dataset.m:
        raise DataError(f"tag matrix has {tags.m} rows but dataset has {dataset.m} items")
    plan = make_split(len(dataset), config.k, config.valid_fraction, config.seed)
    fit_als = fit_als or als_fitter(config)
    fit_lasso = fit_lasso or lasso_fitter(tags, config)
    folds = range(config.k) if config.folds is None else config.folds
    return CohortReport([
        run_fold(dataset, plan, f, config, fit_als, fit_lasso, fit_gate) for f in folds
    ])


def mean_gate_weight(report: CohortReport, counts) -> np.ndarray:
    """Gate weight per fold evaluated at the given item counts."""
    return np.array([gate_weight(counts, f.gate.params) for f in report.folds])
