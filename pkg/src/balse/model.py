"""The trained three-block bundle used by `balse train`, `predict` and `explain`."""
from __future__ import annotations

import difflib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .als import AlsHyperParams, AlsModel, load_als, save_als, train_als
from .dataset import RatingDataset, TagMatrix
from .errors import DataError
from .gate import GateFit, BlendSet, default_init, gate_weight, blend, load_gate, save_gate, train_gate
from .lasso import LassoHyperParams, LassoModel, load_lasso, save_lasso, train_lasso


@dataclass
class Prediction:
    als: float
    lasso: float
    blended: float
    weight: float
    item_count: int


@dataclass
class BalseModel:
    als: AlsModel
    lasso: LassoModel
    gate: GateFit
    item_counts: np.ndarray     # training-portion counts feeding the gate
    tags: TagMatrix
    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]

    def user_index(self, user_id: str) -> int:
        return _lookup(user_id, self.user_ids, "user")

    def item_index(self, item_id: str) -> int:
        return _lookup(item_id, self.item_ids, "item")

    def predict(self, user_id: str, item_id: str) -> Prediction:
        i, j = self.user_index(user_id), self.item_index(item_id)
        a = float(self.als.predict([i], [j])[0])
        s = float(self.lasso.predict(self.tags, [i], [j])[0])
        c = int(self.item_counts[j])
        return Prediction(a, s, blend(a, s, c, self.gate.params), gate_weight(c, self.gate.params), c)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_als(self.als, d / "als.model")
        save_lasso(self.lasso, d / "lasso.model")
        save_gate(self.gate, d / "gate.txt")
        np.savez(d / "tags.npz", values=self.tags.values, names=np.array(self.tags.tag_names, dtype=str))
        with open(d / "index.json", "w", encoding="utf-8") as f:
            json.dump({"users": list(self.user_ids), "items": list(self.item_ids),
                       "item_counts": [int(c) for c in self.item_counts]}, f)

    @classmethod
    def load(cls, directory) -> "BalseModel":
        d = Path(directory)
        if not d.is_dir():
            raise DataError(f"model directory {d} does not exist")
        with open(d / "index.json", encoding="utf-8") as f:
            index = json.load(f)
        with np.load(d / "tags.npz") as z:
            tags = TagMatrix(z["values"], tuple(str(s) for s in z["names"]))
        return cls(
            load_als(d / "als.model"), load_lasso(d / "lasso.model"), load_gate(d / "gate.txt"),
            np.array(index["item_counts"], dtype=np.int64), tags,
            tuple(index["users"]), tuple(index["items"]),
        )


def _lookup(key: str, ids, kind: str) -> int:
    try:
        return ids.index(key)
    except ValueError:
        near = difflib.get_close_matches(key, ids, n=5, cutoff=0.0)
        raise DataError(f"unknown {kind} id {key!r}; nearest known ids: {', '.join(near)}") from None


def fit_balse(dataset: RatingDataset, tags: TagMatrix, als_hyper: AlsHyperParams,
              lasso_hyper: LassoHyperParams, gate_iters: int, valid_fraction: float = 0.30,
              seed: int = 0, threads: int = 1, **lr) -> BalseModel:
    """Train blocks on a train portion, the gate on the held-out portion,
    then refit the blocks on all data (the deployment analogue of one fold)."""
    if tags.m != dataset.m:
        raise DataError(f"tag matrix has {tags.m} rows but dataset has {dataset.m} items")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(dataset))
    n_valid = int(round(valid_fraction * len(dataset)))
    train = dataset.subset(np.sort(perm[n_valid:]))
    valid = dataset.subset(np.sort(perm[:n_valid]))
    counts = train.item_counts()

    als_t = train_als(train, als_hyper, threads)
    lasso_t = train_lasso(train, tags, lasso_hyper, threads)
    data = BlendSet(als_t.predict(valid.users, valid.items),
                    lasso_t.predict(tags, valid.users, valid.items),
                    counts[valid.items], valid.values)
    gate = train_gate(data, default_init(data), gate_iters, **lr)

    als = train_als(dataset, als_hyper, threads)
    lasso = train_lasso(dataset, tags, lasso_hyper, threads)
    return BalseModel(als, lasso, gate, counts, tags, dataset.user_ids, dataset.item_ids)
