"""Matrix factorization by alternating least squares with weighted-lambda
regularization (ALS-WR).

The objective over observed triples is

    sum_(i,j) (r_ij - U_i . V_j)^2 + lam * (|U_i|^2 + |V_j|^2)

so a row with N observations carries a ridge penalty of lam * N.  Rows with
no observations are set to zero.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import RatingDataset
from .errors import DataError

logger = logging.getLogger(__name__)

# triples per batched solve; bounds the (nnz, r, r) outer-product buffer
_CHUNK_NNZ = 1 << 17
_FORMAT = "balse-als 1"


@dataclass(frozen=True)
class AlsHyperParams:
    rank: int = 20
    lam: float = 0.1
    sweeps: int = 10
    seed: int = 0
    tol: float | None = None

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


@dataclass
class AlsModel:
    U: np.ndarray
    V: np.ndarray
    item_mask: np.ndarray = field(default=None)
    user_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.item_mask is None:
            self.item_mask = np.zeros(self.V.shape[0], dtype=bool)
        if self.user_mask is None:
            self.user_mask = np.zeros(self.U.shape[0], dtype=bool)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.V.shape[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def predict(self, users, items) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        return np.einsum("ij,ij->i", self.U[users], self.V[items])


def init_factors(n: int, m: int, hyper: AlsHyperParams) -> AlsModel:
    rng = np.random.default_rng(hyper.seed)
    scale = 1.0 / np.sqrt(hyper.rank)
    U = rng.uniform(-0.5, 0.5, size=(n, hyper.rank)) * scale
    V = rng.uniform(-0.5, 0.5, size=(m, hyper.rank)) * scale
    return AlsModel(U, V)


def predict_als(model: AlsModel, user_index: int, item_index: int) -> float:
    if not (0 <= user_index < model.n and 0 <= item_index < model.m):
        raise IndexError(f"index ({user_index}, {item_index}) out of bounds for {model.n}x{model.m}")
    return float(model.U[user_index] @ model.V[item_index])


def als_loss(model: AlsModel, dataset: RatingDataset, lam: float) -> float:
    Ui = model.U[dataset.users]
    Vj = model.V[dataset.items]
    resid = dataset.values - np.einsum("ij,ij->i", Ui, Vj)
    return float(resid @ resid + lam * (np.sum(Ui * Ui) + np.sum(Vj * Vj)))


def _grouping(keys: np.ndarray, n_rows: int):
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=n_rows)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return order, indptr, counts


def _solve_block(rows, order, indptr, counts, other_keys, values, other, lam):
    """Solve the normal equations for a contiguous block of nonempty rows."""
    r = other.shape[1]
    lo, hi = indptr[rows[0]], indptr[rows[-1] + 1]
    sel = order[lo:hi]
    M = other[other_keys[sel]]
    y = values[sel]
    starts = indptr[rows] - lo
    if lam > 0:
        A = np.add.reduceat(M[:, :, None] * M[:, None, :], starts, axis=0)
        b = np.add.reduceat(M * y[:, None], starts, axis=0)
        A += (lam * counts[rows])[:, None, None] * np.eye(r)
        return np.linalg.solve(A, b[:, :, None])[:, :, 0]
    # lam == 0: minimum-norm least squares handles rank-deficient rows
    out = np.empty((len(rows), r))
    for k, s in enumerate(starts):
        e = starts[k + 1] if k + 1 < len(starts) else len(sel)
        out[k] = np.linalg.lstsq(M[s:e], y[s:e], rcond=None)[0]
    return out


def _blocks(rows, counts):
    """Split nonempty rows into contiguous blocks of bounded total nnz."""
    blocks, start, acc = [], 0, 0
    for k, row in enumerate(rows):
        acc += counts[row]
        if acc >= _CHUNK_NNZ:
            blocks.append(rows[start:k + 1])
            start, acc = k + 1, 0
    if start < len(rows):
        blocks.append(rows[start:])
    return blocks


def _half_sweep(keys, other_keys, values, n_rows, other, lam, threads=1, grouping=None):
    order, indptr, counts = grouping if grouping is not None else _grouping(keys, n_rows)
    out = np.zeros((n_rows, other.shape[1]))
    rows = np.flatnonzero(counts)
    if len(rows) == 0:
        return out
    blocks = _blocks(rows, counts)

    def work(block):
        return block, _solve_block(block, order, indptr, counts, other_keys, values, other, lam)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    for block, solved in results:
        out[block] = solved
    return out


def _check_shapes(model: AlsModel, dataset: RatingDataset):
    if model.n != dataset.n or model.m != dataset.m:
        raise DataError(
            f"model is {model.n}x{model.m} but dataset is {dataset.n}x{dataset.m}"
        )


def half_sweep_users(model: AlsModel, dataset: RatingDataset, lam: float, threads: int = 1) -> np.ndarray:
    """Exact row minimizers U_i = (V'V + lam N_i I)^-1 V'r_i with V fixed."""
    _check_shapes(model, dataset)
    return _half_sweep(dataset.users, dataset.items, dataset.values, dataset.n, model.V, lam, threads)


def half_sweep_items(model: AlsModel, dataset: RatingDataset, lam: float, threads: int = 1) -> np.ndarray:
    _check_shapes(model, dataset)
    return _half_sweep(dataset.items, dataset.users, dataset.values, dataset.m, model.U, lam, threads)


def train_als(dataset: RatingDataset, hyper: AlsHyperParams = AlsHyperParams(),
              threads: int = 1, on_half_sweep=None) -> AlsModel:
    """Fit U, V by `hyper.sweeps` item-then-user half-sweeps.

    `on_half_sweep(model)` is called after every half-sweep.  With
    `hyper.tol` set, training stops once the relative loss change of a full
    sweep falls below it.
    """
    model = init_factors(dataset.n, dataset.m, hyper)
    by_user = _grouping(dataset.users, dataset.n)
    by_item = _grouping(dataset.items, dataset.m)
    model.user_mask = by_user[2] > 0
    model.item_mask = by_item[2] > 0
    prev = None
    for sweep in range(hyper.sweeps):
        model.V = _half_sweep(dataset.items, dataset.users, dataset.values, dataset.m,
                              model.U, hyper.lam, threads, by_item)
        if on_half_sweep is not None:
            on_half_sweep(model)
        model.U = _half_sweep(dataset.users, dataset.items, dataset.values, dataset.n,
                              model.V, hyper.lam, threads, by_user)
        if on_half_sweep is not None:
            on_half_sweep(model)
        if hyper.tol is not None:
            loss = als_loss(model, dataset, hyper.lam)
            logger.debug("sweep %d loss %.6g", sweep, loss)
            if prev is not None and abs(prev - loss) <= hyper.tol * max(abs(prev), 1e-300):
                break
            prev = loss
    # unobserved users have arbitrary init values until the first user sweep
    model.U[~model.user_mask] = 0.0
    return model


def save_als(model: AlsModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{_FORMAT}\n{model.n} {model.m} {model.rank}\n")
        for mat in (model.U, model.V):
            for row in mat:
                f.write(" ".join(repr(float(x)) for x in row) + "\n")
        f.write(" ".join("1" if b else "0" for b in model.item_mask) + "\n")
        f.write(" ".join("1" if b else "0" for b in model.user_mask) + "\n")


def load_als(path) -> AlsModel:
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines[0] != _FORMAT:
        raise DataError(f"{path}: not an ALS model file")
    n, m, r = (int(x) for x in lines[1].split())

    def matrix(start, rows):
        data = [[float(x) for x in lines[start + k].split()] for k in range(rows)]
        return np.array(data, dtype=np.float64).reshape(rows, r)

    U = matrix(2, n)
    V = matrix(2 + n, m)
    item_mask = np.array([x == "1" for x in lines[2 + n + m].split()], dtype=bool)
    user_mask = np.array([x == "1" for x in lines[3 + n + m].split()], dtype=bool)
    return AlsModel(U, V, item_mask.reshape(m), user_mask.reshape(n))
