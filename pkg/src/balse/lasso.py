"""Per-user LASSO regression of ratings on item tag probabilities.

For user i with N_i ratings y on items whose tag rows form X (N_i x t):

    minimize  1/(2 N_i) |y - X p|^2 + alpha |p|_1

solved by cyclic coordinate descent in covariance form (G = X'X / N_i,
c = X'y / N_i).  Predictions are clamped to [-2, 2].
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dataset import RatingDataset, TagMatrix
from .errors import DataError

TAU_LOW, TAU_HIGH = -2.0, 2.0
_FORMAT = "balse-lasso 1"


@dataclass(frozen=True)
class LassoHyperParams:
    alpha: float = 0.01
    max_passes: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass
class LassoModel:
    """User preference rows P (n x t).

    Held dense in memory; the file format stores only nonzero weights.
    `kkt` is the optimality residual reached for each trained user.
    """

    P: np.ndarray
    user_mask: np.ndarray
    alpha: float = 0.01
    kkt: np.ndarray = field(default=None, repr=False)
    passes: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def t(self) -> int:
        return self.P.shape[1]

    def scores(self, tags: TagMatrix | np.ndarray, users, items) -> np.ndarray:
        T = tags.values if isinstance(tags, TagMatrix) else tags
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        return np.einsum("ij,ij->i", self.P[users], T[items])

    def predict(self, tags, users, items) -> np.ndarray:
        return clamp_tau(self.scores(tags, users, items))


def clamp_tau(x):
    out = np.clip(x, TAU_LOW, TAU_HIGH)
    return float(out) if np.ndim(out) == 0 else out


def predict_lasso(model: LassoModel, tags: TagMatrix, user_index: int, item_index: int) -> float:
    if not (0 <= user_index < model.n and 0 <= item_index < tags.m):
        raise IndexError(f"index ({user_index}, {item_index}) out of bounds")
    return clamp_tau(float(model.P[user_index] @ tags.values[item_index]))


def soft_threshold(z, alpha):
    return np.sign(z) * np.maximum(np.abs(z) - alpha, 0.0)


def lasso_objective(p, X, y, alpha) -> float:
    r = y - X @ p
    return float(r @ r / (2 * len(y)) + alpha * np.abs(p).sum())


def kkt_residual(p, X, y, alpha) -> float:
    """Largest violation of the subgradient optimality conditions."""
    g = X.T @ (X @ p - y) / len(y)
    zero = p == 0
    viol = np.where(zero, np.maximum(np.abs(g) - alpha, 0.0), np.abs(g + alpha * np.sign(p)))
    return float(viol.max()) if len(viol) else 0.0


@njit(cache=True, nogil=True)
def _kkt(G, c, p, alpha):
    t = len(c)
    worst = 0.0
    for k in range(t):
        g = -c[k]
        for l in range(t):
            g += G[k, l] * p[l]
        if p[k] == 0.0:
            v = abs(g) - alpha
        elif p[k] > 0.0:
            v = abs(g + alpha)
        else:
            v = abs(g - alpha)
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _smooth_objective(G, c, p, alpha):
    # objective up to the constant |y|^2 / (2N)
    t = len(c)
    total = 0.0
    for k in range(t):
        s = 0.0
        for l in range(t):
            s += G[k, l] * p[l]
        total += 0.5 * p[k] * s - c[k] * p[k] + alpha * abs(p[k])
    return total


@njit(cache=True, nogil=True)
def _polish(G, c, p, alpha):
    """Active-set step on the current support and signs.

    Solves the stationarity equations restricted to the support (or, when
    they have no solution, follows the descent direction of the restricted
    quadratic).  The step stops where the first coordinate reaches zero.  The smooth restricted objective
    decreases along the way, and the result is kept only if the full
    objective does not increase.  Coordinate descent alone crawls on
    near-collinear or underdetermined tag columns.
    """
    support = np.flatnonzero(p)
    if len(support) == 0:
        return p
    A = np.empty((len(support), len(support)))
    b = np.empty(len(support))
    for a in range(len(support)):
        k = support[a]
        b[a] = c[k] - alpha * np.sign(p[k])
        for e in range(len(support)):
            A[a, e] = G[k, support[e]]
    sol = np.linalg.lstsq(A, b)[0]
    resid = b - A @ sol
    if np.sqrt(resid @ resid) > 1e-12 * (np.sqrt(b @ b) + 1.0):
        # b outside range(A): the restricted objective falls without bound
        # along resid (a null-space direction) until a sign boundary
        direction = resid
        theta = np.inf
    else:
        direction = np.empty(len(support))
        for a in range(len(support)):
            direction[a] = sol[a] - p[support[a]]
        theta = 1.0
    hit = -1
    for a in range(len(support)):
        k = support[a]
        if direction[a] * p[k] < 0.0:
            frac = -p[k] / direction[a]
            if frac < theta:
                theta = frac
                hit = k
    if not np.isfinite(theta):
        return p
    cand = np.zeros_like(p)
    for a in range(len(support)):
        k = support[a]
        cand[k] = p[k] + theta * direction[a]
    if hit >= 0:
        cand[hit] = 0.0
    if _smooth_objective(G, c, cand, alpha) <= _smooth_objective(G, c, p, alpha):
        return cand
    return p


@njit(cache=True, nogil=True)
def _coordinate_descent(G, c, alpha, p, max_passes, tol):
    # In unnormalized coordinates the threshold for tag k is
    # alpha * N / |X_k|^2; here G already carries the 1/N factor.
    t = len(c)
    grad = np.empty(t)
    kkt = _kkt(G, c, p, alpha)
    passes = 0
    while passes < max_passes:
        passes += 1
        for k in range(t):
            s = -c[k]
            for l in range(t):
                s += G[k, l] * p[l]
            grad[k] = s
        max_delta = 0.0
        for k in range(t):
            gkk = G[k, k]
            old = p[k]
            if gkk <= 0.0:
                new = 0.0
            else:
                z = gkk * old - grad[k]
                if z > alpha:
                    new = (z - alpha) / gkk
                elif z < -alpha:
                    new = (z + alpha) / gkk
                else:
                    new = 0.0
            d = new - old
            if d != 0.0:
                p[k] = new
                for l in range(t):
                    grad[l] += d * G[l, k]
                if abs(d) > max_delta:
                    max_delta = abs(d)
        kkt = _kkt(G, c, p, alpha)
        if max_delta < tol and kkt <= tol:
            break
        if kkt > tol:
            polished = _polish(G, c, p, alpha)
            if polished is not p:
                res = _kkt(G, c, polished, alpha)
                p[:] = polished
                kkt = res
                if res <= tol:
                    break
    return passes, kkt


def _fit(X: np.ndarray, y: np.ndarray, hyper: LassoHyperParams):
    N = len(y)
    t = X.shape[1]
    p = np.zeros(t)
    if N == 0 or t == 0:
        return p, 0, 0.0
    G = np.ascontiguousarray(X.T @ X / N)
    c = np.ascontiguousarray(X.T @ y / N)
    passes, kkt = _coordinate_descent(G, c, float(hyper.alpha), p, int(hyper.max_passes), float(hyper.tol))
    return p, passes, kkt


def train_user_lasso(ratings, tags: TagMatrix | np.ndarray,
                     hyper: LassoHyperParams = LassoHyperParams()) -> np.ndarray:
    """Fit one preference row from (item_index, value) pairs; no ratings gives a zero row."""
    T = tags.values if isinstance(tags, TagMatrix) else np.asarray(tags, dtype=np.float64)
    ratings = list(ratings)
    if not ratings:
        return np.zeros(T.shape[1])
    items = np.array([j for j, _ in ratings], dtype=np.int64)
    y = np.array([v for _, v in ratings], dtype=np.float64)
    return _fit(T[items], y, hyper)[0]


def train_lasso(dataset: RatingDataset, tags: TagMatrix,
                hyper: LassoHyperParams = LassoHyperParams(), threads: int = 1) -> LassoModel:
    if tags.m != dataset.m:
        raise DataError(f"tag matrix has {tags.m} rows but dataset has {dataset.m} items")
    T = tags.values
    order = np.argsort(dataset.users, kind="stable")
    counts = dataset.user_counts()
    indptr = np.concatenate([[0], np.cumsum(counts)])
    P = np.zeros((dataset.n, tags.t))
    kkt = np.zeros(dataset.n)
    passes = np.zeros(dataset.n, dtype=np.int64)
    users = np.flatnonzero(counts)

    def work(u):
        sel = order[indptr[u]:indptr[u + 1]]
        return u, _fit(T[dataset.items[sel]], dataset.values[sel], hyper)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, users))
    else:
        results = [work(u) for u in users]
    for u, (p, n_pass, res) in results:
        P[u] = p
        passes[u] = n_pass
        kkt[u] = res
    return LassoModel(P, counts > 0, hyper.alpha, kkt, passes)


def save_lasso(model: LassoModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{_FORMAT}\n{model.n} {model.t} {model.alpha!r}\n")
        f.write(" ".join("1" if b else "0" for b in model.user_mask) + "\n")
        for u, k in zip(*np.nonzero(model.P)):
            f.write(f"{u} {k} {float(model.P[u, k])!r}\n")


def load_lasso(path) -> LassoModel:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != _FORMAT:
        raise DataError(f"{path}: not a LASSO model file")
    n, t, alpha = lines[1].split()
    n, t = int(n), int(t)
    mask = np.array([x == "1" for x in lines[2].split()], dtype=bool).reshape(n)
    P = np.zeros((n, t))
    for line in lines[3:]:
        if line.strip():
            u, k, w = line.split()
            P[int(u), int(k)] = float(w)
    return LassoModel(P, mask, float(alpha))
