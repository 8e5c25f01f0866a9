"""Sigmoid gate blending ALS and LASSO predictions by item popularity.

    w = sigmoid(beta * (count_j - gamma))
    blended = w * als + (1 - w) * lasso

where count_j is the item's number of training ratings.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError

logger = logging.getLogger(__name__)

LR_START = 0.9
LR_DECAY = 0.997
LR_EVERY = 20
DEFAULT_ITERS = 15000


@dataclass(frozen=True)
class GateParams:
    beta: float = 1.0
    gamma: float = 0.0


@dataclass(frozen=True)
class BlendTriple:
    als_pred: float
    lasso_pred: float
    item_count: int
    truth: float


@dataclass(frozen=True)
class BlendSet:
    """Column arrays of blend triples; the form the loss and gradient work on."""

    als: np.ndarray
    lasso: np.ndarray
    counts: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=np.float64) for a in (self.als, self.lasso, self.counts, self.truth)]
        if len({len(a) for a in arrays}) != 1:
            raise DataError("blend columns must have equal length")
        if len(arrays[2]) and arrays[2].min() < 0:
            raise DataError("item counts must be nonnegative")
        for name, a in zip(("als", "lasso", "counts", "truth"), arrays):
            object.__setattr__(self, name, a)

    @classmethod
    def from_triples(cls, triples) -> "BlendSet":
        triples = list(triples)
        return cls(
            [b.als_pred for b in triples],
            [b.lasso_pred for b in triples],
            [b.item_count for b in triples],
            [b.truth for b in triples],
        )

    def __len__(self):
        return len(self.truth)


def _as_set(triples) -> BlendSet:
    data = triples if isinstance(triples, BlendSet) else BlendSet.from_triples(triples)
    if len(data) == 0:
        raise DataError("no blend triples to fit")
    return data


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def gate_weight(counts, p: GateParams):
    return sigmoid(p.beta * (np.asarray(counts, dtype=np.float64) - p.gamma))


def blend(als, lasso, counts, p: GateParams):
    """Blend predictions; works on scalars or arrays."""
    w = gate_weight(counts, p)
    # als + (1 - w) * (lasso - als) loses the convex-combination bound to rounding
    out = w * np.asarray(als, dtype=np.float64) + (1.0 - w) * np.asarray(lasso, dtype=np.float64)
    lo = np.minimum(als, lasso)
    hi = np.maximum(als, lasso)
    out = np.clip(out, lo, hi)
    return float(out) if np.ndim(out) == 0 else out


def blend_triple(b: BlendTriple, p: GateParams) -> float:
    return blend(b.als_pred, b.lasso_pred, b.item_count, p)


def gate_loss(triples, p: GateParams) -> float:
    data = _as_set(triples)
    err = blend(data.als, data.lasso, data.counts, p) - data.truth
    return float(err @ err)


def gate_gradient(triples, p: GateParams) -> tuple[float, float]:
    """Exact gradient (dL/dbeta, dL/dgamma) of the summed squared error."""
    data = _as_set(triples)
    diff = data.counts - p.gamma
    w = sigmoid(p.beta * diff)
    pred = w * data.als + (1.0 - w) * data.lasso
    # dL/dz per triple, z = beta * (count - gamma)
    dz = 2.0 * (pred - data.truth) * w * (1.0 - w) * (data.als - data.lasso)
    return float(dz @ diff), float(-p.beta * dz.sum())


def lr_schedule(step: int, start: float = LR_START, decay: float = LR_DECAY,
                every: int = LR_EVERY) -> float:
    if step < 0:
        raise ValueError("step must be >= 0")
    return start * decay ** (step // every)


@dataclass
class GateFit:
    params: GateParams
    iterations: int
    initial_loss: float
    final_loss: float
    trace: list = field(default_factory=list, repr=False)


def default_init(triples) -> GateParams:
    data = _as_set(triples)
    return GateParams(1.0, float(np.median(data.counts)))


def train_gate(triples, init: GateParams | None = None, iters: int = DEFAULT_ITERS,
               lr_start: float = LR_START, lr_decay: float = LR_DECAY,
               lr_every: int = LR_EVERY) -> GateFit:
    """Full-batch gradient descent on the mean squared blend error.

    The mean has the same minimizer as the summed loss but keeps the step
    size meaningful regardless of how many triples there are.  The best
    iterate seen is returned, so the final loss never exceeds the initial one.
    """
    data = _as_set(triples)
    p = init if init is not None else default_init(data)
    scale = 1.0 / len(data)
    with np.errstate(over="ignore", invalid="ignore"):
        loss = gate_loss(data, p)
        trace = [loss]
        if not np.isfinite(loss):
            raise NumericError("gate loss is not finite at the initial parameters", trace)
        initial = best_loss = loss
        best = p
        for step in range(iters):
            gb, gg = gate_gradient(data, p)
            lr = lr_schedule(step, lr_start, lr_decay, lr_every)
            p = GateParams(p.beta - lr * scale * gb, p.gamma - lr * scale * gg)
            loss = gate_loss(data, p)
            trace.append(loss)
            if not (np.isfinite(loss) and np.isfinite(p.beta) and np.isfinite(p.gamma)):
                raise NumericError(f"gate training diverged at step {step}", trace)
            if loss <= best_loss:
                best, best_loss = p, loss
    if best.beta < 0:
        logger.warning("learned beta=%g is negative: the gate favours LASSO on popular items", best.beta)
    return GateFit(best, iters, initial, best_loss, trace)


def save_gate(fit: GateFit, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"beta={fit.params.beta!r} gamma={fit.params.gamma!r}\n")
        f.write(f"iterations={fit.iterations} initial_loss={fit.initial_loss!r} "
                f"final_loss={fit.final_loss!r}\n")


def load_gate(path) -> GateFit:
    fields = {}
    with open(path, encoding="utf-8") as f:
        for token in f.read().split():
            key, _, value = token.partition("=")
            fields[key] = value
    try:
        params = GateParams(float(fields["beta"]), float(fields["gamma"]))
    except KeyError as exc:
        raise DataError(f"{path}: missing gate field {exc}") from None
    return GateFit(
        params,
        int(fields.get("iterations", 0)),
        float(fields.get("initial_loss", "nan")),
        float(fields.get("final_loss", "nan")),
    )
