"""Planted-model synthetic ratings with tag side information.

True rating of user i on item j:

    (1 - tag_signal) * U_i . V_j + tag_signal * clamp(P_i . T_j) + noise

User preference rows P are sparse; by default each is a scaled copy of one
of a few archetype rows.  A `cold_fraction` of items is observed only once
or twice.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass

import numpy as np

from .dataset import LABEL_VALUES, RatingDataset, TagMatrix
from .errors import DataError
from .lasso import clamp_tau

logger = logging.getLogger(__name__)

LEVELS = np.array(sorted(LABEL_VALUES.values()))


@dataclass(frozen=True)
class SynthConfig:
    n: int = 300
    m: int = 500
    t: int = 30
    rank: int = 5
    density: float = 0.1
    cold_fraction: float = 0.2
    tag_signal: float = 0.6
    noise_sd: float = 0.1
    poster_fraction: float = 1.0
    prefs_per_user: int = 5
    pref_scale: float = 2.0
    archetypes: int = 4          # 0: independent preference row per user
    quantize: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "m", "t", "rank"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("cold_fraction", "tag_signal", "poster_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("density must lie in (0, 1]: no observations otherwise")
        if self.archetypes < 0:
            raise ValueError("archetypes must be >= 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


@dataclass
class SynthTruth:
    U: np.ndarray
    V: np.ndarray
    P: np.ndarray
    ratings: np.ndarray        # dense noiseless true ratings, n x m
    cold_items: np.ndarray     # bool per item
    users_without_ratings: int

    def save(self, path, config: SynthConfig) -> None:
        np.savez(path, U=self.U, V=self.V, P=self.P, ratings=self.ratings,
                 cold_items=self.cold_items, config=np.array(config.to_json()))


def quantize(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return LEVELS[np.argmin(np.abs(values[..., None] - LEVELS), axis=-1)]


def generate(config: SynthConfig = SynthConfig()):
    """Return (dataset, tags, truth)."""
    rng = np.random.default_rng(config.seed)
    n, m, t, r = config.n, config.m, config.t, config.rank

    scale = r ** -0.25
    U = rng.normal(0.0, scale, size=(n, r))
    V = rng.normal(0.0, scale, size=(m, r))

    T = rng.beta(0.3, 1.5, size=(m, t))
    no_poster = rng.random(m) >= config.poster_fraction
    T[no_poster] = 0.0

    k = min(config.prefs_per_user, t)

    def sparse_rows(count):
        rows = np.zeros((count, t))
        for a in range(count):
            cols = rng.choice(t, size=k, replace=False)
            rows[a, cols] = rng.normal(0.0, config.pref_scale, size=k)
        return rows

    if config.archetypes > 0:
        # each user scales one sparse archetype, keeping P T' low-rank
        B = sparse_rows(config.archetypes)
        P = B[rng.integers(0, config.archetypes, n)] * rng.uniform(0.5, 1.5, size=(n, 1))
    else:
        P = sparse_rows(n)

    truth = (1 - config.tag_signal) * (U @ V.T) + config.tag_signal * clamp_tau(P @ T.T)

    cold = np.zeros(m, dtype=bool)
    n_cold = int(round(config.cold_fraction * m))
    cold[rng.choice(m, size=n_cold, replace=False)] = True
    observed = rng.random((n, m)) < config.density
    for j in np.flatnonzero(cold):
        observed[:, j] = False
        count = min(int(rng.integers(1, 3)), n)
        observed[rng.choice(n, size=count, replace=False), j] = True

    users, items = np.nonzero(observed)
    if len(users) == 0:
        raise DataError("synthetic configuration produced no observations")
    values = truth[users, items] + rng.normal(0.0, config.noise_sd, size=len(users))
    if config.quantize:
        values = quantize(values)

    empty_users = int(n - len(np.unique(users)))
    if empty_users:
        logger.warning("%d synthetic users have no ratings", empty_users)

    dataset = RatingDataset(
        n, m, users, items, values,
        tuple(f"u{i}" for i in range(n)),
        tuple(f"i{j}" for j in range(m)),
    )
    tags = TagMatrix(T, tuple(f"tag{k}" for k in range(t)))
    return dataset, tags, SynthTruth(U, V, P, truth, cold, empty_users)
