"""Run configuration: defaults, `key = value` files and conversion to block hyperparameters."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .als import AlsHyperParams
from .errors import DataError
from .evaluation import ExperimentConfig
from .lasso import LassoHyperParams


@dataclass
class RunConfig:
    ratings: str | None = None
    tags: str | None = None
    model_dir: str | None = None
    out: str | None = None
    # ALS
    rank: int = 20
    lam: float = 0.1
    sweeps: int = 10
    als_tol: float | None = None
    # LASSO
    alpha: float = 0.01
    lasso_max_passes: int = 1000
    lasso_tol: float = 1e-6
    # gate
    gate_iters: int = 15000
    lr_start: float = 0.9
    lr_decay: float = 0.997
    lr_every: int = 20
    # protocol
    k: int = 5
    valid_fraction: float = 0.30
    seed: int = 0
    cohort_threshold: int = 3
    threads: int = 1

    def als(self) -> AlsHyperParams:
        return AlsHyperParams(self.rank, self.lam, self.sweeps, self.seed, self.als_tol)

    def lasso(self) -> LassoHyperParams:
        return LassoHyperParams(self.alpha, self.lasso_max_passes, self.lasso_tol)

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            als=self.als(), lasso=self.lasso(), gate_iters=self.gate_iters,
            lr_start=self.lr_start, lr_decay=self.lr_decay, lr_every=self.lr_every,
            k=self.k, valid_fraction=self.valid_fraction, seed=self.seed,
            cohort_threshold=self.cohort_threshold, threads=self.threads,
        )

    def update(self, **values) -> "RunConfig":
        """Copy with non-None overrides applied and coerced to field types."""
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, value in values.items():
            if value is None:
                continue
            if key not in known:
                raise DataError(f"unknown config key {key!r}")
            changes[key] = _coerce(known[key], value)
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if value is None else value!s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"config line {lineno}: expected key = value")
            values[key.strip()] = value.strip()
        config = base or cls()
        # empty values reset optional fields to None
        nulls = {k for k, v in values.items() if v == ""}
        config = config.update(**{k: v for k, v in values.items() if k not in nulls})
        return dataclasses.replace(config, **{k: None for k in nulls if k in {f.name for f in fields(cls)}})

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())


def _coerce(f, value):
    if not isinstance(value, str):
        return value
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    try:
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError:
        raise DataError(f"config key {f.name!r}: bad value {value!r}") from None
    return value
