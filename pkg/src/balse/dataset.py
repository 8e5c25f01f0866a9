"""Rating and tag data: parsing, validation and id/index bookkeeping.

Ratings are stored as three parallel arrays (user index, item index, value)
rather than a sparse matrix so that explicit zero ratings survive.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

LABEL_VALUES = {
    "favorite": 4.0,
    "like": 2.0,
    "neutral": 0.1,
    "dislike": -2.0,
    "willsee": 0.5,
    "wontsee": -0.5,
}
_VALUE_LABELS = {v: k for k, v in LABEL_VALUES.items()}


def map_label(label: str, line: int | None = None) -> float:
    try:
        return LABEL_VALUES[label.strip().lower()]
    except KeyError:
        where = f" on line {line}" if line is not None else ""
        raise DataError(f"unknown rating label {label!r}{where}") from None


class RatingTriple(NamedTuple):
    user_index: int
    item_index: int
    value: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RatingDataset:
    """Sparse n x m rating matrix as index/value triples.

    `user_ids[u]` and `item_ids[j]` give the external id of index `u` / `j`.
    The arrays are read-only; subsets share the id maps of their parent.
    """

    n: int
    m: int
    users: np.ndarray
    items: np.ndarray
    values: np.ndarray
    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    _user_index: dict = field(init=False, repr=False, compare=False)
    _item_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        users = _freeze(np.asarray(self.users, dtype=np.int64).copy())
        items = _freeze(np.asarray(self.items, dtype=np.int64).copy())
        values = _freeze(np.asarray(self.values, dtype=np.float64).copy())
        if not (len(users) == len(items) == len(values)):
            raise DataError("users, items and values must have equal length")
        if len(self.user_ids) != self.n or len(self.item_ids) != self.m:
            raise DataError("id maps do not match n / m")
        if len(users):
            if users.min() < 0 or users.max() >= self.n:
                raise DataError("user index out of bounds")
            if items.min() < 0 or items.max() >= self.m:
                raise DataError("item index out of bounds")
            if not np.all(np.isfinite(values)):
                raise DataError("non-finite rating value")
            keys = users * max(self.m, 1) + items
            if len(np.unique(keys)) != len(keys):
                raise DataError("duplicate (user, item) pair")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        object.__setattr__(self, "_user_index", {u: i for i, u in enumerate(self.user_ids)})
        object.__setattr__(self, "_item_index", {u: i for i, u in enumerate(self.item_ids)})
        if len(self._user_index) != self.n or len(self._item_index) != self.m:
            raise DataError("external ids must be unique")

    @classmethod
    def from_arrays(cls, users, items, values, n=None, m=None) -> "RatingDataset":
        """Build a dataset from index arrays, naming ids by their index."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if n is None:
            n = int(users.max()) + 1 if len(users) else 0
        if m is None:
            m = int(items.max()) + 1 if len(items) else 0
        return cls(
            n, m, users, items, values,
            tuple(f"u{i}" for i in range(n)),
            tuple(f"i{j}" for j in range(m)),
        )

    def __len__(self):
        return len(self.values)

    @property
    def triples(self) -> list[RatingTriple]:
        return [
            RatingTriple(int(u), int(j), float(v))
            for u, j, v in zip(self.users, self.items, self.values)
        ]

    def user_index(self, user_id: str) -> int:
        return self._user_index[user_id]

    def item_index(self, item_id: str) -> int:
        return self._item_index[item_id]

    def subset(self, idx) -> "RatingDataset":
        """Triples selected by an index array or boolean mask; n, m and ids are kept."""
        idx = np.asarray(idx)
        return RatingDataset(
            self.n, self.m,
            self.users[idx], self.items[idx], self.values[idx],
            self.user_ids, self.item_ids,
        )

    def item_counts(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.m)

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.n)


@dataclass(frozen=True)
class TagMatrix:
    """m x t tag probabilities, row j aligned with item index j."""

    values: np.ndarray
    tag_names: tuple[str, ...]
    skipped_rows: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.tag_names):
            raise DataError("tag matrix shape does not match tag names")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise DataError("tag weights must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(values.copy()))
        object.__setattr__(self, "tag_names", tuple(self.tag_names))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def t(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, m: int) -> "TagMatrix":
        return cls(np.zeros((m, 0)), ())


def _reader(source: TextIO, expected: Iterable[tuple[str, ...]]):
    rows = csv.reader(source)
    try:
        header = next(rows)
    except StopIteration:
        raise DataError("missing CSV header") from None
    header = tuple(h.strip().lower() for h in header)
    if header not in expected:
        allowed = " or ".join(",".join(e) for e in expected)
        raise DataError(f"bad header {','.join(header)!r}, expected {allowed}")
    return header, rows


def parse_ratings(source: TextIO) -> RatingDataset:
    """Parse a `user,item,rating` (label) or `user,item,value` (numeric) CSV.

    Users and items are indexed in order of first appearance.
    """
    header, rows = _reader(source, [("user", "item", "rating"), ("user", "item", "value")])
    numeric = header[2] == "value"
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    seen: dict[tuple[int, int], int] = {}
    users, items, values = [], [], []
    for row in rows:
        line = rows.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"line {line}: expected 3 fields, got {len(row)}")
        uid, iid, raw = (c.strip() for c in row)
        if not uid or not iid:
            raise DataError(f"line {line}: empty user or item id")
        if numeric:
            try:
                value = float(raw)
            except ValueError:
                raise DataError(f"line {line}: bad rating value {raw!r}") from None
            if not np.isfinite(value):
                raise DataError(f"line {line}: non-finite rating value {raw!r}")
        else:
            value = map_label(raw, line)
        u = user_index.setdefault(uid, len(user_index))
        j = item_index.setdefault(iid, len(item_index))
        if (u, j) in seen:
            raise DataError(
                f"line {line}: duplicate rating for user {uid!r}, item {iid!r} "
                f"(first seen on line {seen[u, j]})"
            )
        seen[u, j] = line
        users.append(u)
        items.append(j)
        values.append(value)
    return RatingDataset(
        len(user_index), len(item_index),
        np.array(users, dtype=np.int64), np.array(items, dtype=np.int64),
        np.array(values, dtype=np.float64),
        tuple(user_index), tuple(item_index),
    )


def write_ratings(dataset: RatingDataset, sink: TextIO, labels: bool = False) -> None:
    """Write the numeric variant (exact float round-trip) or, with `labels`, label strings."""
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["user", "item", "rating" if labels else "value"])
    for u, j, v in zip(dataset.users, dataset.items, dataset.values):
        if labels:
            try:
                cell = _VALUE_LABELS[float(v)]
            except KeyError:
                raise DataError(f"value {v!r} has no rating label") from None
        else:
            cell = repr(float(v))
        w.writerow([dataset.user_ids[u], dataset.item_ids[j], cell])


def parse_tags(source: TextIO, dataset: RatingDataset) -> TagMatrix:
    """Parse an `item,tag,weight` CSV into a tag matrix aligned with `dataset`.

    Items without tag rows get all-zero rows; rows for items unknown to the
    dataset are skipped and counted in `skipped_rows`.
    """
    _, rows = _reader(source, [("item", "tag", "weight")])
    tag_index: dict[str, int] = {}
    entries: dict[tuple[int, int], float] = {}
    skipped = 0
    for row in rows:
        line = rows.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"line {line}: expected 3 fields, got {len(row)}")
        iid, tag, raw = (c.strip() for c in row)
        try:
            weight = float(raw)
        except ValueError:
            raise DataError(f"line {line}: bad tag weight {raw!r}") from None
        if not 0.0 <= weight <= 1.0:
            raise DataError(f"line {line}: tag weight {weight} outside [0, 1]")
        try:
            j = dataset.item_index(iid)
        except KeyError:
            skipped += 1
            continue
        k = tag_index.setdefault(tag, len(tag_index))
        if (j, k) in entries:
            raise DataError(f"line {line}: duplicate tag {tag!r} for item {iid!r}")
        entries[j, k] = weight
    if skipped:
        logger.warning("skipped %d tag rows for items not in the rating data", skipped)
    values = np.zeros((dataset.m, len(tag_index)))
    for (j, k), weight in entries.items():
        values[j, k] = weight
    return TagMatrix(values, tuple(tag_index), skipped)


def write_tags(tags: TagMatrix, item_ids, sink: TextIO) -> None:
    """Write nonzero entries; all-zero tag columns are not representable."""
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["item", "tag", "weight"])
    for j, k in zip(*np.nonzero(tags.values)):
        w.writerow([item_ids[j], tags.tag_names[k], repr(float(tags.values[j, k]))])


def read_ratings(path) -> RatingDataset:
    with open(path, newline="", encoding="utf-8") as f:
        return parse_ratings(f)


def read_tags(path, dataset: RatingDataset) -> TagMatrix:
    with open(path, newline="", encoding="utf-8") as f:
        return parse_tags(f, dataset)


def ratings_from_text(text: str) -> RatingDataset:
    return parse_ratings(io.StringIO(text))
