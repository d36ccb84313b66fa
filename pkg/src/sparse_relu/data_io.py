"""CSV ingestion, dummy coding, standardisation and seeded splits."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import stream
from .synthgen import Dataset


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TabularSchema:
    """Which columns are categorical and which one is the response.

    ``continuous`` may be left as ``None`` to mean "every other column in the
    file".
    """

    target: str
    categorical: tuple = ()
    continuous: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "categorical", tuple(self.categorical))
        if self.continuous is not None:
            object.__setattr__(self, "continuous", tuple(self.continuous))
        names = list(self.categorical) + list(self.continuous or ()) + [self.target]
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be unique")
        if self.target in self.categorical:
            raise ValueError("the target must be a continuous column")


@dataclass
class Table:
    columns: list
    data: dict
    schema: TabularSchema

    @property
    def n_rows(self) -> int:
        return len(self.data[self.schema.target])

    def feature_columns(self) -> list:
        return [c for c in self.columns if c != self.schema.target]


def load_csv(path, schema: TabularSchema) -> Table:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path} is empty") from None
        rows = list(reader)
    if schema.target not in header:
        raise DataFormatError(f"target column {schema.target!r} missing from {path}")
    wanted = list(schema.categorical) + list(schema.continuous or ())
    missing = [c for c in wanted if c not in header]
    if missing:
        raise DataFormatError(f"columns {missing} missing from {path}")
    if schema.continuous is None:
        columns = [c for c in header if c != schema.target]
    else:
        columns = [c for c in header if c in wanted]
    columns.append(schema.target)
    pos = {c: header.index(c) for c in columns}
    data = {}
    for c in columns:
        j = pos[c]
        values = []
        for i, row in enumerate(rows):
            if len(row) != len(header):
                raise DataFormatError(f"row {i + 2} has {len(row)} fields, expected {len(header)}")
            cell = row[j].strip()
            if c in schema.categorical:
                values.append(cell)
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataFormatError(
                    f"cannot parse {cell!r} as a number at row {i + 2}, column {j + 1} ({c})"
                ) from None
        data[c] = np.array(values, dtype=object if c in schema.categorical else float)
    return Table(columns, data, schema)


@dataclass
class PreprocessState:
    means: dict = field(default_factory=dict)
    stds: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)
    dropped: list = field(default_factory=list)
    order: list = field(default_factory=list)

    def feature_names(self) -> list:
        names = []
        for c in self.order:
            if c in self.categories:
                names += [f"{c}={level}" for level in self.categories[c]]
            else:
                names.append(c)
        return names

    def transform(self, table: Table, rows=None) -> Dataset:
        rows = np.arange(table.n_rows) if rows is None else np.asarray(rows)
        blocks = []
        for c in self.order:
            col = table.data[c][rows]
            if c in self.categories:
                levels = self.categories[c]
                blocks.append(np.stack([col == lv for lv in levels], axis=1).astype(float)
                              if levels else np.zeros((len(rows), 0)))
            else:
                blocks.append(((col - self.means[c]) / self.stds[c])[:, None])
        X = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
        y = table.data[table.schema.target][rows].astype(float)
        return Dataset(X, y, feature_names=tuple(self.feature_names()))


def encode_and_standardize(table: Table, fit_on=None) -> tuple[Dataset, PreprocessState]:
    """Fit dummy coding and z-scoring on ``fit_on`` rows, apply to every row.

    Every category seen in ``fit_on`` gets its own 0/1 column (no reference
    level is dropped); categories never seen there encode as all zeros.
    Continuous columns with zero variance on ``fit_on`` are dropped and
    listed in ``state.dropped``.  The response is left on its original scale.
    """
    fit_on = np.arange(table.n_rows) if fit_on is None else np.asarray(fit_on)
    if len(fit_on) == 0:
        raise ValueError("fit_on must select at least one row")
    state = PreprocessState()
    for c in table.feature_columns():
        col = table.data[c][fit_on]
        if c in table.schema.categorical:
            state.categories[c] = sorted(set(col.tolist()))
            state.order.append(c)
            continue
        mean = float(col.mean())
        std = float(col.std())
        if std == 0:
            warnings.warn(f"dropping constant column {c!r}")
            state.dropped.append(c)
            continue
        state.means[c] = mean
        state.stds[c] = std
        state.order.append(c)
    return state.transform(table), state


def split(dataset: Dataset, *, train_fraction: float | None = None,
          sizes: tuple[int, int] | None = None, seed: int = 0):
    """Seeded disjoint train/test split.

    Give either ``train_fraction`` (the rest is test) or ``sizes=(n_train,
    n_test)``; with sizes, ``n_train + n_test`` rows are sampled without
    replacement.
    """
    n = dataset.n
    if (train_fraction is None) == (sizes is None):
        raise ValueError("give exactly one of train_fraction or sizes")
    if sizes is None:
        if not 0 < train_fraction <= 1:
            raise ValueError("train_fraction must lie in (0, 1]")
        n_train = int(round(train_fraction * n))
        n_test = n - n_train
    else:
        n_train, n_test = (int(v) for v in sizes)
    if n_train < 0 or n_test < 0 or n_train + n_test > n:
        raise ValueError(f"cannot take {n_train} + {n_test} rows from {n}")
    order = stream(seed, "data-split").permutation(n)
    return dataset.subset(order[:n_train]), dataset.subset(order[n_train:n_train + n_test])


def split_rows(n: int, n_train: int, n_test: int, seed: int):
    if n_train < 0 or n_test < 0 or n_train + n_test > n:
        raise ValueError(f"cannot take {n_train} + {n_test} rows from {n}")
    order = stream(seed, "data-split").permutation(n)
    return order[:n_train], order[n_train:n_train + n_test]
