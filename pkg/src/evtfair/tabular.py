"""Tabular datasets with protected-attribute semantics.

A Dataset is an immutable list of records (one dict per row) plus a Schema
that marks column kinds, the protected attributes, and which label value is
the favorable outcome. Counterfactual construction is a single-attribute
swap between the two values of a GroupSpec.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyDataset,
    InvalidRatios,
    MissingColumn,
    TypeMismatch,
    ValueNotInGroup,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

Row = dict


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # NUMERIC or CATEGORICAL

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")


@dataclass(frozen=True)
class Schema:
    """Column layout plus fairness annotations.

    Invariants enforced here: column names unique, the label column is not
    protected, and every protected column is categorical.
    """

    columns: tuple[Column, ...]
    protected: frozenset[str]
    label: str
    favorable_value: object

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        by_name = {c.name: c for c in self.columns}
        if self.label not in by_name:
            raise ValueError(f"label column {self.label!r} not in columns")
        if self.label in self.protected:
            raise ValueError("label column cannot be protected")
        for p in self.protected:
            if p not in by_name:
                raise ValueError(f"protected column {p!r} not in columns")
            if by_name[p].kind != CATEGORICAL:
                raise ValueError(f"protected column {p!r} must be categorical")
        # Coerce the favorable value to the label column's kind so that
        # comparisons against parsed rows are uniform.
        if by_name[self.label].kind == NUMERIC and not isinstance(self.favorable_value, float):
            object.__setattr__(self, "favorable_value", float(self.favorable_value))

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def kind_of(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise KeyError(name)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.name != self.label)

    def to_json_dict(self) -> dict:
        return {
            "columns": [{"name": c.name, "kind": c.kind} for c in self.columns],
            "protected": sorted(self.protected),
            "label": self.label,
            "favorable": self.favorable_value,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Schema":
        cols = tuple(Column(c["name"], c["kind"]) for c in obj["columns"])
        return cls(
            columns=cols,
            protected=frozenset(obj["protected"]),
            label=obj["label"],
            favorable_value=obj["favorable"],
        )


@dataclass(frozen=True)
class GroupSpec:
    """One audited pair of protected-attribute values."""

    attribute: str
    privileged_value: object
    unprivileged_value: object

    def __post_init__(self):
        if self.privileged_value == self.unprivileged_value:
            raise ValueError("privileged and unprivileged values must differ")

    @property
    def values(self) -> tuple[object, object]:
        return (self.privileged_value, self.unprivileged_value)


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    rows: tuple[Row, ...]

    def __post_init__(self):
        names = self.schema.column_names
        for i, row in enumerate(self.rows):
            if len(row) != len(names) or any(n not in row for n in names):
                raise ValueError(f"row {i} does not match schema columns")
        for col in self.schema.columns:
            if col.kind == NUMERIC:
                for i, row in enumerate(self.rows):
                    v = row[col.name]
                    if not isinstance(v, (int, float)) or not math.isfinite(v):
                        raise ValueError(
                            f"row {i}, column {col.name!r}: non-finite numeric value {v!r}"
                        )

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def subset_by_value(self, attribute: str, value) -> "Dataset":
        """Rows whose protected attribute equals one audited value."""
        kept = tuple(r for r in self.rows if r[attribute] == value)
        return Dataset(self.schema, kept)

    def restrict_to_group(self, group: GroupSpec) -> "Dataset":
        """Drop rows whose protected value is outside the audited pair."""
        kept = tuple(r for r in self.rows if r[group.attribute] in group.values)
        return Dataset(self.schema, kept)

    def favorable_labels(self) -> list[bool]:
        fav = self.schema.favorable_value
        lab = self.schema.label
        return [row[lab] == fav for row in self.rows]


def _parse_value(kind: str, raw: str, row_index: int, column: str):
    if kind == CATEGORICAL:
        return raw
    try:
        v = float(raw)
    except ValueError:
        raise TypeMismatch(row_index, column, raw) from None
    if not math.isfinite(v):
        raise TypeMismatch(row_index, column, raw)
    return v


def load_csv(path, schema: Schema) -> Dataset:
    """Parse an RFC-4180 style CSV with a mandatory header row.

    All schema columns must be present in the header; extra columns are
    ignored. Values are parsed per column kind and row order is preserved.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        positions = {}
        for col in schema.columns:
            if col.name not in header:
                raise MissingColumn(f"{path}: column {col.name!r} not in header")
            positions[col.name] = header.index(col.name)
        rows = []
        for i, record in enumerate(reader):
            row = {}
            for col in schema.columns:
                pos = positions[col.name]
                if pos >= len(record):
                    raise TypeMismatch(i, col.name, None)
                row[col.name] = _parse_value(col.kind, record[pos], i, col.name)
            rows.append(row)
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    return Dataset(schema, tuple(rows))


def write_csv(ds: Dataset, path) -> None:
    """Inverse of load_csv: floats use repr so a round trip is lossless."""
    names = ds.schema.column_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in ds.rows:
            writer.writerow(
                [repr(row[n]) if isinstance(row[n], float) else row[n] for n in names]
            )


def split(ds: Dataset, ratios: tuple[float, float, float], seed: int):
    """Deterministic shuffled partition into (train, valid, test).

    Sizes are floor-rounded; remainder rows go to train.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise InvalidRatios(f"fractions must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidRatios(f"fractions must sum to 1, got {ratios}")
    n = len(ds)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_valid = int(math.floor(ratios[1] * n))
    n_test = int(math.floor(ratios[2] * n))
    n_train = n - n_valid - n_test
    idx_train = order[:n_train]
    idx_valid = order[n_train:n_train + n_valid]
    idx_test = order[n_train + n_valid:]
    pick = lambda idx: Dataset(ds.schema, tuple(ds.rows[i] for i in idx))
    return pick(idx_train), pick(idx_valid), pick(idx_test)


def flip_protected(row: Row, group: GroupSpec) -> Row:
    """Swap the row's audited protected value for its counterfactual.

    All other attributes, including other protected columns, are unchanged.
    """
    current = row[group.attribute]
    if current == group.privileged_value:
        other = group.unprivileged_value
    elif current == group.unprivileged_value:
        other = group.privileged_value
    else:
        raise ValueNotInGroup(
            f"value {current!r} of {group.attribute!r} is neither "
            f"{group.privileged_value!r} nor {group.unprivileged_value!r}"
        )
    flipped = dict(row)
    flipped[group.attribute] = other
    return flipped


def validate_group(ds: Dataset, group: GroupSpec) -> None:
    """Both group values must occur in the dataset."""
    from .errors import MissingGroup

    seen = set(ds.column(group.attribute))
    for v in group.values:
        if v not in seen:
            raise MissingGroup(f"value {v!r} of {group.attribute!r} not present")
