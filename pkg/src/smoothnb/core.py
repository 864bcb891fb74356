"""Schema and dataset types, validation, fold splitting and budget accounting."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    ColumnCountMismatch,
    MissingValue,
    OutOfBounds,
    SchemaError,
    TooFewRows,
    UnknownCategory,
)

MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "nan", "NaN", "null", "None"})


@dataclass(frozen=True)
class AttributeSpec:
    """One feature column: categorical with a value list, or numeric with bounds."""

    name: str
    kind: str
    values: tuple = ()
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise SchemaError(f"attribute name must be a non-empty string, got {self.name!r}")
        if self.kind == "categorical":
            values = tuple(str(v) for v in self.values)
            if not values:
                raise SchemaError(f"categorical attribute {self.name!r} needs at least one value")
            if len(set(values)) != len(values):
                raise SchemaError(f"categorical attribute {self.name!r} has duplicate values")
            object.__setattr__(self, "values", values)
        elif self.kind == "numeric":
            try:
                lo, hi = float(self.lower), float(self.upper)
            except (TypeError, ValueError):
                raise SchemaError(f"numeric attribute {self.name!r} needs lower and upper bounds") from None
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise SchemaError(f"numeric attribute {self.name!r}: need finite lower < upper, got [{lo}, {hi}]")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        else:
            raise SchemaError(f"attribute {self.name!r}: kind must be 'categorical' or 'numeric', got {self.kind!r}")

    @classmethod
    def categorical(cls, name, values):
        return cls(name, "categorical", values=tuple(values))

    @classmethod
    def numeric(cls, name, lower, upper):
        return cls(name, "numeric", lower=lower, upper=upper)

    @property
    def is_numeric(self) -> bool:
        return self.kind == "numeric"

    def to_dict(self) -> dict:
        if self.is_numeric:
            return {"name": self.name, "kind": "numeric", "lower": self.lower, "upper": self.upper}
        return {"name": self.name, "kind": "categorical", "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSpec":
        kind = d.get("kind")
        if kind == "numeric":
            return cls.numeric(d.get("name"), d.get("lower"), d.get("upper"))
        return cls(d.get("name"), kind, values=tuple(d.get("values", ())))


@dataclass(frozen=True)
class DatasetSchema:
    attributes: tuple[AttributeSpec, ...]
    class_name: str
    class_labels: tuple[str, ...]

    def __post_init__(self):
        attrs = tuple(self.attributes)
        labels = tuple(str(c) for c in self.class_labels)
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        if self.class_name in names:
            raise SchemaError(f"class attribute {self.class_name!r} is also listed as a feature")
        if len(labels) < 2:
            raise SchemaError("the class attribute needs at least 2 labels")
        if len(set(labels)) != len(labels):
            raise SchemaError("class labels must be distinct")
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "class_labels", labels)

    @property
    def num_count(self) -> int:
        return sum(a.is_numeric for a in self.attributes)

    @property
    def cat_count(self) -> int:
        return len(self.attributes) - self.num_count

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def attribute(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"no attribute named {name!r}")

    def index(self, name: str) -> int:
        return self.names.index(self.attribute(name).name)

    def select(self, names: Iterable[str]) -> "DatasetSchema":
        return DatasetSchema(tuple(self.attribute(n) for n in names), self.class_name, self.class_labels)

    def to_dict(self) -> dict:
        return {
            "attributes": [a.to_dict() for a in self.attributes],
            "class": {"name": self.class_name, "values": list(self.class_labels)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            attrs = tuple(AttributeSpec.from_dict(a) for a in d["attributes"])
            klass = d["class"]
            return cls(attrs, klass["name"], tuple(klass["values"]))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from None

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_schema(path) -> DatasetSchema:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return DatasetSchema.from_dict(doc)


def save_schema(schema: DatasetSchema, path) -> None:
    atomic_write_text(path, json.dumps(schema.to_dict(), indent=2) + "\n")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated rows stored by column.

    ``columns[j]`` holds floats for numeric attributes and integer value codes
    (indices into ``values``) for categorical ones; ``labels`` holds class
    codes. Arrays are read-only.
    """

    schema: DatasetSchema
    columns: tuple[np.ndarray, ...]
    labels: np.ndarray

    def __post_init__(self):
        for arr in (*self.columns, self.labels):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def __len__(self):
        return self.n

    def row(self, i: int) -> tuple[tuple, str]:
        feats = []
        for a, col in zip(self.schema.attributes, self.columns):
            feats.append(float(col[i]) if a.is_numeric else a.values[col[i]])
        return tuple(feats), self.schema.class_labels[self.labels[i]]

    @property
    def rows(self) -> list[tuple[tuple, str]]:
        return [self.row(i) for i in range(self.n)]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.schema, tuple(c[idx] for c in self.columns), self.labels[idx])

    def select(self, names: Iterable[str]) -> "Dataset":
        names = list(names)
        cols = tuple(self.columns[self.schema.index(n)] for n in names)
        return Dataset(self.schema.select(names), cols, self.labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.schema.n_classes)


def _parse_numeric(attr, raw, row):
    if isinstance(raw, str):
        if raw.strip() in MISSING_TOKENS:
            raise MissingValue(row, attr.name)
        try:
            value = float(raw)
        except ValueError:
            raise OutOfBounds(attr.name, row, raw, attr.lower, attr.upper) from None
    elif raw is None:
        raise MissingValue(row, attr.name)
    else:
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise OutOfBounds(attr.name, row, raw, attr.lower, attr.upper) from None
        if math.isnan(value):
            raise MissingValue(row, attr.name)
    if not (math.isfinite(value) and attr.lower <= value <= attr.upper):
        raise OutOfBounds(attr.name, row, raw, attr.lower, attr.upper)
    return value


def _parse_label(values, name, raw, row):
    if raw is None or (isinstance(raw, float) and math.isnan(raw)):
        raise MissingValue(row, name)
    key = str(raw).strip() if isinstance(raw, str) else str(raw)
    if isinstance(raw, str) and key in MISSING_TOKENS and key not in values:
        raise MissingValue(row, name)
    try:
        return values.index(key)
    except ValueError:
        raise UnknownCategory(name, row, raw) from None


def validate_features(raw_rows: Sequence[Sequence], schema: DatasetSchema) -> tuple[np.ndarray, ...]:
    """Parse feature-only rows (no class column) into typed columns."""
    width = len(schema.attributes)
    cols = [[] for _ in range(width)]
    for r, raw in enumerate(raw_rows):
        if len(raw) != width:
            raise ColumnCountMismatch(r, width, len(raw))
        for j, (attr, cell) in enumerate(zip(schema.attributes, raw)):
            if attr.is_numeric:
                cols[j].append(_parse_numeric(attr, cell, r))
            else:
                cols[j].append(_parse_label(attr.values, attr.name, cell, r))
    return tuple(
        np.array(c, dtype=float if a.is_numeric else np.intp).reshape(-1)
        for a, c in zip(schema.attributes, cols)
    )


def validate_dataset(raw_rows: Sequence[Sequence], schema: DatasetSchema) -> Dataset:
    """Check and parse rows laid out as ``(*features in schema order, label)``.

    Rows are scanned in order and cells left to right; the first offending
    cell raises. Row numbers in errors are 0-based data rows.
    """
    width = len(schema.attributes)
    cols = [[] for _ in range(width)]
    codes = []
    for r, raw in enumerate(raw_rows):
        if len(raw) != width + 1:
            raise ColumnCountMismatch(r, width + 1, len(raw))
        for j, attr in enumerate(schema.attributes):
            if attr.is_numeric:
                cols[j].append(_parse_numeric(attr, raw[j], r))
            else:
                cols[j].append(_parse_label(attr.values, attr.name, raw[j], r))
        codes.append(_parse_label(schema.class_labels, schema.class_name, raw[width], r))
    columns = tuple(
        np.array(c, dtype=float if a.is_numeric else np.intp).reshape(-1)
        for a, c in zip(schema.attributes, cols)
    )
    return Dataset(schema, columns, np.array(codes, dtype=np.intp).reshape(-1))


def dataset_from_columns(schema: DatasetSchema, columns, labels) -> Dataset:
    """Build a Dataset from already-encoded arrays, re-checking every invariant."""
    columns = tuple(np.asarray(c) for c in columns)
    labels = np.asarray(labels, dtype=np.intp)
    if len(columns) != len(schema.attributes):
        raise ColumnCountMismatch(0, len(schema.attributes), len(columns))
    for attr, col in zip(schema.attributes, columns):
        if col.shape != labels.shape:
            raise SchemaError(f"column {attr.name!r} has {col.size} rows, labels have {labels.size}")
        if attr.is_numeric:
            bad = ~((col >= attr.lower) & (col <= attr.upper))
        else:
            bad = (col < 0) | (col >= len(attr.values))
        if bad.any():
            r = int(np.argmax(bad))
            if attr.is_numeric:
                raise OutOfBounds(attr.name, r, float(col[r]), attr.lower, attr.upper)
            raise UnknownCategory(attr.name, r, int(col[r]))
    bad = (labels < 0) | (labels >= schema.n_classes)
    if bad.any():
        r = int(np.argmax(bad))
        raise UnknownCategory(schema.class_name, r, int(labels[r]))
    cols = tuple(np.array(c, dtype=float if a.is_numeric else np.intp) for a, c in zip(schema.attributes, columns))
    return Dataset(schema, cols, labels.copy())


def read_csv_rows(path, schema: DatasetSchema, require_class: bool = True) -> tuple[list[list[str]], bool]:
    """Read a CSV whose header names the schema columns, in any order.

    Returns rows reordered to schema order (class last when present) and
    whether the class column was found.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TooFewRows(f"{path}: empty file") from None
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise SchemaError(f"{path}: header lacks columns {missing}")
        has_class = schema.class_name in header
        if require_class and not has_class:
            raise SchemaError(f"{path}: header lacks class column {schema.class_name!r}")
        order = [header.index(n) for n in schema.names]
        if has_class:
            order.append(header.index(schema.class_name))
        rows = []
        for r, raw in enumerate(reader):
            if not raw:
                continue
            if len(raw) != len(header):
                raise ColumnCountMismatch(r, len(header), len(raw))
            rows.append([raw[j] for j in order])
    return rows, has_class


def load_csv(path, schema: DatasetSchema) -> Dataset:
    rows, _ = read_csv_rows(path, schema)
    return validate_dataset(rows, schema)


def write_csv(dataset: Dataset, path) -> None:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*dataset.schema.names, dataset.schema.class_name])
    for feats, label in dataset.rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in feats] + [label])
    atomic_write_text(path, buf.getvalue())


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# folds


def split_folds(dataset: Dataset, folds: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    """Shuffled k-fold partition; test-fold sizes differ by at most one."""
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if folds > dataset.n:
        raise TooFewRows(f"cannot make {folds} folds from {dataset.n} rows")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    out = []
    for test_idx in np.array_split(perm, folds):
        train_mask = np.ones(dataset.n, dtype=bool)
        train_mask[test_idx] = False
        out.append((dataset.take(np.flatnonzero(train_mask)), dataset.take(np.sort(test_idx))))
    return out


def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if folds > n:
        raise TooFewRows(f"cannot make {folds} folds from {n} rows")
    return [np.sort(f) for f in np.array_split(np.random.default_rng(seed).permutation(n), folds)]


# ---------------------------------------------------------------------------
# budget


def as_fraction(x) -> Fraction:
    """Exact rational from an int, float, Fraction or a string like "2", "1/4", "2:1"."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        s = x.strip()
        if ":" in s:
            a, b = s.split(":", 1)
            return Fraction(a.strip()) / Fraction(b.strip())
        return Fraction(s)
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"not a finite number: {x}")
    return Fraction(x)


@dataclass(frozen=True)
class LedgerEntry:
    label: str
    epsilon: Fraction
    delta: Fraction = Fraction(0)


@dataclass(frozen=True)
class PrivacyBudget:
    """Total budget and its per-access split, kept in exact rationals."""

    epsilon: Fraction
    delta: Fraction
    per_access_epsilon: Fraction
    numeric_weight: Fraction
    accesses: tuple[LedgerEntry, ...] = field(default_factory=tuple)

    def spent(self) -> Fraction:
        return sum((e.epsilon for e in self.accesses), Fraction(0))

    def spent_delta(self) -> Fraction:
        return sum((e.delta for e in self.accesses), Fraction(0))

    def entry(self, label: str) -> LedgerEntry:
        for e in self.accesses:
            if e.label == label:
                return e
        raise KeyError(label)

    def epsilon_for(self, label: str) -> float:
        return float(self.entry(label).epsilon)

    def split(self, label: str, parts: Sequence[tuple[str, Fraction]]) -> "PrivacyBudget":
        """Replace one entry by sub-entries whose shares sum to 1."""
        old = self.entry(label)
        if sum(w for _, w in parts) != 1:
            raise ValueError("split shares must sum to 1")
        new = []
        for e in self.accesses:
            if e.label == label:
                new.extend(LedgerEntry(name, old.epsilon * w, old.delta * w) for name, w in parts)
            else:
                new.append(e)
        return PrivacyBudget(self.epsilon, self.delta, self.per_access_epsilon, self.numeric_weight, tuple(new))

    def with_delta(self, labels: Sequence[str]) -> "PrivacyBudget":
        """Spread the total delta evenly over the named entries."""
        if not labels:
            return self
        share = self.delta / len(labels)
        chosen = set(labels)
        new = tuple(LedgerEntry(e.label, e.epsilon, share if e.label in chosen else Fraction(0))
                    for e in self.accesses)
        return PrivacyBudget(self.epsilon, self.delta, self.per_access_epsilon, self.numeric_weight, new)

    def to_dict(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "delta": str(self.delta),
            "per_access_epsilon": str(self.per_access_epsilon),
            "numeric_weight": str(self.numeric_weight),
            "accesses": [{"label": e.label, "epsilon": str(e.epsilon), "delta": str(e.delta)} for e in self.accesses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrivacyBudget":
        return cls(
            Fraction(d["epsilon"]), Fraction(d["delta"]), Fraction(d["per_access_epsilon"]),
            Fraction(d["numeric_weight"]),
            tuple(LedgerEntry(e["label"], Fraction(e["epsilon"]), Fraction(e["delta"])) for e in d["accesses"]),
        )


PRIOR_LABEL = "priors"


def mean_label(name):
    return f"numeric:{name}:mean"


def variance_label(name):
    return f"numeric:{name}:variance"


def categorical_label(name):
    return f"categorical:{name}"


def allocate_budget(epsilon, schema: DatasetSchema, numeric_weight=2, delta=0) -> PrivacyBudget:
    """Split ``epsilon`` as ``eps' = eps / (w * num + cat + 1)``.

    Each categorical attribute gets ``eps'``, each numeric one ``w * eps'``
    halved between mean and variance, and the class priors ``eps'``.
    """
    eps = as_fraction(epsilon)
    w = as_fraction(numeric_weight)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if w <= 0:
        raise ValueError(f"numeric weight must be positive, got {numeric_weight}")
    d = as_fraction(delta)
    if d < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    per = eps / (w * schema.num_count + schema.cat_count + 1)
    entries = []
    for a in schema.attributes:
        if a.is_numeric:
            entries.append(LedgerEntry(mean_label(a.name), w * per / 2))
            entries.append(LedgerEntry(variance_label(a.name), w * per / 2))
        else:
            entries.append(LedgerEntry(categorical_label(a.name), per))
    entries.append(LedgerEntry(PRIOR_LABEL, per))
    return PrivacyBudget(eps, d, per, w, tuple(entries))
