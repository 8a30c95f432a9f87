"""Tabular datasets: CSV loading, synthetic generators and bundled fixtures."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

TASK_KINDS = ("classification", "regression")
MIN_ROWS = 10
_MISSING = {"", "NA", "NaN", "nan", "null", "?"}

# name -> (target column, task kind)
FIXTURES = {
    "boston_small": ("medv", "regression"),
    "diamonds_small": ("price", "regression"),
    "pima_small": ("type", "classification"),
    "cancer_small": ("diagnosis", "classification"),
    "concrete_small": ("compressive_strength", "regression"),
}


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    kind: str
    values: np.ndarray
    categories: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable learning task.

    Numeric columns hold float64 values, categorical columns hold integer codes
    into ``categories``. For classification the target is coded 0/1 following
    the sorted order of the original labels, which are kept in ``labels``.
    """

    columns: tuple[Column, ...]
    target: np.ndarray
    target_name: str
    task_kind: str
    labels: tuple[str, ...] = ()
    name: str = ""
    meta: Mapping[str, Any] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return int(self.target.shape[0])

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def schema(self) -> tuple:
        """Hashable description of the feature layout, used to check predict inputs."""
        return tuple((c.name, c.kind, c.categories) for c in self.columns)

    def numeric_matrix(self) -> np.ndarray:
        """n x p float matrix; categorical columns appear as their integer codes."""
        if "numeric" not in self._cache:
            if self.columns:
                m = np.column_stack([c.values.astype(np.float64) for c in self.columns])
            else:
                m = np.empty((self.n, 0))
            self._cache["numeric"] = np.ascontiguousarray(m)
        return self._cache["numeric"]

    def design_matrix(self) -> np.ndarray:
        """Numeric columns plus treatment-coded dummies (first level dropped)."""
        if "design" not in self._cache:
            parts = []
            for c in self.columns:
                if c.kind == "numeric":
                    parts.append(c.values[:, None])
                else:
                    levels = np.arange(1, len(c.categories))
                    parts.append((c.values[:, None] == levels[None, :]).astype(np.float64))
            m = np.hstack(parts) if parts else np.empty((self.n, 0))
            self._cache["design"] = np.ascontiguousarray(m, dtype=np.float64)
        return self._cache["design"]

    def take(self, indices) -> "Dataset":
        """Row subset (repeats allowed); cached matrices are sliced, not rebuilt."""
        idx = np.asarray(indices, dtype=np.intp)
        cols = tuple(Column(c.name, c.kind, c.values[idx], c.categories) for c in self.columns)
        cache = {k: v[idx] for k, v in self._cache.items()}
        return Dataset(cols, self.target[idx], self.target_name, self.task_kind,
                       self.labels, self.name, self.meta, cache)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.task_kind.encode())
        for c in self.columns:
            h.update(c.name.encode())
            h.update(np.ascontiguousarray(c.values).tobytes())
            h.update("\x1f".join(c.categories).encode())
        h.update(np.ascontiguousarray(self.target).tobytes())
        return h.hexdigest()[:16]

    def equals(self, other: "Dataset") -> bool:
        if (self.task_kind, self.target_name, self.labels, self.schema()) != (
            other.task_kind, other.target_name, other.labels, other.schema()
        ):
            return False
        if not np.array_equal(self.target, other.target):
            return False
        return all(np.array_equal(a.values, b.values) for a, b in zip(self.columns, other.columns))


def require_rows(ds: "Dataset", minimum: int = MIN_ROWS) -> "Dataset":
    """Experiments need at least ``minimum`` rows; tiny files still load for inspection."""
    if ds.n < minimum:
        raise DataError(f"need at least {minimum} rows for an experiment, got {ds.n}")
    return ds


def _parse_float(s: str) -> float | None:
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _label_order(labels: set[str]) -> list[str]:
    nums = {lab: _parse_float(lab) for lab in labels}
    if all(v is not None for v in nums.values()):
        return sorted(labels, key=lambda lab: (nums[lab], lab))
    return sorted(labels)


def _build(header: Sequence[str], rows: Sequence[Sequence[str]], target: str, task_kind: str,
           types: Mapping[str, str] | None, name: str, line0: int = 2) -> Dataset:
    if task_kind not in TASK_KINDS:
        raise DataError(f"task_kind must be one of {TASK_KINDS}, got {task_kind!r}")
    if target not in header:
        raise DataError(f"missing target column {target!r}")
    types = dict(types or {})
    unknown = set(types) - set(header)
    if unknown:
        raise DataError(f"type overrides for unknown columns: {sorted(unknown)}")
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + line0}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            if cell.strip() in _MISSING:
                raise DataError(f"row {r + line0}, column {header[j]!r}: missing value")
    if not rows:
        raise DataError("no data rows")

    columns = []
    y = None
    labels: tuple[str, ...] = ()
    for j, col in enumerate(header):
        raw = [row[j].strip() for row in rows]
        if col == target:
            if task_kind == "classification":
                distinct = set(raw)
                if len(distinct) != 2:
                    raise DataError(f"target not binary: {len(distinct)} distinct labels in {target!r}")
                labels = tuple(_label_order(distinct))
                y = np.array([labels.index(v) for v in raw], dtype=np.int64)
            else:
                vals = []
                for r, v in enumerate(raw):
                    f = _parse_float(v)
                    if f is None:
                        raise DataError(f"row {r + line0}, column {col!r}: cannot parse {v!r} as number")
                    vals.append(f)
                y = np.array(vals, dtype=np.float64)
            continue
        parsed = [_parse_float(v) for v in raw]
        kind = types.get(col) or ("numeric" if all(v is not None for v in parsed) else "categorical")
        if kind == "numeric":
            for r, v in enumerate(parsed):
                if v is None:
                    raise DataError(f"row {r + line0}, column {col!r}: cannot parse {raw[r]!r} as number")
            columns.append(Column(col, "numeric", np.array(parsed, dtype=np.float64)))
        elif kind == "categorical":
            cats = tuple(sorted(set(raw)))
            lookup = {c: i for i, c in enumerate(cats)}
            columns.append(Column(col, "categorical", np.array([lookup[v] for v in raw], dtype=np.int64), cats))
        else:
            raise DataError(f"column {col!r}: unknown type {kind!r}")
    return Dataset(tuple(columns), y, target, task_kind, labels, name)


def load_csv(path, target: str, task_kind: str, types: Mapping[str, str] | None = None) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Columns are numeric when every entry parses as a number and categorical
    otherwise; ``types`` maps column names to ``"numeric"``/``"categorical"``
    to override that guess.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    return _build([h.strip() for h in header], rows, target, task_kind, types, path.stem)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.feature_names + [ds.target_name])
        for i in range(ds.n):
            row = []
            for c in ds.columns:
                row.append(_fmt(c.values[i]) if c.kind == "numeric" else c.categories[c.values[i]])
            if ds.task_kind == "classification":
                row.append(ds.labels[int(ds.target[i])])
            else:
                row.append(_fmt(ds.target[i]))
            w.writerow(row)


def load_fixture(name: str) -> Dataset:
    """Load one of the bundled CSV fixtures by name (see ``FIXTURES``)."""
    if name not in FIXTURES:
        raise DataError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}")
    target, kind = FIXTURES[name]
    ref = resources.files("seqtune") / "fixtures" / f"{name}.csv"
    with resources.as_file(ref) as p:
        return load_csv(p, target, kind)


def make_synthetic(kind: str, n: int, p: int, noise: float = 1.0, seed: int = 0,
                   separation: float = 4.0) -> Dataset:
    """Generate a synthetic task.

    ``linear-regression``: ``y = X @ beta + eps`` with standard normal features,
    ``beta`` drawn uniformly from [-2, 2] (stored in ``meta["beta"]``) and
    ``eps ~ N(0, noise**2)``.

    ``two-gaussians-classification``: balanced classes with centres
    ``separation`` apart along the all-ones direction and isotropic spread
    ``noise``.
    """
    if n < MIN_ROWS:
        raise DataError(f"n must be >= {MIN_ROWS}")
    if p < 1:
        raise DataError("p must be >= 1")
    if noise < 0:
        raise DataError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    names = [f"x{j + 1}" for j in range(p)]
    if kind == "linear-regression":
        X = rng.standard_normal((n, p))
        beta = rng.uniform(-2.0, 2.0, size=p)
        y = X @ beta + noise * rng.standard_normal(n)
        cols = tuple(Column(nm, "numeric", X[:, j].copy()) for j, nm in enumerate(names))
        return Dataset(cols, y, "y", "regression", name="linear", meta={"beta": beta})
    if kind == "two-gaussians-classification":
        y = np.zeros(n, dtype=np.int64)
        y[n // 2:] = 1
        y = rng.permutation(y)
        direction = np.ones(p) / math.sqrt(p)
        centres = np.where(y[:, None] == 1, 0.5, -0.5) * separation * direction[None, :]
        X = centres + noise * rng.standard_normal((n, p))
        cols = tuple(Column(nm, "numeric", X[:, j].copy()) for j, nm in enumerate(names))
        return Dataset(cols, y, "y", "classification", labels=("0", "1"), name="two_gaussians",
                       meta={"separation": separation})
    raise DataError(f"unknown synthetic kind {kind!r}")
