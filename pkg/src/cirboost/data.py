"""Dataset container, CSV ingestion and per-feature sorted index."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataParseError, DomainError, ShapeError


@dataclass(frozen=True)
class Dataset:
    """Numeric design matrix plus response.

    ``features`` is stored column-major (Fortran order) because the split
    scan walks one feature at a time.
    """

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple = field(default=())

    def __post_init__(self):
        X = np.asfortranarray(np.asarray(self.features, dtype=float))
        y = np.ascontiguousarray(np.asarray(self.response, dtype=float))
        if X.ndim == 1:
            X = np.asfortranarray(X[:, None])
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ShapeError(f"features must be a non-empty n x m matrix, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ShapeError(f"response length {y.shape} does not match {X.shape[0]} feature rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ShapeError("feature_names length differs from feature count")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class SortedIndex:
    """``order[j]`` lists row indices ascending in feature ``j`` (stable)."""

    order: np.ndarray  # shape (m, n)


def build_sorted_index(d: Dataset) -> SortedIndex:
    order = np.argsort(d.features, axis=0, kind="stable").T.copy()
    order.setflags(write=False)
    return SortedIndex(order)


def distinct_split_count(d: Dataset, index: SortedIndex, node_rows, j: int) -> int:
    """Number of candidate split points of feature ``j`` inside a node."""
    node_rows = np.asarray(node_rows, dtype=np.intp)
    if node_rows.size == 0:
        raise DomainError("node has no rows")
    mask = np.zeros(d.n, dtype=bool)
    mask[node_rows] = True
    col = d.features[index.order[j][mask[index.order[j]]], j]
    return int(np.count_nonzero(np.diff(col) > 0))


def _parse_cell(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DataParseError(f"row {row}, column {col!r}: non-numeric cell {text!r}") from None
    if not math.isfinite(value):
        raise DataParseError(f"row {row}, column {col!r}: non-finite cell {text!r}")
    return value


def read_numeric_csv(path):
    """Return ``(header, rows)`` with every cell parsed as a finite float."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataParseError(f"{path}: empty file") from None
            rows = []
            for lineno, raw in enumerate(reader, start=2):
                if not raw or all(not c.strip() for c in raw):
                    continue
                if len(raw) != len(header):
                    raise DataParseError(
                        f"row {lineno}: expected {len(header)} cells, found {len(raw)}")
                rows.append([_parse_cell(c.strip(), lineno, header[k]) for k, c in enumerate(raw)])
    except UnicodeDecodeError as exc:
        raise DataParseError(f"{path}: not valid UTF-8 ({exc})") from None
    if not rows:
        raise DataParseError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def load_csv(path, target_column: str) -> Dataset:
    header, table = read_numeric_csv(path)
    hits = [k for k, name in enumerate(header) if name == target_column]
    if not hits:
        raise DataParseError(f"{path}: target column {target_column!r} not found")
    if len(hits) > 1:
        raise DataParseError(f"{path}: column name {target_column!r} is ambiguous")
    t = hits[0]
    keep = [k for k in range(len(header)) if k != t]
    if not keep:
        raise DataParseError(f"{path}: no feature columns besides the target")
    return Dataset(table[:, keep], table[:, t], tuple(header[k] for k in keep))


def load_features_csv(path, expected_names=None, drop=None):
    """Feature matrix for prediction; a column named ``drop`` is ignored."""
    header, table = read_numeric_csv(path)
    if drop is not None and drop in header:
        k = header.index(drop)
        table = np.delete(table, k, axis=1)
        header = header[:k] + header[k + 1:]
    if expected_names is not None and len(header) != len(expected_names):
        raise ShapeError(f"{path}: {len(header)} feature columns, model expects {len(expected_names)}")
    return table
