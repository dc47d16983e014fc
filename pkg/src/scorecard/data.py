"""Dataset ingestion, binarization into threshold rules, and class weights."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

INTERCEPT_NAME = "(Intercept)"

_MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none", "?"}


class DataError(ValueError):
    """Raised for malformed input files or invalid dataset contents."""


@dataclass(frozen=True)
class Dataset:
    """Labeled feature matrix with a fixed intercept column.

    ``features`` has shape (N, P+1) with column 0 identically 1. Labels are
    integers in {-1, +1}. ``missing_counts[j]`` records how many cells of
    column j were imputed at load time (used for the per-feature penalty
    adjustment). ``loss_normalizer`` overrides N in loss rates; data
    reduction sets it to the original N so objectives stay comparable.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    label_name: str = "y"
    missing_counts: tuple[int, ...] = ()
    loss_normalizer: int | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] == 0:
            raise DataError("feature matrix must be 2-d with at least one column")
        if x.shape[0] == 0 and self.loss_normalizer is None:
            # only data reduction may produce an empty dataset, and it always
            # pins the original normalizer
            raise DataError("empty dataset")
        if y.shape != (x.shape[0],):
            raise DataError("labels must be a vector with one entry per row")
        if not np.all(np.isin(y, (-1, 1))):
            raise DataError("labels must lie in {-1, +1}")
        if not np.all(x[:, 0] == 1.0):
            raise DataError("column 0 must be the all-ones intercept column")
        if len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names must have one entry per column")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature_names contains duplicates")
        counts = self.missing_counts or tuple(0 for _ in self.feature_names)
        if len(counts) != x.shape[1]:
            raise DataError("missing_counts must have one entry per column")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "missing_counts", tuple(counts))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1] - 1

    @property
    def positive_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 1)

    @property
    def negative_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels == -1)

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == -1))

    @property
    def normalizer(self) -> int:
        return self.n if self.loss_normalizer is None else self.loss_normalizer

    def subset(self, rows, keep_normalizer: bool = False) -> "Dataset":
        """Row subset preserving order and names. ``keep_normalizer`` pins
        the parent's loss normalizer (data reduction); otherwise the subset
        is a standalone dataset normalized by its own size."""
        rows = np.asarray(rows, dtype=np.int64)
        return replace(
            self,
            features=self.features[rows],
            labels=self.labels[rows],
            loss_normalizer=self.normalizer if keep_normalizer else None,
        )


@dataclass(frozen=True)
class BinaryRule:
    """Provenance of one generated 0/1 column."""

    name: str
    source: str
    kind: str  # "threshold" | "category" | "passthrough"
    value: float | None
    constant: bool = False


@dataclass(frozen=True)
class BinaryRuleSet:
    """Rules produced by :func:`binarize`, grouped by source feature."""

    rules: tuple[BinaryRule, ...]
    thresholds: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def group(self, source: str) -> tuple[int, ...]:
        """Column offsets (0-based among rules) generated from ``source``."""
        return tuple(t for t, r in enumerate(self.rules) if r.source == source)

    @property
    def sources(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for r in self.rules:
            seen.setdefault(r.source, None)
        return tuple(seen)


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights W+ / W-, normalized to W+ + W- = 1."""

    w_pos: float
    w_neg: float

    def __post_init__(self):
        if self.w_pos < 0 or self.w_neg < 0:
            raise DataError("class weights must be nonnegative")

    @staticmethod
    def uniform() -> "ClassWeights":
        return ClassWeights(0.5, 0.5)


def _parse_cell(token: str, path: str, line_no: int, col: str) -> float | None:
    stripped = token.strip()
    if stripped.lower() in _MISSING_TOKENS:
        return None
    try:
        return float(stripped)
    except ValueError:
        raise DataError(
            f"{path}:{line_no}: non-numeric value {token!r} in column {col!r}"
        ) from None


def load_csv(path, label_column: str) -> Dataset:
    """Load a headered CSV into a Dataset with an intercept column prepended.

    Labels may be coded {0,1} or {-1,+1}; 0 maps to -1. Missing feature
    cells are mean-imputed and counted per column. Row order is preserved.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
        feat_cols = [j for j in range(len(header)) if j != label_idx]
        feat_names = [header[j] for j in feat_cols]

        rows: list[list[float | None]] = []
        raw_labels: list[float] = []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(record)}"
                )
            lab = _parse_cell(record[label_idx], str(path), line_no, label_column)
            if lab is None:
                raise DataError(f"{path}:{line_no}: missing label")
            raw_labels.append(lab)
            rows.append(
                [_parse_cell(record[j], str(path), line_no, header[j]) for j in feat_cols]
            )

    if not rows:
        raise DataError(f"{path}: no data rows")

    label_values = sorted(set(raw_labels))
    if label_values == [-1.0, 1.0] or label_values in ([-1.0], [1.0]):
        labels = [int(v) for v in raw_labels]
    elif label_values == [0.0, 1.0] or label_values in ([0.0],):
        labels = [1 if v == 1.0 else -1 for v in raw_labels]
    else:
        raise DataError(
            f"{path}: label column {label_column!r} must be binary "
            f"({{0,1}} or {{-1,+1}}), found values {label_values}"
        )

    n, p = len(rows), len(feat_cols)
    x = np.ones((n, p + 1), dtype=np.float64)
    missing = [0] * (p + 1)
    for j in range(p):
        col = [rows[i][j] for i in range(n)]
        present = [v for v in col if v is not None]
        if not present:
            raise DataError(f"{path}: column {feat_names[j]!r} has no observed values")
        mean = float(np.mean(present))
        for i, v in enumerate(col):
            if v is None:
                x[i, j + 1] = mean
                missing[j + 1] += 1
            else:
                x[i, j + 1] = v

    return Dataset(
        features=x,
        labels=np.array(labels, dtype=np.int64),
        feature_names=(INTERCEPT_NAME, *feat_names),
        label_name=label_column,
        missing_counts=tuple(missing),
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write a Dataset back to CSV; reloading reproduces it bit-for-bit."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([dataset.label_name, *dataset.feature_names[1:]])
        for i in range(dataset.n):
            row = [str(int(dataset.labels[i]))]
            row.extend(repr(float(v)) for v in dataset.features[i, 1:])
            writer.writerow(row)


def _midpoint_thresholds(values: np.ndarray) -> list[float]:
    distinct = np.unique(values)
    return [float((a + b) / 2.0) for a, b in zip(distinct[:-1], distinct[1:])]


def binarize(dataset: Dataset, spec: dict | None = None) -> tuple[Dataset, BinaryRuleSet]:
    """Convert features to 0/1 rule columns per a binarization spec.

    ``spec`` maps feature name to one of ``"passthrough"``, ``"categories"``,
    ``"midpoints"`` or ``{"thresholds": [v, ...]}``. Unlisted features pass
    through unchanged. Threshold rules are h = 1[x >= v]; category rules are
    one-hot. Constant rule columns are flagged (and warned about) rather
    than dropped.
    """
    spec = dict(spec or {})
    unknown = set(spec) - set(dataset.feature_names[1:])
    if unknown:
        raise DataError(f"binarization spec names unknown features: {sorted(unknown)}")

    columns: list[np.ndarray] = []
    rules: list[BinaryRule] = []
    thresholds: dict[str, tuple[float, ...]] = {}

    for j, name in enumerate(dataset.feature_names[1:], start=1):
        col = dataset.features[:, j]
        directive = spec.get(name, "passthrough")
        if directive == "passthrough":
            is_binary = np.all(np.isin(col, (0.0, 1.0)))
            if not is_binary:
                warnings.warn(
                    f"feature {name!r} passed through but is not 0/1-valued",
                    stacklevel=2,
                )
            columns.append(col.astype(np.float64))
            rules.append(
                BinaryRule(name, name, "passthrough", None, constant=_is_constant(col))
            )
            continue

        if directive == "categories":
            cats = np.unique(col)
            if len(cats) > 64:
                raise DataError(f"feature {name!r} has {len(cats)} categories (>64)")
            for c in cats:
                h = (col == c).astype(np.float64)
                rules.append(
                    BinaryRule(f"{name}=={_fmt(c)}", name, "category", float(c),
                               constant=_is_constant(h))
                )
                columns.append(h)
            continue

        if directive == "midpoints":
            vlist = _midpoint_thresholds(col)
        elif isinstance(directive, dict) and "thresholds" in directive:
            vlist = sorted(float(v) for v in directive["thresholds"])
            if len(set(vlist)) != len(vlist):
                raise DataError(f"duplicate thresholds for feature {name!r}")
            if any(not np.isfinite(v) for v in vlist):
                raise DataError(f"non-finite threshold for feature {name!r}")
        else:
            raise DataError(f"bad binarization directive for {name!r}: {directive!r}")

        if not vlist:
            warnings.warn(f"feature {name!r} is constant; no thresholds generated",
                          stacklevel=2)
        thresholds[name] = tuple(vlist)
        lo, hi = col.min(), col.max()
        for v in vlist:
            h = (col >= v).astype(np.float64)
            constant = _is_constant(h)
            if v <= lo or v > hi:
                warnings.warn(
                    f"threshold {v} outside observed range of {name!r}; rule is constant",
                    stacklevel=2,
                )
            rules.append(
                BinaryRule(f"{name}>={_fmt(v)}", name, "threshold", v, constant=constant)
            )
            columns.append(h)

    if not columns:
        raise DataError("binarization produced no feature columns")

    names = [INTERCEPT_NAME] + [r.name for r in rules]
    features = np.column_stack([np.ones(dataset.n)] + columns)
    out = Dataset(
        features=features,
        labels=dataset.labels.copy(),
        feature_names=tuple(names),
        label_name=dataset.label_name,
    )
    return out, BinaryRuleSet(rules=tuple(rules), thresholds=thresholds)


def _is_constant(col: np.ndarray) -> bool:
    return bool(np.all(col == col[0]))


def _fmt(v: float) -> str:
    return f"{v:g}"


def class_weights(dataset: Dataset, mode: str = "balanced",
                  w_pos: float | None = None) -> ClassWeights:
    """Compute class weights.

    ``balanced`` gives (N-/N, N+/N) so each class contributes equally.
    ``max_sensitivity`` gives W+ = N-/(1+N-), the smallest weight that makes
    one positive example outweigh all negatives, paired with a hard FPR cap.
    ``custom`` passes w_pos through (w_neg = 1 - w_pos).
    """
    if mode == "custom":
        if w_pos is None or not 0.0 <= w_pos <= 1.0:
            raise DataError("custom mode requires w_pos in [0, 1]")
        return ClassWeights(float(w_pos), float(1.0 - w_pos))
    n_pos, n_neg = dataset.n_pos, dataset.n_neg
    if n_pos == 0 or n_neg == 0:
        raise DataError(f"mode {mode!r} needs both classes present")
    if mode == "balanced":
        return ClassWeights(n_neg / dataset.n, n_pos / dataset.n)
    if mode == "max_sensitivity":
        wp = n_neg / (1.0 + n_neg)
        return ClassWeights(wp, 1.0 - wp)
    raise DataError(f"unknown class-weight mode {mode!r}")
