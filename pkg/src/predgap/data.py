"""Dataset ingestion, standardization, splitting, and benchmark pair sampling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class Dataset:
    """An immutable table of numeric instances, one feature per column."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    standardized: bool = False

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"dataset values must be 2-D, got shape {values.shape}")
        if values.shape[1] != len(self.feature_names):
            raise ValidationError(
                f"{values.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        if not np.isfinite(values).all():
            raise ValidationError("dataset contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_instances(self) -> int:
        return self.values.shape[0]

    @property
    def num_features(self) -> int:
        return self.values.shape[1]

    def instance(self, i: int) -> np.ndarray:
        return self.values[i]


@dataclass(frozen=True)
class PairSample:
    """One benchmark query: a dataset row index plus a perturbed feature set."""

    instance_index: int
    feature_set: tuple[int, ...]


def load_csv(path, label_column: str | None = None, exclude: list[str] | None = None):
    """Read a headered CSV into a Dataset, optionally splitting off labels.

    Returns ``(dataset, labels)`` where labels is None unless a label column
    was named; the label column and any ``exclude`` columns (e.g. categorical
    ones, which are never dropped automatically) stay out of the features.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if not rows or not rows[0]:
        raise FormatError(f"{path}: missing header row")
    header = [name.strip() for name in rows[0]]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise ValidationError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    dropped = {label_idx} if label_idx is not None else set()
    for name in exclude or []:
        if name not in header:
            raise ValidationError(f"{path}: no column named {name!r}")
        dropped.add(header.index(name))
    feature_cols = [j for j in range(len(header)) if j not in dropped]
    if not feature_cols:
        raise ValidationError(f"{path}: no feature columns left")

    matrix = np.empty((len(rows) - 1, len(feature_cols)), dtype=np.float64)
    labels = np.empty(len(rows) - 1, dtype=np.float64) if label_idx is not None else None
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}: line {r} has {len(row)} cells, expected {len(header)}")
        for out_j, j in enumerate(feature_cols):
            try:
                matrix[r - 2, out_j] = float(row[j])
            except ValueError:
                raise FormatError(
                    f"{path}: line {r}, column {header[j]!r}: non-numeric cell {row[j]!r}"
                ) from None
        if labels is not None:
            try:
                labels[r - 2] = float(row[label_idx])
            except ValueError:
                raise FormatError(
                    f"{path}: line {r}, column {header[label_idx]!r}: non-numeric cell "
                    f"{row[label_idx]!r}"
                ) from None
    dataset = Dataset(values=matrix, feature_names=tuple(header[j] for j in feature_cols))
    return dataset, labels


def standardize(dataset: Dataset, params: dict | None = None):
    """Shift and scale each column to zero mean and unit standard deviation.

    Uses the population (divide-by-N) standard deviation.  When ``params``
    is given it is applied as-is, which is how test data gets the training
    split's statistics.  Returns ``(dataset, params)``.
    """
    if params is None:
        means = dataset.values.mean(axis=0)
        stds = dataset.values.std(axis=0)
        for j, s in enumerate(stds):
            if s <= 0.0:
                raise ValidationError(
                    f"column {dataset.feature_names[j]!r} is constant; cannot standardize"
                )
        params = {
            name: {"mean": float(m), "std": float(s)}
            for name, m, s in zip(dataset.feature_names, means, stds)
        }
    else:
        for name in dataset.feature_names:
            if name not in params:
                raise ValidationError(f"standardization params missing column {name!r}")
            if params[name]["std"] <= 0.0:
                raise ValidationError(f"column {name!r} has non-positive std in params")
        means = np.array([params[n]["mean"] for n in dataset.feature_names])
        stds = np.array([params[n]["std"] for n in dataset.feature_names])
    values = (dataset.values - means) / stds
    return replace(dataset, values=values, standardized=True), params


def unstandardize(dataset: Dataset, params: dict) -> Dataset:
    means = np.array([params[n]["mean"] for n in dataset.feature_names])
    stds = np.array([params[n]["std"] for n in dataset.feature_names])
    return replace(dataset, values=dataset.values * stds + means, standardized=False)


def save_standardization(params: dict, path) -> None:
    Path(path).write_text(json.dumps(params, indent=1) + "\n")


def load_standardization(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read standardization sidecar {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected an object of per-column statistics")
    return obj


def split(dataset: Dataset, ratio: float = 0.8, seed: int = 0):
    """Deterministic shuffled train/test split; returns ``(train, test)``."""
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"split ratio must be in (0, 1), got {ratio}")
    n = dataset.num_instances
    n_train = int(n * ratio)
    if n_train < 1 or n_train >= n:
        raise ValidationError(f"ratio {ratio} gives a degenerate split of {n} rows")
    order = np.random.default_rng(seed).permutation(n)
    train = replace(dataset, values=dataset.values[order[:n_train]].copy())
    test = replace(dataset, values=dataset.values[order[n_train:]].copy())
    return train, test


def sample_pairs(
    dataset: Dataset,
    num_features: int,
    count: int,
    seed: int = 0,
    sizes: list[int] | None = None,
) -> list[PairSample]:
    """Draw ``count`` (instance, feature subset) pairs for benchmarking.

    Subset sizes cycle through ``sizes`` (default 1..d) so that all sizes are
    as evenly represented as possible; when the count is not divisible the
    earlier sizes in the cycle receive the extras.
    """
    if count < 1:
        raise ValidationError(f"need at least one pair, got {count}")
    if dataset.num_instances < 1:
        raise ValidationError("dataset has no instances")
    if sizes is None:
        sizes = list(range(1, num_features + 1))
    for k in sizes:
        if not 0 <= k <= num_features:
            raise ValidationError(f"subset size {k} outside 0..{num_features}")
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        k = sizes[i % len(sizes)]
        idx = int(rng.integers(dataset.num_instances))
        if k == 0:
            subset: tuple[int, ...] = ()
        else:
            subset = tuple(sorted(int(q) for q in rng.choice(num_features, size=k, replace=False)))
        pairs.append(PairSample(instance_index=idx, feature_set=subset))
    return pairs
