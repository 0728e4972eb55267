"""Labeled tabular datasets: the CSV schema and its loader.

A dataset file is a headered CSV with numeric feature columns and one
integer `label` column holding 0 (normal) or 1 (anomaly).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .serialize import csv_cell

LABEL_COLUMN = "label"


@dataclass
class Dataset:
    """Feature matrix plus binary labels; the unit of ingestion, splitting,
    and scoring."""

    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels).ravel().astype(np.int8)
        if len(self.features) != len(self.labels):
            raise SchemaError("feature and label row counts differ")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise SchemaError("labels must be 0 or 1")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.features.shape[1])]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_normal(self) -> int:
        return int(np.sum(self.labels == 0))

    @property
    def n_outliers(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def nu(self) -> float:
        return self.n_outliers / len(self) if len(self) else 0.0

    def normal_rows(self) -> np.ndarray:
        return self.features[self.labels == 0]

    def outlier_rows(self) -> np.ndarray:
        return self.features[self.labels == 1]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            self.features[indices],
            self.labels[indices],
            name=self.name if name is None else name,
            feature_names=list(self.feature_names),
        )


def load_dataset(path: str | Path) -> Dataset:
    """Parse a CSV dataset; raises SchemaError with the offending row or
    column on malformed input."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if LABEL_COLUMN not in header:
            raise SchemaError(f"{path}: missing required column '{LABEL_COLUMN}'")
        label_idx = header.index(LABEL_COLUMN)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]

        rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            try:
                values = [float(cell) for i, cell in enumerate(row) if i != label_idx]
            except ValueError:
                raise SchemaError(f"{path}: row {row_no} contains a non-numeric cell") from None
            try:
                label = float(row[label_idx])
            except ValueError:
                raise SchemaError(f"{path}: row {row_no} has a non-numeric label") from None
            if label not in (0.0, 1.0):
                raise SchemaError(f"{path}: row {row_no} label must be 0 or 1, got {row[label_idx]}")
            rows.append(values)
            labels.append(int(label))

    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(
        np.asarray(rows, dtype=np.float64),
        np.asarray(labels, dtype=np.int8),
        name=path.stem,
        feature_names=feature_names,
    )


def save_dataset(dataset: Dataset, path: str | Path):
    """Write a dataset back to the CSV schema with round-trip-exact floats."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.feature_names, LABEL_COLUMN])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([*(csv_cell(float(v)) for v in row), int(label)])
