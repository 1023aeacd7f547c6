"""Dataset acquisition: synthetic Gaussian clusters, IDX and CSV ingestion.

Loaders are pure (same bytes give the same dataset) and every dataset carries a
per-class train/test partition with at least one pattern on each side.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    inputs: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.labels):
            raise ConfigError("inputs must be (N, d) with one label per row")
        train_classes = set(self.labels[self.train_idx].tolist())
        test_classes = set(self.labels[self.test_idx].tolist())
        universe = set(self.labels.tolist())
        if train_classes != universe or test_classes != universe:
            raise ConfigError("every class needs at least one train and one test pattern")

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1

    @property
    def dim(self):
        return self.inputs.shape[1]

    def train_patterns(self, classes=None):
        x, y = self.inputs[self.train_idx], self.labels[self.train_idx]
        if classes is None:
            return x, y
        mask = np.isin(y, np.asarray(sorted(int(c) for c in classes)))
        return x[mask], y[mask]

    def test_patterns(self, classes=None):
        x, y = self.inputs[self.test_idx], self.labels[self.test_idx]
        if classes is None:
            return x, y
        mask = np.isin(y, np.asarray(sorted(int(c) for c in classes)))
        return x[mask], y[mask]


def _tail_split(labels, test_fraction):
    """Deterministic per-class split: the last fraction of each class (file order) tests."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test fraction must lie strictly between 0 and 1")
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n_test = max(1, int(np.ceil(len(idx) * test_fraction)))
        if n_test >= len(idx):
            raise ConfigError(f"class {int(c)} has too few patterns to split")
        train.extend(idx[:-n_test])
        test.extend(idx[-n_test:])
    return np.asarray(sorted(train)), np.asarray(sorted(test))


def gen_synthetic(classes, dim, train_per_class, test_per_class, spread, seed=0):
    """Isotropic Gaussian cluster per class around seeded uniform means in [0,1]^dim."""
    if classes < 2 or dim < 2:
        raise ConfigError("need at least 2 classes and 2 dimensions")
    if spread <= 0:
        raise ConfigError("cluster spread must be positive")
    if train_per_class < 1 or test_per_class < 1:
        raise ConfigError("need at least one train and one test pattern per class")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0, 1.0, (classes, dim))
    per_class = train_per_class + test_per_class
    inputs = np.empty((classes * per_class, dim))
    labels = np.empty(classes * per_class, dtype=np.int64)
    train_idx, test_idx = [], []
    for c in range(classes):
        start = c * per_class
        inputs[start:start + per_class] = means[c] + rng.normal(0.0, spread, (per_class, dim))
        labels[start:start + per_class] = c
        train_idx.extend(range(start, start + train_per_class))
        test_idx.extend(range(start + train_per_class, start + per_class))
    return LabeledDataset(inputs, labels, np.asarray(train_idx), np.asarray(test_idx))


def _read_exact(data, offset, count, path):
    if offset + count > len(data):
        raise FormatError(f"{path}: truncated file, expected {offset + count} bytes "
                          f"but found {len(data)}")
    return data[offset:offset + count]


def _parse_idx_images(path):
    data = open(path, "rb").read()
    magic, = struct.unpack(">I", _read_exact(data, 0, 4, path))
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"{path}: bad image magic 0x{magic:08x} at offset 0 "
                          f"(expected 0x{IDX_IMAGE_MAGIC:08x})")
    count, rows, cols = struct.unpack(">III", _read_exact(data, 4, 12, path))
    pixels = _read_exact(data, 16, count * rows * cols, path)
    if len(data) != 16 + count * rows * cols:
        raise FormatError(f"{path}: trailing bytes, expected {16 + count * rows * cols} "
                          f"but found {len(data)}")
    array = np.frombuffer(pixels, dtype=np.uint8).astype(np.float64) / 255.0
    return array.reshape(count, rows * cols)


def _parse_idx_labels(path):
    data = open(path, "rb").read()
    magic, = struct.unpack(">I", _read_exact(data, 0, 4, path))
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"{path}: bad label magic 0x{magic:08x} at offset 0 "
                          f"(expected 0x{IDX_LABEL_MAGIC:08x})")
    count, = struct.unpack(">I", _read_exact(data, 4, 4, path))
    raw = _read_exact(data, 8, count, path)
    if len(data) != 8 + count:
        raise FormatError(f"{path}: trailing bytes, expected {8 + count} but found {len(data)}")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_idx(images_path, labels_path, test_fraction=0.2):
    """Load one IDX image/label pair; pixels scaled to [0,1], row-major flattening.

    The train/test partition takes the trailing fraction of each class in file
    order, so the same bytes always produce the same dataset.
    """
    inputs = _parse_idx_images(images_path)
    labels = _parse_idx_labels(labels_path)
    if len(inputs) != len(labels):
        raise FormatError(f"image count {len(inputs)} != label count {len(labels)}")
    train_idx, test_idx = _tail_split(labels, test_fraction)
    return LabeledDataset(inputs, labels, train_idx, test_idx)


def load_idx_pairs(train_images, train_labels, test_images, test_labels):
    """Standard four-file layout: explicit train pair plus test pair."""
    x_train = _parse_idx_images(train_images)
    y_train = _parse_idx_labels(train_labels)
    x_test = _parse_idx_images(test_images)
    y_test = _parse_idx_labels(test_labels)
    if len(x_train) != len(y_train):
        raise FormatError(f"image count {len(x_train)} != label count {len(y_train)}")
    if len(x_test) != len(y_test):
        raise FormatError(f"image count {len(x_test)} != label count {len(y_test)}")
    inputs = np.concatenate([x_train, x_test])
    labels = np.concatenate([y_train, y_test])
    return LabeledDataset(inputs, labels, np.arange(len(x_train)),
                          np.arange(len(x_train), len(inputs)))


def load_csv(path, label_column, test_fraction=0.2):
    """Numeric CSV with a header; features min-max normalized per column.

    Labels map to dense ids in order of first appearance; a constant feature
    column normalizes to zero.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if label_column not in header:
            raise FormatError(f"{path}: no column named {label_column!r} in header")
        label_pos = header.index(label_column)
        feature_pos = [j for j in range(len(header)) if j != label_pos]
        rows, raw_labels = [], []
        for r, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
            values = []
            for j in feature_pos:
                try:
                    values.append(float(row[j]))
                except ValueError:
                    raise FormatError(f"{path}: non-numeric cell at row {r}, "
                                      f"column {header[j]!r}") from None
            rows.append(values)
            raw_labels.append(row[label_pos])
    if not rows:
        raise FormatError(f"{path}: no data rows")
    inputs = np.asarray(rows, dtype=np.float64)
    lo, hi = inputs.min(axis=0), inputs.max(axis=0)
    span = hi - lo
    span[span == 0] = 1.0  # constant columns normalize to 0
    inputs = (inputs - lo) / span
    mapping = {}
    labels = np.asarray([mapping.setdefault(v, len(mapping)) for v in raw_labels],
                        dtype=np.int64)
    train_idx, test_idx = _tail_split(labels, test_fraction)
    return LabeledDataset(inputs, labels, train_idx, test_idx)
