"""Dataset ingestion, scaling, batching and missing-feature masks.

Supported on-disk formats:

* IDX (big-endian): image files with magic 2051 and label files with magic
  2049; pixels are flattened row-major into one feature vector per sample.
* CSV: rectangular numeric tables, optional header row, labels in a chosen
  column. Label values are read as 0-based class ids and shifted to 1..C.

Scaling statistics always come from the dataset they were fitted on and are
carried along so test data can be transformed without refitting.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InvalidInput

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

SCALE_NONE, SCALE_DIVMAX, SCALE_ZSCORE = "none", "divmax", "zscore"


@dataclass
class Scaling:
    mode: str
    max_value: float | None = None          # divmax
    means: np.ndarray | None = None         # zscore
    stds: np.ndarray | None = None

    def to_dict(self):
        out = {"mode": self.mode}
        if self.max_value is not None:
            out["max_value"] = float(self.max_value)
        if self.means is not None:
            out["means"] = [float(v) for v in self.means]
            out["stds"] = [float(v) for v in self.stds]
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(
            mode=d["mode"],
            max_value=d.get("max_value"),
            means=None if d.get("means") is None else np.asarray(d["means"], float),
            stds=None if d.get("stds") is None else np.asarray(d["stds"], float),
        )


@dataclass
class Dataset:
    features: np.ndarray               # (N, num_features) float64
    labels: np.ndarray | None = None   # (N,) ints in 1..C, or None
    scaling: Scaling | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise InvalidInput("features must be a 2-D matrix")
        if np.isnan(self.features).any():
            raise DataFormatError("dataset contains NaN features")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (len(self.features),):
                raise DataFormatError(
                    f"{len(self.features)} samples but {len(self.labels)} labels"
                )
            if len(self.labels) and self.labels.min() < 1:
                raise DataFormatError("labels must be >= 1 after ingestion")

    def __len__(self):
        return len(self.features)

    @property
    def num_features(self):
        return self.features.shape[1]

    def feature_stats(self):
        """Per-feature (means, stds) for data-aware parameter initialization."""
        return self.features.mean(axis=0), self.features.std(axis=0)


def _read_be_u32(data: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(data):
        raise DataFormatError(f"{path}: truncated header at byte {offset}")
    return struct.unpack(">I", data[offset : offset + 4])[0]


def _load_idx_array(path, expected_magic, kind):
    with open(path, "rb") as handle:
        raw = handle.read()
    magic = _read_be_u32(raw, 0, path)
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad {kind} magic {magic} at byte 0 (expected {expected_magic})"
        )
    num_dims = 1 if expected_magic == IDX_LABEL_MAGIC else 3
    dims = [_read_be_u32(raw, 4 + 4 * i, path) for i in range(num_dims)]
    payload_start = 4 + 4 * num_dims
    expected_len = int(np.prod(dims))
    payload = raw[payload_start:]
    if len(payload) != expected_len:
        raise DataFormatError(
            f"{path}: payload has {len(payload)} bytes from byte {payload_start}, "
            f"expected {expected_len} for dims {dims}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims), dims


def load_idx(image_path, label_path=None) -> Dataset:
    """Load an IDX image file (and optional matching label file)."""
    images, dims = _load_idx_array(image_path, IDX_IMAGE_MAGIC, "image")
    count = dims[0]
    features = images.reshape(count, dims[1] * dims[2]).astype(float)
    labels = None
    if label_path is not None:
        raw_labels, label_dims = _load_idx_array(label_path, IDX_LABEL_MAGIC, "label")
        if label_dims[0] != count:
            raise DataFormatError(
                f"{image_path} has {count} images but {label_path} has "
                f"{label_dims[0]} labels"
            )
        labels = raw_labels.astype(int) + 1
    return Dataset(features=features, labels=labels)


def save_idx(features, image_path, label_path=None, labels=None, rows=None, cols=None):
    """Write features (integer values 0..255) back to IDX files."""
    features = np.asarray(features)
    count, num_feat = features.shape
    if rows is None:
        rows = int(np.sqrt(num_feat))
        cols = num_feat // rows
    if rows * cols != num_feat:
        raise InvalidInput(f"cannot shape {num_feat} features as {rows}x{cols}")
    payload = np.rint(features).astype(np.uint8).tobytes()
    with open(image_path, "wb") as handle:
        handle.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, count, rows, cols))
        handle.write(payload)
    if label_path is not None:
        labels = np.asarray(labels, dtype=int)
        with open(label_path, "wb") as handle:
            handle.write(struct.pack(">II", IDX_LABEL_MAGIC, count))
            handle.write((labels - 1).astype(np.uint8).tobytes())


def load_csv(path, label_column: int | str | None = "last", has_header=False) -> Dataset:
    """Load a rectangular numeric CSV; ``label_column`` may be None, 'last' or an index."""
    rows = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for line_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            rows.append((line_no, row))
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    width = len(rows[0][1])
    table = np.empty((len(rows), width))
    for i, (line_no, row) in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(
                f"{path}: row at line {line_no} has {len(row)} cells, expected {width}"
            )
        for j, cell in enumerate(row):
            try:
                table[i, j] = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric cell {cell!r} at line {line_no}, column {j}"
                ) from None

    if label_column is None:
        return Dataset(features=table)
    col = width - 1 if label_column == "last" else int(label_column)
    if not 0 <= col < width:
        raise DataFormatError(f"{path}: label column {col} out of range")
    labels = table[:, col]
    if np.any(labels != np.rint(labels)):
        raise DataFormatError(f"{path}: label column {col} contains non-integers")
    features = np.delete(table, col, axis=1)
    return Dataset(features=features, labels=labels.astype(int) + 1)


def scale_features(dataset: Dataset, mode: str) -> Dataset:
    """Fit a scaling on this dataset and apply it, recording the statistics."""
    if mode == SCALE_NONE:
        scaling = Scaling(mode=SCALE_NONE)
    elif mode == SCALE_DIVMAX:
        scaling = Scaling(mode=SCALE_DIVMAX, max_value=float(dataset.features.max()))
    elif mode == SCALE_ZSCORE:
        means = dataset.features.mean(axis=0)
        stds = np.maximum(dataset.features.std(axis=0), 1e-6)
        scaling = Scaling(mode=SCALE_ZSCORE, means=means, stds=stds)
    else:
        raise InvalidInput(f"unknown scaling mode {mode!r}")
    return apply_scaling(dataset, scaling)


def apply_scaling(dataset: Dataset, scaling: Scaling) -> Dataset:
    """Apply previously-fitted statistics; never recomputes them."""
    if scaling.mode == SCALE_NONE:
        features = dataset.features.copy()
    elif scaling.mode == SCALE_DIVMAX:
        divisor = scaling.max_value if scaling.max_value else 1.0
        features = dataset.features / divisor
    elif scaling.mode == SCALE_ZSCORE:
        features = (dataset.features - scaling.means) / scaling.stds
    else:
        raise InvalidInput(f"unknown scaling mode {scaling.mode!r}")
    return Dataset(features=features, labels=dataset.labels, scaling=scaling)


def batch_iterator(dataset: Dataset, batch_size: int, shuffle_seed=None):
    """Yield (features, labels) batches covering the dataset exactly once.

    The order is a seeded shuffle; the final partial batch is included.
    """
    if batch_size < 1:
        raise InvalidInput("batch_size must be >= 1")
    order = np.arange(len(dataset))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(order)
    for start in range(0, len(dataset), batch_size):
        idx = order[start : start + batch_size]
        labels = None if dataset.labels is None else dataset.labels[idx]
        yield dataset.features[idx], labels


def random_missing_mask(dataset_or_shape, fraction_missing: float, seed=None) -> np.ndarray:
    """Boolean (N, num_features) mask, each entry missing with the given probability."""
    if not 0.0 <= fraction_missing <= 1.0:
        raise InvalidInput(f"missing fraction must be in [0, 1], got {fraction_missing}")
    if isinstance(dataset_or_shape, Dataset):
        shape = dataset_or_shape.features.shape
    else:
        shape = tuple(dataset_or_shape)
    return np.random.default_rng(seed).random(shape) < fraction_missing


def split_dataset(dataset: Dataset, valid_fraction: float, seed=None):
    """Carve a validation split off a dataset. Returns (train, valid)."""
    if not 0.0 <= valid_fraction < 1.0:
        raise InvalidInput("valid_fraction must be in [0, 1)")
    n = len(dataset)
    n_valid = int(round(n * valid_fraction))
    order = np.random.default_rng(seed).permutation(n)
    valid_idx, train_idx = order[:n_valid], order[n_valid:]

    def take(idx):
        labels = None if dataset.labels is None else dataset.labels[idx]
        return Dataset(
            features=dataset.features[idx], labels=labels, scaling=dataset.scaling
        )

    return take(train_idx), take(valid_idx)
