"""Synthetic targets, delimited-text tables and IDX (MNIST) files."""

from __future__ import annotations

import gzip
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "DelimitedSchema",
    "sine_target",
    "complex_target",
    "gen_sine",
    "gen_complex_periodic",
    "gen_circles",
    "load_delimited",
    "load_idx",
    "fit_normalization",
    "normalize",
    "denormalize",
    "train_test_split",
    "kfold_splits",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataError(ValueError):
    """Malformed or missing input data."""


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (n, d)
    targets: np.ndarray  # (n, k) regression targets or (n,) integer labels
    split: str = "train"
    normalization: tuple | None = None  # (mean, std) per feature, from the train split

    def __post_init__(self):
        if len(self.inputs) < 1:
            raise DataError("empty dataset")
        if len(self.inputs) != len(self.targets):
            raise DataError(f"{len(self.inputs)} inputs but {len(self.targets)} targets")

    def __len__(self):
        return len(self.inputs)

    def subset(self, idx, split=None) -> "Dataset":
        return replace(self, inputs=self.inputs[idx], targets=self.targets[idx], split=split or self.split)


def sine_target(t):
    return (np.sin(2.0 * t) + 1.0) / 2.0


def complex_target(t):
    return (np.sin(t) - np.cos(2.0 * t) ** 2) / 2.0 + 4.0 * (1.0 + np.arccos(np.sin(t / 2.0))) / 3.0


def _check_n(n):
    if n < 2:
        raise ValueError("need at least 2 samples")


def gen_sine(n: int, seed: int = 0, extend: float = 0.0) -> Dataset:
    """t ~ U[0, 2 pi (1 + extend)], y = (sin 2t + 1) / 2.

    ``extend`` widens the interval by that fraction of its length, for
    extrapolation tests past the training range.
    """
    _check_n(n)
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0.0, 2.0 * np.pi * (1.0 + extend), size=n))
    return Dataset(t[:, None], sine_target(t)[:, None])


def gen_complex_periodic(n: int, seed: int = 0) -> Dataset:
    _check_n(n)
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0.0, 4.0 * np.pi, size=n))
    return Dataset(t[:, None], complex_target(t)[:, None])


def gen_circles(n: int, noise_sigma: float = 0.1, seed: int = 0) -> Dataset:
    """Two concentric rings (radius 1 -> label 0, radius 2 -> label 1)."""
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even number")
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.repeat([0, 1], half)
    radius = np.where(labels == 0, 1.0, 2.0) + rng.normal(0.0, noise_sigma, size=n)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    x = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    perm = rng.permutation(n)
    return Dataset(x[perm], labels[perm])


# ---------------------------------------------------------------------------
# Normalization and splits
# ---------------------------------------------------------------------------


def fit_normalization(x):
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def normalize(x, stats):
    mean, std = stats
    return (np.asarray(x, dtype=np.float64) - mean) / std


def denormalize(x, stats):
    mean, std = stats
    return np.asarray(x, dtype=np.float64) * std + mean


def train_test_split(ds: Dataset, test_fraction: float = 0.2, seed: int = 0, renormalize: bool = True):
    """Seeded shuffle split.  Feature statistics are refit on the train part."""
    n = len(ds)
    n_test = int(round(n * test_fraction))
    if not 0 < n_test < n:
        raise ValueError("test fraction leaves an empty split")
    perm = np.random.default_rng(seed).permutation(n)
    return _split(ds, perm[n_test:], perm[:n_test], renormalize)


def kfold_splits(ds: Dataset, k: int, seed: int = 0, renormalize: bool = True):
    """Yield ``(train, test)`` pairs for seeded k-fold cross-validation."""
    if not 2 <= k <= len(ds):
        raise ValueError("k must be between 2 and the number of samples")
    perm = np.random.default_rng(seed).permutation(len(ds))
    folds = np.array_split(perm, k)
    for i in range(k):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        yield _split(ds, train_idx, folds[i], renormalize)


def _split(ds, train_idx, test_idx, renormalize):
    train, test = ds.subset(train_idx, "train"), ds.subset(test_idx, "test")
    if renormalize and ds.normalization is not None:
        raw_train = denormalize(train.inputs, ds.normalization)
        raw_test = denormalize(test.inputs, ds.normalization)
        stats = fit_normalization(raw_train)
        train = replace(train, inputs=normalize(raw_train, stats), normalization=stats)
        test = replace(test, inputs=normalize(raw_test, stats), normalization=stats)
    return train, test


# ---------------------------------------------------------------------------
# Delimited text
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DelimitedSchema:
    """How to read a numeric table.

    ``delimiter`` None splits on commas and/or whitespace.  ``target_column``
    indexes the target (default last).  ``labels`` marks classification
    targets, returned as integer class ids.  ``header`` None skips the first
    line only when it is not numeric.
    """

    delimiter: str | None = None
    header: bool | None = False
    target_column: int = -1
    labels: bool = False
    normalize: bool = True


def _split_line(line, delimiter):
    if delimiter is None:
        return [tok for tok in re.split(r"[,\s]+", line.strip()) if tok]
    return [tok.strip() for tok in line.strip().split(delimiter)]


def _is_numeric_row(toks):
    try:
        [float(tok) for tok in toks]
    except ValueError:
        return False
    return True


def load_delimited(path, schema: DelimitedSchema = DelimitedSchema()) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found (expected a comma/whitespace-delimited numeric table)")
    rows, width = [], None
    with open(path) as fh:
        lines = fh.read().splitlines()
    content = [i for i, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    header = schema.header
    if header is None:
        header = bool(content) and not _is_numeric_row(_split_line(lines[content[0]], schema.delimiter))
    skip = content[0] if header and content else None
    for lineno, line in enumerate(lines, start=1):
        if lineno - 1 == skip or not line.strip() or line.lstrip().startswith("#"):
            continue
        toks = _split_line(line, schema.delimiter)
        if width is None:
            width = len(toks)
            if width < 2:
                raise DataError(f"{path}:{lineno}: need at least one feature and a target column")
        if len(toks) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(toks)}")
        try:
            rows.append([float(tok) for tok in toks])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.array(rows)
    if not np.all(np.isfinite(table)):
        raise DataError(f"{path}: NaN or infinite values")
    tcol = schema.target_column % table.shape[1]
    x = np.delete(table, tcol, axis=1)
    y = table[:, tcol]
    if schema.labels:
        _, y = np.unique(y, return_inverse=True)
    else:
        y = y[:, None]
    stats = None
    if schema.normalize:
        stats = fit_normalization(x)
        x = normalize(x, stats)
    return Dataset(x, y, "train", stats)


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------


def _read_bytes(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found (expected an IDX file, optionally gzipped)")
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw, magic, path):
    if len(raw) < 8:
        raise DataError(f"{path}: truncated IDX header")
    got = int.from_bytes(raw[:4], "big")
    if got != magic:
        raise DataError(f"{path}: bad magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataError(f"{path}: truncated IDX header")
    dims = np.frombuffer(raw, dtype=">u4", count=ndim, offset=4).astype(np.int64)
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise DataError(f"{path}: truncated data ({len(raw) - header} of {count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Images scaled to [0, 1] and flattened; labels as integers."""
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and labels.max() > 9:
        raise DataError(f"{labels_path}: label {labels.max()} outside 0-9")
    x = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(x, labels.astype(np.int64))
