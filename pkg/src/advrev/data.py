"""Datasets: IDX image files, synthetic Gaussian blobs, stratified splits.

IDX parsing follows the canonical big-endian layout: images carry magic
0x00000803 then count/rows/cols and raw bytes; labels carry magic
0x00000801 then count and raw bytes. Pixels are scaled to [0, 1] by plain
division by 255 (no centering, so the [0, 1] clipping contract of the
attacks stays meaningful).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, UsageError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Parallel images (n, input_dim) in [0, 1] and integer labels (n,)."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = ""
    dims: tuple | None = None  # (height, width) when image-shaped

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def input_dim(self) -> int:
        return self.images.shape[1]


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated file while reading {what}")
    return data


def load_idx(images_path, labels_path, n_classes: int | None = None,
             name: str = "idx") -> Dataset:
    """Load an IDX image/label file pair into a flat float64 dataset."""
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path, "header"))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(fh, count * rows * cols, images_path, "pixel data")
    images = np.frombuffer(raw, dtype=np.uint8).astype(np.float64).reshape(count, rows * cols)
    images /= 255.0

    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(">II", _read_exact(fh, 8, labels_path, "header"))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        labels = np.frombuffer(_read_exact(fh, label_count, labels_path, "label data"),
                               dtype=np.uint8).astype(np.int64)
    if label_count != count:
        raise FormatError(
            f"image count {count} in {images_path} does not match label count "
            f"{label_count} in {labels_path}"
        )
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if count else 0
    elif count and int(labels.max()) >= n_classes:
        raise FormatError(f"{labels_path}: label {int(labels.max())} exceeds n_classes {n_classes}")
    return Dataset(images=images, labels=labels, n_classes=n_classes, name=name,
                   dims=(rows, cols))


def save_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path,
             dims: tuple | None = None) -> None:
    """Write a dataset as a canonical IDX file pair (inverse of load_idx).

    ``images`` may be float in [0, 1] (scaled back to bytes) or uint8.
    ``dims`` defaults to a square layout when the feature count allows it.
    """
    images = np.asarray(images)
    if images.dtype != np.uint8:
        images = np.rint(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)
    n, d = images.shape
    if dims is None:
        side = int(round(d ** 0.5))
        if side * side != d:
            raise UsageError("dims required for non-square image layouts")
        dims = (side, side)
    rows, cols = dims
    if rows * cols != d:
        raise UsageError(f"dims {dims} do not match feature count {d}")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


def synth_blobs(n_classes: int, per_class: int, input_dim: int, spread: float,
                seed: int, name: str = "blobs") -> Dataset:
    """Gaussian clusters with means inside [0.2, 0.8]^d, samples clipped to [0, 1]."""
    if n_classes < 2 or per_class < 1:
        raise UsageError("need n_classes >= 2 and per_class >= 1")
    if spread <= 0:
        raise UsageError("spread must be > 0")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.2, 0.8, size=(n_classes, input_dim))
    images = np.empty((n_classes * per_class, input_dim))
    labels = np.empty(n_classes * per_class, dtype=np.int64)
    for c in range(n_classes):
        lo = c * per_class
        images[lo:lo + per_class] = means[c] + rng.normal(0.0, spread, size=(per_class, input_dim))
        labels[lo:lo + per_class] = c
    np.clip(images, 0.0, 1.0, out=images)
    return Dataset(images=images, labels=labels, n_classes=n_classes, name=name)


def split_prior_eval(ds: Dataset, fraction: float, seed: int):
    """Disjoint, exhaustive, class-stratified split.

    Returns (prior, evaluation) datasets where the prior side holds
    ``fraction`` of each class (rounded, so per-class counts deviate by at
    most 1). A class with fewer than 2 members cannot be split; it goes
    whole to the larger side with a warning.
    """
    if not 0.0 < fraction < 1.0:
        raise UsageError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    prior_idx, eval_idx = [], []
    bigger_is_prior = fraction >= 0.5
    for c in range(ds.n_classes):
        members = np.nonzero(ds.labels == c)[0]
        if len(members) == 0:
            continue
        if len(members) < 2:
            warnings.warn(f"class {c} has {len(members)} member(s); assigning it whole "
                          f"to the {'prior' if bigger_is_prior else 'evaluation'} side")
            (prior_idx if bigger_is_prior else eval_idx).extend(members)
            continue
        members = members[rng.permutation(len(members))]
        take = int(round(fraction * len(members)))
        take = min(max(take, 1), len(members) - 1)  # both sides non-empty
        prior_idx.extend(members[:take])
        eval_idx.extend(members[take:])
    prior_idx = np.sort(np.asarray(prior_idx, dtype=np.int64))
    eval_idx = np.sort(np.asarray(eval_idx, dtype=np.int64))

    def _subset(idx, suffix):
        return Dataset(images=ds.images[idx], labels=ds.labels[idx],
                       n_classes=ds.n_classes, name=f"{ds.name}/{suffix}", dims=ds.dims)

    return _subset(prior_idx, "prior"), _subset(eval_idx, "eval")
