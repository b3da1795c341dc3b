"""Offline handwritten-digit surrogate corpus.

Environments without the canonical 28x28 digit IDX files can still run
the full pipeline on real handwritten digits: scikit-learn ships a small
8x8 digit corpus, which this module upscales bilinearly to 28x28 and
optionally enlarges with one-pixel shifts so a dense classifier sees the
stroke-position variety a larger corpus would provide. scikit-learn is
imported lazily; it is only needed when this surrogate is requested.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, split_prior_eval
from .errors import UsageError

SURROGATE_SIDE = 28


def bilinear_upscale(images: np.ndarray, out_side: int = SURROGATE_SIDE) -> np.ndarray:
    """Upscale (n, s, s) images to flat (n, out_side**2) by bilinear interpolation."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise UsageError("expected a stack of square images (n, s, s)")
    n, side = images.shape[0], images.shape[1]
    src = (np.arange(out_side) + 0.5) * side / out_side - 0.5
    lo = np.clip(np.floor(src).astype(int), 0, side - 1)
    hi = np.clip(lo + 1, 0, side - 1)
    w = np.clip(src - lo, 0.0, 1.0)
    rows = images[:, lo] * (1 - w)[None, :, None] + images[:, hi] * w[None, :, None]
    out = rows[:, :, lo] * (1 - w)[None, None, :] + rows[:, :, hi] * w[None, None, :]
    return out.reshape(n, out_side * out_side)


def shift_augment(images: np.ndarray, labels: np.ndarray):
    """Original images plus the four one-pixel rolls along each axis."""
    stacks = [images]
    for axis, shift in ((1, 1), (1, -1), (2, 1), (2, -1)):
        stacks.append(np.roll(images, shift, axis=axis))
    return np.concatenate(stacks), np.tile(labels, len(stacks))


def load_surrogate_corpus(train_fraction: float = 0.7, split_seed: int = 42,
                          augment_train: bool = True):
    """Build (train, train_augmented, test) surrogate datasets.

    The split is stratified by true class. The augmented set exists only
    for training; prior-set records should come from the plain train
    split or the augmented one depending on the experiment's protocol.
    """
    try:
        from sklearn.datasets import load_digits
    except ImportError as exc:  # pragma: no cover
        raise UsageError(
            "the digit surrogate corpus needs scikit-learn (pip install scikit-learn)"
        ) from exc
    raw = load_digits()
    images8 = raw.images / 16.0  # source pixels are 0..16
    labels = raw.target.astype(np.int64)

    order = Dataset(images=np.arange(len(labels))[:, None].astype(np.float64),
                    labels=labels, n_classes=10, name="digits/index")
    prior, evaluation = split_prior_eval(order, train_fraction, split_seed)
    tr_idx = prior.images[:, 0].astype(np.int64)
    te_idx = evaluation.images[:, 0].astype(np.int64)

    side = SURROGATE_SIDE
    train = Dataset(images=bilinear_upscale(images8[tr_idx]), labels=labels[tr_idx],
                    n_classes=10, name="digits/train", dims=(side, side))
    test = Dataset(images=bilinear_upscale(images8[te_idx]), labels=labels[te_idx],
                   n_classes=10, name="digits/test", dims=(side, side))
    if augment_train:
        aug8, aug_labels = shift_augment(images8[tr_idx], labels[tr_idx])
        train_aug = Dataset(images=bilinear_upscale(aug8), labels=aug_labels,
                            n_classes=10, name="digits/train-aug", dims=(side, side))
    else:
        train_aug = train
    return train, train_aug, test
