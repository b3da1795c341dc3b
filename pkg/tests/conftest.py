"""Shared fixtures: the digit corpus, a trained classifier, attack caches.

The pipeline tests run on the canonical 28x28 handwritten-digit IDX files
when ADVREV_MNIST_DIR points at a directory containing them; otherwise
they run on the bundled-digits surrogate corpus (real handwritten digits,
bilinearly upscaled to 28x28). The surrogate trains with one-pixel shift
augmentation to recover the stroke variety a 60k-image corpus provides.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

import advrev as ar

MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def mnist_dir() -> str | None:
    d = os.environ.get("ADVREV_MNIST_DIR")
    if d and all(os.path.exists(os.path.join(d, f)) for f in MNIST_FILES):
        return d
    return None


requires_mnist = pytest.mark.skipif(
    mnist_dir() is None,
    reason="set ADVREV_MNIST_DIR to a directory with the canonical IDX files",
)


@pytest.fixture(scope="session")
def digit_corpus():
    """dict with train/fit/test datasets and per-corpus training epochs.

    ``train`` is what the model trains on; ``fit`` is the training-split
    corpus whose attack records form the prior set; ``test`` is the
    held-out evaluation split.
    """
    d = mnist_dir()
    if d is not None:
        train = ar.load_idx(os.path.join(d, MNIST_FILES[0]), os.path.join(d, MNIST_FILES[1]),
                            n_classes=10, name="mnist/train")
        test = ar.load_idx(os.path.join(d, MNIST_FILES[2]), os.path.join(d, MNIST_FILES[3]),
                           n_classes=10, name="mnist/test")
        return {"kind": "mnist", "train": train, "fit": train, "test": test, "epochs": 8}
    fit, train_aug, test = ar.load_surrogate_corpus(train_fraction=0.7, split_seed=42)
    return {"kind": "digits-surrogate", "train": train_aug, "fit": fit, "test": test,
            "epochs": 30}


@pytest.fixture(scope="session")
def digit_model(digit_corpus):
    train_ds = digit_corpus["train"]
    net = ar.MicroNet.create(train_ds.input_dim, [128], train_ds.n_classes, seed=0)
    cfg = ar.TrainConfig(learning_rate=0.1, epochs=digit_corpus["epochs"],
                         batch_size=32, seed=0)
    return ar.train(net, train_ds.images, train_ds.labels, cfg)


@pytest.fixture(scope="session")
def attack_runs(digit_corpus, digit_model):
    """Factory caching attack sweeps over the fit and test splits.

    Returns a callable: run(variant, epsilon, sigma=None, max_iters=20,
    with_prior=True) -> dict with prior/eval outcomes and merged records.
    """
    cache = {}
    fit_ds, test_ds = digit_corpus["fit"], digit_corpus["test"]

    def run(variant, epsilon, sigma=None, max_iters=20, with_prior=True):
        key = (variant, epsilon, sigma, max_iters, with_prior)
        if key not in cache:
            spec = ar.AttackSpec(variant, epsilon=epsilon, sigma=sigma,
                                 max_iters=max_iters, seed=9)
            eval_out = ar.attack_batch(digit_model, test_ds.images, spec)
            eval_rs = ar.records_from_attacks(digit_model, test_ds.images, test_ds.labels,
                                              eval_out, [False] * len(test_ds))
            records = list(eval_rs.records)
            prior_out = None
            if with_prior:
                prior_out = ar.attack_batch(digit_model, fit_ds.images, spec)
                prior_rs = ar.records_from_attacks(digit_model, fit_ds.images, fit_ds.labels,
                                                   prior_out, [True] * len(fit_ds))
                records = prior_rs.records + records
            cache[key] = {
                "records": records,
                "eval_outcomes": eval_out,
                "prior_outcomes": prior_out,
                "spec": spec,
            }
        return cache[key]

    return run


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_net(rng, input_dim, hidden, n_classes, scale=1.0):
    """A random small net with non-degenerate weights for gradient tests."""
    net = ar.MicroNet.create(input_dim, hidden, n_classes, seed=int(rng.integers(1 << 30)))
    for i in range(len(net.weights)):
        net.weights[i] = rng.normal(0.0, scale, size=net.weights[i].shape)
        net.biases[i] = rng.normal(0.0, 0.2 * scale, size=net.biases[i].shape)
    return net
