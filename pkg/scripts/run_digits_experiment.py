#!/usr/bin/env python3
"""Desk-scale reversibility study on the handwritten-digit corpus.

Reproduces the qualitative result tables: per-attack retrieval accuracy
against the original and true classes (probability-averaging estimator
vs frequency baseline), adversarial-class rank statistics, and the
confidence-floor sweep for the non-targeted sign attack.

Uses the canonical IDX files when ADVREV_MNIST_DIR is set, otherwise the
bundled-digits surrogate. Runtime is a couple of minutes on the
surrogate.

Usage: python scripts/run_digits_experiment.py [--out DIR]
"""

import argparse
import os

import numpy as np

import advrev as ar

MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def load_corpus():
    d = os.environ.get("ADVREV_MNIST_DIR")
    if d and all(os.path.exists(os.path.join(d, f)) for f in MNIST_FILES):
        train = ar.load_idx(os.path.join(d, MNIST_FILES[0]), os.path.join(d, MNIST_FILES[1]),
                            n_classes=10, name="mnist/train")
        test = ar.load_idx(os.path.join(d, MNIST_FILES[2]), os.path.join(d, MNIST_FILES[3]),
                           n_classes=10, name="mnist/test")
        return train, train, test, 8
    fit, train_aug, test = ar.load_surrogate_corpus()
    return fit, train_aug, test, 30


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/digits")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    fit_ds, train_ds, test_ds, epochs = load_corpus()
    print(f"corpus: {train_ds.name} ({len(train_ds)} train / {len(test_ds)} test)")

    net = ar.MicroNet.create(train_ds.input_dim, [128], 10, seed=0)
    ar.train(net, train_ds.images, train_ds.labels,
             ar.TrainConfig(learning_rate=0.1, epochs=epochs, batch_size=32, seed=0))
    ar.save_model(net, os.path.join(args.out, "model.json"))
    clean_acc = float(np.mean(ar.predict_batch(net, test_ds.images) == test_ds.labels))
    print(f"clean test accuracy: {clean_acc:.4f}")

    def attack_and_fit(spec):
        prior_out = ar.attack_batch(net, fit_ds.images, spec)
        eval_out = ar.attack_batch(net, test_ds.images, spec)
        prior = ar.records_from_attacks(net, fit_ds.images, fit_ds.labels,
                                        prior_out, [True] * len(fit_ds))
        evals = ar.records_from_attacks(net, test_ds.images, test_ds.labels,
                                        eval_out, [False] * len(test_ds))
        records = prior.records + evals.records
        adv_acc = float(np.mean([o.adv_class == t for o, t in zip(eval_out, test_ds.labels)]))
        return records, evals, adv_acc

    attacks = [
        ("nfgsm", ar.AttackSpec("nfgsm", epsilon=0.1, seed=9)),
        ("lfgsm", ar.AttackSpec("lfgsm", epsilon=0.18, seed=9)),
        ("rfgsm", ar.AttackSpec("rfgsm", epsilon=0.3, sigma=0.8, max_iters=30, seed=9)),
        ("deepfool", ar.AttackSpec("deepfool", seed=9)),
    ]
    print("\nattack     succ   adv-acc  T1/orig T5/orig T1/true T5/true  base-T5/true")
    for name, spec in attacks:
        records, evals, adv_acc = attack_and_fit(spec)
        model = ar.fit_reversal(records, 10)
        base = ar.fit_baseline(records, 10)
        ro = ar.retrieval_accuracy(model, records, ar.TARGET_ORIGINAL, [1, 5])
        rt = ar.retrieval_accuracy(model, records, ar.TARGET_TRUE, [1, 5])
        bt = ar.retrieval_accuracy(base, records, ar.TARGET_TRUE, [5])
        succ = len(evals.records) / evals.attempted
        print(f"{name:10s} {succ:.3f}  {adv_acc:.4f}   {ro.accuracy[1]:.4f}  {ro.accuracy[5]:.4f}"
              f"  {rt.accuracy[1]:.4f}  {rt.accuracy[5]:.4f}   {bt.accuracy[5]:.4f}")

        stats = ar.rank_match_rates([r for r in records if not r.in_prior_set])
        ranks = "  ".join(f"r{k}={stats.rates[k]:.3f}" for k in (2, 3, 4, 5))
        print(f"           adversarial-class ranks: {ranks}  any2-5={stats.any_2_to_5:.3f}")

        table = ar.build_mapping([r for r in records if not r.in_prior_set],
                                 "original", "adversarial", n_classes=10)
        with open(os.path.join(args.out, f"mapping_{name}.dot"), "w") as fh:
            fh.write(ar.export_dot(table))

    print("\nconfidence-floor sweep (non-targeted sign attack, eps 0.1):")
    print("sigma   succ   T1/orig T5/orig")
    for sigma in (None, 0.6, 0.7, 0.8, 0.9):
        spec = ar.AttackSpec("nfgsm", epsilon=0.1, sigma=sigma, seed=9)
        records, evals, _ = attack_and_fit(spec)
        model = ar.fit_reversal(records, 10)
        ro = ar.retrieval_accuracy(model, records, ar.TARGET_ORIGINAL, [1, 5])
        succ = len(evals.records) / evals.attempted
        label = "none" if sigma is None else f"{sigma:.1f}"
        print(f"{label:6s} {succ:.3f}   {ro.accuracy[1]:.4f}  {ro.accuracy[5]:.4f}")

    print(f"\nmapping graphs written under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
