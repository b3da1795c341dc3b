#!/usr/bin/env python3
"""Materialize the bundled-digits surrogate corpus as IDX file pairs.

Writes train/test image+label files (28x28, upscaled from the 8x8 corpus
shipped with scikit-learn) so the CLI's ``idx`` dataset kind can run
without the canonical files. The training pair is the shift-augmented
set the surrogate experiments train on.

Usage: python scripts/make_digits_idx.py [--out DIR]
"""

import argparse
import os

import advrev as ar


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/digits", help="output directory")
    parser.add_argument("--no-augment", action="store_true",
                        help="write the plain training split instead of the augmented one")
    args = parser.parse_args()

    train, train_aug, test = ar.load_surrogate_corpus()
    train_out = train if args.no_augment else train_aug
    os.makedirs(args.out, exist_ok=True)
    pairs = [
        (train_out, "train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        (test, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ]
    for ds, img_name, lbl_name in pairs:
        img_path = os.path.join(args.out, img_name)
        lbl_path = os.path.join(args.out, lbl_name)
        ar.save_idx(ds.images, ds.labels, img_path, lbl_path, dims=ds.dims)
        print(f"wrote {len(ds)} images to {img_path} / {lbl_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
