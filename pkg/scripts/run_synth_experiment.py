#!/usr/bin/env python3
"""End-to-end pipeline on synthetic Gaussian blobs via the CLI.

Trains a small classifier, runs all four attacks, fits the reversal
models and writes every report under the output directory. Useful as a
fast smoke run and as a template for custom configs.

Usage: python scripts/run_synth_experiment.py [--out DIR]
"""

import argparse
import json
import os
import tempfile

from advrev.cli import main as advrev_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/synth")
    parser.add_argument("--eps", type=float, default=0.3,
                        help="step size for the sign attacks (blobs need ~0.2+)")
    args = parser.parse_args()

    config = {
        "dataset": {"kind": "synth", "n_classes": 10, "per_class": 200,
                    "test_per_class": 60, "input_dim": 64, "spread": 0.05, "seed": 11},
        "model": {"hidden": [64], "seed": 0, "learning_rate": 0.1,
                  "epochs": 20, "batch_size": 32},
        "attacks": [
            {"variant": "nfgsm", "epsilon": args.eps, "seed": 7},
            {"variant": "lfgsm", "epsilon": args.eps, "seed": 7},
            {"variant": "rfgsm", "epsilon": args.eps, "seed": 7},
            {"variant": "deepfool", "seed": 7},
        ],
        "split": {"fraction": 0.5, "seed": 3},
        "k_values": [1, 5],
        "out_dir": args.out,
    }
    os.makedirs(args.out, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        cfg_path = fh.name

    try:
        for cmd in ("train", "attack"):
            code = advrev_main([cmd, "--config", cfg_path])
            if code:
                return code
        for attack in config["attacks"]:
            records = os.path.join(args.out, f"records_{attack['variant']}.jsonl")
            print(f"--- {attack['variant']} ---")
            for cmd in ("evaluate", "map"):
                sub_out = os.path.join(args.out, attack["variant"])
                code = advrev_main([cmd, "--config", cfg_path,
                                    "--records", records, "--out", sub_out])
                if code:
                    return code
    finally:
        os.unlink(cfg_path)
    print(f"all outputs under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
