"""Experiment driver: train -> attack -> evaluate -> map.

Each subcommand takes ``--config`` plus a few overrides and writes its
outputs under the config's out_dir. Reruns with identical inputs produce
byte-identical files: all randomness is seeded through the config, all
floats are serialized by shortest repr, and no timestamps enter any
output.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data, mapping, reversal
from .attacks import attack_batch
from .config import ExperimentConfig, IdxDataConfig, SynthDataConfig
from .errors import ToolError, UsageError
from .model import MicroNet, TrainConfig, forward_probs_batch, load_model, save_model, train
from .records import atomic_write_text, load_records, records_from_attacks, save_records


def topk_accuracy(probs: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose label ranks within the top k probabilities."""
    order = np.argsort(-probs, axis=1, kind="stable")
    hit = (order[:, :k] == np.asarray(labels)[:, None]).any(axis=1)
    return float(np.mean(hit))


def _load_train_test(cfg: ExperimentConfig):
    ds = cfg.dataset
    if isinstance(ds, SynthDataConfig):
        full = data.synth_blobs(ds.n_classes, ds.per_class + ds.test_per_class,
                                ds.input_dim, ds.spread, ds.seed)
        train_idx, test_idx = [], []
        for c in range(ds.n_classes):
            members = np.nonzero(full.labels == c)[0]
            train_idx.extend(members[:ds.per_class])
            test_idx.extend(members[ds.per_class:])
        train_ds = data.Dataset(full.images[train_idx], full.labels[train_idx],
                                ds.n_classes, name="blobs/train")
        test_ds = data.Dataset(full.images[test_idx], full.labels[test_idx],
                               ds.n_classes, name="blobs/test")
        return train_ds, test_ds
    if isinstance(ds, IdxDataConfig):
        train_ds = data.load_idx(ds.train_images, ds.train_labels, ds.n_classes, name="idx/train")
        test_ds = data.load_idx(ds.test_images, ds.test_labels, ds.n_classes, name="idx/test")
        if train_ds.input_dim != test_ds.input_dim:
            raise UsageError("train and test IDX files disagree on image size")
        return train_ds, test_ds
    raise UsageError(f"unsupported dataset config {type(ds).__name__}")


def _model_path(cfg: ExperimentConfig) -> str:
    return os.path.join(cfg.out_dir, "model.json")


def _records_path(cfg: ExperimentConfig, spec) -> str:
    tag = spec.variant if spec.sigma is None else f"{spec.variant}_sigma{spec.sigma:g}"
    return os.path.join(cfg.out_dir, f"records_{tag}.jsonl")


def cmd_train(cfg: ExperimentConfig) -> int:
    train_ds, test_ds = _load_train_test(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    net = MicroNet.create(train_ds.input_dim, list(cfg.model.hidden), train_ds.n_classes,
                          seed=cfg.model.seed)
    tc = TrainConfig(learning_rate=cfg.model.learning_rate, epochs=cfg.model.epochs,
                     batch_size=cfg.model.batch_size, seed=cfg.model.seed)
    history = []
    train(net, train_ds.images, train_ds.labels, tc,
          epoch_hook=lambda e, loss, acc: history.append((e, loss, acc)))

    save_model(net, _model_path(cfg))
    metrics = ["epoch,loss,accuracy"]
    metrics += [f"{e},{loss:.6f},{acc:.6f}" for e, loss, acc in history]
    atomic_write_text(os.path.join(cfg.out_dir, "train_metrics.csv"), "\n".join(metrics) + "\n")

    probs = forward_probs_batch(net, test_ds.images)
    top1 = topk_accuracy(probs, test_ds.labels, 1)
    top5 = topk_accuracy(probs, test_ds.labels, min(5, test_ds.n_classes))
    print(f"trained on {len(train_ds)} images; model written to {_model_path(cfg)}")
    print(f"held-out original accuracy: top-1 {top1:.4f}  top-5 {top5:.4f}")
    return 0


def cmd_attack(cfg: ExperimentConfig) -> int:
    _, test_ds = _load_train_test(cfg)
    net = load_model(_model_path(cfg))
    if net.input_dim != test_ds.input_dim or net.n_classes != test_ds.n_classes:
        raise UsageError("model and dataset disagree on input size or class count")
    prior_ds, eval_ds = data.split_prior_eval(test_ds, cfg.split.fraction, cfg.split.seed)
    images = np.concatenate([prior_ds.images, eval_ds.images])
    labels = np.concatenate([prior_ds.labels, eval_ds.labels])
    prior_flags = [True] * len(prior_ds) + [False] * len(eval_ds)

    for spec in cfg.attacks:
        outcomes = attack_batch(net, images, spec)
        rs = records_from_attacks(net, images, labels, outcomes, prior_flags, metadata={
            "variant": spec.variant,
            "epsilon": spec.epsilon,
            "sigma": spec.sigma,
            "max_iters": spec.max_iters,
            "overshoot": spec.overshoot,
            "seed": spec.seed,
            "split_fraction": cfg.split.fraction,
            "split_seed": cfg.split.seed,
            "dataset": test_ds.name,
        })
        path = _records_path(cfg, spec)
        save_records(rs, path)

        adv_probs = np.stack([o.adv_probs for o in outcomes])
        top1 = topk_accuracy(adv_probs, labels, 1)
        top5 = topk_accuracy(adv_probs, labels, min(5, test_ds.n_classes))
        print(f"{spec.variant}: attacked {rs.attempted} images, success rate "
              f"{rs.success_rate:.4f}; records written to {path}")
        print(f"{spec.variant}: adversarial accuracy: top-1 {top1:.4f}  top-5 {top5:.4f}")
        if spec.sigma is not None and rs.records:
            confident = [o.adv_probs[o.adv_class] for o in outcomes if o.success]
            print(f"{spec.variant}: mean adversarial-class probability over successes "
                  f"{float(np.mean(confident)):.4f} (sigma {spec.sigma:g})")
        if not rs.records:
            print(f"warning: {spec.variant} produced no successful adversarial examples; "
                  f"record file has no usable records", file=sys.stderr)
    return 0


def cmd_evaluate(cfg: ExperimentConfig, records_path: str | None = None,
                 k_values=None) -> int:
    path = records_path or _records_path(cfg, cfg.attacks[0])
    rs = load_records(path)
    if not rs.eval_records():
        raise UsageError(f"{path}: no evaluation records to score")
    if not rs.prior_records():
        raise UsageError(f"{path}: no prior records to fit from")
    ks = [int(k) for k in (k_values or cfg.k_values)]
    os.makedirs(cfg.out_dir, exist_ok=True)

    models = {
        "reversal": reversal.fit_reversal(rs.records, rs.n_classes),
        "baseline": reversal.fit_baseline(rs.records, rs.n_classes),
    }
    reversal.save_reversal_model(models["reversal"], os.path.join(cfg.out_dir, "reversal_model.json"))
    reversal.save_reversal_model(models["baseline"], os.path.join(cfg.out_dir, "baseline_model.json"))
    for method, model in models.items():
        for target in (reversal.TARGET_ORIGINAL, reversal.TARGET_TRUE):
            report = reversal.retrieval_accuracy(model, rs.records, target, ks)
            out = os.path.join(cfg.out_dir, f"report_{method}_{target}.csv")
            atomic_write_text(out, report.to_csv())
            summary = "  ".join(f"T_{k}={report.accuracy[k]:.4f}" for k in ks)
            print(f"{method} vs {target}: {summary}  (N={report.n_eval})")
    return 0


def cmd_map(cfg: ExperimentConfig, records_path: str | None = None,
            source: str = mapping.KIND_ORIGINAL, dest: str = mapping.KIND_ADVERSARIAL,
            min_fraction: float = 0.01) -> int:
    path = records_path or _records_path(cfg, cfg.attacks[0])
    rs = load_records(path)
    if not rs.records:
        raise UsageError(f"{path}: no successful records to map")
    os.makedirs(cfg.out_dir, exist_ok=True)
    table = mapping.build_mapping(rs.records, source, dest, n_classes=rs.n_classes)
    base = os.path.join(cfg.out_dir, f"mapping_{source}_{dest}")
    atomic_write_text(base + ".dot", mapping.export_dot(table, min_fraction))
    atomic_write_text(base + ".csv", mapping.export_csv(table))
    stats = mapping.rank_match_rates(rs.records)
    atomic_write_text(os.path.join(cfg.out_dir, "rank_match.csv"), stats.to_csv())
    rates = "  ".join(f"rank{r}={stats.rates[r]:.4f}" for r in mapping.RANKS_TRACKED)
    print(f"mapping {source} -> {dest} written to {base}.dot/.csv")
    print(f"adversarial-class ranks: {rates}  any2-5={stats.any_2_to_5:.4f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advrev",
        description="Adversarial attack reversibility toolkit: train a classifier, attack it, "
                    "fit the reversal estimator, and report retrieval accuracy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="override the config's out_dir")

    p_train = sub.add_parser("train", help="train the classifier and report held-out accuracy")
    add_common(p_train)

    p_attack = sub.add_parser("attack", help="generate adversarial records for the configured attacks")
    add_common(p_attack)
    p_attack.add_argument("--eps", type=float, help="override epsilon for every configured attack")
    p_attack.add_argument("--sigma", type=float,
                          help="override the confidence floor (0 clears it)")

    p_eval = sub.add_parser("evaluate", help="fit reversal and baseline, write retrieval reports")
    add_common(p_eval)
    p_eval.add_argument("--records", help="record file to evaluate (default: first configured attack)")
    p_eval.add_argument("--k", type=int, nargs="+", help="override k values")

    p_map = sub.add_parser("map", help="export class-mapping graph, CSV and rank statistics")
    add_common(p_map)
    p_map.add_argument("--records", help="record file to map (default: first configured attack)")
    p_map.add_argument("--source", choices=mapping.KINDS, default=mapping.KIND_ORIGINAL)
    p_map.add_argument("--dest", choices=mapping.KINDS, default=mapping.KIND_ADVERSARIAL)
    p_map.add_argument("--min-fraction", type=float, default=0.01,
                       help="drop mapping edges below this destination-column share")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    from dataclasses import replace

    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "eps", None) is not None:
        cfg.attacks = [replace(a, epsilon=args.eps) for a in cfg.attacks]
    if getattr(args, "sigma", None) is not None:
        sigma = None if args.sigma == 0 else args.sigma
        cfg.attacks = [replace(a, sigma=sigma) for a in cfg.attacks]
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(ExperimentConfig.from_file(args.config), args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "attack":
            return cmd_attack(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, records_path=args.records, k_values=args.k)
        if args.command == "map":
            return cmd_map(cfg, records_path=args.records, source=args.source,
                           dest=args.dest, min_fraction=args.min_fraction)
        raise UsageError(f"unknown command {args.command!r}")
    except (ToolError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # internal error: full traceback aids bug reports
        import traceback

        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
