"""Reversing an attack: from adversarial class back to candidate originals.

Fitting consumes prior-set prediction records grouped by adversarial
class. For each adversarial class j the estimator row over original
classes k is

    P[j, k] = (1/D + sum of p(k|x) over prior records with adv class j)
              / (1 + count of prior records with adv class j)

so unseen adversarial classes fall back to the uniform 1/D row and every
row sums to exactly 1. The frequency baseline replaces the probability
sum with the raw original-class count, smoothed the same way; retrieval
ranks are unchanged by the smoothing because it is a shared affine map
per row.

Retrieval returns the top-k entries of a row (ties to the lowest class
index) and accuracy reports count, over the evaluation records only, how
often the original or true class appears among the top-k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, UsageError
from .records import atomic_write_text

REVERSAL_FORMAT = "advrev-reversal"
REVERSAL_VERSION = 1

TARGET_ORIGINAL = "original"
TARGET_TRUE = "true"


@dataclass
class ReversalModel:
    """Per-adversarial-class distributions over original classes.

    ``P[j]`` is the row for adversarial class j; ``counts[i, j]`` tallies
    prior records with original class i and adversarial class j;
    ``fitted_from`` is the number of prior records consumed. Immutable
    once fitted.
    """

    n_classes: int
    P: np.ndarray
    counts: np.ndarray
    fitted_from: int
    method: str = "prob_avg"


@dataclass
class RetrievalReport:
    """Top-k retrieval accuracy against one target class kind."""

    target: str
    k_values: list = field(default_factory=list)
    accuracy: dict = field(default_factory=dict)
    hits: dict = field(default_factory=dict)
    n_eval: int = 0

    def to_csv(self) -> str:
        lines = ["k,target,accuracy,N"]
        for k in self.k_values:
            lines.append(f"{k},{self.target},{self.accuracy[k]:.6f},{self.n_eval}")
        return "\n".join(lines) + "\n"


def _prior_stats(records, n_classes: int):
    """Accumulate per-adversarial-class probability sums and pair counts."""
    if n_classes < 2:
        raise UsageError("need at least 2 classes")
    prob_sums = np.zeros((n_classes, n_classes))
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    used = 0
    for r in records:
        if not r.in_prior_set:
            continue
        if r.adversarial_class == r.original_class:
            raise UsageError("record with adversarial_class == original_class is not adversarial")
        if r.original_probs.shape != (n_classes,):
            raise UsageError("record probability vector length does not match n_classes")
        prob_sums[r.adversarial_class] += r.original_probs
        counts[r.original_class, r.adversarial_class] += 1
        used += 1
    return prob_sums, counts, used


def fit_reversal(records, n_classes: int) -> ReversalModel:
    """Fit the probability-averaging estimator from prior-set records.

    Records flagged in_prior_set=False are ignored, never trusted.
    """
    prob_sums, counts, used = _prior_stats(records, n_classes)
    per_class = counts.sum(axis=0)  # prior records per adversarial class
    P = (1.0 / n_classes + prob_sums) / (1.0 + per_class)[:, None]
    return ReversalModel(n_classes=n_classes, P=P, counts=counts, fitted_from=used,
                         method="prob_avg")


def fit_baseline(records, n_classes: int) -> ReversalModel:
    """Frequency-counting baseline: rows rank originals by raw mapping count."""
    _, counts, used = _prior_stats(records, n_classes)
    per_class = counts.sum(axis=0)
    P = (1.0 / n_classes + counts.T) / (1.0 + per_class)[:, None]
    return ReversalModel(n_classes=n_classes, P=P, counts=counts, fitted_from=used,
                         method="freq_count")


def reverse_topk(model: ReversalModel, adv_class: int, k: int) -> list[int]:
    """The k most probable original classes for ``adv_class``, descending.

    Ties resolve to the lowest class index; k = n_classes returns a full
    permutation of the classes.
    """
    if not 0 <= adv_class < model.n_classes:
        raise UsageError(f"adversarial class {adv_class} out of range")
    if not 1 <= k <= model.n_classes:
        raise UsageError(f"k must lie in [1, {model.n_classes}], got {k}")
    order = np.argsort(-model.P[adv_class], kind="stable")
    return [int(c) for c in order[:k]]


def retrieval_accuracy(model: ReversalModel, records, target: str, k_values) -> RetrievalReport:
    """Top-k accuracy of the target class over evaluation records.

    Only records with in_prior_set=False count toward N; prior records in
    the input are skipped by flag rather than by caller discipline.
    """
    if target not in (TARGET_ORIGINAL, TARGET_TRUE):
        raise UsageError(f"target must be '{TARGET_ORIGINAL}' or '{TARGET_TRUE}'")
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values:
        raise UsageError("k_values must not be empty")
    if k_values[0] < 1 or k_values[-1] > model.n_classes:
        raise UsageError(f"k values must lie in [1, {model.n_classes}]")

    eval_records = [r for r in records if not r.in_prior_set]
    if not eval_records:
        raise UsageError("no evaluation records (all flagged in_prior_set)")

    # Position of every class in every row's descending order, computed once.
    order = np.argsort(-model.P, axis=1, kind="stable")
    position = np.empty_like(order)
    rows = np.arange(model.n_classes)[:, None]
    position[rows, order] = np.arange(model.n_classes)[None, :]

    report = RetrievalReport(target=target, k_values=list(k_values), n_eval=len(eval_records))
    wanted = np.array([
        r.original_class if target == TARGET_ORIGINAL else r.true_class
        for r in eval_records
    ])
    adv = np.array([r.adversarial_class for r in eval_records])
    pos = position[adv, wanted]
    for k in k_values:
        hits = int(np.sum(pos < k))
        report.hits[k] = hits
        report.accuracy[k] = hits / len(eval_records)
    return report


def save_reversal_model(model: ReversalModel, path) -> None:
    doc = {
        "format": REVERSAL_FORMAT,
        "version": REVERSAL_VERSION,
        "n_classes": model.n_classes,
        "fitted_from": model.fitted_from,
        "method": model.method,
        "P": model.P.tolist(),
        "counts": model.counts.tolist(),
    }
    atomic_write_text(path, json.dumps(doc, sort_keys=True))


def load_reversal_model(path) -> ReversalModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a valid reversal model file: {exc}") from exc
    if doc.get("format") != REVERSAL_FORMAT:
        raise FormatError(f"{path}: unrecognized format {doc.get('format')!r}")
    if doc.get("version") != REVERSAL_VERSION:
        raise FormatError(
            f"{path}: reversal model version {doc.get('version')} unsupported, "
            f"this build reads version {REVERSAL_VERSION}"
        )
    return ReversalModel(
        n_classes=int(doc["n_classes"]),
        P=np.asarray(doc["P"], dtype=np.float64),
        counts=np.asarray(doc["counts"], dtype=np.int64),
        fitted_from=int(doc["fitted_from"]),
        method=doc.get("method", "prob_avg"),
    )
