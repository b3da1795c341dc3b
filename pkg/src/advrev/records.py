"""Prediction records and their line-delimited persistence format.

A record file is JSON-lines text: a header line carrying format name,
version, class count and free-form metadata, followed by one line per
attacked image. Successful attacks become full prediction records; failed
attempts (no class change within budget) are kept as lightweight failure
lines so success rates stay recoverable, but they never enter reversal
fitting or evaluation. Floats survive the round trip exactly because JSON
emits shortest-repr float64.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, UsageError

RECORDS_FORMAT = "advrev-records"
RECORDS_VERSION = 1


def atomic_write_text(path, text: str) -> None:
    """Write-temp-then-rename so readers never observe a partial file."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class PredictionRecord:
    """One successfully attacked image.

    ``original_probs`` is the classifier's probability vector on the clean
    image, ``original_class`` its argmax, ``true_class`` the ground-truth
    label, ``adversarial_class`` the prediction on the attacked image, and
    ``in_prior_set`` marks membership in the fitting set.
    """

    original_probs: np.ndarray
    original_class: int
    true_class: int
    adversarial_class: int
    in_prior_set: bool

    def __post_init__(self):
        self.original_probs = np.asarray(self.original_probs, dtype=np.float64)
        if self.original_probs.ndim != 1:
            raise UsageError("original_probs must be a flat vector")
        if int(np.argmax(self.original_probs)) != self.original_class:
            raise UsageError("original_class must equal argmax(original_probs)")
        if self.adversarial_class == self.original_class:
            raise UsageError("adversarial_class must differ from original_class")

    def __eq__(self, other):
        if not isinstance(other, PredictionRecord):
            return NotImplemented
        return (
            np.array_equal(self.original_probs, other.original_probs)
            and self.original_class == other.original_class
            and self.true_class == other.true_class
            and self.adversarial_class == other.adversarial_class
            and self.in_prior_set == other.in_prior_set
        )


@dataclass(frozen=True)
class FailedAttack:
    """An attacked image whose prediction never changed within budget."""

    original_class: int
    true_class: int
    in_prior_set: bool


@dataclass
class RecordSet:
    """All records from one attack run plus run metadata."""

    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    n_classes: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def attempted(self) -> int:
        return len(self.records) + len(self.failures)

    @property
    def success_rate(self) -> float:
        return len(self.records) / self.attempted if self.attempted else 0.0

    def prior_records(self) -> list:
        return [r for r in self.records if r.in_prior_set]

    def eval_records(self) -> list:
        return [r for r in self.records if not r.in_prior_set]


def records_from_attacks(net, images, true_labels, outcomes, prior_flags,
                         metadata=None) -> RecordSet:
    """Bundle attack outcomes into a RecordSet.

    Original probabilities are recomputed on the clean images with the
    same single-image forward pass the attacks used, so the stored argmax
    always matches the outcome's original class. Failed outcomes are kept
    as FailedAttack entries.
    """
    from .model import forward_probs

    images = np.asarray(images, dtype=np.float64)
    if not (len(images) == len(true_labels) == len(outcomes) == len(prior_flags)):
        raise UsageError("images, labels, outcomes and prior flags must align")
    rs = RecordSet(n_classes=net.n_classes, metadata=dict(metadata or {}))
    for i, out in enumerate(outcomes):
        if out.success:
            rs.records.append(PredictionRecord(
                original_probs=forward_probs(net, images[i]),
                original_class=out.original_class,
                true_class=int(true_labels[i]),
                adversarial_class=out.adv_class,
                in_prior_set=bool(prior_flags[i]),
            ))
        else:
            rs.failures.append(FailedAttack(
                original_class=out.original_class,
                true_class=int(true_labels[i]),
                in_prior_set=bool(prior_flags[i]),
            ))
    return rs


def save_records(rs: RecordSet, path) -> None:
    lines = [json.dumps({
        "format": RECORDS_FORMAT,
        "version": RECORDS_VERSION,
        "n_classes": rs.n_classes,
        "metadata": rs.metadata,
    }, sort_keys=True)]
    for r in rs.records:
        lines.append(json.dumps({
            "type": "record",
            "probs": r.original_probs.tolist(),
            "original": r.original_class,
            "true": r.true_class,
            "adversarial": r.adversarial_class,
            "prior": r.in_prior_set,
        }, sort_keys=True))
    for f in rs.failures:
        lines.append(json.dumps({
            "type": "failure",
            "original": f.original_class,
            "true": f.true_class,
            "prior": f.in_prior_set,
        }, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_records(path) -> RecordSet:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty record file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line 1: invalid header: {exc}") from exc
    if header.get("format") != RECORDS_FORMAT:
        raise FormatError(f"{path}: unrecognized record format {header.get('format')!r}")
    if header.get("version") != RECORDS_VERSION:
        raise FormatError(
            f"{path}: record file version {header.get('version')} unsupported, "
            f"this build reads version {RECORDS_VERSION}"
        )
    rs = RecordSet(n_classes=int(header["n_classes"]), metadata=header.get("metadata", {}))
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            kind = doc["type"]
            if kind == "record":
                rs.records.append(PredictionRecord(
                    original_probs=np.asarray(doc["probs"], dtype=np.float64),
                    original_class=int(doc["original"]),
                    true_class=int(doc["true"]),
                    adversarial_class=int(doc["adversarial"]),
                    in_prior_set=bool(doc["prior"]),
                ))
            elif kind == "failure":
                rs.failures.append(FailedAttack(
                    original_class=int(doc["original"]),
                    true_class=int(doc["true"]),
                    in_prior_set=bool(doc["prior"]),
                ))
            else:
                raise FormatError(f"{path}: line {lineno}: unknown entry type {kind!r}")
        except FormatError:
            raise
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, UsageError) as exc:
            raise FormatError(f"{path}: line {lineno}: malformed record: {exc}") from exc
    return rs
