"""Experiment configuration: one JSON file capturing every knob.

The schema is strict: unknown keys anywhere in the document are rejected
so a typo cannot silently fall back to a default. All randomness in a run
flows from the named seeds here (weights, split, random-target attack).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .attacks import AttackSpec
from .errors import FormatError, UsageError


def _require_keys(doc: dict, allowed: set, required: set, context: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise UsageError(f"{context}: unknown key(s) {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise UsageError(f"{context}: missing required key(s) {sorted(missing)}")


@dataclass
class SynthDataConfig:
    n_classes: int = 10
    per_class: int = 200
    test_per_class: int = 50
    input_dim: int = 64
    spread: float = 0.05
    seed: int = 11

    kind = "synth"

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthDataConfig":
        allowed = {"kind", "n_classes", "per_class", "test_per_class", "input_dim", "spread", "seed"}
        _require_keys(doc, allowed, set(), "dataset")
        return cls(**{k: v for k, v in doc.items() if k != "kind"})


@dataclass
class IdxDataConfig:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    n_classes: int = 10

    kind = "idx"

    @classmethod
    def from_dict(cls, doc: dict) -> "IdxDataConfig":
        allowed = {"kind", "train_images", "train_labels", "test_images", "test_labels", "n_classes"}
        required = {"train_images", "train_labels", "test_images", "test_labels"}
        _require_keys(doc, allowed, required, "dataset")
        return cls(**{k: v for k, v in doc.items() if k != "kind"})


@dataclass
class ModelConfig:
    hidden: list = field(default_factory=lambda: [128])
    seed: int = 0
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 32

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        allowed = {"hidden", "seed", "learning_rate", "epochs", "batch_size"}
        _require_keys(doc, allowed, set(), "model")
        return cls(**doc)


@dataclass
class SplitConfig:
    fraction: float = 0.5
    seed: int = 3

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitConfig":
        _require_keys(doc, {"fraction", "seed"}, set(), "split")
        return cls(**doc)


def _attack_from_dict(doc: dict) -> AttackSpec:
    allowed = {"variant", "epsilon", "sigma", "max_iters", "overshoot", "seed"}
    _require_keys(doc, allowed, {"variant"}, "attack")
    return AttackSpec(**doc)


@dataclass
class ExperimentConfig:
    dataset: object
    model: ModelConfig
    attacks: list
    split: SplitConfig
    k_values: list
    out_dir: str

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        allowed = {"dataset", "model", "attacks", "split", "k_values", "out_dir"}
        _require_keys(doc, allowed, {"dataset", "out_dir"}, "config")

        ds_doc = doc["dataset"]
        kind = ds_doc.get("kind")
        if kind == "synth":
            dataset = SynthDataConfig.from_dict(ds_doc)
        elif kind == "idx":
            dataset = IdxDataConfig.from_dict(ds_doc)
        else:
            raise UsageError(f"dataset.kind must be 'synth' or 'idx', got {kind!r}")

        attacks = [_attack_from_dict(a) for a in doc.get("attacks", [{"variant": "nfgsm"}])]
        if not attacks:
            raise UsageError("config: attacks list must not be empty")
        k_values = [int(k) for k in doc.get("k_values", [1, 5])]
        if any(k < 1 for k in k_values):
            raise UsageError("config: k_values must be >= 1")
        return cls(
            dataset=dataset,
            model=ModelConfig.from_dict(doc.get("model", {})),
            attacks=attacks,
            split=SplitConfig.from_dict(doc.get("split", {})),
            k_values=k_values,
            out_dir=str(doc["out_dir"]),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)
