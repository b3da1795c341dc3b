"""Adversarial attack reversibility toolkit.

Trains a small dense classifier, generates adversarial examples with
gradient-sign and boundary-projection attacks, fits a reversal estimator
from prior classification records, and quantifies how accurately the
original (or true) class of new adversarial examples can be retrieved.
"""

from .attacks import (
    AttackOutcome,
    AttackSpec,
    attack_batch,
    attack_deepfool,
    attack_lfgsm,
    attack_nfgsm,
    attack_rfgsm,
    per_item_spec,
    run_attack,
)
from .data import Dataset, load_idx, save_idx, split_prior_eval, synth_blobs
from .digits import bilinear_upscale, load_surrogate_corpus, shift_augment
from .errors import FormatError, ToolError, UsageError
from .mapping import (
    MappingTable,
    RankMatchStats,
    build_mapping,
    export_csv,
    export_dot,
    parse_csv,
    rank_match_rates,
)
from .model import (
    MicroNet,
    TrainConfig,
    forward_probs,
    forward_probs_batch,
    least_likely_class,
    load_model,
    logits_and_input_jacobian,
    loss_and_input_grad,
    predict,
    predict_batch,
    save_model,
    train,
)
from .records import (
    FailedAttack,
    PredictionRecord,
    RecordSet,
    load_records,
    records_from_attacks,
    save_records,
)
from .reversal import (
    TARGET_ORIGINAL,
    TARGET_TRUE,
    RetrievalReport,
    ReversalModel,
    fit_baseline,
    fit_reversal,
    load_reversal_model,
    retrieval_accuracy,
    reverse_topk,
    save_reversal_model,
)

__version__ = "0.1.0"
