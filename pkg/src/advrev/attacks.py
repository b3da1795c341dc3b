"""Adversarial example generation.

Four attacks against a MicroNet classifier, all operating on flat pixel
vectors in [0, 1]:

* ``nfgsm``  - non-targeted fast gradient sign: one step up the loss
  gradient of the original class.
* ``lfgsm``  - targeted fast gradient sign toward the least likely class
  of the original prediction (one step down that class's loss gradient).
* ``rfgsm``  - targeted fast gradient sign toward a class drawn uniformly
  from the non-original classes.
* ``deepfool`` - iterative projection onto the nearest linearized class
  boundary, minimal L2 perturbation.

A ``sigma`` confidence floor turns the sign attacks into their iterated
form: steps of epsilon/max_iters are applied until the prediction has
changed AND the new class's probability reaches sigma, or the budget runs
out. Every produced image is clipped to [0, 1] after every step. Attacks
never raise on failure to mislead; the outcome's ``success`` flag reports
it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import UsageError
from .model import (
    MicroNet,
    forward_probs,
    least_likely_class,
    logits_and_input_jacobian,
    loss_and_input_grad,
    predict,
)

VARIANTS = ("nfgsm", "lfgsm", "rfgsm", "deepfool")

# Relative overshoot applied to every boundary-projection step so the
# iterate actually crosses the boundary instead of landing on it; small
# enough that the affine one-step perturbation stays within 1e-6 relative
# of the exact closed-form projection.
_CROSSING_NUDGE = 1e-7
# Absolute step taken when the image sits exactly on a boundary (zero
# projection distance).
_TIE_STEP = 1e-9
# Gradient-difference norms below this are treated as a flat region.
_FLAT_NORM = 1e-12


@dataclass(frozen=True)
class AttackSpec:
    """Attack selection and knobs; immutable so batches can derive seeds."""

    variant: str
    epsilon: float = 0.1
    sigma: float | None = None
    max_iters: int = 20
    overshoot: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown attack variant {self.variant!r}, expected one of {VARIANTS}")
        if self.epsilon < 0:
            raise UsageError("epsilon must be >= 0")
        if self.sigma is not None and not 0.0 < self.sigma < 1.0:
            raise UsageError("sigma must lie in (0, 1)")
        if self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")
        if self.overshoot < 0:
            raise UsageError("overshoot must be >= 0")


@dataclass
class AttackOutcome:
    """Result of attacking one image.

    ``success`` implies the adversarial class differs from the original
    class, and additionally that its probability reached sigma when the
    spec set one. ``adv_image`` always lies in [0, 1].
    """

    adv_image: np.ndarray
    adv_class: int
    adv_probs: np.ndarray
    original_class: int
    success: bool
    iterations: int
    perturbation_l2: float
    perturbation_linf: float


def _outcome(x: np.ndarray, adv: np.ndarray, adv_probs: np.ndarray, original: int,
             success: bool, iterations: int) -> AttackOutcome:
    delta = adv - x
    return AttackOutcome(
        adv_image=adv,
        adv_class=int(np.argmax(adv_probs)),
        adv_probs=adv_probs,
        original_class=original,
        success=success,
        iterations=iterations,
        perturbation_l2=float(np.linalg.norm(delta)),
        perturbation_linf=float(np.max(np.abs(delta))) if delta.size else 0.0,
    )


def _fgsm(net: MicroNet, x: np.ndarray, spec: AttackSpec, target: int, direction: float) -> AttackOutcome:
    """Shared FGSM stepper.

    ``direction`` is +1 to ascend the loss of ``target`` (non-targeted
    escape from the original class) and -1 to descend it (targeted pull
    toward ``target``). With no sigma this is the classic single full-eps
    step; with sigma it iterates max_iters steps of eps/max_iters.
    """
    x = np.asarray(x, dtype=np.float64)
    original = predict(net, x)
    if spec.sigma is None:
        steps, step_size = 1, spec.epsilon
    else:
        steps, step_size = spec.max_iters, spec.epsilon / spec.max_iters

    cur = x
    probs = forward_probs(net, x)
    iterations = 0
    for _ in range(steps):
        _, grad = loss_and_input_grad(net, cur, target)
        cur = np.clip(cur + direction * step_size * np.sign(grad), 0.0, 1.0)
        iterations += 1
        probs = forward_probs(net, cur)
        cls = int(np.argmax(probs))
        if cls != original and (spec.sigma is None or probs[cls] >= spec.sigma):
            break
    cls = int(np.argmax(probs))
    success = cls != original and (spec.sigma is None or probs[cls] >= spec.sigma)
    return _outcome(x, cur, probs, original, success, iterations)


def attack_nfgsm(net: MicroNet, x: np.ndarray, spec: AttackSpec) -> AttackOutcome:
    """Step up the training-loss gradient of the original class."""
    if spec.variant != "nfgsm":
        raise UsageError(f"spec.variant is {spec.variant!r}, expected 'nfgsm'")
    original = predict(net, x)
    return _fgsm(net, x, spec, target=original, direction=+1.0)


def attack_lfgsm(net: MicroNet, x: np.ndarray, spec: AttackSpec) -> AttackOutcome:
    """Step down the loss gradient of the least likely original class."""
    if spec.variant != "lfgsm":
        raise UsageError(f"spec.variant is {spec.variant!r}, expected 'lfgsm'")
    target = least_likely_class(forward_probs(net, x))
    return _fgsm(net, x, spec, target=target, direction=-1.0)


def attack_rfgsm(net: MicroNet, x: np.ndarray, spec: AttackSpec) -> AttackOutcome:
    """Targeted step toward a uniformly sampled non-original class."""
    if spec.variant != "rfgsm":
        raise UsageError(f"spec.variant is {spec.variant!r}, expected 'rfgsm'")
    if net.n_classes < 2:
        raise UsageError("random-target attack needs at least 2 classes")
    original = predict(net, x)
    draw = int(np.random.default_rng(spec.seed).integers(0, net.n_classes - 1))
    target = draw if draw < original else draw + 1
    return _fgsm(net, x, spec, target=target, direction=-1.0)


def attack_deepfool(net: MicroNet, x: np.ndarray, spec: AttackSpec) -> AttackOutcome:
    """Iterate minimal projections onto the nearest linearized boundary.

    Each iteration linearizes the logits at the current image, picks the
    class l minimizing |f_l - f_orig| / ||w_l||_2 over gradient differences
    w_l, and steps |f_l - f_orig| / ||w_l||_2^2 * w_l. The accumulated
    perturbation is scaled by (1 + overshoot) and the image clipped to
    [0, 1] after every step.
    """
    if spec.variant != "deepfool":
        raise UsageError(f"spec.variant is {spec.variant!r}, expected 'deepfool'")
    x = np.asarray(x, dtype=np.float64)
    original = predict(net, x)
    scale = 1.0 + spec.overshoot
    r_total = np.zeros_like(x)
    cur = x
    probs = forward_probs(net, x)
    iterations = 0
    flipped = False
    for _ in range(spec.max_iters):
        logits, jac = logits_and_input_jacobian(net, cur)
        diffs = logits - logits[original]
        grads = jac - jac[original]
        norms = np.linalg.norm(grads, axis=1)

        best, best_ratio = -1, np.inf
        for k in range(net.n_classes):
            if k == original or norms[k] < _FLAT_NORM:
                continue
            ratio = abs(diffs[k]) / norms[k]
            if ratio < best_ratio:
                best, best_ratio = k, ratio
        if best < 0:
            break  # flat region in every direction: give up

        dist = abs(diffs[best]) / norms[best] ** 2
        if dist > 0.0:
            step = (1.0 + _CROSSING_NUDGE) * dist * grads[best]
        else:
            step = (_TIE_STEP / norms[best]) * grads[best]
        r_total += step
        cur = np.clip(x + scale * r_total, 0.0, 1.0)
        iterations += 1
        probs = forward_probs(net, cur)
        if int(np.argmax(probs)) != original:
            flipped = True
            break
    return _outcome(x, cur, probs, original, flipped, iterations)


_DISPATCH = {
    "nfgsm": attack_nfgsm,
    "lfgsm": attack_lfgsm,
    "rfgsm": attack_rfgsm,
    "deepfool": attack_deepfool,
}


def run_attack(net: MicroNet, x: np.ndarray, spec: AttackSpec) -> AttackOutcome:
    return _DISPATCH[spec.variant](net, x, spec)


def per_item_spec(spec: AttackSpec, index: int) -> AttackSpec:
    """Seed derivation rule for batches: item i runs with seed + i."""
    return replace(spec, seed=spec.seed + index)


def attack_batch(net: MicroNet, xs, spec: AttackSpec) -> list:
    """Attack each image independently, preserving order.

    Per-image failures are reported through the outcome flags; the batch
    never aborts. Equivalent to mapping the single-image attack with
    ``per_item_spec`` seeds.
    """
    return [run_attack(net, x, per_item_spec(spec, i)) for i, x in enumerate(xs)]
