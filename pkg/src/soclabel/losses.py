"""Cross-entropy losses for the training harness, with analytic gradients.

All losses consume raw logits for the model branch and apply a
log-sum-exp stabilized softmax internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatch, ShapeMismatch


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(target: np.ndarray, logits: np.ndarray) -> float:
    """-sum(target * log softmax(logits)); target is a distribution."""
    target = np.asarray(target, dtype=float)
    logits = np.asarray(logits, dtype=float)
    if target.shape != logits.shape:
        raise ShapeMismatch("target and logits shapes differ")
    return float(-np.sum(target * log_softmax(logits), axis=-1).mean())


def cross_entropy_grad(target: np.ndarray, logits: np.ndarray) -> np.ndarray:
    """Gradient of cross_entropy w.r.t. logits: softmax(logits) - target."""
    return softmax(logits) - np.asarray(target, dtype=float)


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def supervised_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of one-hot labels vs weak-branch logits."""
    logits = np.atleast_2d(np.asarray(logits, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    if logits.shape[0] == 0:
        raise EmptyBatch("supervised batch is empty")
    if logits.shape[0] != labels.shape[0]:
        raise ShapeMismatch("labels and logits batch sizes differ")
    return cross_entropy(one_hot(labels, logits.shape[1]), logits)


def consistency_loss(targets: np.ndarray, strong_logits: np.ndarray) -> float:
    """Mean cross-entropy of selected soft labels vs strong-branch logits.

    No confidence masking: every unlabeled sample contributes.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    strong_logits = np.atleast_2d(np.asarray(strong_logits, dtype=float))
    if targets.shape != strong_logits.shape:
        raise ShapeMismatch("targets and strong logits shapes differ")
    if targets.shape[0] == 0:
        raise EmptyBatch("consistency batch is empty")
    return cross_entropy(targets, strong_logits)


def baseline_fixmatch_loss(
    probs_weak: np.ndarray, strong_logits: np.ndarray, tau: float
) -> float:
    """FixMatch-style hard-pseudo-label consistency with a threshold.

    Samples with max(p) < tau contribute zero; the mean is over the full
    batch either way.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    probs_weak = np.atleast_2d(np.asarray(probs_weak, dtype=float))
    strong_logits = np.atleast_2d(np.asarray(strong_logits, dtype=float))
    if probs_weak.shape != strong_logits.shape:
        raise ShapeMismatch("probs and strong logits shapes differ")
    keep = probs_weak.max(axis=1) >= tau
    hard = one_hot(probs_weak.argmax(axis=1), probs_weak.shape[1])
    per_sample = -np.sum(hard * log_softmax(strong_logits), axis=1)
    return float((per_sample * keep).mean())


def total_loss(sup: float, cos: float, lambda_cos: float) -> float:
    return sup + lambda_cos * cos


@dataclass(frozen=True)
class LossReport:
    sup: float
    cos: float
    total: float
    lambda_cos: float
    per_sample_cos: tuple = ()

    def __post_init__(self):
        parts = (self.sup, self.cos, self.total)
        if not all(np.isfinite(parts)):
            raise ValueError("loss components must be finite")
        if abs(self.total - (self.sup + self.lambda_cos * self.cos)) > 1e-9:
            raise ValueError("total does not match sup + lambda_cos * cos")
