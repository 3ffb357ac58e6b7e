"""Confidence-aware mapping from prediction confidence to cluster count k."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidConfidence, InvalidK


@dataclass(frozen=True)
class KPolicy:
    """One of the three k-selection families.

    linear:      k = ceil((conf/alpha + 2/K) * K - 1/2),  alpha >= K/(K-2)
    exponential: k = ceil((exp(beta*conf) - 1 + 2/K) * K - 1/2),
                 0 < beta <= ln(2 - 2/K)
    fixed:       k constant (ablation), 2 <= k <= K

    Outputs are clamped to [2, K] to guard ceiling boundaries.
    """

    variant: str
    n_classes: int
    alpha: float | None = None
    beta: float | None = None
    k: int | None = None

    def __post_init__(self):
        K = self.n_classes
        if K < 3:
            raise ValueError("need at least 3 classes")
        if self.variant == "linear":
            if self.alpha is None or self.alpha < K / (K - 2):
                raise ValueError(f"alpha must be >= K/(K-2) = {K / (K - 2)}")
        elif self.variant == "exponential":
            bound = math.log(2 - 2 / K)
            if self.beta is None or not 0 < self.beta <= bound:
                raise ValueError(f"beta must be in (0, ln(2-2/K) = {bound}]")
        elif self.variant == "fixed":
            if self.k is None or not 2 <= self.k <= K:
                raise InvalidK(f"fixed k must be in [2, {K}]")
        else:
            raise ValueError(f"unknown policy variant {self.variant!r}")

    @classmethod
    def linear(cls, alpha: float, n_classes: int) -> "KPolicy":
        return cls("linear", n_classes, alpha=alpha)

    @classmethod
    def exponential(cls, beta: float, n_classes: int) -> "KPolicy":
        return cls("exponential", n_classes, beta=beta)

    @classmethod
    def fixed(cls, k: int, n_classes: int) -> "KPolicy":
        return cls("fixed", n_classes, k=k)

    @classmethod
    def from_config(cls, cfg: dict, n_classes: int) -> "KPolicy":
        name = cfg.get("policy")
        if name == "linear":
            return cls.linear(float(cfg["alpha"]), n_classes)
        if name in ("exp", "exponential"):
            return cls.exponential(float(cfg["beta"]), n_classes)
        if name == "fixed":
            return cls.fixed(int(cfg["k"]), n_classes)
        raise ValueError(f"unknown policy {name!r}")


def select_k(policy: KPolicy, confidence: float) -> int:
    """Map a softmax max-probability to a cluster count in {2..K}."""
    if not 0.0 <= confidence <= 1.0:
        raise InvalidConfidence(f"confidence {confidence} outside [0, 1]")
    K = policy.n_classes
    if policy.variant == "fixed":
        return policy.k
    if policy.variant == "linear":
        raw = (confidence / policy.alpha + 2 / K) * K - 0.5
    else:
        raw = (math.exp(policy.beta * confidence) - 1 + 2 / K) * K - 0.5
    return int(min(max(math.ceil(raw), 2), K))
