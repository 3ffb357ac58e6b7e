"""Probability vectors, selection indicators and selected soft labels.

Class indices are 0-based throughout. All values are immutable; every
operation returns a fresh object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidCandidateSet, ZeroMass

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ProbVector:
    """A length-K distribution over classes (post-softmax output)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("need a 1-D vector over K >= 2 classes")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")

    @property
    def n_classes(self) -> int:
        return self.probs.size

    def argmax(self) -> int:
        # np.argmax returns the first maximum: ties break to the lowest index.
        return int(np.argmax(self.probs))

    def confidence(self) -> float:
        return float(self.probs.max())


@dataclass(frozen=True)
class CandidateSet:
    """A non-empty subset of the class space, the support of a soft label."""

    classes: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "classes", frozenset(int(c) for c in self.classes))
        if not self.classes:
            raise InvalidCandidateSet("candidate set is empty")
        if any(c < 0 for c in self.classes):
            raise InvalidCandidateSet("negative class index")

    def __contains__(self, c: int) -> bool:
        return int(c) in self.classes

    def __len__(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class SelectionIndicator:
    """Binary mask over the K classes; at least one entry set."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=np.int8)
        object.__setattr__(self, "mask", m)
        if m.ndim != 1 or not np.all((m == 0) | (m == 1)):
            raise ValueError("mask must be a binary vector")
        if m.sum() == 0:
            raise InvalidCandidateSet("indicator selects no class")

    @property
    def n_classes(self) -> int:
        return self.mask.size

    def selected(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.mask)]


@dataclass(frozen=True)
class SelectedLabel:
    """A selection indicator together with the renormalized soft label."""

    indicator: SelectionIndicator
    probs: ProbVector

    def __post_init__(self):
        if np.any((self.indicator.mask == 0) & (self.probs.probs > 0)):
            raise ValueError("soft label has mass outside its indicator")


def build_indicator(candidates: CandidateSet, n_classes: int) -> SelectionIndicator:
    """Turn a candidate class set into a binary selection mask."""
    if any(c >= n_classes for c in candidates.classes):
        raise InvalidCandidateSet("class index out of range")
    mask = np.zeros(n_classes, dtype=np.int8)
    mask[sorted(candidates.classes)] = 1
    return SelectionIndicator(mask)


def select_label(p: ProbVector, g: SelectionIndicator) -> SelectedLabel:
    """Restrict p to the selected classes and renormalize.

    Raises ZeroMass when the selected entries carry no probability; in the
    pipeline this cannot happen because the candidate set always contains
    the argmax class.
    """
    if g.n_classes != p.n_classes:
        raise ValueError("indicator and probability vector disagree on K")
    masked = np.where(g.mask == 1, p.probs, 0.0)
    total = float(masked.sum())
    if total <= 0.0:
        raise ZeroMass("selected classes have zero total probability")
    return SelectedLabel(g, ProbVector(masked / total))


def entropy(p: ProbVector | np.ndarray) -> float:
    """Shannon entropy in nats, with 0 * ln 0 = 0."""
    v = p.probs if isinstance(p, ProbVector) else np.asarray(p, dtype=float)
    nz = v[v > 0]
    return float(-np.sum(nz * np.log(nz)))


def obj1_score(p: ProbVector, g: SelectionIndicator, y_star: int) -> float:
    """Ground-truth mass retained by the selection (simulator-only metric)."""
    if not 0 <= y_star < p.n_classes:
        raise ValueError("ground-truth class out of range")
    return float(p.probs[y_star]) if g.mask[y_star] == 1 else 0.0


def obj2_score(g: SelectionIndicator) -> int:
    """Number of selected classes."""
    return int(g.mask.sum())
