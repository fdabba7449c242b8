"""Distance scoring of probe features against enrolled templates.

Matching is nearest-neighbor under the Euclidean metric in weight space;
the lowest distance indicates the best match. Per-sample accept/reject
decisions compare that distance against a per-modality threshold, with an
inclusive comparison so a distance-0 self-match is accepted at threshold 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .eigenspace import FeatureVector
from .images import Modality


class DecisionReason(Enum):
    UNDER_THRESHOLD = "under_threshold"
    OVER_THRESHOLD = "over_threshold"
    QUALITY_REJECTED = "quality_rejected"


@dataclass(frozen=True)
class MatchScore:
    distance: float
    matched_subject: str
    probe_modality: Modality


@dataclass(frozen=True)
class DecisionPolicy:
    """Distance bound for one modality; accept iff distance <= threshold."""

    threshold: float

    def __post_init__(self):
        if self.threshold < 0.0 or math.isnan(self.threshold):
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")


@dataclass(frozen=True)
class Decision:
    """Per-sample accept/reject. `score` is None for quality-rejected samples."""

    accept: bool
    reason: DecisionReason
    modality: Modality
    score: MatchScore | None = None

    def __post_init__(self):
        if self.accept and self.reason is not DecisionReason.UNDER_THRESHOLD:
            raise ValueError("an accepting decision must be under threshold")


def quality_rejected(modality: Modality) -> Decision:
    """Reject vote for a sample that failed the quality gate."""
    return Decision(accept=False, reason=DecisionReason.QUALITY_REJECTED, modality=modality)


def euclidean(a: FeatureVector, b: FeatureVector) -> float:
    """Euclidean distance between two feature vectors of equal length."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.modality is not b.modality:
        raise ValueError(
            f"modality mismatch: {a.modality.value} vs {b.modality.value}"
        )
    return float(np.linalg.norm(a.weights - b.weights))


def _decision(distance: float, subject: str, modality: Modality, policy: DecisionPolicy) -> Decision:
    accept = distance <= policy.threshold
    return Decision(
        accept=accept,
        reason=DecisionReason.UNDER_THRESHOLD if accept else DecisionReason.OVER_THRESHOLD,
        modality=modality,
        score=MatchScore(distance=distance, matched_subject=subject, probe_modality=modality),
    )


def identify(
    gallery: Sequence[FeatureVector], probe: FeatureVector, policy: DecisionPolicy
) -> Decision:
    """Best-match search over all templates.

    The nearest template wins; at an exact distance tie the lexicographically
    smallest subject label is chosen, so results are deterministic.
    """
    if not gallery:
        raise ValueError("empty gallery")
    best_subject: str | None = None
    best_distance = math.inf
    for template in gallery:
        if template.subject_id is None:
            raise ValueError("identify requires every template to carry a subject_id")
        d = euclidean(template, probe)
        if d < best_distance or (d == best_distance and template.subject_id < best_subject):
            best_distance = d
            best_subject = template.subject_id
    return _decision(best_distance, best_subject, probe.modality, policy)


def verify(
    claimed: str,
    gallery: Sequence[FeatureVector],
    probe: FeatureVector,
    policy: DecisionPolicy,
) -> Decision:
    """Claim check: minimum distance over the claimed subject's templates."""
    distances = [
        euclidean(template, probe)
        for template in gallery
        if template.subject_id == claimed
    ]
    if not distances:
        raise ValueError(f"unknown subject: {claimed!r}")
    return _decision(min(distances), claimed, probe.modality, policy)
