"""Two-level decision fusion: majority vote per modality, AND across.

Each modality contributes a fixed number of per-sample votes (3 in the
reference configuration); the modality accepts when at least `majority_min`
votes accept (2 of 3). The final verdict is the AND of the two modality
verdicts, which can only shrink the set of false accepts.

Samples rejected by the quality gate arrive as reject votes, keeping the
vote count fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .images import Modality
from .matching import Decision


@dataclass(frozen=True)
class FusionPolicy:
    samples_per_modality: int = 3
    majority_min: int = 2

    def __post_init__(self):
        if self.samples_per_modality < 1:
            raise ValueError("samples_per_modality must be >= 1")
        if not 1 <= self.majority_min <= self.samples_per_modality:
            raise ValueError(
                f"majority_min must be in [1, {self.samples_per_modality}], "
                f"got {self.majority_min}"
            )


@dataclass(frozen=True)
class ModalityVerdict:
    modality: Modality
    votes: tuple[Decision, ...]
    accept: bool

    @property
    def accept_count(self) -> int:
        return sum(1 for vote in self.votes if vote.accept)


@dataclass(frozen=True)
class FusedDecision:
    face: ModalityVerdict
    ear: ModalityVerdict
    accept: bool


def majority(votes: Sequence[Decision], policy: FusionPolicy) -> ModalityVerdict:
    """Combine one modality's per-sample votes by the majority rule."""
    if len(votes) != policy.samples_per_modality:
        raise ValueError(
            f"expected {policy.samples_per_modality} votes, got {len(votes)}"
        )
    modality = votes[0].modality
    for vote in votes:
        if vote.modality is not modality:
            raise ValueError("mixed modalities within one vote list")
    accepts = sum(1 for vote in votes if vote.accept)
    return ModalityVerdict(
        modality=modality, votes=tuple(votes), accept=accepts >= policy.majority_min
    )


def and_fuse(face: ModalityVerdict, ear: ModalityVerdict) -> FusedDecision:
    """Final fusion of the two modality verdicts with the AND rule."""
    if face.modality is ear.modality:
        raise ValueError(f"duplicate modality: {face.modality.value}")
    if face.modality is not Modality.FACE or ear.modality is not Modality.EAR:
        raise ValueError("verdicts passed in the wrong order (expected face, ear)")
    return FusedDecision(face=face, ear=ear, accept=face.accept and ear.accept)


def fuse_attempt(
    face_votes: Sequence[Decision],
    ear_votes: Sequence[Decision],
    policy: FusionPolicy,
) -> FusedDecision:
    """Full two-level fusion of one authentication attempt."""
    return and_fuse(majority(face_votes, policy), majority(ear_votes, policy))
