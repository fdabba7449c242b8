"""Recognition-rate / FAR / FRR accounting and threshold sweeps.

An attempt is one probe scored against one claimed subject; it is genuine
when the claim matches the probe's true subject and an impostor attempt
otherwise. Rates follow the usual definitions:

    FAR = impostor attempts accepted / impostor attempts
    FRR = 1 - genuine attempts accepted / genuine attempts

Recognition rate depends on the protocol: under verification it is simply
the genuine accept rate; under identification a genuine attempt also has to
be matched to the correct subject at rank 1. Reports carry the protocol
label so the two are never conflated.

Sweeps use accept-iff-(score <= threshold) semantics, so FAR is
non-decreasing and FRR non-increasing in the threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict
from enum import Enum
from pathlib import Path
from typing import Sequence


class Protocol(str, Enum):
    VERIFICATION = "verification"
    IDENTIFICATION = "identification"


@dataclass(frozen=True)
class AttemptRecord:
    """One scored claim. `matched_subject` is the rank-1 match when known."""

    true_subject: str
    claimed_subject: str
    accepted: bool
    matched_subject: str | None = None

    @property
    def is_genuine(self) -> bool:
        return self.true_subject == self.claimed_subject


@dataclass(frozen=True)
class EvaluationReport:
    recognition_rate: float
    far: float
    frr: float
    genuine_total: int
    genuine_accepted: int
    impostor_total: int
    impostor_accepted: int
    protocol: Protocol
    label: str = ""
    threshold: float | None = None
    threshold_face: float | None = None
    threshold_ear: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protocol"] = self.protocol.value
        return {key: value for key, value in d.items() if value is not None}


def rates(
    attempts: Sequence[AttemptRecord],
    protocol: Protocol = Protocol.VERIFICATION,
    label: str = "",
    threshold: float | None = None,
    threshold_face: float | None = None,
    threshold_ear: float | None = None,
) -> EvaluationReport:
    """Aggregate attempt decisions into a report.

    Raises:
        ValueError: if `attempts` is empty.
    """
    if not attempts:
        raise ValueError("empty attempts")
    genuine = [a for a in attempts if a.is_genuine]
    impostor = [a for a in attempts if not a.is_genuine]
    genuine_accepted = sum(1 for a in genuine if a.accepted)
    impostor_accepted = sum(1 for a in impostor if a.accepted)

    far = impostor_accepted / len(impostor) if impostor else 0.0
    frr = 1.0 - genuine_accepted / len(genuine) if genuine else 0.0
    if not genuine:
        recognition = 0.0
    elif protocol is Protocol.IDENTIFICATION:
        correct = sum(
            1 for a in genuine if a.accepted and a.matched_subject == a.true_subject
        )
        recognition = correct / len(genuine)
    else:
        recognition = genuine_accepted / len(genuine)

    return EvaluationReport(
        recognition_rate=recognition,
        far=far,
        frr=frr,
        genuine_total=len(genuine),
        genuine_accepted=genuine_accepted,
        impostor_total=len(impostor),
        impostor_accepted=impostor_accepted,
        protocol=protocol,
        label=label,
        threshold=threshold,
        threshold_face=threshold_face,
        threshold_ear=threshold_ear,
    )


def sweep(
    genuine_scores: Sequence[float],
    impostor_scores: Sequence[float],
    thresholds: Sequence[float],
    genuine_rank1: Sequence[bool] | None = None,
    protocol: Protocol = Protocol.VERIFICATION,
    label: str = "",
) -> list[EvaluationReport]:
    """One report per threshold, accepting scores <= threshold.

    `genuine_rank1` marks, per genuine score, whether the probe's rank-1
    match was the true subject; it is required for the identification
    protocol and ignored otherwise. Scores may be `inf` (quality-rejected
    samples), which no finite threshold accepts.
    """
    if not genuine_scores or not impostor_scores:
        raise ValueError("empty score lists")
    if not thresholds:
        raise ValueError("empty threshold list")
    for left, right in zip(thresholds, thresholds[1:]):
        if left > right:
            raise ValueError("thresholds must be sorted ascending")
    if protocol is Protocol.IDENTIFICATION:
        if genuine_rank1 is None or len(genuine_rank1) != len(genuine_scores):
            raise ValueError(
                "identification protocol requires one rank-1 flag per genuine score"
            )

    reports = []
    for t in thresholds:
        genuine_accepted = sum(1 for s in genuine_scores if s <= t)
        impostor_accepted = sum(1 for s in impostor_scores if s <= t)
        if protocol is Protocol.IDENTIFICATION:
            correct = sum(
                1
                for s, ok in zip(genuine_scores, genuine_rank1)
                if s <= t and ok
            )
            recognition = correct / len(genuine_scores)
        else:
            recognition = genuine_accepted / len(genuine_scores)
        reports.append(
            EvaluationReport(
                recognition_rate=recognition,
                far=impostor_accepted / len(impostor_scores),
                frr=1.0 - genuine_accepted / len(genuine_scores),
                genuine_total=len(genuine_scores),
                genuine_accepted=genuine_accepted,
                impostor_total=len(impostor_scores),
                impostor_accepted=impostor_accepted,
                protocol=protocol,
                label=label,
                threshold=float(t),
            )
        )
    return reports


def best_threshold(reports: Sequence[EvaluationReport]) -> EvaluationReport:
    """The sweep report with maximal recognition rate; ties go to the
    smallest threshold."""
    if not reports:
        raise ValueError("empty report list")
    ordered = sorted(reports, key=lambda r: (math.inf if r.threshold is None else r.threshold))
    best = ordered[0]
    for report in ordered[1:]:
        if report.recognition_rate > best.recognition_rate:
            best = report
    return best


def default_thresholds(
    genuine_scores: Sequence[float], impostor_scores: Sequence[float]
) -> list[float]:
    """Deterministic sweep grid: every distinct finite observed score.

    The accept rule is score <= threshold, so rates only change at observed
    score values; a leading sub-minimum point anchors the all-reject end.
    """
    finite = sorted(
        {float(s) for s in list(genuine_scores) + list(impostor_scores) if math.isfinite(s)}
    )
    if not finite:
        raise ValueError("no finite scores to sweep")
    anchor = finite[0] - 1.0 if finite[0] <= 0.0 else 0.0
    return [anchor] + finite


def write_sweep_csv(reports: Sequence[EvaluationReport], path: str | Path) -> None:
    """Curve export with columns threshold,far,frr,recognition_rate."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "far", "frr", "recognition_rate"])
        for report in reports:
            writer.writerow(
                [
                    repr(float(report.threshold)),
                    repr(report.far),
                    repr(report.frr),
                    repr(report.recognition_rate),
                ]
            )
