"""End-to-end orchestration: split, train, enroll, score, sweep, fuse.

This module turns a dataset manifest into evaluation numbers. The flow is:

    split -> train (per modality) -> enroll train samples -> score probes
          -> threshold sweep per modality -> pick operating points
          -> fused verification at those operating points

Every stage is deterministic: subjects and files are processed in sorted
order, shuffled splits draw from a seeded generator, and the probe-scoring
fan-out reduces in submission order, so results never depend on the worker
count.

Protocol note. Unimodal rows support two recognition-rate readings:
verification (recognition = genuine accept rate) and identification
(recognition = accepted and rank-1 correct). FAR and FRR are identical
under both. The fused row is always verification: a fused attempt checks
one claim and has no rank-1 notion.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .eigenspace import (
    DEFAULT_VARIANCE_FRACTION,
    EigenModel,
    FeatureVector,
    project,
    train,
)
from .evaluation import (
    AttemptRecord,
    EvaluationReport,
    Protocol,
    best_threshold,
    default_thresholds,
    rates,
    sweep,
)
from .fusion import FusionPolicy, fuse_attempt
from .gallery import DatasetManifest, EnrollmentStore, enroll, load_subject_samples
from .images import ImageSample, Modality, load_image
from .matching import (
    Decision,
    DecisionPolicy,
    DecisionReason,
    MatchScore,
    quality_rejected,
)
from .quality import QualityPolicy, assess

MODALITIES = (Modality.FACE, Modality.EAR)


@dataclass(frozen=True)
class SplitSpec:
    """Per-subject, per-modality partition into train and probe captures."""

    train: int
    probe: int

    def __post_init__(self):
        if self.train < 1 or self.probe < 1:
            raise ValueError("split counts must be positive")

    @property
    def total(self) -> int:
        return self.train + self.probe


def parse_split(text: str) -> SplitSpec:
    """Parse a "train:probe" split such as "4:3"."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"malformed split {text!r}, expected TRAIN:PROBE")
    try:
        train_n, probe_n = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"malformed split {text!r}, expected TRAIN:PROBE") from None
    return SplitSpec(train_n, probe_n)


@dataclass
class SubjectSplit:
    subject_id: str
    train_paths: dict[Modality, tuple[Path, ...]]
    probe_paths: dict[Modality, tuple[Path, ...]]


def split_manifest(
    manifest: DatasetManifest,
    split: SplitSpec,
    seed: int | None = None,
) -> tuple[list[SubjectSplit], list[str]]:
    """Partition every subject's captures into train and probe sets.

    The default order is the scanner's sorted file order, so the first
    `split.train` files train and the rest probe. A seed shuffles each
    subject's files (per modality) with an isolated deterministic stream.
    Subjects missing a modality are skipped with a warning; a subject whose
    capture count differs from the split total is an error.
    """
    rng = np.random.default_rng(seed) if seed is not None else None
    splits: list[SubjectSplit] = []
    warnings: list[str] = []
    for entry in manifest.subjects:
        if entry.flagged:
            warnings.append(
                f"skipping subject {entry.subject_id!r}: missing samples for a modality"
            )
            continue
        train_paths: dict[Modality, tuple[Path, ...]] = {}
        probe_paths: dict[Modality, tuple[Path, ...]] = {}
        for modality in MODALITIES:
            paths = list(entry.paths(modality))
            if len(paths) != split.total:
                raise ValueError(
                    f"subject {entry.subject_id!r} has {len(paths)} "
                    f"{modality.value} samples but split "
                    f"{split.train}:{split.probe} needs {split.total}"
                )
            if rng is not None:
                order = rng.permutation(len(paths))
                paths = [paths[i] for i in order]
            train_paths[modality] = tuple(paths[: split.train])
            probe_paths[modality] = tuple(paths[split.train :])
        splits.append(SubjectSplit(entry.subject_id, train_paths, probe_paths))
    if not splits:
        raise ValueError("no subjects with both modalities to evaluate")
    return splits, warnings


@dataclass(frozen=True)
class TrainStats:
    modality: Modality
    sample_count: int
    k: int
    variance_fraction: float


def _training_samples(
    manifest: DatasetManifest,
    splits: Sequence[SubjectSplit] | None,
    modality: Modality,
) -> list[ImageSample]:
    width, height = manifest.size(modality)
    samples: list[ImageSample] = []
    if splits is None:
        # Whole-dataset training: every capture, flagged subjects included
        # for whichever modality they do have.
        for entry in manifest.subjects:
            for path in entry.paths(modality):
                samples.append(
                    load_image(path, width, height, modality, entry.subject_id)
                )
    else:
        for s in splits:
            for path in s.train_paths[modality]:
                samples.append(load_image(path, width, height, modality, s.subject_id))
    return samples


def train_models(
    manifest: DatasetManifest,
    splits: Sequence[SubjectSplit] | None = None,
    k: int | None = None,
    variance_fraction: float = DEFAULT_VARIANCE_FRACTION,
) -> tuple[EigenModel, EigenModel, list[TrainStats]]:
    """Train the face and ear models, on the training split when given or on
    the whole dataset otherwise. Returns (face_model, ear_model, stats)."""
    models: dict[Modality, EigenModel] = {}
    stats: list[TrainStats] = []
    for modality in MODALITIES:
        samples = _training_samples(manifest, splits, modality)
        if not samples:
            raise ValueError(f"no subjects with {modality.value} samples")
        model = train(samples, k=k, variance_fraction=variance_fraction)
        models[modality] = model

        # Captured-variance fraction: the basis keeps sum(eigenvalues) of the
        # total variance, which is the mean squared norm of centered images.
        matrix = np.stack([s.flatten() for s in samples], axis=1)
        centered = matrix - model.mean[:, None]
        total = float(np.sum(centered * centered)) / len(samples)
        fraction = float(np.sum(model.eigenvalues)) / total if total > 0.0 else 1.0
        stats.append(
            TrainStats(
                modality=modality,
                sample_count=len(samples),
                k=model.k,
                variance_fraction=fraction,
            )
        )
    return models[Modality.FACE], models[Modality.EAR], stats


def build_store(
    manifest: DatasetManifest,
    splits: Sequence[SubjectSplit],
    face_model: EigenModel,
    ear_model: EigenModel,
) -> EnrollmentStore:
    """Enroll every subject's training samples into a fresh store."""
    store = EnrollmentStore()
    models = {Modality.FACE: face_model, Modality.EAR: ear_model}
    for s in splits:
        for modality in MODALITIES:
            entry = manifest.subject(s.subject_id)
            samples = load_subject_samples(
                manifest, entry, modality, paths=s.train_paths[modality]
            )
            enroll(store, models[modality], samples, s.subject_id)
    return store


@dataclass(frozen=True)
class ProbeScore:
    """Scores of one probe sample against every enrolled subject.

    `distances` maps each claim subject to the minimum eigenspace distance
    over that subject's templates; every value is inf when the sample failed
    the quality gate. `nearest_subject` is the rank-1 subject (None when
    gated). `ncc` is None when the correlation was undefined (all-zero
    image), which also gates the sample.
    """

    subject_id: str
    modality: Modality
    index: int
    ncc: float | None
    quality_passed: bool
    distances: dict[str, float]
    nearest_subject: str | None


def _group_templates(
    store: EnrollmentStore, modality: Modality
) -> dict[str, list[FeatureVector]]:
    grouped: dict[str, list[FeatureVector]] = {}
    for t in store.templates(modality):
        if t.subject_id is None:
            raise ValueError("store holds a template without a subject_id")
        grouped.setdefault(t.subject_id, []).append(t)
    return {sid: grouped[sid] for sid in sorted(grouped)}


def _score_one(
    path: Path,
    subject_id: str,
    modality: Modality,
    index: int,
    model: EigenModel,
    grouped: dict[str, list[FeatureVector]],
    quality_policy: QualityPolicy,
    size: tuple[int, int],
) -> ProbeScore:
    width, height = size
    sample = load_image(path, width, height, modality, subject_id)
    try:
        score = assess(quality_policy, sample)
        ncc_value, passed = score.ncc, score.passed
    except ValueError:
        # Undefined correlation (all-zero image): gate the sample rather
        # than abort the whole evaluation.
        ncc_value, passed = None, False

    if not passed:
        distances = {sid: math.inf for sid in grouped}
        return ProbeScore(subject_id, modality, index, ncc_value, False, distances, None)

    probe = project(model, sample)
    distances = {}
    nearest_subject = None
    nearest = math.inf
    for sid, templates in grouped.items():
        d = min(float(np.linalg.norm(t.weights - probe.weights)) for t in templates)
        distances[sid] = d
        if d < nearest or (d == nearest and (nearest_subject is None or sid < nearest_subject)):
            nearest = d
            nearest_subject = sid
    return ProbeScore(
        subject_id, modality, index, ncc_value, True, distances, nearest_subject
    )


def score_probes(
    manifest: DatasetManifest,
    splits: Sequence[SubjectSplit],
    face_model: EigenModel,
    ear_model: EigenModel,
    store: EnrollmentStore,
    min_ncc: float = 0.0,
    workers: int = 1,
) -> dict[Modality, list[ProbeScore]]:
    """Score every probe sample against every enrolled subject.

    Fan-out runs on a thread pool; the reduction preserves submission order,
    so the result is identical for any worker count.
    """
    models = {Modality.FACE: face_model, Modality.EAR: ear_model}
    tasks = []
    for modality in MODALITIES:
        model = models[modality]
        grouped = _group_templates(store, modality)
        if not grouped:
            raise ValueError(f"store has no {modality.value} templates")
        policy = QualityPolicy(reference=model.mean_image(), min_ncc=min_ncc)
        size = manifest.size(modality)
        for s in splits:
            for index, path in enumerate(s.probe_paths[modality]):
                tasks.append(
                    (path, s.subject_id, modality, index, model, grouped, policy, size)
                )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda args: _score_one(*args), tasks))

    by_modality: dict[Modality, list[ProbeScore]] = {m: [] for m in MODALITIES}
    for score in results:
        by_modality[score.modality].append(score)
    return by_modality


@dataclass
class ModalityEvaluation:
    modality: Modality
    reports: list[EvaluationReport]
    best: EvaluationReport
    genuine_scores: list[float]
    genuine_rank1: list[bool]
    impostor_scores: list[float]


def evaluate_modality(
    scores: Sequence[ProbeScore],
    subjects: Sequence[str],
    protocol: Protocol,
) -> ModalityEvaluation:
    """Sweep thresholds over one modality's genuine/impostor scores and pick
    the recognition-maximizing operating point."""
    if not scores:
        raise ValueError("no probe scores")
    modality = scores[0].modality
    genuine_scores: list[float] = []
    genuine_rank1: list[bool] = []
    impostor_scores: list[float] = []
    for score in scores:
        if score.quality_passed and score.subject_id not in score.distances:
            raise ValueError(f"probe subject {score.subject_id!r} is not enrolled")
        genuine_scores.append(score.distances.get(score.subject_id, math.inf))
        genuine_rank1.append(score.nearest_subject == score.subject_id)
        for claimed in subjects:
            if claimed != score.subject_id:
                impostor_scores.append(score.distances[claimed])
    thresholds = default_thresholds(genuine_scores, impostor_scores)
    reports = sweep(
        genuine_scores,
        impostor_scores,
        thresholds,
        genuine_rank1=genuine_rank1,
        protocol=protocol,
        label=modality.value,
    )
    return ModalityEvaluation(
        modality=modality,
        reports=reports,
        best=best_threshold(reports),
        genuine_scores=genuine_scores,
        genuine_rank1=genuine_rank1,
        impostor_scores=impostor_scores,
    )


def _vote(score: ProbeScore, claimed: str, policy: DecisionPolicy) -> Decision:
    if not score.quality_passed:
        return quality_rejected(score.modality)
    distance = score.distances[claimed]
    accept = distance <= policy.threshold
    return Decision(
        accept=accept,
        reason=DecisionReason.UNDER_THRESHOLD if accept else DecisionReason.OVER_THRESHOLD,
        modality=score.modality,
        score=MatchScore(distance, claimed, score.modality),
    )


@dataclass
class FusedEvaluation:
    report: EvaluationReport
    # Attempt-level verdict counts over the same attempt set, for the
    # fused-vs-unimodal comparison.
    face_genuine_accepted: int
    face_impostor_accepted: int
    ear_genuine_accepted: int
    ear_impostor_accepted: int


def evaluate_fused(
    face_scores: Sequence[ProbeScore],
    ear_scores: Sequence[ProbeScore],
    subjects: Sequence[str],
    threshold_face: float,
    threshold_ear: float,
    fusion_policy: FusionPolicy,
) -> FusedEvaluation:
    """Run every (true subject, claimed subject) fused attempt.

    One attempt consumes the subject's first samples_per_modality probes of
    each modality: per-sample threshold votes, majority within a modality,
    AND across modalities. Quality-gated probes vote reject.
    """
    n = fusion_policy.samples_per_modality
    by_subject: dict[Modality, dict[str, list[ProbeScore]]] = {m: {} for m in MODALITIES}
    for scores, modality in ((face_scores, Modality.FACE), (ear_scores, Modality.EAR)):
        for score in scores:
            by_subject[modality].setdefault(score.subject_id, []).append(score)
        for sid, subject_scores in by_subject[modality].items():
            subject_scores.sort(key=lambda sc: sc.index)
            if len(subject_scores) < n:
                raise ValueError(
                    f"insufficient probes: subject {sid!r} has "
                    f"{len(subject_scores)} {modality.value} probes, fusion needs {n}"
                )

    face_policy = DecisionPolicy(threshold_face)
    ear_policy = DecisionPolicy(threshold_ear)
    attempts: list[AttemptRecord] = []
    counts = {
        (Modality.FACE, True): 0,
        (Modality.FACE, False): 0,
        (Modality.EAR, True): 0,
        (Modality.EAR, False): 0,
    }
    probed = sorted(set(by_subject[Modality.FACE]) & set(by_subject[Modality.EAR]))
    for true_subject in probed:
        face_probes = by_subject[Modality.FACE][true_subject][:n]
        ear_probes = by_subject[Modality.EAR][true_subject][:n]
        for claimed in subjects:
            face_votes = [_vote(sc, claimed, face_policy) for sc in face_probes]
            ear_votes = [_vote(sc, claimed, ear_policy) for sc in ear_probes]
            fused = fuse_attempt(face_votes, ear_votes, fusion_policy)
            genuine = true_subject == claimed
            counts[(Modality.FACE, genuine)] += int(fused.face.accept)
            counts[(Modality.EAR, genuine)] += int(fused.ear.accept)
            attempts.append(
                AttemptRecord(
                    true_subject=true_subject,
                    claimed_subject=claimed,
                    accepted=fused.accept,
                )
            )

    report = rates(
        attempts,
        protocol=Protocol.VERIFICATION,
        label="fused",
        threshold_face=threshold_face,
        threshold_ear=threshold_ear,
    )
    return FusedEvaluation(
        report=report,
        face_genuine_accepted=counts[(Modality.FACE, True)],
        face_impostor_accepted=counts[(Modality.FACE, False)],
        ear_genuine_accepted=counts[(Modality.EAR, True)],
        ear_impostor_accepted=counts[(Modality.EAR, False)],
    )


@dataclass
class EvaluationOutcome:
    subjects: list[str]
    face: ModalityEvaluation
    ear: ModalityEvaluation
    fused: FusedEvaluation
    protocol: Protocol
    split: SplitSpec
    seed: int | None
    min_ncc: float
    fusion_policy: FusionPolicy
    warnings: list[str] = field(default_factory=list)


def run_evaluation(
    manifest: DatasetManifest,
    split: SplitSpec,
    face_model: EigenModel,
    ear_model: EigenModel,
    store: EnrollmentStore | None = None,
    seed: int | None = None,
    min_ncc: float = 0.0,
    fusion_policy: FusionPolicy | None = None,
    protocol: Protocol = Protocol.IDENTIFICATION,
    workers: int = 1,
) -> EvaluationOutcome:
    """The full evaluation pipeline against trained models.

    When no store is given, the training split is enrolled in memory. The
    probe portion is scored against every enrolled subject (full genuine +
    impostor cross-product), each modality is swept for its best threshold,
    and fusion runs at those operating points.
    """
    fusion_policy = fusion_policy or FusionPolicy()
    splits, warnings = split_manifest(manifest, split, seed=seed)
    warnings = list(manifest.warnings) + warnings
    if store is None:
        store = build_store(manifest, splits, face_model, ear_model)
    subjects = store.subjects()

    scores = score_probes(
        manifest, splits, face_model, ear_model, store, min_ncc=min_ncc, workers=workers
    )
    face_eval = evaluate_modality(scores[Modality.FACE], subjects, protocol)
    ear_eval = evaluate_modality(scores[Modality.EAR], subjects, protocol)
    fused = evaluate_fused(
        scores[Modality.FACE],
        scores[Modality.EAR],
        subjects,
        face_eval.best.threshold,
        ear_eval.best.threshold,
        fusion_policy,
    )
    return EvaluationOutcome(
        subjects=subjects,
        face=face_eval,
        ear=ear_eval,
        fused=fused,
        protocol=protocol,
        split=split,
        seed=seed,
        min_ncc=min_ncc,
        fusion_policy=fusion_policy,
        warnings=warnings,
    )


def outcome_to_dict(outcome: EvaluationOutcome) -> dict:
    """JSON-ready report. Field values are plain Python scalars; floats
    round-trip exactly through JSON, and nothing here depends on time or
    worker count, so reruns serialize byte-identically."""
    fused = outcome.fused
    return {
        "format_version": 1,
        "protocol": outcome.protocol.value,
        "split": {
            "train": outcome.split.train,
            "probe": outcome.split.probe,
            "seed": outcome.seed,
        },
        "quality": {"min_ncc": outcome.min_ncc},
        "fusion": {
            "samples_per_modality": outcome.fusion_policy.samples_per_modality,
            "majority_min": outcome.fusion_policy.majority_min,
        },
        "subjects": outcome.subjects,
        "warnings": outcome.warnings,
        "face": outcome.face.best.to_dict(),
        "ear": outcome.ear.best.to_dict(),
        "fused": {
            **fused.report.to_dict(),
            "attempt_level": {
                "face_genuine_accepted": fused.face_genuine_accepted,
                "face_impostor_accepted": fused.face_impostor_accepted,
                "ear_genuine_accepted": fused.ear_genuine_accepted,
                "ear_impostor_accepted": fused.ear_impostor_accepted,
            },
        },
    }
