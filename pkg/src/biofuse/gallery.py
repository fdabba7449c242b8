"""Dataset ingestion and the enrollment store.

Datasets are directory trees, one directory per subject with `face/` and
`ear/` subdirectories holding PGM or PNG captures:

    root/
      subject-a/
        face/01.pgm 02.pgm ...
        ear/01.pgm ...

Scanning is fully deterministic: subjects and files are sorted
lexicographically. Subjects missing a modality are kept but flagged, with a
warning recorded in the manifest.

The enrollment store maps each modality to the feature vectors of enrolled
samples plus the content hash of the model that produced them; loading a
store against a different model is refused, so stale templates never
survive a model retrain.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .eigenspace import EigenModel, FeatureVector, project
from .images import ImageSample, Modality, load_image

STORE_FORMAT_VERSION = 1

# Capture resolutions the directory convention defaults to, as (width, height).
DEFAULT_FACE_SIZE = (150, 200)
DEFAULT_EAR_SIZE = (100, 150)

IMAGE_SUFFIXES = (".pgm", ".png")


@dataclass(frozen=True)
class SubjectEntry:
    subject_id: str
    face_paths: tuple[Path, ...]
    ear_paths: tuple[Path, ...]
    flagged: bool

    def paths(self, modality: Modality) -> tuple[Path, ...]:
        return self.face_paths if modality is Modality.FACE else self.ear_paths


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    subjects: tuple[SubjectEntry, ...]
    face_size: tuple[int, int]
    ear_size: tuple[int, int]
    warnings: tuple[str, ...]

    def size(self, modality: Modality) -> tuple[int, int]:
        return self.face_size if modality is Modality.FACE else self.ear_size

    def subject(self, subject_id: str) -> SubjectEntry:
        for entry in self.subjects:
            if entry.subject_id == subject_id:
                return entry
        raise ValueError(f"unknown subject: {subject_id!r}")


def _image_files(directory: Path) -> tuple[Path, ...]:
    if not directory.is_dir():
        return ()
    return tuple(
        sorted(
            p for p in directory.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
    )


def scan_dataset(
    root: str | Path,
    face_size: tuple[int, int] = DEFAULT_FACE_SIZE,
    ear_size: tuple[int, int] = DEFAULT_EAR_SIZE,
) -> DatasetManifest:
    """Walk a dataset tree into a manifest. Two scans of the same tree are
    identical, order included."""
    root_path = Path(root)
    if not root_path.is_dir():
        raise FileNotFoundError(f"dataset root does not exist: {root_path}")

    subjects = []
    warnings = []
    for subject_dir in sorted(p for p in root_path.iterdir() if p.is_dir()):
        subject_id = subject_dir.name
        face_paths = _image_files(subject_dir / Modality.FACE.value)
        ear_paths = _image_files(subject_dir / Modality.EAR.value)
        flagged = False
        for modality, paths in ((Modality.FACE, face_paths), (Modality.EAR, ear_paths)):
            if not paths:
                warnings.append(f"subject {subject_id!r} has no {modality.value} samples")
                flagged = True
        subjects.append(
            SubjectEntry(
                subject_id=subject_id,
                face_paths=face_paths,
                ear_paths=ear_paths,
                flagged=flagged,
            )
        )
    return DatasetManifest(
        root=root_path,
        subjects=tuple(subjects),
        face_size=face_size,
        ear_size=ear_size,
        warnings=tuple(warnings),
    )


def load_subject_samples(
    manifest: DatasetManifest,
    entry: SubjectEntry,
    modality: Modality,
    paths: Iterable[Path] | None = None,
) -> list[ImageSample]:
    """Load (and resize) a subject's captures for one modality."""
    width, height = manifest.size(modality)
    chosen = entry.paths(modality) if paths is None else tuple(paths)
    return [
        load_image(p, width, height, modality, subject_id=entry.subject_id)
        for p in chosen
    ]


@dataclass
class ModalityTemplates:
    model_hash: str
    templates: list[FeatureVector] = field(default_factory=list)


@dataclass
class EnrollmentStore:
    """Per-modality template collections; single-writer, read-mostly."""

    blocks: dict[Modality, ModalityTemplates] = field(default_factory=dict)
    created_utc: str = ""

    def templates(self, modality: Modality) -> list[FeatureVector]:
        block = self.blocks.get(modality)
        return [] if block is None else list(block.templates)

    def subjects(self) -> list[str]:
        ids = {
            t.subject_id
            for block in self.blocks.values()
            for t in block.templates
            if t.subject_id is not None
        }
        return sorted(ids)


def enroll(
    store: EnrollmentStore,
    model: EigenModel,
    samples: Sequence[ImageSample],
    subject_id: str,
) -> EnrollmentStore:
    """Project samples through the model and append them as templates.

    The store records the model's content hash on first use of a modality;
    enrolling through a different model afterwards is an error.
    """
    model_hash = model.content_hash()
    block = store.blocks.get(model.modality)
    if block is None:
        block = ModalityTemplates(model_hash=model_hash)
        store.blocks[model.modality] = block
    elif block.model_hash != model_hash:
        raise ValueError(
            f"store already holds {model.modality.value} templates from a different model"
        )
    for sample in samples:
        fv = project(model, sample)
        block.templates.append(
            FeatureVector(fv.weights, fv.modality, subject_id)
        )
    return store


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def save_store(store: EnrollmentStore, path: str | Path) -> None:
    """Write the store as versioned JSON with full double precision."""
    payload = {
        "format_version": STORE_FORMAT_VERSION,
        "created_utc": store.created_utc or _utc_now(),
        "modalities": {
            modality.value: {
                "model_hash": block.model_hash,
                "templates": [
                    {"subject_id": t.subject_id, "weights": t.weights.tolist()}
                    for t in block.templates
                ],
            }
            for modality, block in sorted(store.blocks.items(), key=lambda kv: kv[0].value)
        },
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_store(
    path: str | Path,
    face_model: EigenModel | None = None,
    ear_model: EigenModel | None = None,
) -> EnrollmentStore:
    """Load a store, verifying template integrity against the given models.

    For every modality with a model supplied, the stored model hash must
    match the model in hand and every template length must match its k;
    stale stores are rejected outright.
    """
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != STORE_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported store format_version {version!r}")

    models = {Modality.FACE: face_model, Modality.EAR: ear_model}
    store = EnrollmentStore(created_utc=payload.get("created_utc", ""))
    for name, block in payload.get("modalities", {}).items():
        modality = Modality(name)
        templates = [
            FeatureVector(
                np.asarray(t["weights"], dtype=np.float64),
                modality,
                t["subject_id"],
            )
            for t in block["templates"]
        ]
        model = models.get(modality)
        if model is not None:
            if block["model_hash"] != model.content_hash():
                raise ValueError(
                    f"{path}: stale store, {modality.value} templates were enrolled "
                    "with a different model"
                )
            for t in templates:
                if len(t) != model.k:
                    raise ValueError(
                        f"{path}: template length {len(t)} does not match model k={model.k}"
                    )
        store.blocks[modality] = ModalityTemplates(
            model_hash=block["model_hash"], templates=templates
        )
    return store
