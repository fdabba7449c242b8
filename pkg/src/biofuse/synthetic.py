"""Synthetic dataset generation for demos and end-to-end checks.

Each subject gets a random textured base image per modality; every capture
is the base plus small Gaussian noise, quantized to 8-bit PGM. Subjects are
far apart and captures of one subject are close together, so a correctly
wired pipeline must identify every probe. The generator verifies that
property on the quantized pixels before returning: the smallest
between-subject distance must be at least ten times the largest
within-subject distance, per modality.
"""

from __future__ import annotations

from itertools import combinations
from pathlib import Path

import numpy as np

from .gallery import DEFAULT_EAR_SIZE, DEFAULT_FACE_SIZE
from .images import Modality, write_pgm

SEPARATION_FACTOR = 10.0


def _quantize(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def _check_separation(per_subject: list[list[np.ndarray]], modality: Modality) -> float:
    """Return min(inter) / max(intra) over quantized images, enforcing the
    separation contract."""
    decoded = [
        [img.astype(np.float64) / 255.0 for img in imgs] for imgs in per_subject
    ]
    max_intra = 0.0
    for imgs in decoded:
        for a, b in combinations(imgs, 2):
            max_intra = max(max_intra, float(np.linalg.norm(a - b)))
    min_inter = np.inf
    for (ia, imgs_a), (ib, imgs_b) in combinations(enumerate(decoded), 2):
        for a in imgs_a:
            for b in imgs_b:
                min_inter = min(min_inter, float(np.linalg.norm(a - b)))
    if max_intra <= 0.0 or min_inter < SEPARATION_FACTOR * max_intra:
        raise ValueError(
            f"{modality.value}: separation {min_inter:.3f} < "
            f"{SEPARATION_FACTOR:g} x intra spread {max_intra:.3f}; "
            "lower the noise or enlarge the images"
        )
    return min_inter / max_intra


def generate_dataset(
    root: str | Path,
    subjects: int = 5,
    train_per_subject: int = 4,
    probe_per_subject: int = 3,
    face_size: tuple[int, int] = DEFAULT_FACE_SIZE,
    ear_size: tuple[int, int] = DEFAULT_EAR_SIZE,
    noise: float = 0.01,
    seed: int = 0,
) -> Path:
    """Write a synthetic dataset tree under root and return its path.

    Layout matches the scanner's convention: root/<subject>/<modality>/NN.pgm,
    with train_per_subject + probe_per_subject captures per modality. File
    order is capture order, so an unshuffled "train:probe" split puts the
    first captures in the gallery.
    """
    if subjects < 2:
        raise ValueError("need at least two subjects")
    per_subject = train_per_subject + probe_per_subject
    if per_subject < 2:
        raise ValueError("need at least two captures per subject")
    if not 0.0 < noise < 0.1:
        raise ValueError("noise must be in (0, 0.1)")

    root_path = Path(root)
    rng = np.random.default_rng(seed)
    sizes = {Modality.FACE: face_size, Modality.EAR: ear_size}

    for modality in (Modality.FACE, Modality.EAR):
        width, height = sizes[modality]
        quantized: list[list[np.ndarray]] = []
        for s in range(subjects):
            # Bases are i.i.d. uniform away from the clip boundaries, which
            # keeps the additive noise visible after quantization.
            base = rng.uniform(0.15, 0.85, size=(height, width))
            captures = []
            for i in range(per_subject):
                pixels = base + rng.normal(0.0, noise, size=base.shape)
                captures.append(_quantize(pixels))
            quantized.append(captures)

            subject_dir = root_path / f"s{s + 1:02d}" / modality.value
            subject_dir.mkdir(parents=True, exist_ok=True)
            for i, img in enumerate(captures):
                write_pgm(subject_dir / f"{i + 1:02d}.pgm", img)
        _check_separation(quantized, modality)

    return root_path
