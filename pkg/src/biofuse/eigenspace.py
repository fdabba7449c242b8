"""Eigenspace feature extraction for image galleries.

Trains a per-modality subspace model (mean image, orthonormal basis of
covariance eigenvectors, eigenvalues) and projects samples into it. The
covariance uses the population 1/M normalization. When the gallery is
smaller than the pixel count the eigenvectors are computed from the M x M
Gram matrix and mapped back through the centered data matrix, which is the
standard small-gallery device; otherwise the pixel-space covariance is
decomposed directly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .images import ImageSample, Modality

MODEL_FORMAT_VERSION = 1

# Eigenvalues below this fraction of the leading one are numerical noise.
RANK_FLOOR = 1e-12

# Default cumulative-variance fraction used to pick k when none is requested.
DEFAULT_VARIANCE_FRACTION = 0.95


@dataclass(frozen=True)
class EigenModel:
    """Trained subspace for one modality; immutable after construction."""

    modality: Modality
    image_width: int
    image_height: int
    mean: np.ndarray        # (width*height,)
    basis: np.ndarray       # (width*height, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,), nonnegative, non-increasing

    @property
    def k(self) -> int:
        return int(self.basis.shape[1])

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def mean_image(self) -> ImageSample:
        """The training-set mean as an image sample (quality reference)."""
        pixels = self.mean.reshape(self.image_height, self.image_width)
        return ImageSample(pixels, self.modality)

    def payload(self) -> dict:
        """JSON-serializable content; `basis` is stored column-major."""
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "modality": self.modality.value,
            "width": self.image_width,
            "height": self.image_height,
            "k": self.k,
            "mean": self.mean.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "basis": self.basis.T.tolist(),
        }

    def content_hash(self) -> str:
        """Stable digest of the model content, used for store integrity checks."""
        canonical = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class FeatureVector:
    """Projection coefficients of one sample in an EigenModel's subspace."""

    weights: np.ndarray
    modality: Modality
    subject_id: str | None = None

    def __len__(self) -> int:
        return int(self.weights.shape[0])


def _check_gallery(gallery: Sequence[ImageSample]) -> tuple[Modality, int, int]:
    if not gallery:
        raise ValueError("empty gallery")
    first = gallery[0]
    modality, h, w = first.modality, first.height, first.width
    for sample in gallery:
        if sample.modality is not modality:
            raise ValueError(
                f"mixed modalities in gallery: {sample.modality.value} vs {modality.value}"
            )
        if sample.pixels.shape != (h, w):
            raise ValueError(
                f"mixed dimensions in gallery: {sample.pixels.shape} vs {(h, w)}"
            )
    return modality, h, w


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def train(
    gallery: Sequence[ImageSample],
    k: int | None = None,
    variance_fraction: float = DEFAULT_VARIANCE_FRACTION,
) -> EigenModel:
    """Train a subspace model from a gallery of same-sized samples.

    Args:
        gallery: nonempty list of samples sharing modality and dimensions.
        k: requested component count; when None, the smallest k whose
           cumulative eigenvalue fraction reaches `variance_fraction` is used.
           The effective k is additionally capped by M-1 and the nonzero rank.

    Raises:
        ValueError: on an empty or inconsistent gallery, k < 1, or a
            degenerate gallery with no variance (including M = 1).
    """
    modality, h, w = _check_gallery(gallery)
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < variance_fraction <= 1.0:
        raise ValueError("variance_fraction must be in (0, 1]")

    data = np.stack([s.flatten() for s in gallery]).astype(np.float64)  # (M, D)
    m, dim = data.shape
    if m == 1:
        raise ValueError("degenerate gallery: a single image has no variance")
    mean = data.mean(axis=0)
    centered = (data - mean).T  # (D, M)

    if m < dim:
        gram = (centered.T @ centered) / m
        evals, gram_vecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        vectors = centered @ gram_vecs[:, order]  # unnormalized, (D, M)
    else:
        cov = (centered @ centered.T) / m
        evals, vectors = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        vectors = vectors[:, order]

    evals = np.clip(evals, 0.0, None)
    if evals.size == 0 or evals[0] <= 0.0:
        raise ValueError("degenerate gallery: zero covariance (all images identical)")

    rank = int(np.count_nonzero(evals > RANK_FLOOR * evals[0]))
    rank = min(rank, m - 1)
    if rank == 0:
        raise ValueError("degenerate gallery: zero covariance (all images identical)")

    if k is None:
        fractions = np.cumsum(evals[:rank]) / evals[:rank].sum()
        effective_k = int(np.searchsorted(fractions, variance_fraction) + 1)
        effective_k = min(effective_k, rank)
    else:
        effective_k = min(k, rank)

    basis = vectors[:, :effective_k]
    basis = basis / np.linalg.norm(basis, axis=0)
    basis = _orient(basis)

    return EigenModel(
        modality=modality,
        image_width=w,
        image_height=h,
        mean=mean,
        basis=basis,
        eigenvalues=evals[:effective_k].copy(),
    )


def project(model: EigenModel, sample: ImageSample) -> FeatureVector:
    """Project a sample onto the model basis: weights = B^T (x - mean)."""
    if sample.modality is not model.modality:
        raise ValueError(
            f"modality mismatch: sample is {sample.modality.value}, "
            f"model is {model.modality.value}"
        )
    if sample.pixels.shape != (model.image_height, model.image_width):
        raise ValueError(
            f"dimension mismatch: sample is {sample.pixels.shape}, model expects "
            f"{(model.image_height, model.image_width)}"
        )
    weights = model.basis.T @ (sample.flatten() - model.mean)
    return FeatureVector(weights, model.modality, sample.subject_id)


def reconstruct(model: EigenModel, fv: FeatureVector) -> ImageSample:
    """Rebuild pixels from weights: mean + B w, reshaped to the model size.

    The result is numerically exact and may leave [0, 1]; callers exporting
    the image should use :meth:`ImageSample.clamped`.
    """
    if len(fv) != model.k:
        raise ValueError(f"length mismatch: feature has {len(fv)} weights, model k={model.k}")
    if fv.modality is not model.modality:
        raise ValueError(
            f"modality mismatch: feature is {fv.modality.value}, model is {model.modality.value}"
        )
    pixels = (model.mean + model.basis @ fv.weights).reshape(
        model.image_height, model.image_width
    )
    return ImageSample(pixels, model.modality, fv.subject_id)


def save_model(model: EigenModel, path: str | Path) -> None:
    """Write the model as versioned JSON with full double precision."""
    with open(path, "w", encoding="ascii") as fh:
        json.dump(model.payload(), fh, indent=2)
        fh.write("\n")


def load_model(path: str | Path) -> EigenModel:
    """Load a model written by :func:`save_model`."""
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format_version {version!r}")
    basis = np.asarray(payload["basis"], dtype=np.float64).T
    model = EigenModel(
        modality=Modality(payload["modality"]),
        image_width=int(payload["width"]),
        image_height=int(payload["height"]),
        mean=np.asarray(payload["mean"], dtype=np.float64),
        basis=basis,
        eigenvalues=np.asarray(payload["eigenvalues"], dtype=np.float64),
    )
    if model.k != int(payload["k"]):
        raise ValueError(f"{path}: basis column count disagrees with stored k")
    if model.mean.shape[0] != model.image_width * model.image_height:
        raise ValueError(f"{path}: mean length disagrees with stored dimensions")
    return model
