"""Correlation-based quality gate applied to samples before matching.

The score is the plain normalized cross-correlation of the sample against a
reference image (the training-set mean), without mean subtraction:

    ncc(f, g) = sum(f * g) / (sqrt(sum(f^2)) * sqrt(sum(g^2)))

For nonnegative images this lies in [0, 1] by Cauchy-Schwarz. A capture
passes the gate when its score reaches the policy threshold; the default
threshold of 0.0 leaves the gate effectively disabled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import ImageSample


def ncc(f: ImageSample, g: ImageSample) -> float:
    """Normalized cross-correlation of two same-sized images.

    Raises:
        ValueError: on a dimension mismatch or an all-zero image, for which
            the correlation is undefined.
    """
    if f.pixels.shape != g.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {f.pixels.shape} vs {g.pixels.shape}"
        )
    ff = float(np.sum(f.pixels * f.pixels))
    gg = float(np.sum(g.pixels * g.pixels))
    if ff == 0.0 or gg == 0.0:
        raise ValueError("undefined correlation: all-zero image")
    return float(np.sum(f.pixels * g.pixels)) / (np.sqrt(ff) * np.sqrt(gg))


@dataclass(frozen=True)
class QualityPolicy:
    """Gate threshold plus the reference image scores are taken against."""

    reference: ImageSample
    min_ncc: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.min_ncc <= 1.0:
            raise ValueError(f"min_ncc must be in [0, 1], got {self.min_ncc}")


@dataclass(frozen=True)
class QualityScore:
    ncc: float
    passed: bool


def assess(policy: QualityPolicy, sample: ImageSample) -> QualityScore:
    """Score a sample against the policy reference and apply the gate."""
    value = ncc(sample, policy.reference)
    return QualityScore(ncc=value, passed=value >= policy.min_ncc)
