"""Rendering of threshold sweep curves to image files.

The evaluation pipeline emits one CSV per modality; this module draws the
matching picture: FAR, FRR and recognition rate against the decision
threshold, with the selected operating point marked. Files only, no
interactive backend.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvaluationReport


def render_sweep(
    reports: Sequence[EvaluationReport],
    path: str | Path,
    title: str,
    best_threshold: float | None = None,
) -> None:
    """Plot a threshold sweep to path (format from the suffix)."""
    if not reports:
        raise ValueError("empty sweep")
    thresholds = [r.threshold for r in reports]
    if any(t is None for t in thresholds):
        raise ValueError("sweep reports must carry their threshold")

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(thresholds, [r.far for r in reports], marker=".", label="FAR")
    ax.plot(thresholds, [r.frr for r in reports], marker=".", label="FRR")
    ax.plot(
        thresholds,
        [r.recognition_rate for r in reports],
        marker=".",
        label="recognition rate",
    )
    if best_threshold is not None:
        ax.axvline(
            best_threshold,
            color="gray",
            linestyle="--",
            linewidth=1.0,
            label=f"selected threshold = {best_threshold:.6g}",
        )
    ax.set_xlabel("decision threshold")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
